//! The coordinate MLP: `encode → (affine → activation)* → affine`.
//!
//! `depth` counts affine layers, so the default depth of 5 is four activated
//! hidden layers and one linear output layer.

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::activations::{ActivationKind, ActivationSpec};
use crate::encoding::{Encoder, EncodingSpec};
use crate::error::{Error, Result};
use crate::tensor::Matrix;

/// Identifier of the PRNG behind [`init_mlp`], recorded in run metadata.
pub const PRNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.9), Uniform::new_inclusive (rand 0.9)";

pub const DEFAULT_DEPTH: usize = 5;
pub const DEFAULT_WIDTH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub in_dim: usize,
    pub out_dim: usize,
    pub hidden_width: usize,
    pub depth: usize,
    pub activation: ActivationSpec,
    pub encoding: EncodingSpec,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(in_dim: usize, out_dim: usize, activation: ActivationSpec) -> Self {
        Self {
            in_dim,
            out_dim,
            hidden_width: DEFAULT_WIDTH,
            depth: DEFAULT_DEPTH,
            activation,
            encoding: EncodingSpec::None,
            seed: 0,
        }
    }

    pub fn with_shape(mut self, depth: usize, hidden_width: usize) -> Self {
        self.depth = depth;
        self.hidden_width = hidden_width;
        self
    }

    pub fn with_encoding(mut self, encoding: EncodingSpec) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::InvalidArgument(format!(
                "depth must be at least 2, got {}",
                self.depth
            )));
        }
        if self.in_dim == 0 || self.out_dim == 0 || self.hidden_width == 0 {
            return Err(Error::InvalidArgument(format!(
                "dimensions must be positive: in={} out={} width={}",
                self.in_dim, self.out_dim, self.hidden_width
            )));
        }
        ActivationSpec::new(
            self.activation.kind,
            self.activation.omega0,
            self.activation.clamp_eps,
        )?;
        self.encoding.validate()
    }

    pub fn encoder(&self) -> Result<Encoder> {
        Encoder::new(&self.encoding, self.in_dim)
    }

    /// Widths from the encoded input through every layer to `out_dim`.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = Vec::with_capacity(self.depth + 1);
        dims.push(self.encoding.output_dim(self.in_dim));
        dims.extend(std::iter::repeat_n(self.hidden_width, self.depth - 1));
        dims.push(self.out_dim);
        dims
    }

    /// Half-width of the uniform weight distribution for `layer`.
    ///
    /// ReLU networks draw from `±√(6/fan_in)`. Sine-based networks use the
    /// same distribution for `ω₀·W`, i.e. `±√(6/fan_in)/ω₀`, and `±1/fan_in`
    /// for the first layer.
    pub fn init_bound(&self, layer: usize, fan_in: usize) -> f64 {
        let n = fan_in as f64;
        match self.activation.kind {
            ActivationKind::Relu => (6.0 / n).sqrt(),
            ActivationKind::Semiperiodic(_) if layer == 0 => 1.0 / n,
            ActivationKind::Semiperiodic(_) => (6.0 / n).sqrt() / self.activation.omega0,
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.layer_dims()
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `fan_in × fan_out`.
    pub weight: Matrix,
    pub bias: Vec<f64>,
}

/// Network parameters. Gradients and Adam moments reuse this shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Layer>,
}

impl MlpParams {
    pub fn zeros_like(other: &MlpParams) -> Self {
        Self {
            layers: other
                .layers
                .iter()
                .map(|l| Layer {
                    weight: Matrix::zeros(l.weight.rows(), l.weight.cols()),
                    bias: vec![0.0; l.bias.len()],
                })
                .collect(),
        }
    }

    pub fn zeros_for(config: &MlpConfig) -> Self {
        let dims = config.layer_dims();
        Self {
            layers: dims
                .windows(2)
                .map(|w| Layer {
                    weight: Matrix::zeros(w[0], w[1]),
                    bias: vec![0.0; w[1]],
                })
                .collect(),
        }
    }

    /// Flat views of every weight and bias block, in layer order.
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weight.data(), l.bias.as_slice()])
    }

    pub(crate) fn tensors_mut(&mut self) -> impl Iterator<Item = &mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weight.data_mut(), l.bias.as_mut_slice()])
    }

    pub fn same_shape(&self, other: &MlpParams) -> bool {
        self.layers.len() == other.layers.len()
            && self.layers.iter().zip(&other.layers).all(|(a, b)| {
                a.weight.shape() == b.weight.shape() && a.bias.len() == b.bias.len()
            })
    }

    fn check_against(&self, config: &MlpConfig) -> Result<()> {
        let dims = config.layer_dims();
        if self.layers.len() != dims.len() - 1 {
            return Err(Error::InvalidShape(format!(
                "params have {} layers, config expects {}",
                self.layers.len(),
                dims.len() - 1
            )));
        }
        for (l, w) in self.layers.iter().zip(dims.windows(2)) {
            if l.weight.shape() != (w[0], w[1]) || l.bias.len() != w[1] {
                return Err(Error::Shape {
                    op: "params vs config",
                    left: l.weight.shape(),
                    right: (w[0], w[1]),
                });
            }
        }
        Ok(())
    }
}

pub fn init_mlp(config: &MlpConfig) -> Result<MlpParams> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let dims = config.layer_dims();
    let mut layers = Vec::with_capacity(config.depth);
    for (i, w) in dims.windows(2).enumerate() {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = config.init_bound(i, fan_in);
        let dist = Uniform::new_inclusive(-bound, bound)
            .map_err(|e| Error::InvalidArgument(format!("init bound {bound}: {e}")))?;
        let data: Vec<f64> = (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect();
        layers.push(Layer {
            weight: Matrix::new(fan_in, fan_out, data)?,
            bias: vec![0.0; fan_out],
        });
    }
    Ok(MlpParams { layers })
}

/// Per-layer intermediates of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Encoded network input.
    pub input: Matrix,
    /// `z_ℓ = a_{ℓ-1}·W_ℓ + b_ℓ` for every layer, output layer included.
    pub pre: Vec<Matrix>,
    /// Activated hidden outputs `a_ℓ`; the output layer is not stored here.
    pub post: Vec<Matrix>,
    /// `f'(z_ℓ)` for each hidden layer, filled during the forward pass.
    derivative: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.pre.last().expect("cache has at least one layer")
    }
}

fn activate(spec: &ActivationSpec, z: &Matrix, with_derivative: bool) -> (Matrix, Option<Matrix>) {
    let n = z.data().len();
    let mut a = Vec::with_capacity(n);
    let mut d = with_derivative.then(|| Vec::with_capacity(n));
    spec.apply_slice(z.data(), &mut a, d.as_mut());
    (
        Matrix::from_raw(z.rows(), z.cols(), a),
        d.map(|d| Matrix::from_raw(z.rows(), z.cols(), d)),
    )
}

fn check_coords(config: &MlpConfig, coords: &Matrix) -> Result<()> {
    if coords.cols() != config.in_dim {
        return Err(Error::Shape {
            op: "forward",
            left: coords.shape(),
            right: (coords.rows(), config.in_dim),
        });
    }
    Ok(())
}

fn run_forward(
    params: &MlpParams,
    config: &MlpConfig,
    coords: &Matrix,
    keep: bool,
) -> Result<(Matrix, Option<ForwardCache>)> {
    check_coords(config, coords)?;
    params.check_against(config)?;
    let input = config.encoder()?.encode(coords)?;
    let last = params.layers.len() - 1;
    let mut pre = Vec::new();
    let mut post = Vec::new();
    let mut derivative = Vec::new();
    let mut current: Option<Matrix> = None;
    for (i, layer) in params.layers.iter().enumerate() {
        let layer_input = match (&current, keep) {
            (Some(a), false) => a,
            (None, _) if i == 0 => &input,
            _ => post.last().expect("hidden activation kept"),
        };
        let mut z = layer_input.matmul(&layer.weight)?;
        z.add_row_broadcast_in_place(&layer.bias);
        if i == last {
            crate::tensor::check_finite(z.data(), "network output")?;
            if keep {
                pre.push(z.clone());
            }
            current = Some(z);
            break;
        }
        let (a, d) = activate(&config.activation, &z, keep);
        crate::tensor::check_finite(a.data(), "hidden activation")?;
        if keep {
            pre.push(z);
            post.push(a);
            derivative.push(d.expect("derivative requested"));
        } else {
            current = Some(a);
        }
    }
    let current = current.expect("network has an output layer");
    let cache = keep.then(|| ForwardCache {
        input,
        pre,
        post,
        derivative,
    });
    Ok((current, cache))
}

pub fn forward(
    params: &MlpParams,
    config: &MlpConfig,
    coords: &Matrix,
) -> Result<(Matrix, ForwardCache)> {
    let (out, cache) = run_forward(params, config, coords, true)?;
    Ok((out, cache.expect("cache kept")))
}

/// Forward pass without retaining intermediates.
pub fn predict(params: &MlpParams, config: &MlpConfig, coords: &Matrix) -> Result<Matrix> {
    Ok(run_forward(params, config, coords, false)?.0)
}

/// Reverse pass. Returns parameter gradients and, when asked, the gradient
/// with respect to the encoded input.
fn backprop(
    params: &MlpParams,
    cache: &ForwardCache,
    d_out: &Matrix,
    param_grads: bool,
    input_grad: bool,
) -> Result<(Option<MlpParams>, Option<Matrix>)> {
    let out = cache.output();
    if d_out.shape() != out.shape() {
        return Err(Error::Shape {
            op: "backward",
            left: d_out.shape(),
            right: out.shape(),
        });
    }
    if cache.pre.len() != params.layers.len() {
        return Err(Error::InvalidShape(
            "forward cache does not match parameters".into(),
        ));
    }
    let mut grads = param_grads.then(|| MlpParams::zeros_like(params));
    let mut dz = d_out.clone();
    for i in (0..params.layers.len()).rev() {
        let layer_input = if i == 0 { &cache.input } else { &cache.post[i - 1] };
        if let Some(g) = grads.as_mut() {
            g.layers[i].weight = layer_input.matmul_transpose_left(&dz)?;
            g.layers[i].bias = dz.column_sums();
        }
        if i == 0 && !input_grad {
            break;
        }
        let mut da = dz.matmul_transpose_right(&params.layers[i].weight)?;
        if i == 0 {
            return Ok((grads, Some(da)));
        }
        for (g, d) in da.data_mut().iter_mut().zip(cache.derivative[i - 1].data()) {
            *g *= d;
        }
        dz = da;
    }
    Ok((grads, None))
}

pub fn backward(
    params: &MlpParams,
    config: &MlpConfig,
    cache: &ForwardCache,
    d_out: &Matrix,
) -> Result<MlpParams> {
    params.check_against(config)?;
    let (grads, _) = backprop(params, cache, d_out, true, false)?;
    Ok(grads.expect("parameter gradients requested"))
}

/// `∂output/∂coordinate` per sample, `batch × in_dim`. Single-output networks only.
pub fn input_gradient(params: &MlpParams, config: &MlpConfig, coords: &Matrix) -> Result<Matrix> {
    if config.out_dim != 1 {
        return Err(Error::Unsupported(format!(
            "input gradients need a single output channel, network has {}",
            config.out_dim
        )));
    }
    let (out, cache) = forward(params, config, coords)?;
    let ones = Matrix::from_raw(out.rows(), 1, vec![1.0; out.rows()]);
    let (_, d_input) = backprop(params, &cache, &ones, false, true)?;
    let d_input = d_input.expect("input gradient requested");
    config.encoder()?.backprop(coords, &d_input)
}
