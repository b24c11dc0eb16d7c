"""Regenerates the bundled fixtures and SHA256SUMS.

Run from this directory: python3 generate.py
Needs numpy and scikit-image (for the two natural images, both public domain).
"""
import hashlib
import os
import struct

import numpy as np
from skimage import color, data, transform

HERE = os.path.dirname(os.path.abspath(__file__))


def write_pgm(name, img):
    img = np.clip(np.rint(img), 0, 255).astype(np.uint8)
    h, w = img.shape
    path = os.path.join(HERE, name)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    with open(path, "wb") as f:
        f.write(b"P5\n%d %d\n255\n" % (w, h))
        f.write(img.tobytes())


def write_wav(name, samples, rate):
    pcm = np.clip(np.rint(samples * 32768), -32768, 32767).astype("<i2")
    body = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(body)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, rate, rate * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(body))
    with open(os.path.join(HERE, name), "wb") as f:
        f.write(header + body)


def gray_natural(img, side):
    if img.ndim == 3:
        img = color.rgb2gray(img[..., :3]) * 255
    return transform.resize(img.astype(float), (side, side), anti_aliasing=True, preserve_range=True)


def main():
    n = 64
    r, c = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    write_pgm("ramp64.pgm", c * 255 / (n - 1))
    write_pgm("checker64.pgm", ((r // 8 + c // 8) % 2) * 255)
    write_pgm("cosine64.pgm", 127.5 + 100 * np.cos(2 * np.pi * (3 * c + 2 * r) / n))
    write_pgm("edge64.pgm", np.where(c < n // 2, 32, 224))

    for name, img in [("natural", data.camera()), ("natural_b", data.astronaut())]:
        for side in (64, 128):
            write_pgm(f"{name}{side}.pgm", gray_natural(img, side))

    rate, count = 8000, 2000
    t = np.arange(count) / rate
    write_wav("tone440.wav", 0.5 * np.sin(2 * np.pi * 440 * t), rate)
    dur = count / rate
    write_wav("chirp.wav", 0.5 * np.sin(2 * np.pi * (200 * t + 1800 * t * t / (2 * dur))), rate)
    pluck = sum(np.sin(2 * np.pi * 330 * k * t) / k for k in (1, 2, 3)) * np.exp(-t / 0.08)
    write_wav("pluck.wav", 0.4 * pluck, rate)

    frames, side, sq = 8, 16, 5
    for f in range(frames):
        img = np.full((side, side), 40.0)
        top, left = 2 + f, 1 + f
        img[top:top + sq, left:left + sq] = 215.0
        write_pgm(f"square_video/frame_{f:04d}.pgm", img)

    lines = []
    for root, _, files in sorted(os.walk(HERE)):
        for fname in sorted(files):
            if fname.endswith((".pgm", ".wav")):
                path = os.path.join(root, fname)
                digest = hashlib.sha256(open(path, "rb").read()).hexdigest()
                lines.append(f"{digest}  {os.path.relpath(path, HERE)}")
    with open(os.path.join(HERE, "SHA256SUMS"), "w") as f:
        f.write("\n".join(sorted(lines, key=lambda l: l.split()[1])) + "\n")


if __name__ == "__main__":
    main()
