"""Procedural desk-scale image corpus.

The harness accepts any image folder; this generator exists so the training
and evaluation pipeline is self-contained. Scenes are layered: a smooth
low-frequency background, a few soft-edged shapes, optional periodic texture,
and mild sensor-style noise. Fully deterministic in (seed, index).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage


def _smooth_background(rng: np.random.Generator, size: int) -> np.ndarray:
    cells = int(rng.integers(2, 8))
    base = rng.random((cells, cells, 3))
    zoom = (size / cells, size / cells, 1)
    return ndimage.zoom(base, zoom, order=1, mode="nearest", grid_mode=True)


def _falloff(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(np.clip(x, -60.0, 60.0)))


def _soft_ellipse(rng, yy, xx) -> np.ndarray:
    cy, cx = rng.random(2)
    ry = rng.uniform(0.06, 0.45)
    rx = rng.uniform(0.06, 0.45)
    theta = rng.uniform(0, np.pi)
    dy, dx = yy - cy, xx - cx
    u = dy * np.cos(theta) + dx * np.sin(theta)
    v = -dy * np.sin(theta) + dx * np.cos(theta)
    d = (u / ry) ** 2 + (v / rx) ** 2
    edge = rng.uniform(0.05, 0.4)
    return _falloff((d - 1.0) / edge)


def _soft_box(rng, yy, xx) -> np.ndarray:
    y0, x0 = rng.random(2) * 0.8
    h = rng.uniform(0.1, 0.5)
    w = rng.uniform(0.1, 0.5)
    edge = rng.uniform(0.01, 0.05)
    my = _falloff(-(yy - y0) / edge) * _falloff((yy - y0 - h) / edge)
    mx = _falloff(-(xx - x0) / edge) * _falloff((xx - x0 - w) / edge)
    return my * mx


def _stripes(rng, yy, xx) -> np.ndarray:
    freq = rng.uniform(2, 14)
    theta = rng.uniform(0, np.pi)
    phase = rng.uniform(0, 2 * np.pi)
    wave = np.sin(2 * np.pi * freq * (yy * np.cos(theta) + xx * np.sin(theta)) + phase)
    return 0.5 + 0.5 * wave


def render_scene(seed: int, index: int, size: int = 64) -> np.ndarray:
    """One synthetic RGB scene as float64 HWC in [0, 1]."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64) / size
    img = _smooth_background(rng, size)
    for _ in range(int(rng.integers(2, 7))):
        pick = rng.random()
        if pick < 0.45:
            mask = _soft_ellipse(rng, yy, xx)
        elif pick < 0.85:
            mask = _soft_box(rng, yy, xx)
        else:
            mask = _stripes(rng, yy, xx) * _soft_ellipse(rng, yy, xx)
        color = rng.random(3)
        alpha = rng.uniform(0.5, 1.0) * mask[..., None]
        img = img * (1 - alpha) + color * alpha
    if rng.random() < 0.4:
        amp = rng.uniform(0.02, 0.08)
        img = img + amp * (_stripes(rng, yy, xx)[..., None] - 0.5)
    img = img + rng.normal(0.0, rng.uniform(0.003, 0.015), img.shape)
    return np.clip(img, 0.0, 1.0)


def generate_images(
    out_dir: str | Path, count: int, size: int = 64, seed: int = 0, start_index: int = 0
) -> list[Path]:
    """Write `count` PNG scenes to `out_dir`; returns the created paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for i in range(start_index, start_index + count):
        arr = (render_scene(seed, i, size) * 255.0).round().astype(np.uint8)
        p = out / f"scene_{i:06d}.png"
        Image.fromarray(arr).save(p)
        paths.append(p)
    return paths
