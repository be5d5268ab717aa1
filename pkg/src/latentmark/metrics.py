"""Image-quality and secret-recovery metrics.

PSNR and SSIM follow the standard definitions on the [0, 1] working scale
(peak = 1). SSIM uses the 11x11 Gaussian window, sigma 1.5, stabilizers
C1 = (0.01 * peak)^2 and C2 = (0.03 * peak)^2, and Gaussian-weighted
(population) statistics; values match reference implementations to ~1e-7.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch

from .images import to_unit
from .payload import _as_bits

PSNR_CAP_DB = 100.0

_SSIM_SIGMA = 1.5
_SSIM_RADIUS = 5  # 11-tap window
_C1 = 0.01**2
_C2 = 0.03**2


@dataclass
class QualityReport:
    psnr: float
    ssim: float
    perceptual: float


def _check_pair(a: torch.Tensor, b: torch.Tensor) -> None:
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")


def psnr(a: torch.Tensor, b: torch.Tensor) -> float:
    """Peak signal-to-noise ratio in dB, capped to [0, 100]."""
    _check_pair(a, b)
    ua = to_unit(a).to(torch.float64)
    ub = to_unit(b).to(torch.float64)
    mse = torch.mean((ua - ub) ** 2).item()
    if mse == 0.0:
        return PSNR_CAP_DB
    value = 10.0 * math.log10(1.0 / mse)
    return float(min(max(value, 0.0), PSNR_CAP_DB))


def _gaussian_kernel(dtype: torch.dtype) -> torch.Tensor:
    xs = torch.arange(-_SSIM_RADIUS, _SSIM_RADIUS + 1, dtype=dtype)
    k = torch.exp(-(xs**2) / (2.0 * _SSIM_SIGMA**2))
    return k / k.sum()


def _windowed_mean(x: torch.Tensor, k1d: torch.Tensor) -> torch.Tensor:
    # separable valid-mode Gaussian filtering, channels kept independent
    c = x.shape[1]
    kh = k1d.view(1, 1, 1, -1).expand(c, 1, 1, -1)
    kv = k1d.view(1, 1, -1, 1).expand(c, 1, -1, 1)
    x = torch.nn.functional.conv2d(x, kh, groups=c)
    return torch.nn.functional.conv2d(x, kv, groups=c)


def ssim(a: torch.Tensor, b: torch.Tensor) -> float:
    """Mean SSIM over channels and space."""
    _check_pair(a, b)
    if min(a.shape[-2], a.shape[-1]) < 2 * _SSIM_RADIUS + 1:
        raise ValueError("image smaller than the 11x11 SSIM window")
    x = to_unit(a).to(torch.float64)
    y = to_unit(b).to(torch.float64)
    if x.dim() == 3:
        x, y = x.unsqueeze(0), y.unsqueeze(0)
    k = _gaussian_kernel(torch.float64)
    mu_x = _windowed_mean(x, k)
    mu_y = _windowed_mean(y, k)
    var_x = _windowed_mean(x * x, k) - mu_x**2
    var_y = _windowed_mean(y * y, k) - mu_y**2
    cov = _windowed_mean(x * y, k) - mu_x * mu_y
    num = (2 * mu_x * mu_y + _C1) * (2 * cov + _C2)
    den = (mu_x**2 + mu_y**2 + _C1) * (var_x + var_y + _C2)
    return float((num / den).mean().item())


def bit_accuracy(pred, truth) -> float:
    """Fraction of matching bits."""
    p, t = _as_bits(pred), _as_bits(truth)
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    return float(np.mean(p == t))


def word_accuracy(pred, truth) -> int:
    """1 iff strictly fewer than 20% of bits differ."""
    p, t = _as_bits(pred), _as_bits(truth)
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} vs {t.size}")
    hamming = int(np.sum(p != t))
    return 1 if 5 * hamming < p.size else 0
