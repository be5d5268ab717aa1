"""Secret decoder: a compact residual CNN that reads bits out of a stego image."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .images import MIN_SIZE, check_canonical, resize
from .payload import _as_bits


@dataclass
class SecretDecoderConfig:
    secret_length: int
    resolution: int = 64
    base_channels: int = 24

    def __post_init__(self):
        if self.secret_length < 1:
            raise ValueError("secret_length must be >= 1")


class _Block(nn.Module):
    def __init__(self, cin: int, cout: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride, 1)
        self.conv2 = nn.Conv2d(cout, cout, 3, 1, 1)
        self.skip = (
            nn.Identity()
            if cin == cout and stride == 1
            else nn.Conv2d(cin, cout, 1, stride)
        )

    def forward(self, x):
        h = F.silu(self.conv1(x))
        h = self.conv2(h)
        return F.silu(h + self.skip(x))


class SecretDecoder(nn.Module):
    """Eight residual blocks, global average pooling, linear head to L logits."""

    def __init__(self, cfg: SecretDecoderConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        b = cfg.base_channels
        torch.manual_seed(seed)
        self.stem = nn.Conv2d(3, b, 3, padding=1)
        self.blocks = nn.Sequential(
            _Block(b, b),
            _Block(b, 2 * b, stride=2),
            _Block(2 * b, 2 * b),
            _Block(2 * b, 4 * b, stride=2),
            _Block(4 * b, 4 * b),
            _Block(4 * b, 8 * b, stride=2),
            _Block(8 * b, 8 * b),
            _Block(8 * b, 8 * b),
        )
        self.head = nn.Linear(8 * b, cfg.secret_length)

    def forward(self, img: torch.Tensor) -> torch.Tensor:
        h = F.silu(self.stem(img))
        h = self.blocks(h).mean(dim=(2, 3))
        return self.head(h)


def decode_secret(decoder: SecretDecoder, img: torch.Tensor) -> tuple[torch.Tensor, np.ndarray]:
    """Logits and hard bits for one image or a batch.

    Inputs are resized to the decoder's training resolution first. Bits are
    1 where the logit is strictly positive, so an exactly-zero logit decodes
    to 0.
    """
    check_canonical(img, "stego")
    if min(img.shape[-2:]) < MIN_SIZE:
        raise ValueError(f"image too small to decode, need >= {MIN_SIZE}px")
    squeeze = img.dim() == 3
    batch = img.unsqueeze(0) if squeeze else img
    if batch.shape[-2:] != (decoder.cfg.resolution, decoder.cfg.resolution):
        batch = resize(batch, decoder.cfg.resolution)
    with torch.no_grad():
        logits = decoder(batch)
    bits = (logits > 0).to(torch.uint8).cpu().numpy()
    if squeeze:
        return logits.squeeze(0), bits[0]
    return logits, bits


def recovery_loss(logits: torch.Tensor, truth) -> torch.Tensor:
    """Mean binary cross-entropy between logits and target bits (stable form)."""
    if isinstance(truth, torch.Tensor):
        target = truth.to(logits.dtype)
    else:
        arr = np.asarray(truth)
        arr = _as_bits(arr)[None] if arr.ndim == 1 else np.stack([_as_bits(r) for r in arr])
        target = torch.from_numpy(arr).to(logits.dtype)
    if logits.dim() == 1:
        logits = logits.unsqueeze(0)
    if logits.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(logits.shape)} vs {tuple(target.shape)}")
    return F.binary_cross_entropy_with_logits(logits, target)
