"""Secret-to-latent-offset encoders.

The secret-only network maps an L-bit payload to an offset with the shape of
the autoencoder latent: Linear -> SiLU -> reshape to half resolution ->
nearest x2 upsample -> final conv. The final conv starts with zero weight and
bias, so an untrained encoder leaves the latent (and therefore the decoded
image) untouched. A joint variant that additionally sees a blurred,
downsampled cover is provided for ablations; it ends in the same zero-init
conv.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .payload import _as_bits

VARIANTS = ("secret_only", "joint_conditioned")


@dataclass
class SecretEncoderConfig:
    secret_length: int
    latent_shape: tuple[int, int, int]  # (C, H, W)
    final_kernel: int = 3
    variant: str = "secret_only"

    def __post_init__(self):
        if self.secret_length < 1:
            raise ValueError("secret_length must be >= 1")
        c, h, w = self.latent_shape
        if h % 2 or w % 2:
            raise ValueError(f"latent spatial dims must be even, got {(h, w)}")
        if self.final_kernel not in (1, 3):
            raise ValueError("final_kernel must be 1 or 3")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")

    @property
    def intermediate_shape(self) -> tuple[int, int, int]:
        c, h, w = self.latent_shape
        return (c, h // 2, w // 2)


def bits_to_tensor(bits, dtype=torch.float32) -> torch.Tensor:
    """{0,1} payload rows -> float tensor (B, L); accepts a single payload too."""
    arr = np.asarray(bits)
    if arr.ndim == 1:
        arr = _as_bits(arr)[None]
    else:
        arr = np.stack([_as_bits(row) for row in arr])
    return torch.from_numpy(arr).to(dtype)


class SecretEncoder(nn.Module):
    def __init__(self, cfg: SecretEncoderConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        c, h2, w2 = cfg.intermediate_shape
        torch.manual_seed(seed)
        self.fc = nn.Linear(cfg.secret_length, c * h2 * w2)
        self.final = nn.Conv2d(
            c, c, cfg.final_kernel, padding=cfg.final_kernel // 2
        )
        nn.init.zeros_(self.final.weight)
        nn.init.zeros_(self.final.bias)

    def forward(self, bits: torch.Tensor) -> torch.Tensor:
        if bits.dim() != 2 or bits.shape[1] != self.cfg.secret_length:
            raise ValueError(
                f"expected (B, {self.cfg.secret_length}) bits, got {tuple(bits.shape)}"
            )
        c, h2, w2 = self.cfg.intermediate_shape
        h = F.silu(self.fc(bits)).view(-1, c, h2, w2)
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        return self.final(h)


class JointSecretEncoder(nn.Module):
    """Ablation variant conditioned on (cover, secret)."""

    def __init__(self, cfg: SecretEncoderConfig, seed: int = 0, hidden: int = 32):
        super().__init__()
        if cfg.variant != "joint_conditioned":
            raise ValueError("config variant must be 'joint_conditioned'")
        self.cfg = cfg
        c, h2, w2 = cfg.intermediate_shape
        torch.manual_seed(seed)
        self.fc = nn.Linear(cfg.secret_length, c * h2 * w2)
        self.mix1 = nn.Conv2d(c + 3, hidden, 3, padding=1)
        self.mix2 = nn.Conv2d(hidden, hidden, 3, padding=1)
        self.final = nn.Conv2d(hidden, c, 3, padding=1)
        nn.init.zeros_(self.final.weight)
        nn.init.zeros_(self.final.bias)

    def _cover_features(self, cover: torch.Tensor) -> torch.Tensor:
        # keep only low frequencies of the cover: blur then shrink to latent size
        _, h, w = self.cfg.latent_shape
        radius = 5
        xs = torch.arange(-radius, radius + 1, dtype=cover.dtype)
        k = torch.exp(-(xs**2) / (2 * 2.0**2))
        k = (k / k.sum()).to(cover.dtype)
        c = cover.shape[1]
        pad = (radius,) * 4
        blurred = F.conv2d(
            F.pad(cover, pad, mode="reflect"),
            k.view(1, 1, 1, -1).expand(c, 1, 1, -1),
            groups=c,
        )
        blurred = F.conv2d(blurred, k.view(1, 1, -1, 1).expand(c, 1, -1, 1), groups=c)
        return F.interpolate(blurred, size=(h, w), mode="bilinear", align_corners=False)

    def forward(self, cover: torch.Tensor, bits: torch.Tensor) -> torch.Tensor:
        if bits.dim() != 2 or bits.shape[1] != self.cfg.secret_length:
            raise ValueError(
                f"expected (B, {self.cfg.secret_length}) bits, got {tuple(bits.shape)}"
            )
        c, h2, w2 = self.cfg.intermediate_shape
        s = F.silu(self.fc(bits)).view(-1, c, h2, w2)
        s = F.interpolate(s, scale_factor=2, mode="nearest")
        x = self._cover_features(cover)
        h = torch.cat([s, x], dim=1)
        h = F.silu(self.mix1(h))
        h = F.silu(self.mix2(h))
        return self.final(h)


def build_secret_encoder(cfg: SecretEncoderConfig, seed: int = 0) -> nn.Module:
    if cfg.variant == "joint_conditioned":
        return JointSecretEncoder(cfg, seed)
    return SecretEncoder(cfg, seed)


def encode_secret(encoder: SecretEncoder, secret) -> torch.Tensor:
    """Offset for one payload; bits are presented to the network as 0/1 reals."""
    bits = bits_to_tensor(secret, dtype=next(encoder.parameters()).dtype)
    if bits.shape[1] != encoder.cfg.secret_length:
        raise ValueError(
            f"payload length {bits.shape[1]} != configured {encoder.cfg.secret_length}"
        )
    return encoder(bits)
