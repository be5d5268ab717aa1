"""Deep-feature perceptual distance with a desk-scale backend.

The backend is a three-layer convolutional feature extractor trained once per
dataset with a contrastive objective (an image and a degraded reconstruction
of it embed close together, other images far apart) and frozen afterwards.
Distance: channel-unit-normalized activations, squared L2, averaged over
layers and space. Smooth activations keep the whole metric differentiable.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .images import ImageFolder, check_canonical


@dataclass
class PerceptualConfig:
    channels: tuple[int, int, int] = (16, 32, 64)
    embed_dim: int = 64
    steps: int = 800
    batch_size: int = 32
    lr: float = 1e-3
    temperature: float = 0.2


class FeatureNet(nn.Module):
    """Three stride-2 conv layers; exposes all intermediate feature maps."""

    def __init__(self, channels: tuple[int, int, int] = (16, 32, 64)):
        super().__init__()
        c1, c2, c3 = channels
        self.conv1 = nn.Conv2d(3, c1, 3, stride=2, padding=1)
        self.conv2 = nn.Conv2d(c1, c2, 3, stride=2, padding=1)
        self.conv3 = nn.Conv2d(c2, c3, 3, stride=2, padding=1)

    def forward(self, x: torch.Tensor) -> list[torch.Tensor]:
        f1 = F.silu(self.conv1(x))
        f2 = F.silu(self.conv2(f1))
        f3 = F.silu(self.conv3(f2))
        return [f1, f2, f3]


def _unit_normalize(feat: torch.Tensor) -> torch.Tensor:
    norm = torch.sqrt(torch.sum(feat**2, dim=1, keepdim=True) + 1e-8)
    return feat / norm


class PerceptualDistance:
    """Frozen feature backend exposed as a differentiable distance."""

    def __init__(self, net: FeatureNet):
        self.net = net
        self.net.eval()
        for p in self.net.parameters():
            p.requires_grad_(False)

    def to(self, dtype: torch.dtype) -> "PerceptualDistance":
        clone = FeatureNet(tuple(
            m.out_channels for m in (self.net.conv1, self.net.conv2, self.net.conv3)
        ))
        clone.load_state_dict(self.net.state_dict())
        clone.to(dtype)
        return PerceptualDistance(clone)

    def __call__(self, a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
        check_canonical(a, "a")
        if a.shape != b.shape:
            raise ValueError(f"shape mismatch: {tuple(a.shape)} vs {tuple(b.shape)}")
        squeeze = a.dim() == 3
        if squeeze:
            a, b = a.unsqueeze(0), b.unsqueeze(0)
        total = 0.0
        feats_a = self.net(a)
        feats_b = self.net(b)
        for fa, fb in zip(feats_a, feats_b):
            na, nb = _unit_normalize(fa), _unit_normalize(fb)
            total = total + torch.sum((na - nb) ** 2, dim=1).mean(dim=(1, 2))
        out = total / len(feats_a)
        return out.squeeze(0) if squeeze else out

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "kind": "perceptual",
                "channels": tuple(
                    m.out_channels for m in (self.net.conv1, self.net.conv2, self.net.conv3)
                ),
                "state": self.net.state_dict(),
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "PerceptualDistance":
        blob = torch.load(path, map_location="cpu", weights_only=True)
        net = FeatureNet(tuple(blob["channels"]))
        net.load_state_dict(blob["state"])
        return cls(net)


def _degrade(x: torch.Tensor, rng: torch.Generator) -> torch.Tensor:
    """Reconstruction-style view: downsample/upsample plus mild noise."""
    factor = int(torch.randint(2, 5, (1,), generator=rng).item())
    size = max(4, x.shape[-1] // factor)
    y = F.interpolate(x, size=(size, size), mode="bilinear", align_corners=False)
    y = F.interpolate(y, size=x.shape[-2:], mode="bilinear", align_corners=False)
    sigma = 0.05 * torch.rand(1, generator=rng).item()
    y = y + sigma * torch.randn(y.shape, generator=rng)
    return y.clamp(-1, 1)


def _flip_crop(x: torch.Tensor, rng: torch.Generator) -> torch.Tensor:
    if torch.rand(1, generator=rng).item() < 0.5:
        x = torch.flip(x, dims=(-1,))
    size = x.shape[-1]
    crop = int(size * (0.7 + 0.3 * torch.rand(1, generator=rng).item()))
    y0 = int(torch.randint(0, size - crop + 1, (1,), generator=rng).item())
    x0 = int(torch.randint(0, size - crop + 1, (1,), generator=rng).item())
    patch = x[..., y0 : y0 + crop, x0 : x0 + crop]
    return F.interpolate(patch, size=(size, size), mode="bilinear", align_corners=False)


def train_feature_extractor(
    folder: str | Path,
    size: int = 64,
    config: PerceptualConfig | None = None,
    seed: int = 0,
    log_every: int = 200,
) -> PerceptualDistance:
    """Contrastive training of the feature backend; returns it frozen."""
    cfg = config or PerceptualConfig()
    torch.manual_seed(seed)
    rng = torch.Generator().manual_seed(seed + 1)
    dataset = ImageFolder(folder, size).preload()
    net = FeatureNet(cfg.channels)
    proj = nn.Linear(cfg.channels[-1], cfg.embed_dim)
    params = list(net.parameters()) + list(proj.parameters())
    opt = torch.optim.Adam(params, lr=cfg.lr)

    def embed(x: torch.Tensor) -> torch.Tensor:
        h = net(x)[-1].mean(dim=(2, 3))
        return F.normalize(proj(h), dim=1)

    n = len(dataset)
    for step in range(cfg.steps):
        idx = torch.randint(0, n, (cfg.batch_size,), generator=rng).tolist()
        base = dataset.batch(idx)
        za = embed(_flip_crop(base, rng))
        zb = embed(_degrade(_flip_crop(base, rng), rng))
        logits = za @ zb.t() / cfg.temperature
        target = torch.arange(len(idx))
        loss = 0.5 * (F.cross_entropy(logits, target) + F.cross_entropy(logits.t(), target))
        opt.zero_grad()
        loss.backward()
        opt.step()
        if log_every and step % log_every == 0:
            print(f"[perceptual] step {step} loss {loss.item():.4f}")
    return PerceptualDistance(net)
