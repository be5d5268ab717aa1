"""Desk-scale convolutional autoencoder with a frozen {encoder, generator} pair.

Stands in for a large pretrained autoencoder: downsample factor 4, a small
continuous 3-channel latent, no quantizer. Smooth activations throughout keep
decode differentiable for the steganography training that rides on top.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict, field
from pathlib import Path

import torch
import torch.nn as nn
import torch.nn.functional as F

from .images import ImageFolder, check_canonical
from .metrics import QualityReport, psnr, ssim
from .perceptual import PerceptualDistance


@dataclass
class AutoencoderConfig:
    resolution: int = 64
    base_channels: int = 40
    latent_channels: int = 3
    res_blocks: int = 2
    downsample_factor: int = 4
    steps: int = 6000
    batch_size: int = 16
    lr: float = 1e-3
    perceptual_weight: float = 0.2
    latent_noise_aug: float = 0.05
    val_interval: int = 500
    calibration_count: int = 1000
    seed: int = 0


class ResBlock(nn.Module):
    def __init__(self, ch: int):
        super().__init__()
        self.conv1 = nn.Conv2d(ch, ch, 3, padding=1)
        self.conv2 = nn.Conv2d(ch, ch, 3, padding=1)

    def forward(self, x):
        h = F.silu(self.conv1(x))
        h = self.conv2(h)
        return F.silu(x + h)


class Encoder(nn.Module):
    def __init__(self, cfg: AutoencoderConfig):
        super().__init__()
        b = cfg.base_channels
        self.stem = nn.Conv2d(3, b, 3, padding=1)
        self.down1 = nn.Conv2d(b, 2 * b, 3, stride=2, padding=1)
        self.down2 = nn.Conv2d(2 * b, 4 * b, 3, stride=2, padding=1)
        self.blocks = nn.Sequential(*[ResBlock(4 * b) for _ in range(cfg.res_blocks)])
        self.head = nn.Conv2d(4 * b, cfg.latent_channels, 3, padding=1)

    def forward(self, x):
        h = F.silu(self.stem(x))
        h = F.silu(self.down1(h))
        h = F.silu(self.down2(h))
        return self.head(self.blocks(h))


class Decoder(nn.Module):
    def __init__(self, cfg: AutoencoderConfig):
        super().__init__()
        b = cfg.base_channels
        self.stem = nn.Conv2d(cfg.latent_channels, 4 * b, 3, padding=1)
        self.blocks = nn.Sequential(*[ResBlock(4 * b) for _ in range(cfg.res_blocks)])
        self.up1 = nn.Conv2d(4 * b, 2 * b, 3, padding=1)
        self.mid = nn.Conv2d(2 * b, 2 * b, 3, padding=1)
        self.up2 = nn.Conv2d(2 * b, b, 3, padding=1)
        self.head = nn.Conv2d(b, 3, 3, padding=1)

    def forward(self, z):
        h = F.silu(self.stem(z))
        h = self.blocks(h)
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = F.silu(self.up1(h))
        h = F.silu(self.mid(h))
        h = F.interpolate(h, scale_factor=2, mode="nearest")
        h = F.silu(self.up2(h))
        return torch.tanh(self.head(h))


def _params_digest(*modules: nn.Module) -> str:
    h = hashlib.sha256()
    for mod in modules:
        for name, p in mod.state_dict().items():
            h.update(name.encode())
            h.update(p.detach().cpu().numpy().tobytes())
    return h.hexdigest()


class FrozenAutoencoder:
    """Immutable {E, G} handle: frozen weights, latent statistics, digest."""

    def __init__(self, encoder, decoder, config, latent_std, data_digest="", val_psnr=0.0):
        self.encoder = encoder.eval()
        self.decoder = decoder.eval()
        self.config = config
        self.latent_std = latent_std.detach().clone()
        self.data_digest = data_digest
        self.val_psnr = val_psnr
        for p in self.encoder.parameters():
            p.requires_grad_(False)
        for p in self.decoder.parameters():
            p.requires_grad_(False)
        if not torch.isfinite(self.latent_std).all() or (self.latent_std <= 0).any():
            raise ValueError("latent_std must be finite and positive per channel")

    @property
    def f(self) -> int:
        return self.config.downsample_factor

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        r = self.config.resolution // self.f
        return (self.config.latent_channels, r, r)

    def digest(self) -> str:
        return _params_digest(self.encoder, self.decoder)

    def encode(self, img: torch.Tensor) -> torch.Tensor:
        check_canonical(img, "cover")
        if img.shape[-1] % self.f or img.shape[-2] % self.f:
            raise ValueError(f"image dims must be divisible by f={self.f}")
        squeeze = img.dim() == 3
        z = self.encoder(img.unsqueeze(0) if squeeze else img)
        return z.squeeze(0) if squeeze else z

    def decode(self, z: torch.Tensor) -> torch.Tensor:
        if z.dim() not in (3, 4) or z.shape[-3] != self.config.latent_channels:
            raise ValueError(
                f"latent must have {self.config.latent_channels} channels, got {tuple(z.shape)}"
            )
        squeeze = z.dim() == 3
        x = self.decoder(z.unsqueeze(0) if squeeze else z)
        return x.squeeze(0) if squeeze else x

    def reconstruct(self, img: torch.Tensor) -> torch.Tensor:
        return self.decode(self.encode(img))

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "kind": "autoencoder",
                "config": asdict(self.config),
                "encoder": self.encoder.state_dict(),
                "decoder": self.decoder.state_dict(),
                "latent_std": self.latent_std,
                "data_digest": self.data_digest,
                "val_psnr": self.val_psnr,
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path) -> "FrozenAutoencoder":
        blob = torch.load(path, map_location="cpu", weights_only=True)
        if blob.get("kind") != "autoencoder":
            raise ValueError(f"{path} is not an autoencoder archive")
        cfg = AutoencoderConfig(**blob["config"])
        enc, dec = Encoder(cfg), Decoder(cfg)
        enc.load_state_dict(blob["encoder"])
        dec.load_state_dict(blob["decoder"])
        return cls(enc, dec, cfg, blob["latent_std"], blob["data_digest"], blob["val_psnr"])


def latent_perturb_probe(
    ae: FrozenAutoencoder,
    img: torch.Tensor,
    k: float,
    seed: int,
    perceptual: PerceptualDistance | None = None,
) -> tuple[torch.Tensor, QualityReport]:
    """Decode from a noised latent and report quality against the plain reconstruction.

    The offset is k * U * sigma with U uniform in [-1, 1] per latent element,
    fixed by `seed`, and sigma the stored per-channel latent deviation.
    """
    if k < 0:
        raise ValueError("noise strength k must be >= 0")
    with torch.no_grad():
        z = ae.encode(img)
        gen = torch.Generator().manual_seed(seed)
        u = torch.rand(z.shape, generator=gen) * 2.0 - 1.0
        sigma = ae.latent_std.view(-1, 1, 1)
        if z.dim() == 4:
            sigma = sigma.unsqueeze(0)
        perturbed = ae.decode(z + k * u * sigma)
        reference = ae.decode(z)
    perc = float(perceptual(perturbed, reference).mean().item()) if perceptual else float("nan")
    return perturbed, QualityReport(
        psnr=psnr(perturbed, reference), ssim=ssim(perturbed, reference), perceptual=perc
    )


def compute_latent_std(ae_encoder, images: torch.Tensor, batch_size: int = 64) -> torch.Tensor:
    """Per-channel latent standard deviation over a calibration stack."""
    feats = []
    with torch.no_grad():
        for i in range(0, len(images), batch_size):
            z = ae_encoder(images[i : i + batch_size])
            feats.append(z.permute(1, 0, 2, 3).reshape(z.shape[1], -1))
    return torch.cat(feats, dim=1).std(dim=1)


def folder_digest(folder: str | Path) -> str:
    entries = [(p.name, p.stat().st_size) for p in ImageFolder(folder, 64).paths]
    return hashlib.sha256(json.dumps(entries).encode()).hexdigest()[:16]


def train_reference_autoencoder(
    train_folder: str | Path,
    val_folder: str | Path,
    config: AutoencoderConfig | None = None,
    perceptual: PerceptualDistance | None = None,
    log_every: int = 500,
) -> tuple[FrozenAutoencoder, dict]:
    """Train, calibrate, and freeze the reference autoencoder."""
    cfg = config or AutoencoderConfig()
    train_set = ImageFolder(train_folder, cfg.resolution)
    if len(train_set) < 1000:
        raise ValueError(f"need >= 1000 training images, found {len(train_set)}")
    train_set.preload()
    val_set = ImageFolder(val_folder, cfg.resolution).preload()

    torch.manual_seed(cfg.seed)
    enc, dec = Encoder(cfg), Decoder(cfg)
    params = list(enc.parameters()) + list(dec.parameters())
    opt = torch.optim.AdamW(params, lr=cfg.lr)
    lr_decay = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=cfg.steps)
    rng = torch.Generator().manual_seed(cfg.seed + 1)

    n = len(train_set)
    history = []
    for step in range(cfg.steps):
        idx = torch.randint(0, n, (cfg.batch_size,), generator=rng).tolist()
        x = train_set.batch(idx)
        z = enc(x)
        if cfg.latent_noise_aug > 0 and torch.rand(1, generator=rng).item() < 0.5:
            # mild latent jitter: decoder learns local insensitivity to small offsets
            k = cfg.latent_noise_aug * torch.rand(1, generator=rng).item()
            sigma = z.detach().std(dim=(0, 2, 3), keepdim=True).clamp_min(1e-4)
            u = torch.rand(z.shape, generator=rng) * 2.0 - 1.0
            z = z + k * u * sigma
        recon = dec(z)
        loss = F.mse_loss(recon, x)
        if perceptual is not None and cfg.perceptual_weight > 0:
            loss = loss + cfg.perceptual_weight * perceptual(recon, x).mean()
        opt.zero_grad()
        loss.backward()
        torch.nn.utils.clip_grad_norm_(params, 1.0)
        opt.step()
        lr_decay.step()
        if log_every and step % log_every == 0:
            print(f"[ae] step {step} loss {loss.item():.5f}", flush=True)
        if cfg.val_interval and (step + 1) % cfg.val_interval == 0:
            history.append(_validate(enc, dec, val_set))

    val_psnr = _validate(enc, dec, val_set)
    calib = train_set.batch(range(min(cfg.calibration_count, n)))
    enc.eval()
    dec.eval()
    latent_std = compute_latent_std(enc, calib)
    ae = FrozenAutoencoder(
        enc, dec, cfg, latent_std, data_digest=folder_digest(train_folder), val_psnr=val_psnr
    )
    return ae, {"val_psnr": val_psnr, "val_history": history}


def _validate(enc, dec, val_set: ImageFolder, batch_size: int = 64) -> float:
    """Mean per-image reconstruction PSNR on the validation set."""
    enc.eval()
    dec.eval()
    scores = []
    with torch.no_grad():
        for i in range(0, len(val_set), batch_size):
            x = val_set.batch(range(i, min(i + batch_size, len(val_set))))
            recon = dec(enc(x))
            scores.extend(psnr(recon[j], x[j]) for j in range(len(x)))
    enc.train()
    dec.train()
    return float(sum(scores) / len(scores))
