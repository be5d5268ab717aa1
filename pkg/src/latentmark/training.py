"""Loss assembly, the three-phase curriculum, and the stego training loop.

Phases: overfit secret recovery on one fixed batch at a low quality weight,
unlock the full dataset once (smoothed) bit accuracy passes t1, then enable
the noise model and ramp the quality weight linearly to its maximum once it
passes t2. Only the secret encoder and decoder train; the autoencoder stays
frozen (verified by parameter digest).

Per-step randomness (batch indices, secrets, corruption draws) is a pure
function of (seed, step), so a resumed run continues bit-identically.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import torch

from .autoencoder import FrozenAutoencoder
from .color import rgb_to_yuv
from .corruption import apply_chain, sample_perturbation
from .ecc import EccConfig
from .images import ImageFolder, to_unit
from .metrics import psnr
from .perceptual import PerceptualDistance
from .secret_decoder import SecretDecoder, SecretDecoderConfig, recovery_loss
from .secret_encoder import SecretEncoderConfig, build_secret_encoder

PHASES = ("warmup_fixed_batch", "full_data", "noise_and_ramp")


@dataclass
class TrainSchedule:
    alpha: float = 1.5
    beta_start: float = 0.1
    beta_max: float = 10.0
    t1: float = 0.90
    t2: float = 0.98
    ramp_steps: int = 10000
    lr: float = 8e-5
    weight_decay: float = 0.01
    ema_decay: float = 0.99

    def __post_init__(self):
        if not 0.0 < self.t1 < self.t2 < 1.0:
            raise ValueError("need 0 < t1 < t2 < 1")
        if self.beta_start >= self.beta_max:
            raise ValueError("need beta_start < beta_max")


@dataclass
class TrainState:
    phase: str = "warmup_fixed_batch"
    beta_current: float = 0.1
    step: int = 0
    ema_bit_acc: float = 0.0
    ema_val_loss: float = math.inf
    ramp_start_step: int = -1

    @property
    def phase_index(self) -> int:
        return PHASES.index(self.phase)

    @property
    def noise_active(self) -> bool:
        return self.phase == "noise_and_ramp"


def beta_at(state: TrainState, schedule: TrainSchedule) -> float:
    """Quality weight for the state's step: flat, then a linear ramp to beta_max."""
    if state.ramp_start_step < 0:
        return schedule.beta_start
    progress = (state.step - state.ramp_start_step) / max(1, schedule.ramp_steps)
    progress = min(max(progress, 0.0), 1.0)
    return schedule.beta_start + (schedule.beta_max - schedule.beta_start) * progress


def curriculum_update(
    state: TrainState, schedule: TrainSchedule, measured_bit_acc: float
) -> TrainState:
    """Advance the phase machine; transitions latch and never revert.

    `measured_bit_acc` is compared directly against t1/t2; the training loop
    passes its exponentially smoothed accuracy.
    """
    if not 0.0 <= measured_bit_acc <= 1.0:
        raise ValueError("bit accuracy must be in [0, 1]")
    phase = state.phase
    ramp_start = state.ramp_start_step
    if phase == "warmup_fixed_batch" and measured_bit_acc >= schedule.t1:
        phase = "full_data"
    if phase == "full_data" and measured_bit_acc >= schedule.t2:
        phase = "noise_and_ramp"
        ramp_start = state.step
    out = TrainState(
        phase=phase,
        beta_current=state.beta_current,
        step=state.step,
        ema_bit_acc=measured_bit_acc,
        ema_val_loss=state.ema_val_loss,
        ramp_start_step=ramp_start,
    )
    out.beta_current = beta_at(out, schedule)
    return out


def quality_loss(
    stego: torch.Tensor,
    cover: torch.Tensor,
    alpha: float,
    perceptual: PerceptualDistance,
) -> torch.Tensor:
    """Perceptual distance plus alpha * MSE in YUV, on the unit scale."""
    if stego.shape != cover.shape:
        raise ValueError(f"shape mismatch: {tuple(stego.shape)} vs {tuple(cover.shape)}")
    yuv_mse = torch.mean((rgb_to_yuv(to_unit(stego)) - rgb_to_yuv(to_unit(cover))) ** 2)
    return perceptual(stego, cover).mean() + alpha * yuv_mse


def total_loss(
    stego: torch.Tensor,
    cover: torch.Tensor,
    logits: torch.Tensor,
    truth,
    beta: float,
    alpha: float,
    perceptual: PerceptualDistance,
) -> torch.Tensor:
    return beta * quality_loss(stego, cover, alpha, perceptual) + recovery_loss(logits, truth)


# --- stego model container ---------------------------------------------------


@dataclass
class StegoTrainConfig:
    secret_length: int
    autoencoder_path: str
    train_folder: str
    val_folder: str
    out_path: str
    seed: int = 0
    batch_size: int = 16
    max_steps: int = 30000
    val_interval: int = 500
    patience: int = 5
    noise_group_size: int = 4
    decoder_channels: int = 24
    final_kernel: int = 3
    variant: str = "secret_only"
    ecc_errors: int = 5
    train_limit: int = 0  # 0 = use the whole folder
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    log_csv: str = ""
    checkpoint_path: str = ""
    checkpoint_interval: int = 2000


class StegoModel:
    """Trained secret encoder/decoder bound to a frozen autoencoder."""

    def __init__(self, encoder, decoder, ae: FrozenAutoencoder, meta: dict):
        self.encoder = encoder.eval()
        self.decoder = decoder.eval()
        self.ae = ae
        self.meta = meta

    @property
    def secret_length(self) -> int:
        return self.encoder.cfg.secret_length

    @property
    def resolution(self) -> int:
        return self.ae.config.resolution

    @property
    def ecc(self) -> EccConfig | None:
        blob = self.meta.get("ecc")
        return EccConfig(**blob) if blob else None

    def embed(self, cover: torch.Tensor, secret) -> torch.Tensor:
        from .secret_encoder import encode_secret

        with torch.no_grad():
            squeeze = cover.dim() == 3
            batch = cover.unsqueeze(0) if squeeze else cover
            z = self.ae.encode(batch)
            delta = encode_secret(self.encoder, secret)
            if delta.shape[0] == 1 and batch.shape[0] > 1:
                delta = delta.expand(batch.shape[0], -1, -1, -1)
            stego = self.ae.decode(z + delta)
        return stego.squeeze(0) if squeeze else stego

    def extract(self, img: torch.Tensor):
        from .secret_decoder import decode_secret

        return decode_secret(self.decoder, img)

    def save(self, path: str | Path) -> None:
        torch.save(
            {
                "kind": "stego-model",
                "encoder_cfg": asdict(self.encoder.cfg),
                "decoder_cfg": asdict(self.decoder.cfg),
                "encoder": self.encoder.state_dict(),
                "decoder": self.decoder.state_dict(),
                "meta": self.meta,
            },
            path,
        )

    @classmethod
    def load(cls, path: str | Path, ae: FrozenAutoencoder | None = None) -> "StegoModel":
        blob = torch.load(path, map_location="cpu", weights_only=True)
        if blob.get("kind") != "stego-model":
            raise ValueError(f"{path} is not a stego-model archive")
        meta = blob["meta"]
        if ae is None:
            ae = FrozenAutoencoder.load(meta["autoencoder_path"])
        if meta.get("autoencoder_digest") and ae.digest() != meta["autoencoder_digest"]:
            raise ValueError("autoencoder archive does not match the one used in training")
        enc_cfg = SecretEncoderConfig(**{
            **blob["encoder_cfg"], "latent_shape": tuple(blob["encoder_cfg"]["latent_shape"])
        })
        encoder = build_secret_encoder(enc_cfg)
        encoder.load_state_dict(blob["encoder"])
        decoder = SecretDecoder(SecretDecoderConfig(**blob["decoder_cfg"]))
        decoder.load_state_dict(blob["decoder"])
        return cls(encoder, decoder, ae, meta)


# --- training loop ------------------------------------------------------------


def _step_rng(seed: int, step: int, salt: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, step, salt]))


def _secrets_for_step(seed: int, step: int, batch: int, length: int) -> torch.Tensor:
    bits = _step_rng(seed, step, 1).integers(0, 2, size=(batch, length))
    return torch.from_numpy(bits.astype(np.float32))


def training_step(
    models: dict,
    covers: torch.Tensor,
    latents: torch.Tensor,
    schedule: TrainSchedule,
    state: TrainState,
    cfg: StegoTrainConfig,
    perceptual: PerceptualDistance,
) -> tuple[TrainState, dict]:
    """One optimization step over F and D; the autoencoder stays out of the graph."""
    encoder, decoder, ae, opt = (
        models["encoder"], models["decoder"], models["ae"], models["optimizer"],
    )
    bits = _secrets_for_step(cfg.seed, state.step, covers.shape[0], cfg.secret_length)
    if cfg.variant == "joint_conditioned":
        delta = encoder(covers, bits)
    else:
        delta = encoder(bits)
    stego = ae.decode(latents + delta)
    attacked = stego
    if state.noise_active:
        groups = []
        g = max(1, cfg.noise_group_size)
        for gi in range(0, stego.shape[0], g):
            chain = sample_perturbation(_step_rng(cfg.seed, state.step, 2 + gi))
            groups.append(apply_chain(stego[gi : gi + g], chain, seed=cfg.seed + state.step + gi))
        attacked = torch.cat(groups, dim=0)
    logits = decoder(attacked)
    beta = beta_at(state, schedule)
    loss = total_loss(stego, covers, logits, bits, beta, schedule.alpha, perceptual)
    if not torch.isfinite(loss):
        raise RuntimeError(f"non-finite loss at step {state.step}: state={state}")
    opt.zero_grad()
    loss.backward()
    torch.nn.utils.clip_grad_norm_(
        [p for group in opt.param_groups for p in group["params"]], 1.0
    )
    opt.step()

    with torch.no_grad():
        batch_acc = ((logits > 0).to(bits.dtype) == bits).float().mean().item()
    d = schedule.ema_decay
    ema = batch_acc if state.step == 0 else d * state.ema_bit_acc + (1 - d) * batch_acc
    new_state = curriculum_update(
        TrainState(
            phase=state.phase,
            beta_current=beta,
            step=state.step,
            ema_bit_acc=state.ema_bit_acc,
            ema_val_loss=state.ema_val_loss,
            ramp_start_step=state.ramp_start_step,
        ),
        schedule,
        ema,
    )
    new_state.step = state.step + 1
    new_state.beta_current = beta_at(new_state, schedule)
    metrics = {
        "loss": loss.item(),
        "bit_acc": batch_acc,
        "ema_bit_acc": ema,
        "beta": beta,
        "phase": state.phase,
    }
    return new_state, metrics


def _validate_stego(models, cfg, schedule, state, val_covers, val_latents, perceptual):
    encoder, decoder, ae = models["encoder"], models["decoder"], models["ae"]
    encoder.eval(); decoder.eval()
    n = val_covers.shape[0]
    accs, naccs, losses, psnrs = [], [], [], []
    with torch.no_grad():
        for i in range(0, n, 64):
            covers = val_covers[i : i + 64]
            bits = _secrets_for_step(cfg.seed + 7, i, covers.shape[0], cfg.secret_length)
            if cfg.variant == "joint_conditioned":
                delta = encoder(covers, bits)
            else:
                delta = encoder(bits)
            stego = ae.decode(val_latents[i : i + 64] + delta)
            logits = decoder(stego)
            accs.append(((logits > 0).to(bits.dtype) == bits).float().mean().item())
            chain = sample_perturbation(_step_rng(cfg.seed + 7, i, 3))
            attacked = apply_chain(stego, chain, seed=cfg.seed + i)
            nlogits = decoder(attacked)
            naccs.append(((nlogits > 0).to(bits.dtype) == bits).float().mean().item())
            losses.append(
                total_loss(stego, covers, nlogits, bits, state.beta_current,
                           schedule.alpha, perceptual).item()
            )
            psnrs.append(psnr(stego, covers))
    encoder.train(); decoder.train()
    return {
        "val_clean_acc": float(np.mean(accs)),
        "val_noised_acc": float(np.mean(naccs)),
        "val_loss": float(np.mean(losses)),
        "val_psnr": float(np.mean(psnrs)),
    }


def train(cfg: StegoTrainConfig, perceptual: PerceptualDistance, log_every: int = 200) -> StegoModel:
    """Full curriculum run; writes the stego-model archive and returns it."""
    ae = FrozenAutoencoder.load(cfg.autoencoder_path)
    ae_digest_before = ae.digest()
    schedule = cfg.schedule

    train_set = ImageFolder(
        cfg.train_folder, ae.config.resolution, limit=cfg.train_limit or None
    ).preload()
    val_set = ImageFolder(cfg.val_folder, ae.config.resolution).preload()

    torch.manual_seed(cfg.seed)
    enc_cfg = SecretEncoderConfig(
        secret_length=cfg.secret_length,
        latent_shape=ae.latent_shape,
        final_kernel=cfg.final_kernel,
        variant=cfg.variant,
    )
    encoder = build_secret_encoder(enc_cfg, seed=cfg.seed)
    decoder = SecretDecoder(
        SecretDecoderConfig(cfg.secret_length, ae.config.resolution, cfg.decoder_channels),
        seed=cfg.seed + 1,
    )
    opt = torch.optim.AdamW(
        list(encoder.parameters()) + list(decoder.parameters()),
        lr=schedule.lr,
        weight_decay=schedule.weight_decay,
    )
    models = {"encoder": encoder, "decoder": decoder, "ae": ae, "optimizer": opt}
    state = TrainState(beta_current=schedule.beta_start)

    # frozen encoder side: cache every latent once
    def encode_all(dataset: ImageFolder) -> tuple[torch.Tensor, torch.Tensor]:
        covers, latents = [], []
        with torch.no_grad():
            for i in range(0, len(dataset), 64):
                x = dataset.batch(range(i, min(i + 64, len(dataset))))
                covers.append(x)
                latents.append(ae.encode(x))
        return torch.cat(covers), torch.cat(latents)

    train_covers, train_latents = encode_all(train_set)
    val_covers, val_latents = encode_all(val_set)

    warmup_idx = _step_rng(cfg.seed, 0).integers(0, len(train_set), cfg.batch_size)

    if cfg.checkpoint_path and Path(cfg.checkpoint_path).exists():
        state = _load_checkpoint(cfg.checkpoint_path, models)

    log_path = Path(cfg.log_csv) if cfg.log_csv else Path(cfg.out_path).with_suffix(".log.csv")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    log_file = open(log_path, "a", newline="")
    logger = csv.writer(log_file)
    if log_path.stat().st_size == 0:
        logger.writerow(["step", "phase", "beta", "loss", "bit_acc", "ema_bit_acc",
                         "val_clean_acc", "val_noised_acc", "val_loss", "val_psnr"])

    best_val, rounds_since_best = math.inf, 0
    val_metrics: dict = {}
    try:
        while state.step < cfg.max_steps:
            if state.phase == "warmup_fixed_batch":
                idx = warmup_idx
            else:
                idx = _step_rng(cfg.seed, state.step).integers(0, len(train_set), cfg.batch_size)
            covers = train_covers[idx]
            latents = train_latents[idx]
            prev_step = state.step
            state, metrics = training_step(
                models, covers, latents, schedule, state, cfg, perceptual
            )
            row = [prev_step, metrics["phase"], f"{metrics['beta']:.4f}",
                   f"{metrics['loss']:.5f}", f"{metrics['bit_acc']:.4f}",
                   f"{metrics['ema_bit_acc']:.4f}", "", "", "", ""]

            if state.step % cfg.val_interval == 0:
                val_metrics = _validate_stego(
                    models, cfg, schedule, state, val_covers, val_latents, perceptual
                )
                d = 0.6  # smoothing across validation rounds
                prev = state.ema_val_loss
                state.ema_val_loss = (
                    val_metrics["val_loss"] if math.isinf(prev)
                    else d * prev + (1 - d) * val_metrics["val_loss"]
                )
                row[6:] = [f"{val_metrics['val_clean_acc']:.4f}",
                           f"{val_metrics['val_noised_acc']:.4f}",
                           f"{val_metrics['val_loss']:.5f}",
                           f"{val_metrics['val_psnr']:.2f}"]
                if log_every:
                    print(f"[stego] step {state.step} phase={state.phase} "
                          f"beta={state.beta_current:.2f} ema_acc={state.ema_bit_acc:.4f} "
                          f"val={val_metrics}", flush=True)
                # plateau-based stop, armed once the quality ramp has finished
                ramp_done = (
                    state.ramp_start_step >= 0
                    and state.step >= state.ramp_start_step + schedule.ramp_steps
                )
                if ramp_done:
                    if state.ema_val_loss < best_val - 1e-5:
                        best_val = state.ema_val_loss
                        rounds_since_best = 0
                    else:
                        rounds_since_best += 1
                    if rounds_since_best >= cfg.patience:
                        print(f"[stego] early stop at step {state.step}", flush=True)
                        logger.writerow(row)
                        break
            logger.writerow(row)
            if (
                cfg.checkpoint_path
                and state.step % cfg.checkpoint_interval == 0
                and state.step > 0
            ):
                _save_checkpoint(cfg.checkpoint_path, models, state)
    finally:
        log_file.close()

    if ae.digest() != ae_digest_before:
        raise RuntimeError("frozen autoencoder parameters changed during training")

    try:
        ecc = asdict(EccConfig.for_channel(cfg.secret_length, cfg.ecc_errors))
    except ValueError:
        ecc = None
    meta = {
        "secret_length": cfg.secret_length,
        "autoencoder_path": str(cfg.autoencoder_path),
        "autoencoder_digest": ae_digest_before,
        "schedule": asdict(schedule),
        "train_config": {k: v for k, v in asdict(cfg).items() if k != "schedule"},
        "final_state": {**asdict(state), "ema_val_loss": float(state.ema_val_loss)},
        "val_metrics": val_metrics,
        "ecc": ecc,
    }
    model = StegoModel(encoder, decoder, ae, meta)
    Path(cfg.out_path).parent.mkdir(parents=True, exist_ok=True)
    model.save(cfg.out_path)
    return model


def _save_checkpoint(path, models, state: TrainState) -> None:
    torch.save(
        {
            "kind": "stego-checkpoint",
            "encoder": models["encoder"].state_dict(),
            "decoder": models["decoder"].state_dict(),
            "optimizer": models["optimizer"].state_dict(),
            "state": asdict(state),
        },
        path,
    )


def _load_checkpoint(path, models) -> TrainState:
    blob = torch.load(path, map_location="cpu", weights_only=True)
    models["encoder"].load_state_dict(blob["encoder"])
    models["decoder"].load_state_dict(blob["decoder"])
    models["optimizer"].load_state_dict(blob["optimizer"])
    return TrainState(**blob["state"])
