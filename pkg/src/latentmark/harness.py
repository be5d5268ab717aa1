"""Embed/extract/evaluate/sweep machinery behind the CLI.

Both watermarking methods are driven through one adapter protocol so reports,
sweeps, and the CLI treat them interchangeably. Evaluation follows the
benchmark recipe: resize to the working resolution, embed a fresh random
secret per image, measure clean quality/recovery, then corrupt with one
seeded random perturbation and measure noised recovery (raw, error-corrected,
and word-level).
"""

from __future__ import annotations

import hashlib
import json
import math
import time
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
import torch

from .baseline import DwtDctSvdWatermarker
from .corruption import KINDS, PerturbationSpec, apply_perturbation
from .ecc import EccConfig, ecc_decode, ecc_encode
from .images import load_image, list_images, save_image
from .metrics import bit_accuracy, psnr, ssim, word_accuracy
from .payload import bits_to_hex, bits_to_string
from .perceptual import PerceptualDistance
from .report import EvalReport, EvalRow
from .training import StegoModel


class LatentMethod:
    """Adapter over a trained stego model."""

    name = "latent"

    def __init__(self, model: StegoModel):
        self.model = model

    @property
    def secret_length(self) -> int:
        return self.model.secret_length

    @property
    def resolution(self) -> int:
        return self.model.resolution

    @property
    def ecc(self) -> EccConfig | None:
        return self.model.ecc

    def digest(self) -> str:
        h = hashlib.sha256()
        for mod in (self.model.encoder, self.model.decoder):
            for name, p in mod.state_dict().items():
                h.update(name.encode())
                h.update(p.detach().cpu().numpy().tobytes())
        h.update(self.model.meta.get("autoencoder_digest", "").encode())
        return h.hexdigest()[:16]

    def embed(self, cover: torch.Tensor, bits) -> torch.Tensor:
        return self.model.embed(cover, bits)

    def extract(self, img: torch.Tensor) -> tuple[np.ndarray, float]:
        logits, bits = self.model.extract(img)
        return bits, float(logits.abs().mean().item())

    def extract_batch(self, imgs: torch.Tensor) -> np.ndarray:
        _, bits = self.model.extract(imgs)
        return bits


class BaselineMethod:
    """Adapter over the frequency-domain baseline."""

    name = "dwtdctsvd"

    def __init__(self, secret_length: int, resolution: int = 64,
                 marker: DwtDctSvdWatermarker | None = None,
                 ecc: EccConfig | None = None):
        self.marker = marker or DwtDctSvdWatermarker()
        self._secret_length = secret_length
        self._resolution = resolution
        self._ecc = ecc

    @property
    def secret_length(self) -> int:
        return self._secret_length

    @property
    def resolution(self) -> int:
        return self._resolution

    @property
    def ecc(self) -> EccConfig | None:
        return self._ecc

    def digest(self) -> str:
        params = json.dumps(self.marker.get_params(), sort_keys=True)
        return hashlib.sha256(params.encode()).hexdigest()[:16]

    def embed(self, cover: torch.Tensor, bits) -> torch.Tensor:
        return self.marker.embed(cover, bits)

    def extract(self, img: torch.Tensor) -> tuple[np.ndarray, float]:
        return self.marker.extract(img, self._secret_length), math.nan

    def extract_batch(self, imgs: torch.Tensor) -> np.ndarray:
        return np.stack([self.extract(img)[0] for img in imgs])


def _rng(*entropy: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))


def _fresh_secret(method, rng) -> tuple[np.ndarray, np.ndarray | None]:
    """Channel bits to embed, plus the ECC data bits when the method carries ECC."""
    ecc = method.ecc
    if ecc is not None and ecc.codeword_length == method.secret_length:
        data = rng.integers(0, 2, ecc.data_length, dtype=np.uint8)
        return ecc_encode(data, ecc), data
    return rng.integers(0, 2, method.secret_length, dtype=np.uint8), None


def evaluate(
    method,
    data_dir: str | Path,
    seed: int = 0,
    limit: int | None = None,
    perceptual: PerceptualDistance | None = None,
) -> EvalReport:
    """Table-style evaluation with one random corruption per image."""
    paths = list_images(data_dir)
    if limit:
        paths = paths[:limit]
    if not paths:
        raise ValueError(f"no images to evaluate under {data_dir}")
    rows = []
    for idx, path in enumerate(paths):
        rng = _rng(seed, idx)
        try:
            cover = load_image(path, size=method.resolution)
            channel, data = _fresh_secret(method, rng)
            stego = method.embed(cover, channel)
            clean_bits, _ = method.extract(stego)
            kind = KINDS[int(rng.integers(len(KINDS)))]
            severity = int(rng.integers(1, 6))
            attacked = apply_perturbation(
                stego, PerturbationSpec(kind, severity), seed=int(rng.integers(2**31))
            )
            noised_bits, _ = method.extract(attacked)
            row = EvalRow(
                image_id=path.name,
                method=method.name,
                psnr=psnr(stego, cover),
                ssim=ssim(stego, cover),
                perceptual=(
                    float(perceptual(stego, cover).item()) if perceptual else math.nan
                ),
                bit_acc_clean=bit_accuracy(clean_bits, channel),
                bit_acc_noised=bit_accuracy(noised_bits, channel),
                word_acc=float(word_accuracy(noised_bits, channel)),
                perturbation=f"{kind}:{severity}",
            )
            if data is not None:
                decoded, _ = ecc_decode(noised_bits, method.ecc)
                row.bit_acc_ecc = bit_accuracy(decoded, data)
            rows.append(row)
        except Exception as exc:  # noqa: BLE001 - per-file isolation
            rows.append(EvalRow(image_id=path.name, method=method.name, error=str(exc)))
    config = {
        "data_dir": str(data_dir),
        "seed": seed,
        "method": method.name,
        "digest": method.digest(),
        "secret_length": method.secret_length,
        "resolution": method.resolution,
        "ecc": asdict(method.ecc) if method.ecc else None,
    }
    return EvalReport(rows, config)


def evaluate_per_kind(
    method,
    data_dir: str | Path,
    seed: int = 0,
    limit: int | None = None,
    severities: tuple[int, ...] = (1, 2, 3, 4, 5),
) -> dict:
    """Bit accuracy per corruption kind (and per severity), embedding each image once."""
    paths = list_images(data_dir)
    if limit:
        paths = paths[:limit]
    if not paths:
        raise ValueError(f"no images to evaluate under {data_dir}")
    stegos, channels = [], []
    for idx, path in enumerate(paths):
        rng = _rng(seed, idx)
        cover = load_image(path, size=method.resolution)
        channel, _ = _fresh_secret(method, rng)
        stegos.append(method.embed(cover, channel))
        channels.append(channel)
    stack = torch.stack(stegos)
    truth = np.stack(channels)
    table: dict[str, dict[int, float]] = {}
    for kind in KINDS:
        table[kind] = {}
        for severity in severities:
            attacked = apply_perturbation(
                stack, PerturbationSpec(kind, severity), seed=seed + severity
            )
            bits = method.extract_batch(attacked)
            table[kind][severity] = float((bits == truth).mean())
    means = {kind: float(np.mean(list(vals.values()))) for kind, vals in table.items()}
    return {"per_kind_severity": table, "per_kind_mean": means}


# --- embed / extract batches --------------------------------------------------


def embed_batch(method, cover_paths, secret_bits, out_dir: str | Path) -> dict:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for path in map(Path, cover_paths):
        entry = {"cover": str(path), "stego": "", "status": "ok"}
        try:
            cover = load_image(path, size=method.resolution)
            stego = method.embed(cover, secret_bits)
            stego_path = out / f"{path.stem}_stego.png"
            save_image(stego, stego_path)
            entry["stego"] = str(stego_path)
        except Exception as exc:  # noqa: BLE001
            entry["status"] = f"error: {exc}"
        files.append(entry)
    manifest = {
        "method": method.name,
        "digest": method.digest(),
        "secret_hex": bits_to_hex(secret_bits),
        "secret_length": int(np.asarray(secret_bits).size),
        "resolution": method.resolution,
        "files": files,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def extract_batch(method, stego_paths, apply_ecc: bool = True) -> list[dict]:
    results = []
    for path in map(Path, stego_paths):
        entry: dict = {"path": str(path)}
        try:
            img = load_image(path, size=method.resolution)
            bits, confidence = method.extract(img)
            entry["bits_hex"] = bits_to_hex(bits)
            entry["ascii"] = bits_to_string(bits).decode("ascii", errors="replace")
            entry["confidence"] = None if math.isnan(confidence) else confidence
            if apply_ecc and method.ecc is not None:
                data, corrected = ecc_decode(bits, method.ecc)
                entry["ecc_data_hex"] = bits_to_hex(data)
                entry["ecc_ascii"] = bits_to_string(data).decode("ascii", errors="replace")
                entry["ecc_corrected"] = bool(corrected)
        except Exception as exc:  # noqa: BLE001
            entry["error"] = str(exc)
        results.append(entry)
    return results


# --- sweeps --------------------------------------------------------------------


SWEEP_AXES = ("secret_length", "beta_max", "train_volume")


def run_sweep(
    axis: str,
    values: list,
    base_cfg,
    eval_dir: str | Path,
    perceptual: PerceptualDistance,
    out_dir: str | Path,
    eval_limit: int | None = None,
    reuse_existing: bool = True,
) -> list[dict]:
    """Train one model per axis value and evaluate each; returns table rows."""
    from copy import deepcopy

    from .training import train

    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {SWEEP_AXES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for value in values:
        cfg = deepcopy(base_cfg)
        if axis == "secret_length":
            cfg.secret_length = int(value)
        elif axis == "beta_max":
            cfg.schedule.beta_max = float(value)
        else:
            cfg.train_limit = int(value)
        cfg.out_path = str(out / f"model_{axis}_{value}.pt")
        cfg.log_csv = str(out / f"train_{axis}_{value}.csv")
        t0 = time.time()
        if reuse_existing and Path(cfg.out_path).exists():
            model = StegoModel.load(cfg.out_path)
            train_seconds = 0.0
        else:
            model = train(cfg, perceptual)
            train_seconds = time.time() - t0
        report = evaluate(
            LatentMethod(model), eval_dir, seed=base_cfg.seed, limit=eval_limit,
            perceptual=perceptual,
        )
        agg = report.aggregates()
        rows.append(
            {
                "axis": axis,
                "value": value,
                "psnr": agg["psnr"]["mean"],
                "ssim": agg["ssim"]["mean"],
                "bit_acc_clean": agg["bit_acc_clean"]["mean"],
                "bit_acc_noised": agg["bit_acc_noised"]["mean"],
                "word_acc": agg["word_acc"]["mean"],
                "train_steps": model.meta["final_state"]["step"],
                "train_seconds": train_seconds,
            }
        )
        report.write_csv(out / f"eval_{axis}_{value}.csv")
        report.write_json(out / f"eval_{axis}_{value}.json")
    (out / "sweep.json").write_text(json.dumps(rows, indent=2))
    _write_sweep_csv(rows, out / "sweep.csv")
    return rows


def _write_sweep_csv(rows: list[dict], path: Path) -> None:
    import csv

    if not rows:
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)


def plot_sweep(rows: list[dict], path: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax1 = plt.subplots(figsize=(6, 4))
    xs = [row["value"] for row in rows]
    ax1.plot(xs, [row["bit_acc_noised"] for row in rows], "o-", color="tab:red",
             label="bit acc (noised)")
    ax1.set_xlabel(rows[0]["axis"] if rows else "value")
    ax1.set_ylabel("bit accuracy", color="tab:red")
    ax1.set_ylim(0, 1.05)
    ax2 = ax1.twinx()
    ax2.plot(xs, [row["psnr"] for row in rows], "s-", color="tab:blue", label="psnr")
    ax2.set_ylabel("psnr (dB)", color="tab:blue")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_per_kind(per_kind_mean: dict[str, float], path: str | Path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    kinds = list(per_kind_mean)
    values = [per_kind_mean[k] for k in kinds]
    fig, ax = plt.subplots(figsize=(10, 4))
    ax.bar(kinds, values, color="tab:blue")
    ax.axhline(0.5, color="gray", linestyle="--", linewidth=1, label="chance")
    ax.set_ylabel("bit accuracy")
    ax.set_ylim(0, 1.05)
    ax.tick_params(axis="x", rotation=60)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
