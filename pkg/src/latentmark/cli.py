"""Command-line interface: train, embed, extract, evaluate, perturb, sweep."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click
import numpy as np

from . import harness
from .autoencoder import FrozenAutoencoder, train_reference_autoencoder
from .baseline import DwtDctSvdWatermarker
from .config import load_autoencoder_config, load_stego_config
from .corruption import KINDS, PerturbationSpec, apply_perturbation
from .ecc import EccConfig, ecc_encode
from .images import load_image, save_image
from .payload import parse_secret
from .perceptual import PerceptualDistance, train_feature_extractor
from .training import StegoModel, train


@click.group()
def main():
    """Latent-space image steganography toolbox."""


def _load_perceptual(path, train_dir=None, seed=0) -> PerceptualDistance:
    if path and Path(path).exists():
        return PerceptualDistance.load(path)
    if train_dir is None:
        raise click.UsageError("no perceptual backend: pass --perceptual or a train folder")
    click.echo(f"training perceptual backend from {train_dir} (no checkpoint given)")
    dist = train_feature_extractor(train_dir, seed=seed)
    if path:
        dist.save(path)
    return dist


def _resolve_method(model, method, length, ecc_t):
    if method == "latent" or model:
        if not model:
            raise click.UsageError("--model is required for the latent method")
        return harness.LatentMethod(StegoModel.load(model))
    if method == "dwtdctsvd":
        ecc = EccConfig.for_channel(length, ecc_t) if ecc_t else None
        return harness.BaselineMethod(length, ecc=ecc)
    raise click.UsageError(f"unknown method {method!r}")


method_options = [
    click.option("--model", type=click.Path(exists=True), help="stego-model archive"),
    click.option("--method", default="latent", show_default=True,
                 type=click.Choice(["latent", "dwtdctsvd"])),
    click.option("--length", default=32, show_default=True,
                 help="secret length for the handcrafted method"),
    click.option("--ecc-t", default=0, show_default=True,
                 help="enable BCH (t errors) for the handcrafted method"),
]


def _with_options(opts):
    def wrap(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn
    return wrap


@main.command("synth-data")
@click.option("--out", required=True, type=click.Path())
@click.option("--count", default=1000, show_default=True)
@click.option("--size", default=64, show_default=True)
@click.option("--seed", default=0, show_default=True)
def synth_data(out, count, size, seed):
    """Generate a procedural image folder for desk-scale experiments."""
    from .data import generate_images

    paths = generate_images(out, count, size, seed)
    click.echo(f"wrote {len(paths)} images to {out}")


@main.command("train-ae")
@click.option("--train", "train_dir", required=True, type=click.Path(exists=True))
@click.option("--val", "val_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--config", type=click.Path(exists=True), help="AutoencoderConfig YAML")
@click.option("--perceptual", type=click.Path(), help="perceptual backend checkpoint")
@click.option("--seed", default=0, show_default=True)
def train_ae(train_dir, val_dir, out, config, perceptual, seed):
    """Train and freeze the reference autoencoder."""
    cfg = load_autoencoder_config(config, seed=seed)
    dist = _load_perceptual(perceptual, train_dir, seed)
    ae, metrics = train_reference_autoencoder(train_dir, val_dir, cfg, dist)
    ae.save(out)
    click.echo(f"saved {out}; held-out reconstruction psnr {metrics['val_psnr']:.2f} dB")


@main.command("train-stega")
@click.option("--config", type=click.Path(exists=True), help="StegoTrainConfig YAML")
@click.option("--ae", "ae_path", type=click.Path(exists=True))
@click.option("--train", "train_dir", type=click.Path(exists=True))
@click.option("--val", "val_dir", type=click.Path(exists=True))
@click.option("--out", type=click.Path())
@click.option("--secret-length", type=int)
@click.option("--perceptual", type=click.Path(), help="perceptual backend checkpoint")
@click.option("--seed", type=int)
def train_stega(config, ae_path, train_dir, val_dir, out, secret_length, perceptual, seed):
    """Train the secret encoder/decoder against a frozen autoencoder."""
    cfg = load_stego_config(
        config,
        autoencoder_path=ae_path,
        train_folder=train_dir,
        val_folder=val_dir,
        out_path=out,
        secret_length=secret_length,
        seed=seed,
    )
    dist = _load_perceptual(perceptual, cfg.train_folder, cfg.seed)
    model = train(cfg, dist)
    click.echo(f"saved {cfg.out_path}; val metrics {model.meta['val_metrics']}")


@main.command()
@_with_options(method_options)
@click.option("--secret", required=True, help="ASCII text, or hex:<digits>")
@click.option("--out", required=True, type=click.Path())
@click.argument("covers", nargs=-1, required=True, type=click.Path())
def embed(model, method, length, ecc_t, secret, out, covers):
    """Embed a secret into one or more cover images."""
    m = _resolve_method(model, method, length, ecc_t)
    if m.ecc is not None:
        data = parse_secret(secret, m.ecc.data_length)
        channel = ecc_encode(data, m.ecc)
    else:
        channel = parse_secret(secret, m.secret_length)
    manifest = harness.embed_batch(m, covers, channel, out)
    errors = [f for f in manifest["files"] if f["status"] != "ok"]
    click.echo(json.dumps(manifest, indent=2))
    if errors:
        sys.exit(1)


@main.command()
@_with_options(method_options)
@click.argument("stegos", nargs=-1, required=True, type=click.Path())
def extract(model, method, length, ecc_t, stegos):
    """Recover secrets from stego images."""
    m = _resolve_method(model, method, length, ecc_t)
    results = harness.extract_batch(m, stegos)
    click.echo(json.dumps(results, indent=2))
    if any("error" in r for r in results):
        sys.exit(1)


@main.command()
@_with_options(method_options)
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--limit", default=0, show_default=True, help="max images (0 = all)")
@click.option("--per-kind", is_flag=True, help="also break accuracy down per corruption kind")
@click.option("--perceptual", type=click.Path(exists=True))
def evaluate(model, method, length, ecc_t, data_dir, out, seed, limit, per_kind, perceptual):
    """Benchmark a method on an image folder (random corruption per image)."""
    m = _resolve_method(model, method, length, ecc_t)
    dist = PerceptualDistance.load(perceptual) if perceptual else None
    out = Path(out)
    report = harness.evaluate(m, data_dir, seed=seed, limit=limit or None, perceptual=dist)
    report.write_csv(out / "report.csv")
    report.write_json(out / "report.json")
    click.echo(json.dumps(report.aggregates(), indent=2))
    if per_kind:
        breakdown = harness.evaluate_per_kind(m, data_dir, seed=seed, limit=limit or None)
        (out / "per_kind.json").write_text(json.dumps(breakdown, indent=2))
        harness.plot_per_kind(breakdown["per_kind_mean"], out / "per_kind.png")
    if report.has_errors:
        sys.exit(1)


@main.command()
@click.option("--kind", required=True, type=click.Choice(list(KINDS)))
@click.option("--severity", required=True, type=click.IntRange(0, 5))
@click.option("--seed", default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@click.argument("image", type=click.Path(exists=True))
def perturb(kind, severity, seed, out, image):
    """Apply one corruption at one severity and save the result."""
    img = load_image(image)
    corrupted = apply_perturbation(img, PerturbationSpec(kind, severity), seed=seed)
    save_image(corrupted, out)
    click.echo(f"wrote {out}")


@main.command()
@click.option("--axis", required=True, type=click.Choice(list(harness.SWEEP_AXES)))
@click.option("--values", required=True, help="comma-separated axis values")
@click.option("--config", required=True, type=click.Path(exists=True),
              help="base StegoTrainConfig YAML")
@click.option("--eval-data", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
@click.option("--eval-limit", default=0, show_default=True)
@click.option("--perceptual", type=click.Path(exists=True))
@click.option("--seed", type=int)
def sweep(axis, values, config, eval_data, out, eval_limit, perceptual, seed):
    """Train/evaluate one model per axis value and emit the trade-off table."""
    base = load_stego_config(config, seed=seed)
    dist = _load_perceptual(perceptual, base.train_folder, base.seed)
    parsed = [float(v) if axis == "beta_max" else int(v) for v in values.split(",")]
    rows = harness.run_sweep(
        axis, parsed, base, eval_data, dist, out, eval_limit=eval_limit or None
    )
    harness.plot_sweep(rows, Path(out) / "sweep.png")
    click.echo(json.dumps(rows, indent=2))


if __name__ == "__main__":
    main()
