"""Contracts that only hold for a trained desk-scale system (cached artifacts)."""

import numpy as np
import pytest
import torch

from latentmark.autoencoder import compute_latent_std
from latentmark.harness import LatentMethod, evaluate_per_kind
from latentmark.images import ImageFolder, list_images, load_image
from latentmark.metrics import bit_accuracy
from latentmark.payload import random_secret
from latentmark.secret_encoder import bits_to_tensor, encode_secret


def test_latent_std_matches_recomputation(desk_ae, desk_dirs):
    calib = ImageFolder(desk_dirs["train"], 64, limit=1000).preload()
    images = calib.batch(range(len(calib)))
    recomputed = compute_latent_std(desk_ae.encoder, images)
    ratio = (recomputed / desk_ae.latent_std).numpy()
    assert np.all(np.abs(ratio - 1.0) <= 0.05), ratio


def test_secret_offsets_identical_across_covers(desk_model):
    bits = random_secret(32, 5)
    a = encode_secret(desk_model.encoder, bits)
    b = encode_secret(desk_model.encoder, bits)
    assert torch.equal(a, b)  # F never sees the cover


def test_inverted_secret_residuals_oppose(desk_model, desk_dirs):
    """A secret and its bitwise inverse push decoded pixels in opposing directions."""
    model = desk_model
    paths = list_images(desk_dirs["test"])[:10]
    cosines = []
    with torch.no_grad():
        for i, path in enumerate(paths):
            cover = load_image(path, size=64)
            z = model.ae.encode(cover.unsqueeze(0))
            plain = model.ae.decode(z)
            bits = random_secret(32, 100 + i)
            delta = model.encoder(bits_to_tensor(bits))
            delta_inv = model.encoder(bits_to_tensor(1 - bits))
            r = (model.ae.decode(z + delta) - plain).flatten()
            r_inv = (model.ae.decode(z + delta_inv) - plain).flatten()
            cosines.append(torch.nn.functional.cosine_similarity(r, r_inv, dim=0).item())
    assert float(np.mean(cosines)) < 0.0, cosines


def test_clean_recovery_perfect_on_validation(desk_model, desk_dirs):
    paths = list_images(desk_dirs["val"])[:64]
    accs = []
    for i, path in enumerate(paths):
        cover = load_image(path, size=64)
        bits = random_secret(32, 200 + i)
        stego = desk_model.embed(cover, bits)
        _, decoded = desk_model.extract(stego)
        accs.append(bit_accuracy(decoded, bits))
    assert float(np.mean(accs)) >= 0.99


def test_probe_at_fig1_strength_stays_recognizable(desk_ae, desk_dirs):
    """k=0.2 latent noise lowers PSNR but keeps the image structurally intact."""
    from latentmark.autoencoder import latent_perturb_probe
    from latentmark.metrics import PSNR_CAP_DB

    paths = list_images(desk_dirs["test"])[:20]
    ssims, psnrs = [], []
    for i, path in enumerate(paths):
        img = load_image(path, size=64)
        _, report = latent_perturb_probe(desk_ae, img, k=0.2, seed=300 + i)
        ssims.append(report.ssim)
        psnrs.append(report.psnr)
    assert float(np.mean(psnrs)) < PSNR_CAP_DB  # strictly degraded
    assert float(np.mean(ssims)) > 0.6


def test_bit_accuracy_monotone_in_severity(desk_model, desk_dirs):
    table = evaluate_per_kind(
        LatentMethod(desk_model), desk_dirs["test"], seed=17, limit=60
    )["per_kind_severity"]
    slack = 0.02
    for kind, by_sev in table.items():
        accs = [by_sev[s] for s in sorted(by_sev)]
        for a, b in zip(accs, accs[1:]):
            assert b <= a + slack, (kind, accs)
