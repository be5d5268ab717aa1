import numpy as np
import pytest
import torch

from latentmark.autoencoder import (
    AutoencoderConfig,
    Decoder,
    Encoder,
    FrozenAutoencoder,
    compute_latent_std,
    latent_perturb_probe,
    train_reference_autoencoder,
)
from latentmark.images import from_unit


@pytest.fixture(scope="module")
def ae():
    cfg = AutoencoderConfig(resolution=64, base_channels=8, res_blocks=1)
    torch.manual_seed(0)
    return FrozenAutoencoder(Encoder(cfg), Decoder(cfg), cfg, torch.ones(3))


def _img(seed=0, size=64, n=None):
    rng = np.random.default_rng(seed)
    shape = (3, size, size) if n is None else (n, 3, size, size)
    return from_unit(torch.from_numpy(rng.random(shape)).float())


def test_encode_shape_contract(ae):
    z = ae.encode(_img())
    assert z.shape == (3, 16, 16)
    zb = ae.encode(_img(n=2))
    assert zb.shape == (2, 3, 16, 16)


def test_encode_requires_divisible_dims(ae):
    with pytest.raises(ValueError):
        ae.encode(_img(size=66))


def test_encode_deterministic(ae):
    x = _img(1)
    assert torch.equal(ae.encode(x), ae.encode(x))


def test_decode_shape_and_determinism(ae):
    z = torch.randn(3, 16, 16, generator=torch.Generator().manual_seed(2))
    out = ae.decode(z)
    assert out.shape == (3, 64, 64)  # f * H' x f * W' x 3
    assert torch.equal(out, ae.decode(z))
    assert out.min() >= -1.0 and out.max() <= 1.0


def test_decode_rejects_wrong_channels(ae):
    with pytest.raises(ValueError):
        ae.decode(torch.randn(4, 16, 16))


def test_frozen_parameters_and_digest(ae):
    assert all(not p.requires_grad for p in ae.encoder.parameters())
    assert all(not p.requires_grad for p in ae.decoder.parameters())
    d1 = ae.digest()
    ae.reconstruct(_img(3))
    assert ae.digest() == d1


def test_latent_std_validation():
    cfg = AutoencoderConfig(resolution=64, base_channels=8, res_blocks=1)
    with pytest.raises(ValueError):
        FrozenAutoencoder(Encoder(cfg), Decoder(cfg), cfg, torch.zeros(3))


def test_archive_roundtrip(ae, tmp_path):
    path = tmp_path / "ae.pt"
    ae.save(path)
    again = FrozenAutoencoder.load(path)
    x = _img(4)
    assert torch.equal(again.encode(x), ae.encode(x))
    assert again.digest() == ae.digest()
    assert torch.equal(again.latent_std, ae.latent_std)


def test_probe_k_zero_identity(ae):
    x = _img(5)
    perturbed, report = latent_perturb_probe(ae, x, k=0.0, seed=1)
    assert torch.equal(perturbed, ae.reconstruct(x))
    assert report.psnr == 100.0
    assert report.ssim == pytest.approx(1.0, abs=1e-9)


def test_probe_seed_controls_noise(ae):
    x = _img(6)
    a, _ = latent_perturb_probe(ae, x, k=0.2, seed=3)
    b, _ = latent_perturb_probe(ae, x, k=0.2, seed=3)
    c, _ = latent_perturb_probe(ae, x, k=0.2, seed=4)
    assert torch.equal(a, b)
    assert not torch.equal(a, c)


def test_probe_rejects_negative_k(ae):
    with pytest.raises(ValueError):
        latent_perturb_probe(ae, _img(), k=-0.1, seed=0)


def test_compute_latent_std_positive(ae):
    stds = compute_latent_std(ae.encoder, _img(n=8))
    assert stds.shape == (3,)
    assert (stds > 0).all()


def test_training_requires_enough_images(tmp_path):
    from latentmark.data import generate_images

    generate_images(tmp_path / "few", 5, size=32, seed=0)
    with pytest.raises(ValueError, match="1000"):
        train_reference_autoencoder(
            tmp_path / "few", tmp_path / "few",
            AutoencoderConfig(resolution=32, base_channels=8, steps=1),
        )
