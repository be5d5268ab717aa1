import numpy as np
import pytest
import torch

from latentmark.payload import random_secret
from latentmark.secret_encoder import (
    JointSecretEncoder,
    SecretEncoder,
    SecretEncoderConfig,
    bits_to_tensor,
    build_secret_encoder,
    encode_secret,
)


def _n_params(module):
    return sum(p.numel() for p in module.parameters())


def test_zero_init_output_is_exactly_zero():
    cfg = SecretEncoderConfig(secret_length=100, latent_shape=(3, 16, 16))
    enc = SecretEncoder(cfg, seed=0)
    for seed in range(5):
        out = encode_secret(enc, random_secret(100, seed))
        assert torch.equal(out, torch.zeros_like(out))


def test_parameter_count_matches_closed_form():
    # Linear(L -> H/2*W/2*C) + bias, plus final conv + bias
    cfg3 = SecretEncoderConfig(100, (3, 64, 64), final_kernel=3)
    assert _n_params(SecretEncoder(cfg3)) == 100 * 3072 + 3072 + (3 * 3 * 3 * 3 + 3) == 310_356
    cfg1 = SecretEncoderConfig(100, (3, 64, 64), final_kernel=1)
    assert _n_params(SecretEncoder(cfg1)) == 310_284


def test_offset_shape_matches_latent():
    cfg = SecretEncoderConfig(32, (3, 16, 16))
    enc = SecretEncoder(cfg, seed=1)
    out = encode_secret(enc, random_secret(32, 0))
    assert out.shape == (1, 3, 16, 16)


def test_cover_independence_after_training_step():
    # nudge the weights off zero-init, then check F is a function of the secret alone
    cfg = SecretEncoderConfig(16, (3, 8, 8))
    enc = SecretEncoder(cfg, seed=2)
    with torch.no_grad():
        for p in enc.parameters():
            p.add_(torch.randn_like(p) * 0.05)
    bits = random_secret(16, 3)
    a = encode_secret(enc, bits)
    b = encode_secret(enc, bits)
    assert torch.equal(a, b)
    assert not torch.equal(a, encode_secret(enc, 1 - bits))


def test_length_mismatch_rejected():
    cfg = SecretEncoderConfig(16, (3, 8, 8))
    enc = SecretEncoder(cfg)
    with pytest.raises(ValueError):
        encode_secret(enc, random_secret(17, 0))


def test_invalid_configs():
    with pytest.raises(ValueError):
        SecretEncoderConfig(0, (3, 8, 8))
    with pytest.raises(ValueError):
        SecretEncoderConfig(8, (3, 7, 8))
    with pytest.raises(ValueError):
        SecretEncoderConfig(8, (3, 8, 8), final_kernel=5)
    with pytest.raises(ValueError):
        SecretEncoderConfig(8, (3, 8, 8), variant="bogus")


def test_joint_variant_zero_init_and_shape():
    cfg = SecretEncoderConfig(16, (3, 8, 8), variant="joint_conditioned")
    enc = build_secret_encoder(cfg, seed=4)
    assert isinstance(enc, JointSecretEncoder)
    cover = torch.rand(2, 3, 32, 32) * 2 - 1
    bits = bits_to_tensor(np.stack([random_secret(16, s) for s in (0, 1)]))
    out = enc(cover, bits)
    assert out.shape == (2, 3, 8, 8)
    assert torch.equal(out, torch.zeros_like(out))


def test_bits_presented_as_reals():
    cfg = SecretEncoderConfig(8, (3, 8, 8))
    enc = SecretEncoder(cfg, seed=5)
    t = bits_to_tensor(random_secret(8, 9))
    assert t.dtype == torch.float32
    assert set(t.unique().tolist()) <= {0.0, 1.0}
