import math

import numpy as np
import pytest
import torch

from latentmark.color import rgb_to_yuv, yuv_to_rgb
from latentmark.images import from_unit, to_unit
from latentmark.metrics import PSNR_CAP_DB, bit_accuracy, psnr, ssim, word_accuracy


def _unit_image(rng, h=32, w=32):
    return from_unit(torch.from_numpy(rng.random((3, h, w))).float())


# --- PSNR ---------------------------------------------------------------------


def test_psnr_identical_capped():
    a = _unit_image(np.random.default_rng(0))
    assert psnr(a, a) == PSNR_CAP_DB


@pytest.mark.parametrize("offset,expected", [(0.1, 20.0), (0.01, 40.0)])
def test_psnr_constant_offset_closed_form(offset, expected):
    rng = np.random.default_rng(1)
    base = torch.from_numpy(rng.random((3, 32, 32)) * 0.5 + 0.2)  # no clipping after +offset
    a = from_unit(base.float())
    b = from_unit((base + offset).float())
    assert abs(psnr(a, b) - expected) < 1e-5
    assert abs(psnr(b, a) - expected) < 1e-5  # symmetric


def test_psnr_shape_mismatch():
    a = _unit_image(np.random.default_rng(2))
    with pytest.raises(ValueError):
        psnr(a, a[:, :16, :16])


# --- SSIM ---------------------------------------------------------------------


def test_ssim_identical_is_one():
    a = _unit_image(np.random.default_rng(3))
    assert ssim(a, a) == pytest.approx(1.0, abs=1e-12)


def test_ssim_symmetry():
    rng = np.random.default_rng(4)
    a, b = _unit_image(rng), _unit_image(rng)
    assert abs(ssim(a, b) - ssim(b, a)) < 1e-9


def test_ssim_anticorrelated_negative():
    rng = np.random.default_rng(5)
    texture = torch.from_numpy(rng.choice([-0.8, 0.8], size=(3, 32, 32))).float()
    assert ssim(texture, -texture) < 0


def test_ssim_matches_reference_implementation():
    skimage_metrics = pytest.importorskip("skimage.metrics")
    rng = np.random.default_rng(6)
    a = rng.random((32, 32, 3))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    ref = skimage_metrics.structural_similarity(
        a, b, channel_axis=2, data_range=1.0,
        gaussian_weights=True, sigma=1.5, use_sample_covariance=False,
    )
    ours = ssim(
        from_unit(torch.from_numpy(a.transpose(2, 0, 1)).float()),
        from_unit(torch.from_numpy(b.transpose(2, 0, 1)).float()),
    )
    assert abs(ours - ref) < 1e-4


def test_ssim_window_too_large():
    a = _unit_image(np.random.default_rng(7), h=8, w=8)
    with pytest.raises(ValueError):
        ssim(a, a)


# --- YUV ------------------------------------------------------------------------


def test_yuv_black_white_red():
    px = torch.tensor([[[0.0]], [[0.0]], [[0.0]]])
    assert torch.allclose(rgb_to_yuv(px), torch.zeros(3, 1, 1), atol=1e-8)

    white = torch.ones(3, 1, 1)
    yuv = rgb_to_yuv(white)
    assert yuv[0, 0, 0].item() == pytest.approx(1.0, abs=1e-7)
    assert abs(yuv[1, 0, 0].item()) < 1e-7 and abs(yuv[2, 0, 0].item()) < 1e-7

    red = torch.tensor([[[1.0]], [[0.0]], [[0.0]]])
    yuv = rgb_to_yuv(red)
    assert yuv[0, 0, 0].item() == pytest.approx(0.299, abs=1e-6)
    assert yuv[1, 0, 0].item() == pytest.approx(0.492 * (0 - 0.299), abs=1e-6)
    assert yuv[2, 0, 0].item() == pytest.approx(0.877 * (1 - 0.299), abs=1e-6)


def test_yuv_linearity_and_gray():
    rng = np.random.default_rng(8)
    x = torch.from_numpy(rng.random((3, 8, 8))).float()
    for lam in (0.0, 0.25, 0.9):
        assert torch.allclose(rgb_to_yuv(lam * x), lam * rgb_to_yuv(x), atol=1e-6)
    gray = torch.full((3, 4, 4), 0.37)
    yuv = rgb_to_yuv(gray)
    assert torch.allclose(yuv[1:], torch.zeros(2, 4, 4), atol=1e-7)


def test_yuv_inverse():
    rng = np.random.default_rng(9)
    x = torch.from_numpy(rng.random((3, 8, 8)))
    assert torch.allclose(yuv_to_rgb(rgb_to_yuv(x)), x, atol=1e-12)


# --- bit / word accuracy ---------------------------------------------------------


def test_bit_accuracy_values():
    truth = np.zeros(100, dtype=np.uint8)
    assert bit_accuracy(truth, truth) == 1.0
    assert bit_accuracy(1 - truth, truth) == 0.0
    pred = truth.copy()
    pred[:6] ^= 1
    assert bit_accuracy(pred, truth) == pytest.approx(0.94)


def test_bit_accuracy_complement_identity():
    rng = np.random.default_rng(10)
    pred = rng.integers(0, 2, 173, dtype=np.uint8)
    truth = rng.integers(0, 2, 173, dtype=np.uint8)
    assert bit_accuracy(pred, truth) + bit_accuracy(1 - pred, truth) == pytest.approx(1.0)


def test_bit_accuracy_length_mismatch():
    with pytest.raises(ValueError):
        bit_accuracy([0, 1], [0, 1, 0])


def test_word_accuracy_strict_boundary():
    truth = np.zeros(100, dtype=np.uint8)
    pred19 = truth.copy(); pred19[:19] ^= 1
    pred20 = truth.copy(); pred20[:20] ^= 1
    assert word_accuracy(pred19, truth) == 1
    assert word_accuracy(pred20, truth) == 0
    assert word_accuracy(truth, truth) == 1


def test_word_accuracy_monotone():
    truth = np.zeros(50, dtype=np.uint8)
    last = 1
    for nerr in range(0, 51, 5):
        pred = truth.copy()
        pred[:nerr] ^= 1
        value = word_accuracy(pred, truth)
        assert value <= last
        last = value
