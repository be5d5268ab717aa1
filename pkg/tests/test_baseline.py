import numpy as np
import pytest
import torch
from scipy.fft import dctn, idctn

from latentmark.baseline import (
    DwtDctSvdWatermarker,
    FreqEmbedConfig,
    _haar_dwt2,
    _haar_idwt2,
    dwtdctsvd_embed,
    dwtdctsvd_extract,
    quantize_singular_value,
)
from latentmark.color import rgb_to_yuv_array
from latentmark.data import render_scene
from latentmark.images import from_unit, to_unit
from latentmark.metrics import bit_accuracy, psnr
from latentmark.payload import random_secret


def _cover(i=0, size=64, lo=0.1, hi=0.9):
    arr = render_scene(55, i, size) * (hi - lo) + lo
    return from_unit(torch.from_numpy(arr.transpose(2, 0, 1)).float())


def test_haar_roundtrip():
    rng = np.random.default_rng(0)
    x = rng.random((16, 16))
    assert np.allclose(_haar_idwt2(*_haar_dwt2(x)), x, atol=1e-12)


def test_quantization_lattice_hand_case():
    # leading singular value 100, step 36, bit 1 -> nearest odd multiple 108
    coefs = np.diag([100.0, 3.0, 2.0, 1.0])
    block = idctn(coefs, norm="ortho")
    out = quantize_singular_value(block, 1, 36.0)
    s = np.linalg.svd(dctn(out, norm="ortho"), compute_uv=False)
    assert s[0] == pytest.approx(108.0, abs=1e-9)
    out0 = quantize_singular_value(block, 0, 36.0)
    s0 = np.linalg.svd(dctn(out0, norm="ortho"), compute_uv=False)
    assert s0[0] == pytest.approx(72.0, abs=1e-9)  # kept above the second singular value


def test_clean_roundtrip_exact():
    for i in range(20):
        cover = _cover(i)
        bits = random_secret(32, i)
        stego = dwtdctsvd_embed(cover, bits)
        assert bit_accuracy(dwtdctsvd_extract(stego, 32), bits) == 1.0


def test_stego_quality():
    scores = [psnr(dwtdctsvd_embed(_cover(i), random_secret(32, i)), _cover(i)) for i in range(10)]
    assert min(scores) >= 35.0


def test_only_u_channel_perturbed():
    cover = _cover(3, lo=0.2, hi=0.8)  # keep away from the gamut edges
    stego = dwtdctsvd_embed(cover, random_secret(32, 3))
    yuv_cover = rgb_to_yuv_array(to_unit(cover).permute(1, 2, 0).numpy() * 255.0)
    yuv_stego = rgb_to_yuv_array(to_unit(stego).permute(1, 2, 0).numpy() * 255.0)
    assert np.abs(yuv_cover[..., 0] - yuv_stego[..., 0]).max() <= 1.0  # Y within 1/255
    assert np.abs(yuv_cover[..., 2] - yuv_stego[..., 2]).max() <= 1.0  # V within 1/255
    assert np.abs(yuv_cover[..., 1] - yuv_stego[..., 1]).max() > 1.0   # U carries the mark


def test_capacity_errors():
    cover = _cover(4, size=16)  # LL is 8x8 -> 4 blocks
    with pytest.raises(ValueError):
        dwtdctsvd_embed(cover, random_secret(32, 0))
    with pytest.raises(ValueError):
        dwtdctsvd_extract(cover, 32)


def test_extraction_deterministic():
    cover = _cover(5)
    stego = dwtdctsvd_embed(cover, random_secret(32, 5))
    a = dwtdctsvd_extract(stego, 32)
    b = dwtdctsvd_extract(stego, 32)
    assert np.array_equal(a, b)


def test_degrades_under_heavy_jpeg():
    from latentmark.corruption import PerturbationSpec, apply_perturbation

    accs = []
    for i in range(8):
        cover = _cover(10 + i)
        bits = random_secret(32, i)
        stego = dwtdctsvd_embed(cover, bits)
        attacked = apply_perturbation(stego, PerturbationSpec("jpeg_compression", 3), seed=i)
        accs.append(bit_accuracy(dwtdctsvd_extract(attacked, 32), bits))
    assert float(np.mean(accs)) < 0.8  # fragile by design under strong compression


def test_config_validation():
    with pytest.raises(ValueError):
        FreqEmbedConfig(wavelet="db2")
    with pytest.raises(ValueError):
        FreqEmbedConfig(quant_step=-1)


def test_watermarker_params_api():
    wm = DwtDctSvdWatermarker()
    assert wm.get_params() == {"block_size": 4, "quant_step": 36.0}
    wm.set_params(quant_step=24.0)
    assert wm.get_params()["quant_step"] == 24.0
    with pytest.raises(ValueError):
        wm.set_params(bogus=1)
    cover = _cover(6)
    bits = random_secret(16, 6)
    assert bit_accuracy(wm.extract(wm.embed(cover, bits), 16), bits) == 1.0
