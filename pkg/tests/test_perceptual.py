import numpy as np
import pytest
import torch

from latentmark.data import render_scene
from latentmark.images import from_unit
from latentmark.perceptual import FeatureNet, PerceptualDistance


@pytest.fixture(scope="module")
def dist():
    torch.manual_seed(3)
    return PerceptualDistance(FeatureNet())


def _img(seed=0, size=32):
    rng = np.random.default_rng(seed)
    return from_unit(torch.from_numpy(rng.random((3, size, size))).float())


def test_zero_at_identity(dist):
    a = _img(0)
    assert dist(a, a).item() == 0.0


def test_nonnegative_and_symmetric(dist):
    a, b = _img(1), _img(2)
    d1, d2 = dist(a, b).item(), dist(b, a).item()
    assert d1 > 0
    assert d1 == pytest.approx(d2, rel=1e-6)


def test_shape_mismatch_rejected(dist):
    with pytest.raises(ValueError):
        dist(_img(3, 32), _img(4, 64))


def test_gradient_matches_finite_differences(dist):
    dd = dist.to(torch.float64)
    base = _img(5, 16).double()
    ref = _img(6, 16).double()
    leaf = base.clone().requires_grad_(True)
    (grad,) = torch.autograd.grad(dd(leaf, ref), leaf)
    eps = 1e-6
    rng = np.random.default_rng(7)
    for _ in range(10):
        coord = tuple(rng.integers(0, s) for s in base.shape)
        hi = base.clone(); hi[coord] += eps
        lo = base.clone(); lo[coord] -= eps
        fd = (dd(hi, ref) - dd(lo, ref)).item() / (2 * eps)
        ad = grad[coord].item()
        assert abs(fd - ad) <= 1e-3 * max(abs(fd), abs(ad), 1e-5), (coord, fd, ad)


def test_differentiable_wrt_both_inputs(dist):
    a = _img(8).requires_grad_(True)
    b = _img(9).requires_grad_(True)
    dist(a, b).backward()
    assert a.grad is not None and b.grad is not None
    assert torch.isfinite(a.grad).all() and torch.isfinite(b.grad).all()


def test_save_load_roundtrip(dist, tmp_path):
    path = tmp_path / "p.pt"
    dist.save(path)
    again = PerceptualDistance.load(path)
    a, b = _img(10), _img(11)
    assert again(a, b).item() == pytest.approx(dist(a, b).item(), rel=1e-7)


def _blur(x, sigma=1.5):
    from latentmark.corruption import _gaussian_blur2d
    return _gaussian_blur2d(x.unsqueeze(0), sigma).squeeze(0)


def _shuffle_patches(x, patch=8, seed=0):
    c, h, w = x.shape
    tiles = [
        x[:, i : i + patch, j : j + patch]
        for i in range(0, h, patch)
        for j in range(0, w, patch)
    ]
    order = np.random.default_rng(seed).permutation(len(tiles))
    rows = []
    per_row = w // patch
    for r in range(h // patch):
        rows.append(torch.cat([tiles[order[r * per_row + k]] for k in range(per_row)], dim=2))
    return torch.cat(rows, dim=1)


def test_trained_backend_orders_blur_below_patch_shuffle(perceptual):
    # structure-destroying edits must cost more than mild smoothing
    wins = 0
    for i in range(6):
        img = from_unit(torch.from_numpy(render_scene(91, i, 64).transpose(2, 0, 1)).float())
        d_blur = perceptual(img, _blur(img)).item()
        d_shuffle = perceptual(img, _shuffle_patches(img, seed=i)).item()
        wins += d_blur < d_shuffle
    assert wins >= 5
