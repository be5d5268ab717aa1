import sys
from pathlib import Path

import pytest
import torch

sys.path.insert(0, str(Path(__file__).resolve().parent))

import _pipeline  # noqa: E402

torch.set_num_threads(2)


@pytest.fixture(scope="session")
def desk_dirs():
    return _pipeline.ensure_dataset()


@pytest.fixture(scope="session")
def perceptual():
    from latentmark.perceptual import PerceptualDistance

    return PerceptualDistance.load(_pipeline.ensure_perceptual())


@pytest.fixture(scope="session")
def desk_ae():
    from latentmark.autoencoder import FrozenAutoencoder

    return FrozenAutoencoder.load(_pipeline.ensure_autoencoder())


@pytest.fixture(scope="session")
def desk_model():
    from latentmark.training import StegoModel

    return StegoModel.load(_pipeline.ensure_stego(32))


@pytest.fixture()
def scenes():
    """Small stack of canonical test images (8, 3, 64, 64)."""
    import numpy as np
    from latentmark.data import render_scene
    from latentmark.images import from_unit

    arr = np.stack([render_scene(77, i, 64).transpose(2, 0, 1) for i in range(8)])
    return from_unit(torch.from_numpy(arr).float())
