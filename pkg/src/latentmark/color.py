"""BT.601 full-range RGB<->YUV with analog chroma scaling.

Both transforms are pure matrix multiplies (no offset, no clamp), so they are
linear and differentiable everywhere. Values are interpreted on whatever scale
they arrive in; the usual callers pass the [0, 1] working scale.
"""

from __future__ import annotations

import numpy as np
import torch

_KR, _KG, _KB = 0.299, 0.587, 0.114
_U_SCALE, _V_SCALE = 0.492, 0.877

RGB_TO_YUV = np.array(
    [
        [_KR, _KG, _KB],
        [-_U_SCALE * _KR, -_U_SCALE * _KG, _U_SCALE * (1.0 - _KB)],
        [_V_SCALE * (1.0 - _KR), -_V_SCALE * _KG, -_V_SCALE * _KB],
    ],
    dtype=np.float64,
)
YUV_TO_RGB = np.linalg.inv(RGB_TO_YUV)


def _apply_matrix(img: torch.Tensor, mat: np.ndarray) -> torch.Tensor:
    if img.shape[-3] != 3:
        raise ValueError(f"expected 3 channels in dim -3, got shape {tuple(img.shape)}")
    m = torch.as_tensor(mat, dtype=img.dtype, device=img.device)
    return torch.einsum("oc,...chw->...ohw", m, img)


def rgb_to_yuv(img: torch.Tensor) -> torch.Tensor:
    """Map (..., 3, H, W) RGB to YUV. Linear: gray maps to (Y, 0, 0)."""
    return _apply_matrix(img, RGB_TO_YUV)


def yuv_to_rgb(img: torch.Tensor) -> torch.Tensor:
    return _apply_matrix(img, YUV_TO_RGB)


def rgb_to_yuv_array(img: np.ndarray) -> np.ndarray:
    """HWC float array variant used by the frequency-domain baseline."""
    return img @ RGB_TO_YUV.T


def yuv_to_rgb_array(img: np.ndarray) -> np.ndarray:
    return img @ YUV_TO_RGB.T
