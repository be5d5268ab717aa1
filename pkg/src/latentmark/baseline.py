"""Frequency-domain watermark baseline.

Each secret bit is written into the U chroma channel: 1-level Haar DWT, the
LL subband is tiled into small blocks, each block is DCT-transformed and
SVD-decomposed, and the leading singular value is snapped to the nearest
multiple of `quant_step` whose parity encodes the bit. Bits repeat cyclically
over the available blocks; extraction votes over the repeats.
"""

from __future__ import annotations

import inspect
from dataclasses import dataclass

import numpy as np
import torch
from scipy.fft import dctn, idctn

from .color import rgb_to_yuv_array, yuv_to_rgb_array
from .images import check_canonical, from_unit, to_unit
from .payload import _as_bits


@dataclass
class FreqEmbedConfig:
    block_size: int = 4
    quant_step: float = 36.0  # on the 0..255 scale
    wavelet: str = "haar"
    channel: str = "u"

    def __post_init__(self):
        if self.wavelet != "haar" or self.channel != "u":
            raise ValueError("only the 1-level Haar / U-channel variant is implemented")
        if self.block_size < 2 or self.quant_step <= 0:
            raise ValueError("invalid block size or quantization step")


def _haar_dwt2(x: np.ndarray):
    a, b = x[0::2, 0::2], x[0::2, 1::2]
    c, d = x[1::2, 0::2], x[1::2, 1::2]
    ll = (a + b + c + d) / 2.0
    lh = (a - b + c - d) / 2.0
    hl = (a + b - c - d) / 2.0
    hh = (a - b - c + d) / 2.0
    return ll, lh, hl, hh


def _haar_idwt2(ll, lh, hl, hh) -> np.ndarray:
    h2, w2 = ll.shape
    out = np.empty((h2 * 2, w2 * 2), dtype=ll.dtype)
    out[0::2, 0::2] = (ll + lh + hl + hh) / 2.0
    out[0::2, 1::2] = (ll - lh + hl - hh) / 2.0
    out[1::2, 0::2] = (ll + lh - hl - hh) / 2.0
    out[1::2, 1::2] = (ll - lh - hl + hh) / 2.0
    return out


def _nearest_parity_multiple(value: float, step: float, parity: int, floor: float) -> float:
    m = int(np.round(value / step))
    if m % 2 != parity:
        lower, upper = m - 1, m + 1
        m = lower if abs(value - lower * step) <= abs(value - upper * step) else upper
    # the leading singular value must stay >= the second one, or the SVD of the
    # reconstructed block reorders and the parity cell is read from the wrong value
    lowest = int(np.ceil(floor / step - 1e-12))
    if lowest % 2 != parity:
        lowest += 1
    m = max(m, lowest, parity)
    return m * step


def _blocks_capacity(shape: tuple[int, int], block: int) -> int:
    return (shape[0] // block) * (shape[1] // block)


def quantize_singular_value(block: np.ndarray, bit: int, quant_step: float) -> np.ndarray:
    """Snap the block's leading singular value (in DCT space) to the bit's lattice."""
    coefs = dctn(block, norm="ortho")
    u, s, vt = np.linalg.svd(coefs)
    s[0] = _nearest_parity_multiple(s[0], quant_step, int(bit), s[1] if len(s) > 1 else 0.0)
    return idctn(u @ np.diag(s) @ vt, norm="ortho")


def read_singular_value(block: np.ndarray, quant_step: float) -> int:
    coefs = dctn(block, norm="ortho")
    s = np.linalg.svd(coefs, compute_uv=False)
    return int(round(s[0] / quant_step)) % 2


def dwtdctsvd_embed(cover: torch.Tensor, secret, cfg: FreqEmbedConfig | None = None) -> torch.Tensor:
    cfg = cfg or FreqEmbedConfig()
    check_canonical(cover, "cover")
    if cover.dim() != 3:
        raise ValueError("baseline embeds one image at a time")
    bits = _as_bits(secret)
    rgb = to_unit(cover).permute(1, 2, 0).numpy().astype(np.float64) * 255.0
    h, w = rgb.shape[:2]
    h4, w4 = h // 4 * 4, w // 4 * 4  # 1 DWT level + block tiling
    yuv = rgb_to_yuv_array(rgb)
    u_chan = yuv[:h4, :w4, 1]
    ll, lh, hl, hh = _haar_dwt2(u_chan)
    blk = cfg.block_size
    capacity = _blocks_capacity(ll.shape, blk)
    if capacity < bits.size:
        raise ValueError(
            f"image holds {capacity} blocks, cannot embed {bits.size} bits"
        )
    count = 0
    for i in range(ll.shape[0] // blk):
        for j in range(ll.shape[1] // blk):
            bit = bits[count % bits.size]
            sl = np.s_[i * blk : (i + 1) * blk, j * blk : (j + 1) * blk]
            ll[sl] = quantize_singular_value(ll[sl], bit, cfg.quant_step)
            count += 1
    yuv[:h4, :w4, 1] = _haar_idwt2(ll, lh, hl, hh)
    out = yuv_to_rgb_array(yuv) / 255.0
    stego = torch.from_numpy(out.transpose(2, 0, 1)).to(torch.float32)
    return from_unit(stego.clamp(0.0, 1.0))


def dwtdctsvd_extract(stego: torch.Tensor, length: int, cfg: FreqEmbedConfig | None = None) -> np.ndarray:
    cfg = cfg or FreqEmbedConfig()
    check_canonical(stego, "stego")
    if stego.dim() != 3:
        raise ValueError("baseline extracts one image at a time")
    if length < 1:
        raise ValueError("length must be >= 1")
    rgb = to_unit(stego).permute(1, 2, 0).numpy().astype(np.float64) * 255.0
    h, w = rgb.shape[:2]
    h4, w4 = h // 4 * 4, w // 4 * 4
    yuv = rgb_to_yuv_array(rgb)
    ll, _, _, _ = _haar_dwt2(yuv[:h4, :w4, 1])
    blk = cfg.block_size
    capacity = _blocks_capacity(ll.shape, blk)
    if capacity < length:
        raise ValueError(f"image holds {capacity} blocks, cannot carry {length} bits")
    votes = np.zeros(length)
    counts = np.zeros(length)
    count = 0
    for i in range(ll.shape[0] // blk):
        for j in range(ll.shape[1] // blk):
            sl = np.s_[i * blk : (i + 1) * blk, j * blk : (j + 1) * blk]
            votes[count % length] += read_singular_value(ll[sl], cfg.quant_step)
            counts[count % length] += 1
            count += 1
    return (votes / counts >= 0.5).astype(np.uint8)


class ParamsMixin:
    """Constructor-argument introspection in the sklearn get_params style."""

    def get_params(self, deep: bool = True) -> dict:
        names = [
            p.name
            for p in inspect.signature(type(self).__init__).parameters.values()
            if p.name != "self" and p.kind is not inspect.Parameter.VAR_KEYWORD
        ]
        return {name: getattr(self, name) for name in names}

    def set_params(self, **params):
        valid = self.get_params()
        for key, value in params.items():
            if key not in valid:
                raise ValueError(f"unknown parameter {key!r} for {type(self).__name__}")
            setattr(self, key, value)
        return self

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v!r}" for k, v in self.get_params().items())
        return f"{type(self).__name__}({args})"


class DwtDctSvdWatermarker(ParamsMixin):
    """Stateless embed/extract front for the frequency-domain baseline."""

    def __init__(self, block_size: int = 4, quant_step: float = 36.0):
        self.block_size = block_size
        self.quant_step = quant_step

    def _cfg(self) -> FreqEmbedConfig:
        return FreqEmbedConfig(block_size=self.block_size, quant_step=self.quant_step)

    def embed(self, cover: torch.Tensor, secret) -> torch.Tensor:
        return dwtdctsvd_embed(cover, secret, self._cfg())

    def extract(self, stego: torch.Tensor, length: int) -> np.ndarray:
        return dwtdctsvd_extract(stego, length, self._cfg())
