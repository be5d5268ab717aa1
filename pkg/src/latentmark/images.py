"""Image tensors, value ranges, and PNG I/O.

Canonical in-memory form: torch.float32, shape (3, H, W) or (B, 3, H, W),
values in [-1, 1]. Files hold 8-bit RGB. Metrics and corruptions work on the
[0, 1] "unit" scale internally; the helpers below convert between the two.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from PIL import Image

MIN_SIZE = 16

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


def to_unit(img: torch.Tensor) -> torch.Tensor:
    """Canonical [-1, 1] -> working [0, 1]."""
    return (img + 1.0) * 0.5


def from_unit(img: torch.Tensor) -> torch.Tensor:
    return img * 2.0 - 1.0


def check_canonical(img: torch.Tensor, name: str = "image", min_size: int = MIN_SIZE) -> torch.Tensor:
    if img.dim() not in (3, 4) or img.shape[-3] != 3:
        raise ValueError(f"{name}: expected (B,3,H,W) or (3,H,W), got {tuple(img.shape)}")
    if img.shape[-2] < min_size or img.shape[-1] < min_size:
        raise ValueError(f"{name}: spatial dims must be >= {min_size}")
    return img


def load_image(path: str | Path, size: int | None = None) -> torch.Tensor:
    """Read an image file into canonical form, optionally bilinear-resized."""
    with Image.open(path) as im:
        im = im.convert("RGB")
        if size is not None and im.size != (size, size):
            im = im.resize((size, size), Image.BILINEAR)
        arr = np.asarray(im, dtype=np.float32) / 255.0
    return from_unit(torch.from_numpy(arr).permute(2, 0, 1).contiguous())


def save_image(img: torch.Tensor, path: str | Path) -> None:
    """Write a canonical (3, H, W) tensor as 8-bit PNG."""
    if img.dim() != 3:
        raise ValueError(f"expected a single (3,H,W) image, got {tuple(img.shape)}")
    unit = to_unit(img).clamp(0.0, 1.0)
    arr = (unit * 255.0).round().to(torch.uint8).permute(1, 2, 0).numpy()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(arr).save(path)


def list_images(folder: str | Path) -> list[Path]:
    paths = [
        p for p in sorted(Path(folder).rglob("*"))
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    ]
    return paths


def resize(img: torch.Tensor, size: int) -> torch.Tensor:
    """Bilinear resize of canonical tensors to size x size."""
    squeeze = img.dim() == 3
    batch = img.unsqueeze(0) if squeeze else img
    out = torch.nn.functional.interpolate(
        batch, size=(size, size), mode="bilinear", align_corners=False
    )
    return out.squeeze(0) if squeeze else out


class ImageFolder:
    """Deterministic image-folder reader with an in-memory uint8 cache."""

    def __init__(self, folder: str | Path, size: int, limit: int | None = None):
        self.paths = list_images(folder)
        if limit:
            self.paths = self.paths[:limit]
        if not self.paths:
            raise ValueError(f"no images found under {folder}")
        self.size = size
        self._cache: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.paths)

    def preload(self) -> "ImageFolder":
        if self._cache is None:
            stack = np.empty((len(self.paths), 3, self.size, self.size), dtype=np.uint8)
            for i, p in enumerate(self.paths):
                with Image.open(p) as im:
                    im = im.convert("RGB")
                    if im.size != (self.size, self.size):
                        im = im.resize((self.size, self.size), Image.BILINEAR)
                    stack[i] = np.asarray(im, dtype=np.uint8).transpose(2, 0, 1)
            self._cache = stack
        return self

    def batch(self, indices) -> torch.Tensor:
        """Canonical float batch for the given indices."""
        if self._cache is not None:
            arr = self._cache[np.asarray(indices)]
            return from_unit(torch.from_numpy(arr.astype(np.float32) / 255.0))
        return torch.stack([load_image(self.paths[i], self.size) for i in indices])
