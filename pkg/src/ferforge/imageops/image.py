"""Float32 image container and 8-bit PNG/JPEG decode/encode."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

SPACE_SRGB = "srgb"
SPACE_LAB = "lab"


@dataclass(frozen=True)
class Image:
    """H x W x 3 float32 pixels tagged with their color space.

    sRGB data lives in [0,1]; Lab data uses the natural L*/a*/b* ranges.
    """

    data: np.ndarray = field(repr=False)
    space: str = SPACE_SRGB

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected H x W x 3 image, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite samples")
        if self.space not in (SPACE_SRGB, SPACE_LAB):
            raise ValueError(f"unknown color space {self.space!r}")
        if self.space == SPACE_SRGB and (arr.min() < 0.0 or arr.max() > 1.0):
            raise ValueError("sRGB samples must lie in [0,1]")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def require_space(self, space: str) -> None:
        if self.space != space:
            raise ValueError(f"expected a {space} image, got {self.space}")


def load_image(path: str | Path) -> Image:
    with PILImage.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0
    return Image(arr, SPACE_SRGB)


def save_image(image: Image, path: str | Path) -> None:
    image.require_space(SPACE_SRGB)
    arr = np.clip(np.rint(image.data.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)
    PILImage.fromarray(arr, mode="RGB").save(path)
