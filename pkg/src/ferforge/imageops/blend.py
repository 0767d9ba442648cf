"""Alpha blending and the mask family used around paste boundaries."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .image import Image


class FaceBox(NamedTuple):
    """Axis-aligned face rectangle in pixels."""

    x: int
    y: int
    w: int
    h: int


def alpha_blend(fg: Image, bg: Image, alpha: np.ndarray) -> Image:
    """Per-pixel convex combination: alpha * fg + (1 - alpha) * bg.

    Computed in float64 and rounded once, so every output sample stays
    inside [min(fg, bg), max(fg, bg)] even after the float32 cast.
    """
    if fg.data.shape != bg.data.shape:
        raise ValueError("foreground and background dimensions differ")
    if fg.space != bg.space:
        raise ValueError("foreground and background color spaces differ")
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != fg.data.shape[:2]:
        raise ValueError("alpha mask shape does not match images")
    if alpha.min() < 0.0 or alpha.max() > 1.0:
        raise ValueError("alpha values must lie in [0,1]")
    a = alpha[..., None]
    out = a * fg.data.astype(np.float64) + (1.0 - a) * bg.data.astype(np.float64)
    return Image(out.astype(np.float32), fg.space)


def _check_box(shape: tuple[int, ...], box: FaceBox) -> None:
    h, w = shape[0], shape[1]
    if box.w <= 0 or box.h <= 0:
        raise ValueError(f"degenerate box {box}")
    if box.x < 0 or box.y < 0 or box.x + box.w > w or box.y + box.h > h:
        raise ValueError(f"box {box} exceeds image bounds {w}x{h}")


def feather_mask(
    shape: tuple[int, int], box: FaceBox, feather_width: int = 12
) -> np.ndarray:
    """Soft-border alpha mask: 1 deep inside the box, linear ramp to 0 at
    the box edge, 0 everywhere outside.

    Alpha is a function of a pixel center's distance to the nearest box
    edge, so it is monotonically non-increasing along any outward ray.
    feather_width == 0 degenerates to a hard binary mask.
    """
    _check_box(shape, box)
    if feather_width < 0:
        raise ValueError("feather_width must be >= 0")
    if 2 * feather_width > min(box.w, box.h):
        raise ValueError(
            f"feather width {feather_width} wider than half the box side {min(box.w, box.h)}"
        )
    height, width = shape
    cx = np.arange(width, dtype=np.float64) + 0.5
    cy = np.arange(height, dtype=np.float64) + 0.5
    dx = np.minimum(cx - box.x, box.x + box.w - cx)
    dy = np.minimum(cy - box.y, box.y + box.h - cy)
    dist = np.minimum(dy[:, None], dx[None, :])
    if feather_width == 0:
        alpha = (dist > 0.0).astype(np.float64)
    else:
        alpha = np.clip(dist / float(feather_width), 0.0, 1.0)
        alpha[dist <= 0.0] = 0.0
    return alpha.astype(np.float32)


def ring_mask(shape: tuple[int, int], box: FaceBox, width: int = 30) -> np.ndarray:
    """Rectangular band straddling the box boundary: width/2 inside, width/2
    outside. Returns a boolean mask."""
    _check_box(shape, box)
    if width < 0:
        raise ValueError("ring width must be >= 0")
    height, img_w = shape
    half = width / 2.0
    if box.x - half < 0 or box.y - half < 0 or box.x + box.w + half > img_w or box.y + box.h + half > height:
        raise ValueError(f"ring of width {width} around box {box} exceeds image bounds")
    if width == 0:
        return np.zeros(shape, dtype=bool)
    cx = np.arange(img_w, dtype=np.float64) + 0.5
    cy = np.arange(height, dtype=np.float64) + 0.5

    def inside(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
        ix = (cx >= x0) & (cx < x1)
        iy = (cy >= y0) & (cy < y1)
        return iy[:, None] & ix[None, :]

    outer = inside(box.x - half, box.y - half, box.x + box.w + half, box.y + box.h + half)
    inner = inside(box.x + half, box.y + half, box.x + box.w - half, box.y + box.h - half)
    return outer & ~inner
