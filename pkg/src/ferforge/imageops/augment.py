"""Seeded classical augmentation: one composed affine warp plus photometric
jitter, reproducible regardless of execution order."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..seeding import rng_for
from .image import SPACE_SRGB, Image

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class AugmentPolicy:
    """Sampling ranges for the classical augmentation pipeline."""

    hflip_prob: float = 0.5
    rotation_deg: float = 10.0
    shear_deg: float = 10.0
    translate_frac: float = 0.10
    scale_range: tuple[float, float] = (0.85, 1.15)
    brightness: float = 0.2
    contrast: float = 0.2
    saturation: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 <= self.hflip_prob <= 1.0:
            raise ValueError("hflip_prob must be in [0,1]")
        if self.scale_range[0] > self.scale_range[1] or self.scale_range[0] <= 0:
            raise ValueError(f"bad scale range {self.scale_range}")


@dataclass(frozen=True)
class TransformParams:
    """One concrete draw from an AugmentPolicy."""

    hflip: bool
    angle_deg: float
    shear_deg: float
    translate: tuple[float, float]
    scale: float
    brightness: float
    contrast: float
    saturation: float


def draw_params(policy: AugmentPolicy, rng: np.random.Generator) -> TransformParams:
    # Draw order is part of the determinism contract; do not reorder.
    hflip = bool(rng.uniform() < policy.hflip_prob)
    angle = float(rng.uniform(-policy.rotation_deg, policy.rotation_deg))
    shear = float(rng.uniform(-policy.shear_deg, policy.shear_deg))
    tx = float(rng.uniform(-policy.translate_frac, policy.translate_frac))
    ty = float(rng.uniform(-policy.translate_frac, policy.translate_frac))
    scale = float(rng.uniform(policy.scale_range[0], policy.scale_range[1]))
    bright = float(rng.uniform(max(0.0, 1.0 - policy.brightness), 1.0 + policy.brightness))
    contrast = float(rng.uniform(max(0.0, 1.0 - policy.contrast), 1.0 + policy.contrast))
    sat = float(rng.uniform(max(0.0, 1.0 - policy.saturation), 1.0 + policy.saturation))
    return TransformParams(hflip, angle, shear, (tx, ty), scale, bright, contrast, sat)


def affine_matrix(params: TransformParams, width: int, height: int) -> np.ndarray:
    """Forward 3x3 matrix in index coordinates (x = column, y = row),
    composed about the image center: flip, rotate, shear, scale, translate."""
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    theta = math.radians(params.angle_deg)
    sh = math.tan(math.radians(params.shear_deg))

    def mat(rows: list[list[float]]) -> np.ndarray:
        return np.array(rows, dtype=np.float64)

    center = mat([[1, 0, cx], [0, 1, cy], [0, 0, 1]])
    uncenter = mat([[1, 0, -cx], [0, 1, -cy], [0, 0, 1]])
    flip = mat([[-1 if params.hflip else 1, 0, 0], [0, 1, 0], [0, 0, 1]])
    rot = mat(
        [
            [math.cos(theta), -math.sin(theta), 0],
            [math.sin(theta), math.cos(theta), 0],
            [0, 0, 1],
        ]
    )
    shear = mat([[1, sh, 0], [0, 1, 0], [0, 0, 1]])
    scale = mat([[params.scale, 0, 0], [0, params.scale, 0], [0, 0, 1]])
    translate = mat(
        [[1, 0, params.translate[0] * width], [0, 1, params.translate[1] * height], [0, 0, 1]]
    )
    return center @ translate @ scale @ shear @ rot @ flip @ uncenter


def _reflect_index(idx: np.ndarray, n: int) -> np.ndarray:
    period = 2 * n
    idx = np.mod(idx, period)
    return np.where(idx >= n, period - 1 - idx, idx).astype(np.intp)


def warp_affine(image: Image, matrix: np.ndarray) -> Image:
    """Inverse-map bilinear warp with reflect padding."""
    h, w = image.data.shape[:2]
    inv = np.linalg.inv(matrix)
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    src_x = inv[0, 0] * xs + inv[0, 1] * ys + inv[0, 2]
    src_y = inv[1, 0] * xs + inv[1, 1] * ys + inv[1, 2]

    x0 = np.floor(src_x)
    y0 = np.floor(src_y)
    wx = src_x - x0
    wy = src_y - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    data = image.data.astype(np.float64)
    gx0 = _reflect_index(x0, w)
    gx1 = _reflect_index(x0 + 1, w)
    gy0 = _reflect_index(y0, h)
    gy1 = _reflect_index(y0 + 1, h)

    wx = wx[..., None]
    wy = wy[..., None]
    top = data[gy0, gx0] * (1.0 - wx) + data[gy0, gx1] * wx
    bottom = data[gy1, gx0] * (1.0 - wx) + data[gy1, gx1] * wx
    out = top * (1.0 - wy) + bottom * wy
    if image.space == SPACE_SRGB:
        out = np.clip(out, 0.0, 1.0)
    return Image(out.astype(np.float32), image.space)


def photometric_jitter(image: Image, params: TransformParams) -> Image:
    image.require_space(SPACE_SRGB)
    data = image.data.astype(np.float64)
    # Factors of exactly 1.0 are skipped so identity policies are bit-exact.
    if params.brightness != 1.0:
        data = data * params.brightness
    if params.contrast != 1.0:
        pivot = (data @ _LUMA).mean()
        data = (data - pivot) * params.contrast + pivot
    if params.saturation != 1.0:
        gray = (data @ _LUMA)[..., None]
        data = gray + (data - gray) * params.saturation
    return Image(np.clip(data, 0.0, 1.0).astype(np.float32), SPACE_SRGB)


def apply_transform(image: Image, params: TransformParams) -> Image:
    warped = warp_affine(image, affine_matrix(params, image.width, image.height))
    return photometric_jitter(warped, params)


def augment(image: Image, policy: AugmentPolicy, n: int) -> list[Image]:
    """Draw n augmented variants; draw i depends only on (policy.seed, i)."""
    image.require_space(SPACE_SRGB)
    outputs = []
    for i in range(n):
        rng = rng_for(policy.seed, "augment", i)
        outputs.append(apply_transform(image, draw_params(policy, rng)))
    return outputs
