"""Separable Gaussian blur and seeded additive noise."""

from __future__ import annotations

import numpy as np

from ..seeding import rng_for
from .image import SPACE_SRGB, Image


def gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    """Normalized sampled-Gaussian 1-D kernel. sigma <= 0 yields a delta."""
    if size < 1 or size % 2 == 0:
        raise ValueError(f"kernel size must be odd and >= 1, got {size}")
    radius = size // 2
    if sigma <= 0.0:
        kernel = np.zeros(size, dtype=np.float64)
        kernel[radius] = 1.0
        return kernel
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    return kernel / kernel.sum()


def _convolve_axis(data: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    if radius == 0:
        return data
    pad = [(0, 0)] * data.ndim
    pad[axis] = (radius, radius)
    # Half-sample symmetric reflection: preserves the global mean exactly
    # for any normalized symmetric kernel.
    padded = np.pad(data, pad, mode="symmetric")
    windows = np.moveaxis(
        np.lib.stride_tricks.sliding_window_view(padded, len(kernel), axis=axis), -1, 0
    )
    return np.tensordot(kernel, windows, axes=(0, 0))


def gaussian_blur(image: Image, kernel_size: int, sigma: float) -> Image:
    """Separable Gaussian convolution with reflect padding at borders."""
    kernel = gaussian_kernel(kernel_size, sigma)
    data = image.data.astype(np.float64)
    data = _convolve_axis(data, kernel, axis=0)
    data = _convolve_axis(data, kernel, axis=1)
    if image.space == SPACE_SRGB:
        data = np.clip(data, 0.0, 1.0)
    return Image(data.astype(np.float32), image.space)


def add_noise(image: Image, sigma: float, seed: int) -> Image:
    """Clamped additive Gaussian noise; identical seeds give identical output."""
    image.require_space(SPACE_SRGB)
    if sigma < 0.0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return image
    rng = rng_for(seed, "noise")
    noisy = image.data.astype(np.float64) + rng.normal(0.0, sigma, size=image.data.shape)
    return Image(np.clip(noisy, 0.0, 1.0).astype(np.float32), SPACE_SRGB)
