"""Mean/variance color transfer between masked Lab regions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import SPACE_LAB, Image


@dataclass(frozen=True)
class RegionStats:
    """Per-channel Lab mean and standard deviation of a masked region."""

    mean: np.ndarray
    std: np.ndarray


def region_stats(image: Image, mask: np.ndarray) -> RegionStats:
    image.require_space(SPACE_LAB)
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != image.data.shape[:2]:
        raise ValueError("mask shape does not match image")
    if not mask.any():
        raise ValueError("empty mask")
    pixels = image.data[mask].astype(np.float64)
    return RegionStats(mean=pixels.mean(axis=0), std=pixels.std(axis=0))


def color_transfer(
    edit: Image,
    edit_mask: np.ndarray,
    context: Image,
    context_mask: np.ndarray,
) -> Image:
    """Affine-map the edited region's channel stats onto the context's.

    Per channel: out = (in - mean_edit) * (std_ctx / std_edit) + mean_ctx.
    A zero-variance edit channel collapses to the constant context mean.
    The context must have positive variance in every channel.
    """
    stats_e = region_stats(edit, edit_mask)
    stats_c = region_stats(context, context_mask)
    if np.any(stats_c.std == 0.0):
        raise ValueError("context region has zero variance in some channel")

    mask = np.asarray(edit_mask, dtype=bool)
    data = edit.data.astype(np.float64).copy()
    region = data[mask]
    scale = np.where(stats_e.std > 0.0, stats_c.std / np.where(stats_e.std > 0.0, stats_e.std, 1.0), 0.0)
    data[mask] = (region - stats_e.mean) * scale + stats_c.mean
    return Image(data.astype(np.float32), SPACE_LAB)
