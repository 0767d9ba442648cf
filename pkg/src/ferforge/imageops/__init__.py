"""Pixel-level primitives: color space conversion, color transfer, blending,
masks, blur, noise, and classical augmentation."""

from .augment import (
    AugmentPolicy,
    TransformParams,
    affine_matrix,
    apply_transform,
    augment,
    draw_params,
    photometric_jitter,
    warp_affine,
)
from .blend import FaceBox, alpha_blend, feather_mask, ring_mask
from .colorspace import to_lab, to_srgb
from .filters import add_noise, gaussian_blur, gaussian_kernel
from .image import SPACE_LAB, SPACE_SRGB, Image, load_image, save_image
from .transfer import RegionStats, color_transfer, region_stats

__all__ = [
    "AugmentPolicy",
    "TransformParams",
    "affine_matrix",
    "apply_transform",
    "augment",
    "draw_params",
    "photometric_jitter",
    "warp_affine",
    "FaceBox",
    "alpha_blend",
    "feather_mask",
    "ring_mask",
    "to_lab",
    "to_srgb",
    "add_noise",
    "gaussian_blur",
    "gaussian_kernel",
    "SPACE_LAB",
    "SPACE_SRGB",
    "Image",
    "load_image",
    "save_image",
    "RegionStats",
    "color_transfer",
    "region_stats",
]
