"""Shared fixtures: count tables for the published training sets and
procedural image/pool builders."""

from __future__ import annotations

import numpy as np
import pytest

from ferforge.core import ClassLabel, ImageRecord, Manifest
from ferforge.imageops import Image

# Published per-class training-set counts used as pool availabilities.
RAF_COUNTS = {
    "anger": 705,
    "disgust": 717,
    "fear": 281,
    "happiness": 4772,
    "neutral": 2524,
    "sadness": 1982,
    "surprise": 1290,
}
DCFACE_COUNTS = {
    "anger": 10_000,
    "disgust": 9_572,
    "fear": 2_039,
    "happiness": 10_000,
    "neutral": 10_000,
    "sadness": 10_000,
    "surprise": 10_000,
}

MIXED_SOURCES = (
    "dcface",
    "digiface",
    "emonet",
    "sd",
    "fineface_v1",
    "fineface_v2",
    "ganmut_f",
    "ganmut_v",
)


def make_pool(
    source: str,
    counts: dict[str, int],
    with_confidence: bool = False,
) -> Manifest:
    """Synthesize a manifest with the given per-class counts."""
    records = []
    for name, n in counts.items():
        label = ClassLabel.from_name(name)
        for i in range(n):
            conf = None
            if with_confidence:
                # Deterministic spread over (0.3, 1.0].
                conf = 0.3 + 0.7 * (((i * 2654435761) % 1000) + 1) / 1000.0
            records.append(
                ImageRecord(
                    image_id=f"{source}_{name}_{i:05d}",
                    path=f"{name}/{i:05d}.png",
                    source=source,
                    label=label,
                    confidence=conf,
                )
            )
    return records


def random_image(shape: tuple[int, int], seed: int) -> Image:
    rng = np.random.default_rng(seed)
    return Image(rng.uniform(0.0, 1.0, size=(*shape, 3)).astype(np.float32))


def smooth_image(shape: tuple[int, int], seed: int = 0) -> Image:
    """Gently textured mid-gray frame whose local stats are near-uniform."""
    h, w = shape
    ys = np.arange(h)[:, None, None]
    xs = np.arange(w)[None, :, None]
    data = 0.5 + 0.04 * np.sin(xs / 3.0) * np.sin(ys / 3.0)
    rng = np.random.default_rng(seed)
    data = data + rng.uniform(-0.01, 0.01, size=(h, w, 1))
    return Image(np.clip(np.broadcast_to(data, (h, w, 3)), 0, 1).astype(np.float32))


@pytest.fixture(scope="session")
def raf_manifest() -> Manifest:
    return make_pool("rafdb", RAF_COUNTS)


@pytest.fixture(scope="session")
def dcface_manifest() -> Manifest:
    return make_pool("dcface", DCFACE_COUNTS, with_confidence=True)


@pytest.fixture(scope="session")
def mixed_pools() -> tuple[Manifest, ...]:
    # Availability above the 1,250 + 125 draw size can't change the
    # sampling law; capped pools keep the fixture light.
    return tuple(
        make_pool(src, {name: 1_500 for name in RAF_COUNTS}) for src in MIXED_SOURCES
    )
