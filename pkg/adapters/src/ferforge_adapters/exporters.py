"""Batch exporters: images in, exchange files out.

Every input image ends up either in the output file or in the skip file,
never both and never neither, so downstream shortfall accounting can
reconcile pool sizes exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from . import formats

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")

KINDS = (
    "teacher_classifier",
    "embedder",
    "face_detector",
    "attribute_predictor",
    "sd_generator",
    "fineface_generator",
    "ganmut_editor",
)


@dataclass(frozen=True)
class AdapterJob:
    """One adapter invocation: which model kind reads what and writes where."""

    kind: str
    input_path: Path
    output_path: Path
    batch_size: int = 16
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def list_images(input_path: str | Path) -> list[tuple[str, Path]]:
    """(image_id, path) pairs for every image file, sorted by id."""
    input_path = Path(input_path)
    pairs = [
        (path.stem, path)
        for path in sorted(input_path.iterdir())
        if path.suffix.lower() in IMAGE_SUFFIXES
    ]
    ids = [image_id for image_id, _ in pairs]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{input_path}: duplicate image ids after stem extraction")
    return pairs


def load_image(path: Path) -> np.ndarray:
    with PILImage.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0


def _batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start : start + size]


def export_posteriors(job: AdapterJob, backend) -> tuple[int, int]:
    """Run the teacher over a directory; returns (rows, skips)."""
    rows: list[tuple[str, list[float]]] = []
    skips: list[dict] = []
    readable: list[tuple[str, np.ndarray]] = []
    for image_id, path in list_images(job.input_path):
        try:
            readable.append((image_id, load_image(path)))
        except (OSError, UnidentifiedImageError) as exc:
            log.warning("skipping unreadable %s: %s", image_id, exc)
            skips.append({"image_id": image_id, "reason": f"unreadable: {exc}"})
    for batch in _batches(readable, job.batch_size):
        ids = [image_id for image_id, _ in batch]
        probs = backend.posteriors([img for _, img in batch], ids)
        probs = probs / probs.sum(axis=1, keepdims=True)
        for image_id, row in zip(ids, probs):
            rows.append((image_id, [float(v) for v in row]))
    formats.write_posterior_csv(rows, job.output_path)
    formats.write_jsonl(skips, formats.skip_file_for(job.output_path))
    return len(rows), len(skips)


def export_embeddings(job: AdapterJob, backend) -> tuple[int, int]:
    """Run the embedder over a directory; EMB1 plus id sidecar out."""
    ids: list[str] = []
    vectors: list[np.ndarray] = []
    skips: list[dict] = []
    readable: list[tuple[str, np.ndarray]] = []
    for image_id, path in list_images(job.input_path):
        try:
            readable.append((image_id, load_image(path)))
        except (OSError, UnidentifiedImageError) as exc:
            log.warning("skipping unreadable %s: %s", image_id, exc)
            skips.append({"image_id": image_id, "reason": f"unreadable: {exc}"})
    for batch in _batches(readable, job.batch_size):
        batch_ids = [image_id for image_id, _ in batch]
        emb = backend.embed([img for _, img in batch], batch_ids)
        ids.extend(batch_ids)
        vectors.append(np.asarray(emb))
    if not ids:
        raise ValueError(f"{job.input_path}: no readable images to embed")
    formats.write_embedding_file(ids, np.vstack(vectors).astype(np.float32), job.output_path)
    formats.write_jsonl(skips, formats.skip_file_for(job.output_path))
    return len(ids), len(skips)


def export_boxes_and_attributes(
    job: AdapterJob,
    detector,
    attribute_predictor,
    attributes_path: str | Path,
) -> tuple[int, int]:
    """Detect faces and predict attributes; undetected images go to the
    skip file, which downstream count reports reconcile against."""
    boxes: list[tuple[str, int, int, int, int]] = []
    attributes: list[tuple[str, str, str, str]] = []
    skips: list[dict] = []
    for image_id, path in list_images(job.input_path):
        try:
            image = load_image(path)
        except (OSError, UnidentifiedImageError) as exc:
            log.warning("skipping unreadable %s: %s", image_id, exc)
            skips.append({"image_id": image_id, "reason": f"unreadable: {exc}"})
            continue
        box = detector.detect(image)
        if box is None:
            log.info("no face detected in %s", image_id)
            skips.append({"image_id": image_id, "reason": "no face"})
            continue
        x, y, w, h = box
        boxes.append((image_id, x, y, w, h))
        gender, race, age_bucket = attribute_predictor.attributes(image)
        attributes.append((image_id, gender, race, age_bucket))
    formats.write_boxes_csv(boxes, job.output_path)
    formats.write_attributes_csv(attributes, attributes_path)
    formats.write_jsonl(skips, formats.skip_file_for(job.output_path))
    return len(boxes), len(skips)
