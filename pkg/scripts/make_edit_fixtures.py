#!/usr/bin/env python3
"""Generate the committed edit-batch fixtures and refresh the golden outputs.

Inputs (procedural, deterministic) land in tests/fixtures/edit_batch/;
frozen outputs in tests/golden/edit_batch/. Re-run only when the
degradation pipeline intentionally changes, and commit the result.
"""

from __future__ import annotations

import shutil
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from ferforge.core import ClassLabel, ImageRecord, write_manifest  # noqa: E402
from ferforge.editpipe import (  # noqa: E402
    DegradeRecipe,
    assign_codes,
    load_angle_table,
    run_edit_batch,
    write_boxes_csv,
    write_codes_csv,
)
from ferforge.imageops import FaceBox, Image, save_image  # noqa: E402

FIXTURES = ROOT / "tests" / "fixtures" / "edit_batch"
GOLDEN = ROOT / "tests" / "golden" / "edit_batch"

SIZE = 96
BOX = FaceBox(28, 28, 40, 40)


def synth_face(seed: int) -> Image:
    """A procedural portrait-like frame: gradient backdrop, oval, features."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:SIZE, 0:SIZE].astype(np.float64)
    base = 0.35 + 0.25 * (ys / SIZE) + 0.1 * np.sin(xs / 7.0)
    data = np.stack([base, base * 0.95, base * 0.9], axis=-1)
    cy, cx = 48, 48
    oval = ((ys - cy) / 26) ** 2 + ((xs - cx) / 20) ** 2 <= 1.0
    skin = np.array([0.78, 0.62, 0.52]) + rng.uniform(-0.05, 0.05, 3)
    data[oval] = skin
    for ex in (cx - 8, cx + 8):
        eye = ((ys - (cy - 6)) ** 2 + (xs - ex) ** 2) <= 4
        data[eye] = (0.15, 0.12, 0.1)
    mouth = (np.abs(ys - (cy + 10)) <= 1) & (np.abs(xs - cx) <= 7)
    data[mouth] = (0.45, 0.2, 0.2)
    data += rng.normal(0, 0.008, data.shape)
    return Image(np.clip(data, 0, 1).astype(np.float32))


def synth_edit(original: Image, seed: int) -> Image:
    """An 'edited' crop: the face box region with a reshaped mouth and a
    mild tone shift, as an expression editor would return."""
    rng = np.random.default_rng(seed)
    crop = original.data[BOX.y : BOX.y + BOX.h, BOX.x : BOX.x + BOX.w].copy().astype(np.float64)
    ys, xs = np.mgrid[0 : BOX.h, 0 : BOX.w].astype(np.float64)
    curve = np.abs(ys - (30 - 0.02 * (xs - 20) ** 2)) <= 1.2
    crop[curve] = (0.5, 0.22, 0.22)
    crop *= 1.0 + rng.uniform(-0.08, 0.08)
    crop += rng.normal(0, 0.01, crop.shape)
    return Image(np.clip(crop, 0, 1).astype(np.float32))


def main() -> None:
    for directory in (FIXTURES, GOLDEN):
        if directory.exists():
            shutil.rmtree(directory)
    (FIXTURES / "originals").mkdir(parents=True)
    (FIXTURES / "crops").mkdir(parents=True)

    records = []
    boxes = {}
    for i in range(3):
        image_id = f"edit_{i:03d}"
        original = synth_face(seed=100 + i)
        save_image(original, FIXTURES / "originals" / f"{image_id}.png")
        save_image(synth_edit(original, seed=200 + i), FIXTURES / "crops" / f"{image_id}.png")
        boxes[image_id] = BOX
        records.append(
            ImageRecord(
                image_id=image_id,
                path=f"originals/{image_id}.png",
                source="ffhq",
                label=ClassLabel.NEUTRAL,
                split="train",
            )
        )
    write_manifest(records, FIXTURES / "originals.jsonl")
    write_boxes_csv(boxes, FIXTURES / "boxes.csv")

    table = load_angle_table()
    codes = assign_codes(records, list(ClassLabel), "fixed", table, seed=77)
    write_codes_csv(codes, FIXTURES / "codes.csv")

    manifest, skipped = run_edit_batch(
        records,
        codes,
        FIXTURES / "crops",
        boxes,
        GOLDEN,
        DegradeRecipe(),
        originals_root=FIXTURES,
    )
    assert not skipped
    write_manifest(manifest, GOLDEN / "manifest.jsonl")
    print(f"wrote {len(records)} fixtures and {len(manifest)} golden outputs")


if __name__ == "__main__":
    main()
