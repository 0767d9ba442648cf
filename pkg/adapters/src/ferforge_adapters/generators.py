"""Batch driver feeding prompt CSVs to an image generator backend.

Outputs are named by (prompt row index, sample index) and a provenance
JSONL links every image back to its prompt row. A failing row is logged
and skipped; the run continues.
"""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from . import formats

log = logging.getLogger(__name__)

PROMPT_COLUMNS = ("prompt", "seed", "au_vector", "variant", "expression")


def read_prompt_csv(path: str | Path) -> list[dict]:
    """Prompt rows as dicts; requires the engine's prompt-CSV columns."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in PROMPT_COLUMNS if c not in (reader.fieldnames or ())]
        if missing:
            raise ValueError(f"{path}: prompt CSV missing columns {missing}")
        return [row for row in reader if row.get("prompt")]


def save_png(image: np.ndarray, path: Path) -> None:
    arr = np.clip(np.rint(image * 255.0), 0, 255).astype(np.uint8)
    path.parent.mkdir(parents=True, exist_ok=True)
    PILImage.fromarray(arr, mode="RGB").save(path)


def drive_generator(
    prompts_path: str | Path,
    out_dir: str | Path,
    backend,
    samples_per_prompt: int = 1,
) -> tuple[int, int]:
    """Generate samples_per_prompt images per prompt row; returns
    (images written, rows failed)."""
    rows = read_prompt_csv(prompts_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    provenance: list[dict] = []
    failures: list[dict] = []
    written = 0
    for row_index, row in enumerate(rows):
        try:
            for k in range(samples_per_prompt):
                image = backend.generate(
                    row["prompt"], row.get("au_vector", ""), int(row["seed"]), k
                )
                image_id = f"{row_index:05d}_{k:02d}"
                save_png(image, out_dir / f"{image_id}.png")
                provenance.append(
                    {
                        "image_id": image_id,
                        "row_index": row_index,
                        "sample_index": k,
                        "variant": row.get("variant", ""),
                        "expression": row.get("expression", ""),
                    }
                )
                written += 1
        except Exception as exc:  # a generator crash must not kill the run
            log.warning("generation failed for row %d: %s", row_index, exc)
            failures.append({"row_index": row_index, "reason": str(exc)})
    formats.write_jsonl(provenance, out_dir / "provenance.jsonl")
    formats.write_jsonl(failures, out_dir / "failures.jsonl")
    return written, len(failures)
