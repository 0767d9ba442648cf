"""Writers for the engine's exchange formats.

These mirror the wire contracts exactly: posterior CSV with the canonical
class header, EMB1 binary embeddings with an id sidecar, box/attribute
CSVs, and JSONL skip/provenance files. All writes are atomic (temp file +
rename) so a crashed run never leaves a half-written exchange file.
"""

from __future__ import annotations

import csv
import io
import json
import os
import struct
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

CLASS_NAMES = ("anger", "disgust", "fear", "happiness", "neutral", "sadness", "surprise")
POSTERIOR_HEADER = ("image_id",) + CLASS_NAMES
BOXES_HEADER = ("image_id", "x", "y", "w", "h")
ATTRIBUTES_HEADER = ("image_id", "gender", "race", "age_bucket")
EMBEDDING_MAGIC = b"EMB1"


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, path)


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_posterior_csv(
    rows: Sequence[tuple[str, Sequence[float]]], path: str | Path
) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(POSTERIOR_HEADER)
    for image_id, probs in rows:
        if len(probs) != 7:
            raise ValueError(f"{image_id}: expected 7 probabilities")
        writer.writerow([image_id, *(repr(float(p)) for p in probs)])
    atomic_write_text(path, buf.getvalue())


def write_embedding_file(
    ids: Sequence[str], vectors: np.ndarray, path: str | Path
) -> None:
    vectors = np.ascontiguousarray(vectors, dtype="<f4")
    if vectors.ndim != 2 or vectors.shape[0] != len(ids):
        raise ValueError("vectors must be 2-D with one row per id")
    count, dim = vectors.shape
    payload = EMBEDDING_MAGIC + struct.pack("<II", count, dim) + vectors.tobytes()
    atomic_write_bytes(path, payload)
    sidecar = io.StringIO()
    for image_id in ids:
        sidecar.write(json.dumps({"image_id": image_id}, separators=(",", ":")))
        sidecar.write("\n")
    atomic_write_text(str(path) + ".ids.jsonl", sidecar.getvalue())


def write_boxes_csv(
    rows: Sequence[tuple[str, int, int, int, int]], path: str | Path
) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BOXES_HEADER)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def write_attributes_csv(
    rows: Sequence[tuple[str, str, str, str]], path: str | Path
) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ATTRIBUTES_HEADER)
    for row in rows:
        writer.writerow(row)
    atomic_write_text(path, buf.getvalue())


def write_jsonl(records: Iterable[dict], path: str | Path) -> None:
    buf = io.StringIO()
    for record in records:
        buf.write(json.dumps(record, separators=(",", ":"), ensure_ascii=False))
        buf.write("\n")
    atomic_write_text(path, buf.getvalue())


def skip_file_for(output_path: str | Path) -> Path:
    output_path = Path(output_path)
    return output_path.with_name(output_path.name + ".skips.jsonl")
