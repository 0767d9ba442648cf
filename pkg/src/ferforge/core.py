"""Canonical domain types and exchange-file I/O shared by every pipeline stage.

All seven-way vectors in the engine (posteriors, per-class counts, confusion
rows) follow one fixed class order; see ``ClassLabel``. Exchange formats are
deliberately plain (JSONL, CSV, a small binary container) so every artifact
stays inspectable and diffable.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

POSTERIOR_SUM_TOL = 1e-4

VALID_SPLITS = ("train", "val", "test")

EMBEDDING_MAGIC = b"EMB1"


class FormatError(ValueError):
    """An exchange file violates its format contract."""


class ManifestError(FormatError):
    pass


class PosteriorError(FormatError):
    pass


class EmbeddingError(FormatError):
    pass


class ClassLabel(IntEnum):
    """The seven basic expressions in canonical order.

    The integer value is the canonical index; every 7-vector in the engine
    uses this order, and loaders reject files that permute it.
    """

    ANGER = 0
    DISGUST = 1
    FEAR = 2
    HAPPINESS = 3
    NEUTRAL = 4
    SADNESS = 5
    SURPRISE = 6

    @property
    def canonical_name(self) -> str:
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise ManifestError(f"unknown class label {name!r}") from None


CLASS_NAMES: tuple[str, ...] = tuple(label.canonical_name for label in ClassLabel)


@dataclass(frozen=True)
class ImageRecord:
    """One curated sample: identity, location, provenance, label, split."""

    image_id: str
    path: str
    source: str
    label: ClassLabel
    confidence: float | None = None
    split: str = "train"

    def __post_init__(self) -> None:
        if not self.image_id:
            raise ManifestError("image_id must be non-empty")
        if self.split not in VALID_SPLITS:
            raise ManifestError(
                f"invalid split {self.split!r} for {self.image_id!r}"
            )
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ManifestError(
                f"confidence {self.confidence!r} out of [0,1] for {self.image_id!r}"
            )


Manifest = list[ImageRecord]


def check_unique_ids(records: Iterable[ImageRecord]) -> None:
    ids = [rec.image_id for rec in records]
    if len(set(ids)) == len(ids):
        return
    seen: set[str] = set()
    for image_id in ids:
        if image_id in seen:
            raise ManifestError(f"duplicate image_id {image_id!r}")
        seen.add(image_id)


def load_manifest(path: str | Path) -> Manifest:
    """Read a JSONL manifest, preserving input order.

    Raises ManifestError naming the offending line for malformed JSON,
    duplicate ids, or unknown labels.
    """
    records: Manifest = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}: malformed JSON on line {lineno}: {exc}") from None
            try:
                rec = ImageRecord(
                    image_id=obj["image_id"],
                    path=obj["path"],
                    source=obj["source"],
                    label=ClassLabel.from_name(obj["label"]),
                    confidence=obj.get("confidence"),
                    split=obj.get("split", "train"),
                )
            except KeyError as exc:
                raise ManifestError(f"{path}: missing key {exc} on line {lineno}") from None
            except ManifestError as exc:
                raise ManifestError(f"{path}: line {lineno}: {exc}") from None
            if rec.image_id in seen:
                raise ManifestError(
                    f"{path}: duplicate image_id {rec.image_id!r} on line {lineno}"
                )
            seen.add(rec.image_id)
            records.append(rec)
    return records


def manifest_line(rec: ImageRecord) -> str:
    # Fixed key order; confidence omitted (never null) when absent.
    obj: dict[str, object] = {
        "image_id": rec.image_id,
        "path": rec.path,
        "source": rec.source,
        "label": rec.label.canonical_name,
    }
    if rec.confidence is not None:
        obj["confidence"] = rec.confidence
    obj["split"] = rec.split
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


def write_manifest(manifest: Sequence[ImageRecord], path: str | Path) -> None:
    """Write JSONL; identical manifests always produce identical bytes."""
    check_unique_ids(manifest)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in manifest:
            fh.write(manifest_line(rec))
            fh.write("\n")


@dataclass(frozen=True)
class Posterior:
    """A 7-way class-probability vector attached to an image id."""

    image_id: str
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) != len(ClassLabel):
            raise PosteriorError(
                f"{self.image_id!r}: expected {len(ClassLabel)} probabilities, got {len(self.probs)}"
            )
        if any(p < 0.0 for p in self.probs):
            raise PosteriorError(f"{self.image_id!r}: negative probability")
        total = sum(self.probs)
        if abs(total - 1.0) > POSTERIOR_SUM_TOL:
            raise PosteriorError(
                f"{self.image_id!r}: probabilities sum to {total:.6f}, not 1"
            )


POSTERIOR_HEADER = ("image_id",) + CLASS_NAMES


def load_posteriors(path: str | Path) -> list[Posterior]:
    """Read a posterior CSV; header columns must be in canonical class order."""
    import csv

    posteriors: list[Posterior] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PosteriorError(f"{path}: empty file, missing header") from None
        if tuple(header) != POSTERIOR_HEADER:
            raise PosteriorError(
                f"{path}: header {header!r} does not match canonical order "
                f"{list(POSTERIOR_HEADER)!r}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(POSTERIOR_HEADER):
                raise PosteriorError(f"{path}: line {lineno}: expected {len(POSTERIOR_HEADER)} fields")
            try:
                probs = tuple(float(v) for v in row[1:])
            except ValueError:
                raise PosteriorError(f"{path}: line {lineno}: non-numeric probability") from None
            try:
                posteriors.append(Posterior(image_id=row[0], probs=probs))
            except PosteriorError as exc:
                raise PosteriorError(f"{path}: line {lineno}: {exc}") from None
    return posteriors


def write_posteriors(posteriors: Sequence[Posterior], path: str | Path) -> None:
    import csv

    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(POSTERIOR_HEADER)
        for post in posteriors:
            writer.writerow([post.image_id, *(repr(p) for p in post.probs)])


@dataclass(frozen=True)
class EmbeddingSet:
    """A count x dim float32 matrix with one image id per row."""

    ids: tuple[str, ...]
    vectors: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        vecs = np.asarray(self.vectors, dtype=np.float32)
        if vecs.ndim != 2:
            raise EmbeddingError("vectors must be a 2-D matrix")
        if vecs.shape[0] != len(self.ids):
            raise EmbeddingError(
                f"id count {len(self.ids)} does not match vector rows {vecs.shape[0]}"
            )
        if vecs.shape[0] < 1 or vecs.shape[1] < 1:
            raise EmbeddingError("count and dim must be positive")
        if not np.all(np.isfinite(vecs)):
            raise EmbeddingError("vectors contain non-finite values")
        if len(set(self.ids)) != len(self.ids):
            raise EmbeddingError("duplicate image_ids in embedding set")
        object.__setattr__(self, "vectors", vecs)

    @property
    def count(self) -> int:
        return self.vectors.shape[0]

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _ids_sidecar(path: str | Path) -> Path:
    return Path(str(path) + ".ids.jsonl")


def load_embeddings(path: str | Path) -> EmbeddingSet:
    """Read an EMB1 binary file and its id sidecar; never returns a partial set."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < 12 or raw[:4] != EMBEDDING_MAGIC:
        raise EmbeddingError(f"{path}: bad magic, not an EMB1 file")
    count, dim = struct.unpack_from("<II", raw, 4)
    payload = raw[12:]
    expected = count * dim * 4
    if len(payload) != expected:
        raise EmbeddingError(
            f"{path}: truncated payload, expected {expected} bytes, got {len(payload)}"
        )
    vectors = np.frombuffer(payload, dtype="<f4").reshape(count, dim)
    sidecar = _ids_sidecar(path)
    ids: list[str] = []
    with open(sidecar, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                ids.append(json.loads(line)["image_id"])
    if len(ids) != count:
        raise EmbeddingError(
            f"{sidecar}: id count {len(ids)} does not match header count {count}"
        )
    return EmbeddingSet(ids=tuple(ids), vectors=vectors.copy())


def write_embeddings(emb: EmbeddingSet, path: str | Path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(EMBEDDING_MAGIC)
        fh.write(struct.pack("<II", emb.count, emb.dim))
        fh.write(np.ascontiguousarray(emb.vectors, dtype="<f4").tobytes())
    with open(_ids_sidecar(path), "w", encoding="utf-8", newline="\n") as fh:
        for image_id in emb.ids:
            fh.write(json.dumps({"image_id": image_id}, separators=(",", ":")))
            fh.write("\n")
