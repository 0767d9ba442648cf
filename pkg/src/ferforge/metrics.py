"""Evaluation surfaces: classification metrics from prediction files,
Frechet/kernel distances between embedding sets, and demographic tallies."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import ClassLabel, EmbeddingSet, FormatError, Manifest
from .seeding import rng_for

PREDICTION_CSV_HEADER = ("image_id", "true", "pred")
ATTRIBUTE_CSV_HEADER = ("image_id", "gender", "race", "age_bucket")

GENDERS = ("male", "female")
RACES = ("White", "Black", "Indian", "Asian", "Others")
AGE_BUCKETS = ("0-9", "10s", "20s", "30s", "40s", "50s", "60s", "70+")


@dataclass(frozen=True)
class Prediction:
    image_id: str
    true: ClassLabel
    pred: ClassLabel


PredictionSet = list[Prediction]


def load_predictions(path: str | Path) -> PredictionSet:
    preds: PredictionSet = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != PREDICTION_CSV_HEADER:
            raise FormatError(f"{path}: unexpected prediction header {header!r}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            image_id = raw[0]
            if image_id in seen:
                raise FormatError(f"{path}: duplicate image_id {image_id!r} on line {lineno}")
            seen.add(image_id)
            preds.append(
                Prediction(
                    image_id=image_id,
                    true=ClassLabel.from_name(raw[1]),
                    pred=ClassLabel.from_name(raw[2]),
                )
            )
    return preds


def write_predictions(preds: Sequence[Prediction], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PREDICTION_CSV_HEADER)
        for p in preds:
            writer.writerow([p.image_id, p.true.canonical_name, p.pred.canonical_name])


def confusion(preds: Sequence[Prediction]) -> np.ndarray:
    """7x7 count matrix: entry (i, j) counts true class i predicted as j."""
    if not preds:
        raise ValueError("empty prediction set")
    matrix = np.zeros((len(ClassLabel), len(ClassLabel)), dtype=np.int64)
    for p in preds:
        matrix[p.true.value, p.pred.value] += 1
    return matrix


def _check_confusion(matrix: np.ndarray) -> np.ndarray:
    matrix = np.asarray(matrix)
    n = len(ClassLabel)
    if matrix.shape != (n, n):
        raise ValueError(f"confusion matrix must be {n}x{n}")
    if matrix.sum() == 0:
        raise ValueError("empty confusion matrix")
    return matrix


def accuracy(matrix: np.ndarray) -> float:
    matrix = _check_confusion(matrix)
    return float(np.trace(matrix) / matrix.sum())


def classwise_accuracy(matrix: np.ndarray) -> tuple[float, ...]:
    """Per-class recall (diagonal over row sum), 0 for empty rows."""
    matrix = _check_confusion(matrix)
    rows = matrix.sum(axis=1)
    diag = np.diag(matrix)
    return tuple(
        float(diag[i] / rows[i]) if rows[i] else 0.0 for i in range(len(ClassLabel))
    )


def macro_f1(matrix: np.ndarray) -> float:
    """Unweighted mean of per-class F1; a class with P + R = 0 scores 0."""
    matrix = _check_confusion(matrix)
    rows = matrix.sum(axis=1)
    cols = matrix.sum(axis=0)
    diag = np.diag(matrix)
    scores = []
    for i in range(len(ClassLabel)):
        precision = diag[i] / cols[i] if cols[i] else 0.0
        recall = diag[i] / rows[i] if rows[i] else 0.0
        if precision + recall == 0.0:
            scores.append(0.0)
        else:
            scores.append(2.0 * precision * recall / (precision + recall))
    return float(np.mean(scores))


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector and covariance matrix fitted to an embedding set."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.cov))):
            raise ValueError("non-finite Gaussian summary")
        if not np.allclose(self.cov, self.cov.T):
            raise ValueError("covariance must be symmetric")


def summarize(emb: EmbeddingSet) -> GaussianSummary:
    if emb.count < 2:
        raise ValueError("need at least 2 vectors to fit a covariance")
    vectors = emb.vectors.astype(np.float64)
    return GaussianSummary(
        mean=vectors.mean(axis=0),
        cov=np.cov(vectors, rowvar=False),
    )


def _psd_sqrt(matrix: np.ndarray, tol_scale: float) -> np.ndarray:
    eigvals, eigvecs = np.linalg.eigh(matrix)
    tol = 1e-6 * max(tol_scale, np.finfo(np.float64).tiny)
    if eigvals.min() < -tol:
        raise ValueError(f"matrix far from PSD: min eigenvalue {eigvals.min():g}")
    eigvals = np.clip(eigvals, 0.0, None)
    return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T


def frechet_distance(ga: GaussianSummary, gb: GaussianSummary) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)), with the
    cross term evaluated through the symmetrized product."""
    diff = ga.mean - gb.mean
    sqrt_b = _psd_sqrt(gb.cov, float(np.trace(gb.cov)))
    inner = sqrt_b @ ga.cov @ sqrt_b
    inner = (inner + inner.T) / 2.0
    eigvals, _ = np.linalg.eigh(inner)
    tol = 1e-6 * max(float(np.trace(inner)), np.finfo(np.float64).tiny)
    if eigvals.min() < -tol:
        raise ValueError(f"cross-covariance far from PSD: min eigenvalue {eigvals.min():g}")
    tr_sqrt = float(np.sqrt(np.clip(eigvals, 0.0, None)).sum())
    value = float(diff @ diff + np.trace(ga.cov) + np.trace(gb.cov) - 2.0 * tr_sqrt)
    if not np.isfinite(value):
        raise ValueError("non-finite distance")
    # Rounding can leave a vanishing negative residue on identical sets.
    return max(value, 0.0)


def fid(a: EmbeddingSet, b: EmbeddingSet) -> float:
    if a.dim != b.dim:
        raise ValueError(f"embedding dims differ: {a.dim} vs {b.dim}")
    return frechet_distance(summarize(a), summarize(b))


def polynomial_kernel(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """The kernel distance's canonical kernel: (x.y / d + 1)^3."""
    d = x.shape[1]
    return (x @ y.T / d + 1.0) ** 3


def mmd2_unbiased(x: np.ndarray, y: np.ndarray) -> float:
    m = x.shape[0]
    n = y.shape[0]
    if m < 2 or n < 2:
        raise ValueError("need at least 2 samples per side")
    kxx = polynomial_kernel(x, x)
    kyy = polynomial_kernel(y, y)
    kxy = polynomial_kernel(x, y)
    term_x = (kxx.sum() - np.trace(kxx)) / (m * (m - 1))
    term_y = (kyy.sum() - np.trace(kyy)) / (n * (n - 1))
    return float(term_x + term_y - 2.0 * kxy.mean())


def kid(
    a: EmbeddingSet,
    b: EmbeddingSet,
    subset_size: int = 100,
    n_subsets: int = 100,
    seed: int = 0,
) -> tuple[float, float]:
    """Unbiased polynomial-kernel MMD^2 averaged over seeded subsets."""
    if a.dim != b.dim:
        raise ValueError(f"embedding dims differ: {a.dim} vs {b.dim}")
    if subset_size > a.count or subset_size > b.count:
        raise ValueError(
            f"subset_size {subset_size} exceeds set sizes {a.count}/{b.count}"
        )
    va = a.vectors.astype(np.float64)
    vb = b.vectors.astype(np.float64)
    values = np.empty(n_subsets, dtype=np.float64)
    for r in range(n_subsets):
        rng = rng_for(seed, "kid", r)
        idx_a = rng.choice(a.count, size=subset_size, replace=False)
        idx_b = rng.choice(b.count, size=subset_size, replace=False)
        values[r] = mmd2_unbiased(va[idx_a], vb[idx_b])
    return float(values.mean()), float(values.std())


@dataclass(frozen=True)
class AttributeRecord:
    image_id: str
    gender: str
    race: str
    age_bucket: str

    def __post_init__(self) -> None:
        if self.gender not in GENDERS:
            raise FormatError(f"{self.image_id!r}: unknown gender {self.gender!r}")
        if self.race not in RACES:
            raise FormatError(f"{self.image_id!r}: unknown race {self.race!r}")
        if self.age_bucket not in AGE_BUCKETS:
            raise FormatError(f"{self.image_id!r}: unknown age bucket {self.age_bucket!r}")


def load_attributes(path: str | Path) -> dict[str, AttributeRecord]:
    records: dict[str, AttributeRecord] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != ATTRIBUTE_CSV_HEADER:
            raise FormatError(f"{path}: unexpected attribute header {header!r}")
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if raw[0] in records:
                raise FormatError(f"{path}: duplicate image_id {raw[0]!r} on line {lineno}")
            records[raw[0]] = AttributeRecord(raw[0], raw[1], raw[2], raw[3])
    return records


def write_attributes(records: Sequence[AttributeRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ATTRIBUTE_CSV_HEADER)
        for rec in records:
            writer.writerow([rec.image_id, rec.gender, rec.race, rec.age_bucket])


@dataclass(frozen=True)
class DemographicTally:
    """Category counts per axis; each axis partitions the manifest."""

    total: int
    gender: Mapping[str, int]
    race: Mapping[str, int]
    age: Mapping[str, int]

    def render(self, title: str = "dataset") -> str:
        lines = [f"Category          {title}"]
        lines.append(f"Total             {self.total:,}")
        for name in GENDERS:
            lines.append(f"Gender {name.capitalize():<10} {self.gender[name]:,}")
        for name in RACES:
            lines.append(f"Race {name:<12} {self.race[name]:,}")
        for name in AGE_BUCKETS:
            lines.append(f"Age {name:<13} {self.age[name]:,}")
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["axis", "category", "count"])
            writer.writerow(["total", "all", self.total])
            for name in GENDERS:
                writer.writerow(["gender", name, self.gender[name]])
            for name in RACES:
                writer.writerow(["race", name, self.race[name]])
            for name in AGE_BUCKETS:
                writer.writerow(["age", name, self.age[name]])


def tally_attributes(
    manifest: Manifest, attributes: Mapping[str, AttributeRecord]
) -> DemographicTally:
    """Count manifest records per demographic category.

    Every manifest id must have an attribute record; each axis's counts
    sum to the manifest size.
    """
    gender = {name: 0 for name in GENDERS}
    race = {name: 0 for name in RACES}
    age = {name: 0 for name in AGE_BUCKETS}
    for rec in manifest:
        attr = attributes.get(rec.image_id)
        if attr is None:
            raise KeyError(f"no attribute record for {rec.image_id!r}")
        gender[attr.gender] += 1
        race[attr.race] += 1
        age[attr.age_bucket] += 1
    return DemographicTally(total=len(manifest), gender=gender, race=race, age=age)


def render_classification_report(matrix: np.ndarray) -> str:
    acc = accuracy(matrix)
    f1 = macro_f1(matrix)
    per_class = classwise_accuracy(matrix)
    lines = [
        f"accuracy      {acc * 100:.2f}%",
        f"macro_f1      {f1 * 100:.2f}%",
        "classwise accuracy:",
    ]
    for label in ClassLabel:
        lines.append(f"  {label.canonical_name:<10} {per_class[label.value] * 100:.2f}%")
    lines.append("confusion (rows true, columns predicted):")
    header = "        " + " ".join(f"{c[:4]:>6}" for c in (l.canonical_name for l in ClassLabel))
    lines.append(header)
    for label in ClassLabel:
        row = " ".join(f"{int(v):>6}" for v in matrix[label.value])
        lines.append(f"  {label.canonical_name[:4]:<4}  {row}")
    return "\n".join(lines)
