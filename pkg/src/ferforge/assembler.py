"""Dataset-assembly regimes with exactly predictable per-class counts.

Regimes: full_synthetic (per-source balanced set under a cap), concat
(real plus an entire synthetic source), fix (real topped up to the cap),
addon / allaug (classical-augmentation balancing plans), and mixed (a
balanced ensemble drawing evenly from several synthetic sources, with a
held-out synthetic validation split).
"""

from __future__ import annotations

import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from operator import attrgetter
from pathlib import Path
from typing import Mapping, NamedTuple, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import numpy as np

from .core import (
    ClassLabel,
    ImageRecord,
    Manifest,
    check_unique_ids,
    load_manifest,
)
from .imageops import AugmentPolicy, augment, load_image, save_image
from .seeding import rng_for, stable_u64

REGIMES = ("full_synthetic", "concat", "fix", "addon", "allaug", "mixed")

# Rendering column order for count tables (happy/sad/surprise/neutral tail),
# matching the conventional per-expression count layout.
TABLE_COLUMN_ORDER = (
    ClassLabel.ANGER,
    ClassLabel.DISGUST,
    ClassLabel.FEAR,
    ClassLabel.HAPPINESS,
    ClassLabel.SADNESS,
    ClassLabel.SURPRISE,
    ClassLabel.NEUTRAL,
)
TABLE_COLUMN_TITLES = ("Angry", "Disgust", "Fear", "Happy", "Sad", "Surprise", "Neutral")


@dataclass(frozen=True)
class AssemblyPlan:
    """Declarative description of one dataset-assembly run."""

    regime: str
    real_manifest: Manifest | None = None
    synthetic_manifests: tuple[Manifest, ...] = ()
    per_class_cap: int = 10_000
    mixed_per_source: int = 1_250
    validation_ratio: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.regime not in REGIMES:
            raise ValueError(f"unknown regime {self.regime!r}")
        n_syn = len(self.synthetic_manifests)
        has_real = self.real_manifest is not None
        if self.regime in ("concat", "fix") and (n_syn != 1 or not has_real):
            raise ValueError(f"{self.regime} requires a real manifest and exactly 1 synthetic source")
        if self.regime == "mixed" and (n_syn < 2 or has_real):
            raise ValueError("mixed requires >= 2 synthetic sources and no real manifest")
        if self.regime in ("addon", "allaug") and (n_syn != 0 or not has_real):
            raise ValueError(f"{self.regime} requires a real manifest only")
        if self.regime == "full_synthetic" and (n_syn != 1 or has_real):
            raise ValueError("full_synthetic requires exactly 1 synthetic source and no real manifest")
        if self.per_class_cap < 1:
            raise ValueError("per_class_cap must be >= 1")
        if not 0.0 <= self.validation_ratio < 1.0:
            raise ValueError("validation_ratio must be in [0,1)")


@dataclass(frozen=True)
class CountCell:
    planned: int
    achieved: int

    def __post_init__(self) -> None:
        if self.achieved > self.planned:
            raise ValueError(f"achieved {self.achieved} exceeds planned {self.planned}")

    @property
    def shortfall(self) -> bool:
        return self.achieved < self.planned


@dataclass(frozen=True)
class CountReport:
    """Planned vs. achieved counts per (source, class), plus run notes."""

    cells: Mapping[tuple[str, ClassLabel], CountCell]
    notes: tuple[str, ...] = ()

    def achieved(self, source: str, label: ClassLabel) -> int:
        return self.cells[(source, label)].achieved

    def planned(self, source: str, label: ClassLabel) -> int:
        return self.cells[(source, label)].planned

    def shortfalls(self) -> list[tuple[str, ClassLabel]]:
        return [key for key, cell in self.cells.items() if cell.shortfall]


def _source_of(manifest: Manifest, role: str) -> str:
    sources = {rec.source for rec in manifest}
    if not sources:
        return role  # empty pool: placeholder tag, all cells zero
    if len(sources) > 1:
        raise ValueError(f"{role} manifest must carry a single source tag, found {sorted(sources)}")
    return next(iter(sources))


def _by_class(manifest: Manifest) -> dict[ClassLabel, list[ImageRecord]]:
    groups: dict[ClassLabel, list[ImageRecord]] = {c: [] for c in ClassLabel}
    for rec in manifest:
        groups[rec.label].append(rec)
    return groups


def _pick(records: list[ImageRecord], k: int, rng: np.random.Generator) -> list[ImageRecord]:
    """Highest confidence first when every record carries one, else a
    seeded uniform draw without replacement."""
    if k >= len(records):
        return list(records)
    if all(rec.confidence is not None for rec in records):
        # Stable two-pass sort == ordering by (-confidence, image_id).
        ranked = sorted(records, key=attrgetter("image_id"))
        ranked.sort(key=attrgetter("confidence"), reverse=True)
        return ranked[:k]
    idx = rng.choice(len(records), size=k, replace=False)
    return [records[i] for i in sorted(idx)]


def _uniform_pick(
    records: list[ImageRecord], k: int, rng: np.random.Generator
) -> list[ImageRecord]:
    if k >= len(records):
        return list(records)
    idx = rng.choice(len(records), size=k, replace=False)
    return [records[i] for i in sorted(idx)]


def _sorted_output(records: list[ImageRecord]) -> Manifest:
    """Order by (class, source, image_id): group linearly, sort ids per cell."""
    groups: dict[tuple[int, str], list[ImageRecord]] = {}
    for rec in records:
        groups.setdefault((rec.label, rec.source), []).append(rec)
    by_id = attrgetter("image_id")
    out: Manifest = []
    for key in sorted(groups):
        cell = groups[key]
        cell.sort(key=by_id)
        out.extend(cell)
    return out


def assemble(plan: AssemblyPlan) -> tuple[Manifest, CountReport]:
    """Build the manifest for a regime; every count is exactly predictable
    from pool availabilities and the plan parameters."""
    cells: dict[tuple[str, ClassLabel], CountCell] = {}
    notes: list[str] = []
    out: list[ImageRecord] = []
    cap = plan.per_class_cap

    real_groups = _by_class(plan.real_manifest) if plan.real_manifest is not None else None
    real_source = _source_of(plan.real_manifest, "real") if plan.real_manifest is not None else None

    if plan.regime == "full_synthetic":
        source = _source_of(plan.synthetic_manifests[0], "synthetic")
        for label, pool in _by_class(plan.synthetic_manifests[0]).items():
            rng = rng_for(plan.seed, "assemble", plan.regime, source, label.canonical_name)
            chosen = _pick(pool, cap, rng)
            out.extend(chosen)
            cells[(source, label)] = CountCell(planned=cap, achieved=len(chosen))

    elif plan.regime == "concat":
        source = _source_of(plan.synthetic_manifests[0], "synthetic")
        syn_groups = _by_class(plan.synthetic_manifests[0])
        for label in ClassLabel:
            real_c = real_groups[label]
            syn_c = syn_groups[label]
            out.extend(real_c)
            out.extend(syn_c)
            cells[(real_source, label)] = CountCell(len(real_c), len(real_c))
            cells[(source, label)] = CountCell(len(syn_c), len(syn_c))

    elif plan.regime == "fix":
        source = _source_of(plan.synthetic_manifests[0], "synthetic")
        syn_groups = _by_class(plan.synthetic_manifests[0])
        for label in ClassLabel:
            real_c = real_groups[label]
            out.extend(real_c)
            cells[(real_source, label)] = CountCell(len(real_c), len(real_c))
            if len(real_c) > cap:
                notes.append(
                    f"{label.canonical_name}: real count {len(real_c)} already exceeds cap {cap}; real kept intact"
                )
            need = max(0, cap - len(real_c))
            rng = rng_for(plan.seed, "assemble", plan.regime, source, label.canonical_name)
            chosen = _pick(syn_groups[label], need, rng)
            out.extend(chosen)
            cells[(source, label)] = CountCell(planned=need, achieved=len(chosen))

    elif plan.regime in ("addon", "allaug"):
        jobs = emit_augment_jobs(plan.real_manifest, plan.regime, cap, seed=plan.seed)
        jobs_by_cell: dict[tuple[str, ClassLabel], int] = {}
        for job in jobs:
            key = (f"{job.source}_aug", job.label)
            jobs_by_cell[key] = jobs_by_cell.get(key, 0) + 1
        for label in ClassLabel:
            real_c = real_groups[label]
            out.extend(real_c)
            cells[(real_source, label)] = CountCell(len(real_c), len(real_c))
        for key, planned in jobs_by_cell.items():
            cells[key] = CountCell(planned=planned, achieved=0)
        if jobs:
            notes.append(f"{len(jobs)} augmentation jobs pending execution")

    elif plan.regime == "mixed":
        val_n_total = 0
        for manifest in plan.synthetic_manifests:
            source = _source_of(manifest, "synthetic")
            for label, pool in _by_class(manifest).items():
                rng = rng_for(plan.seed, "assemble", plan.regime, source, label.canonical_name)
                train_k = min(plan.mixed_per_source, len(pool))
                train = _uniform_pick(pool, train_k, rng)
                cells[(source, label)] = CountCell(plan.mixed_per_source, len(train))
                out.extend(
                    rec if rec.split == "train" else replace(rec, split="train")
                    for rec in train
                )

                chosen_ids = {rec.image_id for rec in train}
                rest = [rec for rec in pool if rec.image_id not in chosen_ids]
                val_k = int(len(train) * plan.validation_ratio + 1e-9)
                val = _uniform_pick(rest, val_k, rng)
                if len(val) < val_k:
                    notes.append(
                        f"{source}/{label.canonical_name}: validation pool exhausted "
                        f"({len(val)} of {val_k})"
                    )
                out.extend(replace(rec, split="val") for rec in val)
                val_n_total += len(val)
        if val_n_total:
            notes.append(f"synthetic validation split: {val_n_total} records")

    manifest = _sorted_output(out)
    check_unique_ids(manifest)
    return manifest, CountReport(cells=cells, notes=tuple(notes))


class AugmentJob(NamedTuple):
    """One pending augmentation draw tied to a source image."""

    job_id: str
    image_id: str
    path: str
    source: str
    label: ClassLabel
    seed: int


def emit_augment_jobs(
    real_manifest: Manifest,
    regime: str,
    cap: int = 10_000,
    seed: int = 0,
) -> list[AugmentJob]:
    """Plan the augmented draws that balance a real dataset.

    addon raises every minority class to the majority count; allaug tops
    every class up to the cap. Source images are used round-robin in
    image_id order so per-image repeats are minimized.
    """
    if regime not in ("addon", "allaug"):
        raise ValueError(f"augment jobs only apply to addon/allaug, got {regime!r}")
    groups = _by_class(real_manifest)
    counts = {label: len(records) for label, records in groups.items()}
    majority = max(counts.values()) if counts else 0

    jobs: list[AugmentJob] = []
    for label in ClassLabel:
        n_real = counts[label]
        if regime == "addon":
            n_jobs = majority - n_real
        else:
            if n_real > cap:
                raise ValueError(
                    f"{label.canonical_name}: real count {n_real} exceeds cap {cap} under allaug"
                )
            n_jobs = cap - n_real
        if n_jobs == 0:
            continue
        if n_real == 0:
            raise ValueError(f"{label.canonical_name}: no real images to augment from")
        ordered = sorted(groups[label], key=lambda r: r.image_id)
        # One digest per class; job seeds are offsets into it. rng streams
        # re-hash the seed, so sequential values stay independent.
        base = stable_u64(seed, "augjob", label.canonical_name)
        append = jobs.append
        for k in range(n_jobs):
            rec = ordered[k % n_real]
            append(
                AugmentJob(
                    f"{rec.image_id}__aug{k // n_real}",
                    rec.image_id,
                    rec.path,
                    rec.source,
                    label,
                    (base + k) & 0xFFFFFFFFFFFFFFFF,
                )
            )
    return jobs


def write_jobs(jobs: Sequence[AugmentJob], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for job in jobs:
            fh.write(
                json.dumps(
                    {
                        "job_id": job.job_id,
                        "image_id": job.image_id,
                        "path": job.path,
                        "source": job.source,
                        "label": job.label.canonical_name,
                        "seed": job.seed,
                    },
                    separators=(",", ":"),
                )
            )
            fh.write("\n")


def load_jobs(path: str | Path) -> list[AugmentJob]:
    jobs: list[AugmentJob] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            jobs.append(
                AugmentJob(
                    job_id=obj["job_id"],
                    image_id=obj["image_id"],
                    path=obj["path"],
                    source=obj["source"],
                    label=ClassLabel.from_name(obj["label"]),
                    seed=obj["seed"],
                )
            )
    return jobs


def run_augment_jobs(
    jobs: Sequence[AugmentJob],
    policy: AugmentPolicy,
    images_root: str | Path,
    out_dir: str | Path,
    workers: int = 1,
) -> Manifest:
    """Execute augmentation jobs into PNG files plus their manifest records.

    Each job draws from its own seed stream, so results do not depend on
    worker count or completion order.
    """
    images_root = Path(images_root)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def process(job: AugmentJob) -> ImageRecord:
        image = load_image(images_root / job.path)
        variant = augment(image, replace(policy, seed=job.seed), 1)[0]
        out_name = f"{job.job_id}.png"
        save_image(variant, out_dir / out_name)
        return ImageRecord(
            image_id=job.job_id,
            path=out_name,
            source=f"{job.source}_aug",
            label=job.label,
            split="train",
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(process, jobs))
    else:
        records = [process(job) for job in jobs]
    return records


@dataclass(frozen=True)
class CountTable:
    """Per-(source, class) record counts of a manifest."""

    counts: Mapping[tuple[str, ClassLabel], int]
    source_order: tuple[str, ...]

    def row(self, source: str) -> tuple[int, ...]:
        """Counts for one source in rendering column order."""
        return tuple(self.counts.get((source, label), 0) for label in TABLE_COLUMN_ORDER)

    def canonical_row(self, source: str) -> tuple[int, ...]:
        return tuple(self.counts.get((source, label), 0) for label in ClassLabel)

    def render(self) -> str:
        headers = ("Dataset",) + TABLE_COLUMN_TITLES
        rows = [
            (source,) + tuple(f"{n:,}" for n in self.row(source))
            for source in self.source_order
        ]
        widths = [
            max(len(headers[i]), *(len(row[i]) for row in rows)) if rows else len(headers[i])
            for i in range(len(headers))
        ]
        lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
        for row in rows:
            lines.append("  ".join(str(v).rjust(widths[i]) if i else str(v).ljust(widths[0]) for i, v in enumerate(row)))
        return "\n".join(lines)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["source", *(t.lower() for t in TABLE_COLUMN_TITLES)])
            for source in self.source_order:
                writer.writerow([source, *self.row(source)])


def report_counts(manifest: Manifest) -> CountTable:
    """Tally records per (source, class); sources keep first-appearance order."""
    counts: dict[tuple[str, ClassLabel], int] = {}
    order: list[str] = []
    for rec in manifest:
        if rec.source not in order:
            order.append(rec.source)
        key = (rec.source, rec.label)
        counts[key] = counts.get(key, 0) + 1
    return CountTable(counts=counts, source_order=tuple(order))


def load_plan(path: str | Path) -> AssemblyPlan:
    """Read a plan TOML; manifest paths resolve relative to the plan file."""
    path = Path(path)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    section = raw["plan"]
    base = path.parent

    real = section.get("real_manifest")
    synthetic = section.get("synthetic_manifests", [])
    return AssemblyPlan(
        regime=section["regime"],
        real_manifest=load_manifest(base / real) if real else None,
        synthetic_manifests=tuple(load_manifest(base / p) for p in synthetic),
        per_class_cap=int(section.get("per_class_cap", 10_000)),
        mixed_per_source=int(section.get("mixed_per_source", 1_250)),
        validation_ratio=float(section.get("validation_ratio", 0.1)),
        seed=int(section.get("seed", 0)),
    )
