"""Teacher-posterior filtering: argmax assignment, confidence thresholding,
and per-class top-k selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

from .core import ClassLabel, ImageRecord, Manifest, Posterior


@dataclass(frozen=True)
class FilterPolicy:
    """Threshold and per-class cap for pseudo-label selection.

    The threshold comparison is inclusive (kept when confidence >= threshold).
    Ties in confidence are broken by ascending image_id so runs are
    reproducible across platforms.
    """

    threshold: float = 0.3
    per_class_cap: int = 10_000

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must be in (0,1), got {self.threshold}")
        if self.per_class_cap < 1:
            raise ValueError(f"per_class_cap must be >= 1, got {self.per_class_cap}")


@dataclass(frozen=True)
class PseudoLabel:
    image_id: str
    label: ClassLabel
    confidence: float


def assign(posterior: Posterior) -> tuple[ClassLabel, float]:
    """Label by highest probability; ties go to the lowest class index."""
    best = 0
    for i in range(1, len(posterior.probs)):
        if posterior.probs[i] > posterior.probs[best]:
            best = i
    return ClassLabel(best), posterior.probs[best]


def filter(
    posteriors: Sequence[Posterior], policy: FilterPolicy
) -> tuple[list[PseudoLabel], int]:
    """Keep samples whose assigned-class probability passes the threshold.

    Input order is preserved; returns (kept, discarded_count).
    """
    kept: list[PseudoLabel] = []
    for post in posteriors:
        label, confidence = assign(post)
        if confidence >= policy.threshold:
            kept.append(PseudoLabel(post.image_id, label, confidence))
    return kept, len(posteriors) - len(kept)


def select_top(
    kept: Sequence[PseudoLabel],
    policy: FilterPolicy,
    pool: Mapping[str, ImageRecord] | None = None,
) -> Manifest:
    """Pick the highest-confidence samples per class under the cap.

    Output is sorted by (class, descending confidence, image_id). When a
    pool manifest is supplied, path/source/split are copied from it;
    otherwise the image_id doubles as the relative path under a generic
    "pseudo" source tag.
    """
    by_class: dict[ClassLabel, list[PseudoLabel]] = {c: [] for c in ClassLabel}
    for item in kept:
        by_class[item.label].append(item)

    records: Manifest = []
    for label in ClassLabel:
        ranked = sorted(by_class[label], key=lambda p: (-p.confidence, p.image_id))
        for item in ranked[: policy.per_class_cap]:
            if pool is not None:
                try:
                    base = pool[item.image_id]
                except KeyError:
                    raise KeyError(
                        f"image_id {item.image_id!r} not present in pool manifest"
                    ) from None
                path, source, split = base.path, base.source, base.split
            else:
                path, source, split = item.image_id, "pseudo", "train"
            records.append(
                ImageRecord(
                    image_id=item.image_id,
                    path=path,
                    source=source,
                    label=item.label,
                    confidence=item.confidence,
                    split=split,
                )
            )
    return records
