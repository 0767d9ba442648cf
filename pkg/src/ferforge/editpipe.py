"""Expression-edit orchestration: polar-code sampling for the GAN editor,
paste-back compositing with color transfer and feathered blending, and the
pre-restoration two-scale ring degradation."""

from __future__ import annotations

import csv
import logging
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from importlib import resources

import numpy as np

from .core import ClassLabel, ImageRecord, Manifest
from .imageops import (
    FaceBox,
    Image,
    alpha_blend,
    color_transfer,
    feather_mask,
    gaussian_blur,
    load_image,
    ring_mask,
    save_image,
    to_lab,
    to_srgb,
)
from .seeding import rng_for, stable_u64

log = logging.getLogger(__name__)

POLICY_FIXED = "fixed"
POLICY_VARIATE = "variate"
POLICIES = (POLICY_FIXED, POLICY_VARIATE)

CODES_CSV_HEADER = ("image_id", "target", "policy", "rho", "theta", "seed")
BOXES_CSV_HEADER = ("image_id", "x", "y", "w", "h")

SOURCE_BY_POLICY = {POLICY_FIXED: "ganmut_f", POLICY_VARIATE: "ganmut_v"}


@dataclass(frozen=True)
class PolarCode:
    """An expression-edit coordinate: angle selects the class, radius the
    intensity."""

    rho: float
    theta: float
    target: ClassLabel
    policy: str

    def __post_init__(self) -> None:
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho {self.rho} outside [0,1]")
        if not 0.0 <= self.theta < 2.0 * math.pi:
            raise ValueError(f"theta {self.theta} outside [0, 2*pi)")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")


@dataclass(frozen=True)
class AngleTable:
    """Canonical per-class directions and radius ranges for code sampling."""

    theta: Mapping[ClassLabel, float]
    rho_fixed: float = 0.85
    rho_range: tuple[float, float] = (0.5, 1.0)
    theta_jitter: float = math.pi / 14

    def __post_init__(self) -> None:
        missing = [c.canonical_name for c in ClassLabel if c not in self.theta]
        if missing:
            raise ValueError(f"angle table missing classes: {missing}")
        if len(set(self.theta.values())) != len(ClassLabel):
            raise ValueError("canonical directions must be distinct")
        lo, hi = self.rho_range
        if not 0.0 <= lo <= hi <= 1.0:
            raise ValueError(f"bad radius range {self.rho_range}")
        if not 0.0 <= self.rho_fixed <= 1.0:
            raise ValueError(f"bad fixed radius {self.rho_fixed}")


def load_angle_table(path: str | Path | None = None) -> AngleTable:
    if path is None:
        raw = tomllib.loads(
            resources.files("ferforge.data").joinpath("angles.toml").read_text("utf-8")
        )
    else:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    section = raw["angles"]
    theta = {
        ClassLabel.from_name(name): float(value)
        for name, value in section["theta"].items()
    }
    return AngleTable(
        theta=theta,
        rho_fixed=float(section["rho_fixed"]),
        rho_range=(float(section["rho_range"][0]), float(section["rho_range"][1])),
        theta_jitter=float(section["theta_jitter"]),
    )


@dataclass(frozen=True)
class DegradeRecipe:
    """Two-scale blur+noise settings: a strong pass on the paste-boundary
    ring, then a light pass over the whole frame."""

    ring_width: int = 30
    local_kernel: int = 15
    local_sigma: float = 5.0
    local_noise_sigma: float = 0.15
    global_kernel: int = 5
    global_sigma: float = 2.0
    global_noise_sigma: float = 0.05

    def __post_init__(self) -> None:
        for name, k in (("local_kernel", self.local_kernel), ("global_kernel", self.global_kernel)):
            if k < 1 or k % 2 == 0:
                raise ValueError(f"{name} must be odd and >= 1, got {k}")
        if self.ring_width < 0:
            raise ValueError("ring_width must be >= 0")


def _draw_code(
    target: ClassLabel, policy: str, table: AngleTable, rng: np.random.Generator
) -> PolarCode:
    if policy == POLICY_FIXED:
        return PolarCode(table.rho_fixed, table.theta[target], target, policy)
    lo, hi = table.rho_range
    rho = float(rng.uniform(lo, hi))
    theta = float(
        (table.theta[target] + rng.uniform(-table.theta_jitter, table.theta_jitter))
        % (2.0 * math.pi)
    )
    return PolarCode(rho, theta, target, policy)


def sample_codes(
    target: ClassLabel,
    policy: str,
    n: int,
    table: AngleTable,
    seed: int,
) -> list[PolarCode]:
    """Fixed policy repeats the canonical code; variate draws radius and
    angle uniformly around it."""
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    rng = rng_for(seed, "codes", target.canonical_name, policy)
    return [_draw_code(target, policy, table, rng) for _ in range(n)]


@dataclass(frozen=True)
class CodeRow:
    """One codes-file row: a polar code assigned to an image."""

    image_id: str
    code: PolarCode
    seed: int


def assign_codes(
    manifest: Sequence[ImageRecord],
    targets: Sequence[ClassLabel],
    policy: str,
    table: AngleTable,
    seed: int,
) -> list[CodeRow]:
    """Assign one code per record, cycling through the target classes in
    manifest order. Each row draws from its own (seed, image_id) stream."""
    rows: list[CodeRow] = []
    for i, rec in enumerate(manifest):
        target = targets[i % len(targets)]
        rng = rng_for(seed, "code", rec.image_id)
        code = _draw_code(target, policy, table, rng)
        rows.append(CodeRow(rec.image_id, code, stable_u64(seed, "edit", rec.image_id)))
    return rows


def write_codes_csv(rows: Sequence[CodeRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CODES_CSV_HEADER)
        for row in rows:
            writer.writerow(
                [
                    row.image_id,
                    row.code.target.canonical_name,
                    row.code.policy,
                    repr(row.code.rho),
                    repr(row.code.theta),
                    str(row.seed),
                ]
            )


def load_codes_csv(path: str | Path) -> list[CodeRow]:
    rows: list[CodeRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CODES_CSV_HEADER:
            raise ValueError(f"{path}: unexpected codes header {header!r}")
        for raw in reader:
            if not raw:
                continue
            code = PolarCode(
                rho=float(raw[3]),
                theta=float(raw[4]),
                target=ClassLabel.from_name(raw[1]),
                policy=raw[2],
            )
            rows.append(CodeRow(image_id=raw[0], code=code, seed=int(raw[5])))
    return rows


def write_boxes_csv(boxes: Mapping[str, FaceBox], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(BOXES_CSV_HEADER)
        for image_id in boxes:
            box = boxes[image_id]
            writer.writerow([image_id, box.x, box.y, box.w, box.h])


def load_boxes_csv(path: str | Path) -> dict[str, FaceBox]:
    boxes: dict[str, FaceBox] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != BOXES_CSV_HEADER:
            raise ValueError(f"{path}: unexpected boxes header {header!r}")
        for raw in reader:
            if not raw:
                continue
            boxes[raw[0]] = FaceBox(int(raw[1]), int(raw[2]), int(raw[3]), int(raw[4]))
    return boxes


def context_band_mask(
    shape: tuple[int, int], box: FaceBox, band: int
) -> np.ndarray:
    """Pixels within `band` of the box on its outside, clipped to the image."""
    height, width = shape
    x0 = max(0, box.x - band)
    y0 = max(0, box.y - band)
    x1 = min(width, box.x + box.w + band)
    y1 = min(height, box.y + box.h + band)
    mask = np.zeros(shape, dtype=bool)
    mask[y0:y1, x0:x1] = True
    mask[box.y : box.y + box.h, box.x : box.x + box.w] = False
    return mask


def paste_back(
    original: Image,
    edited_crop: Image,
    box: FaceBox,
    feather_width: int = 12,
    context_band: int = 30,
) -> Image:
    """Composite an edited face crop back into its source frame.

    The crop's Lab statistics are matched to the band of original pixels
    around the box, then the result is alpha-blended under a feathered
    mask. Pixels outside the box are returned bit-exactly.
    """
    if (edited_crop.height, edited_crop.width) != (box.h, box.w):
        raise ValueError(
            f"crop {edited_crop.width}x{edited_crop.height} does not match box {box.w}x{box.h}"
        )
    if box.x < 0 or box.y < 0 or box.x + box.w > original.width or box.y + box.h > original.height:
        raise ValueError(f"box {box} exceeds image bounds")

    lab_bg = to_lab(original)
    fg_data = lab_bg.data.copy()
    fg_data[box.y : box.y + box.h, box.x : box.x + box.w] = to_lab(edited_crop).data
    fg_lab = Image(fg_data, "lab")

    shape = (original.height, original.width)
    edit_mask = np.zeros(shape, dtype=bool)
    edit_mask[box.y : box.y + box.h, box.x : box.x + box.w] = True
    ctx_mask = context_band_mask(shape, box, context_band)
    if not ctx_mask.any():
        raise ValueError("context band around the box is empty")

    transferred = color_transfer(fg_lab, edit_mask, lab_bg, ctx_mask)
    fg_srgb = to_srgb(transferred)
    alpha = feather_mask(shape, box, feather_width)
    return alpha_blend(fg_srgb, original, alpha)


def degrade(image: Image, box: FaceBox, recipe: DegradeRecipe, seed: int) -> Image:
    """Strong blur+noise on the paste-boundary ring, then a light pass over
    the full frame. Output stays in [0,1]; identical seeds give identical
    output."""
    shape = (image.height, image.width)
    ring = ring_mask(shape, box, recipe.ring_width)

    composite = image.data
    if ring.any():
        local = gaussian_blur(image, recipe.local_kernel, recipe.local_sigma).data
        if recipe.local_noise_sigma > 0.0:
            rng = rng_for(seed, "degrade-local")
            local = np.clip(
                local.astype(np.float64)
                + rng.normal(0.0, recipe.local_noise_sigma, size=local.shape),
                0.0,
                1.0,
            ).astype(np.float32)
        composite = np.where(ring[..., None], local, composite)

    out = gaussian_blur(Image(composite), recipe.global_kernel, recipe.global_sigma).data
    if recipe.global_noise_sigma > 0.0:
        rng = rng_for(seed, "degrade-global")
        out = np.clip(
            out.astype(np.float64)
            + rng.normal(0.0, recipe.global_noise_sigma, size=out.shape),
            0.0,
            1.0,
        ).astype(np.float32)
    return Image(out)


@dataclass(frozen=True)
class SkippedRecord:
    image_id: str
    reason: str


def run_edit_batch(
    originals: Sequence[ImageRecord],
    codes: Sequence[CodeRow],
    crops_dir: str | Path,
    boxes: Mapping[str, FaceBox],
    out_dir: str | Path,
    recipe: DegradeRecipe,
    originals_root: str | Path = ".",
    feather_width: int = 12,
    context_band: int = 30,
    workers: int = 1,
) -> tuple[Manifest, list[SkippedRecord]]:
    """Composite and degrade every original that has a code, crop, and box.

    Records with missing inputs are skipped and logged so partial pools
    still produce a usable manifest. Output order follows input order.
    """
    crops_dir = Path(crops_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    codes_by_id = {row.image_id: row for row in codes}

    def process(rec: ImageRecord) -> tuple[ImageRecord | None, SkippedRecord | None]:
        row = codes_by_id.get(rec.image_id)
        if row is None:
            return None, SkippedRecord(rec.image_id, "no code")
        box = boxes.get(rec.image_id)
        if box is None:
            return None, SkippedRecord(rec.image_id, "no face box")
        crop_path = crops_dir / f"{rec.image_id}.png"
        if not crop_path.exists():
            return None, SkippedRecord(rec.image_id, "no edited crop")
        try:
            original = load_image(Path(originals_root) / rec.path)
            crop = load_image(crop_path)
            pasted = paste_back(original, crop, box, feather_width, context_band)
            degraded = degrade(pasted, box, recipe, seed=row.seed)
        except ValueError as exc:
            return None, SkippedRecord(rec.image_id, str(exc))
        out_name = f"{rec.image_id}.png"
        save_image(degraded, out_dir / out_name)
        return (
            ImageRecord(
                image_id=rec.image_id,
                path=out_name,
                source=SOURCE_BY_POLICY[row.code.policy],
                label=row.code.target,
                split="train",
            ),
            None,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(process, originals))
    else:
        results = [process(rec) for rec in originals]

    manifest: Manifest = []
    skipped: list[SkippedRecord] = []
    for record, skip in results:
        if record is not None:
            manifest.append(record)
        else:
            assert skip is not None
            log.warning("skipped %s: %s", skip.image_id, skip.reason)
            skipped.append(skip)
    return manifest, skipped
