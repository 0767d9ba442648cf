"""Prompt-grid enumeration and rendering for the diffusion generators.

Enumerates the Cartesian product of demographic/pose/cue factors, renders
one portrait prompt per combination, and produces the two AU-conditioned
variants: v1 builds a subject-only prompt with the expression carried
entirely by the AU vector; v2 strips expression phrases from the full
prompt and appends a readable AU clause.
"""

from __future__ import annotations

import csv
import re
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from importlib import resources

from .core import ClassLabel
from .seeding import rng_for, stable_u64

VARIANT_SD = "sd"
VARIANT_FINEFACE_V1 = "fineface_v1"
VARIANT_FINEFACE_V2 = "fineface_v2"
VARIANTS = (VARIANT_SD, VARIANT_FINEFACE_V1, VARIANT_FINEFACE_V2)

PROMPT_CSV_HEADER = (
    "expression",
    "age",
    "gender",
    "race",
    "head_pose",
    "cue_format",
    "identity_trait",
    "variant",
    "seed",
    "au_vector",
    "prompt",
)

AUVector = tuple[tuple[int, float], ...]


class PromptTableError(ValueError):
    """A factor table is missing an entry or violates its invariants."""


class StoplistViolation(ValueError):
    """A prompt or trait contains expression-lexicon vocabulary."""


class PromptSurgeryError(ValueError):
    """The prompt to rewrite lacks the expected removable fragments."""


def _load_toml(path: str | Path | None, default_name: str) -> dict:
    if path is None:
        text = resources.files("ferforge.data").joinpath(default_name).read_text("utf-8")
        return tomllib.loads(text)
    with open(path, "rb") as fh:
        return tomllib.load(fh)


@dataclass(frozen=True)
class AUMap:
    """Expression -> (action unit id, intensity) activation table."""

    table: Mapping[ClassLabel, AUVector]

    def __post_init__(self) -> None:
        for label in ClassLabel:
            if label not in self.table:
                raise PromptTableError(f"AU map missing class {label.canonical_name}")
        for label, units in self.table.items():
            for au_id, intensity in units:
                if not 1 <= au_id <= 64:
                    raise PromptTableError(f"invalid action unit AU{au_id}")
                if not 0.0 <= intensity <= 5.0:
                    raise PromptTableError(
                        f"AU{au_id} intensity {intensity} outside [0,5]"
                    )

    def __getitem__(self, label: ClassLabel) -> AUVector:
        return self.table[label]


@dataclass(frozen=True)
class Lexicon:
    """Stoplist of expression names, affect adjectives, and cue phrases."""

    terms: tuple[str, ...]

    def scan(self, text: str, extra_phrases: Sequence[str] = ()) -> list[str]:
        """Return every stoplist term present in text (word-boundary match)."""
        hits = []
        lowered = text.lower()
        for term in tuple(self.terms) + tuple(extra_phrases):
            if re.search(rf"\b{re.escape(term.lower())}\b", lowered):
                hits.append(term)
        return hits


@dataclass(frozen=True)
class FactorSpace:
    """The enumerable factor sets plus their cue/trait/phrase tables."""

    expressions: tuple[ClassLabel, ...]
    ages: tuple[str, ...]
    genders: tuple[str, ...]
    races: tuple[str, ...]
    head_poses: tuple[str, ...]
    cue_formats: tuple[str, ...]
    adjectives: Mapping[ClassLabel, str]
    head_pose_phrases: Mapping[str, str]
    cues: Mapping[tuple[ClassLabel, str], tuple[str, ...]]
    traits: Mapping[tuple[ClassLabel, str, str], tuple[str, ...]]

    def __post_init__(self) -> None:
        for name, values in (
            ("expressions", self.expressions),
            ("ages", self.ages),
            ("genders", self.genders),
            ("races", self.races),
            ("head_poses", self.head_poses),
            ("cue_formats", self.cue_formats),
        ):
            if not values:
                raise PromptTableError(f"factor {name} is empty")
            if len(set(values)) != len(values):
                raise PromptTableError(f"factor {name} has duplicates")
        for expr in self.expressions:
            if expr not in self.adjectives:
                raise PromptTableError(f"missing adjective for {expr.canonical_name}")
            for fmt in self.cue_formats:
                if not self.cues.get((expr, fmt)):
                    raise PromptTableError(
                        f"missing cues for ({expr.canonical_name}, {fmt})"
                    )
            for age in self.ages:
                for gender in self.genders:
                    if not self.traits.get((expr, age, gender)):
                        raise PromptTableError(
                            f"missing traits for ({expr.canonical_name}, {age}, {gender})"
                        )
        for pose in self.head_poses:
            if pose not in self.head_pose_phrases:
                raise PromptTableError(f"missing phrase for head pose {pose!r}")

    @property
    def size(self) -> int:
        return (
            len(self.expressions)
            * len(self.ages)
            * len(self.genders)
            * len(self.races)
            * len(self.head_poses)
            * len(self.cue_formats)
        )

    def restrict(
        self,
        expressions: Sequence[ClassLabel] | None = None,
        ages: Sequence[str] | None = None,
        genders: Sequence[str] | None = None,
        races: Sequence[str] | None = None,
        head_poses: Sequence[str] | None = None,
        cue_formats: Sequence[str] | None = None,
    ) -> "FactorSpace":
        def pick(chosen, full, name):
            if chosen is None:
                return full
            bad = set(chosen) - set(full)
            if bad:
                raise PromptTableError(f"unknown {name}: {sorted(map(str, bad))}")
            return tuple(chosen)

        return FactorSpace(
            expressions=pick(expressions, self.expressions, "expressions"),
            ages=pick(ages, self.ages, "ages"),
            genders=pick(genders, self.genders, "genders"),
            races=pick(races, self.races, "races"),
            head_poses=pick(head_poses, self.head_poses, "head_poses"),
            cue_formats=pick(cue_formats, self.cue_formats, "cue_formats"),
            adjectives=self.adjectives,
            head_pose_phrases=self.head_pose_phrases,
            cues=self.cues,
            traits=self.traits,
        )


@dataclass(frozen=True)
class FactorTuple:
    """One concrete factor combination with its chosen cue and trait."""

    expression: ClassLabel
    age: str
    gender: str
    race: str
    head_pose: str
    cue_format: str
    cue: str
    identity_trait: str


@dataclass(frozen=True)
class PromptSpec:
    factors: FactorTuple
    prompt: str
    variant: str
    au_vector: AUVector | None
    seed: int

    def __post_init__(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if (self.au_vector is not None) != (self.variant != VARIANT_SD):
            raise ValueError("au_vector must be present iff variant is not sd")


def load_au_map(path: str | Path | None = None) -> AUMap:
    raw = _load_toml(path, "au_map.toml")["au_map"]
    table: dict[ClassLabel, AUVector] = {}
    for name, entries in raw.items():
        table[ClassLabel.from_name(name)] = tuple(
            _parse_au_entry(entry) for entry in entries
        )
    return AUMap(table=table)


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    raw = _load_toml(path, "lexicon.toml")["lexicon"]
    return Lexicon(terms=tuple(raw["terms"]))


def load_factor_space(
    space_path: str | Path | None = None,
    cues_path: str | Path | None = None,
    traits_path: str | Path | None = None,
) -> FactorSpace:
    space_raw = _load_toml(space_path, "factor_space.toml")
    cues_raw = _load_toml(cues_path, "cues.toml")["cues"]
    traits_raw = _load_toml(traits_path, "traits.toml")["traits"]

    factors = space_raw["factors"]
    expressions = tuple(ClassLabel.from_name(n) for n in factors["expressions"])
    adjectives = {
        ClassLabel.from_name(n): adj
        for n, adj in space_raw["expression_adjectives"].items()
    }

    cue_formats = tuple(factors["cue_formats"])
    cues: dict[tuple[ClassLabel, str], tuple[str, ...]] = {}
    for name, by_format in cues_raw.items():
        label = ClassLabel.from_name(name)
        for fmt, phrases in by_format.items():
            cues[(label, fmt)] = tuple(phrases)

    ages = tuple(factors["ages"])
    genders = tuple(factors["genders"])
    defaults = traits_raw.get("default", {})
    traits: dict[tuple[ClassLabel, str, str], tuple[str, ...]] = {}
    for expr in expressions:
        overrides = traits_raw.get(expr.canonical_name, {})
        for age in ages:
            for gender in genders:
                entry = overrides.get(age, {}).get(gender) or defaults.get(age, {}).get(gender)
                if entry:
                    traits[(expr, age, gender)] = tuple(entry)

    return FactorSpace(
        expressions=expressions,
        ages=ages,
        genders=genders,
        races=tuple(factors["races"]),
        head_poses=tuple(factors["head_poses"]),
        cue_formats=cue_formats,
        adjectives=adjectives,
        head_pose_phrases=dict(space_raw["head_pose_phrases"]),
        cues=cues,
        traits=traits,
    )


def _parse_au_entry(entry: str) -> tuple[int, float]:
    m = re.fullmatch(r"AU(\d+):([0-9.]+)", entry.strip())
    if not m:
        raise PromptTableError(f"malformed AU entry {entry!r}")
    return int(m.group(1)), float(m.group(2))


def format_intensity(value: float) -> str:
    text = f"{value:g}"
    if "." not in text and "e" not in text:
        text += ".0"
    return text


def format_au_vector(au_vector: AUVector) -> str:
    return ";".join(f"AU{au_id}:{format_intensity(v)}" for au_id, v in au_vector)


def parse_au_vector(text: str) -> AUVector:
    if not text:
        return ()
    return tuple(_parse_au_entry(part) for part in text.split(";"))


def au_clause(au_vector: AUVector) -> str:
    """Human-readable action-unit clause, empty when nothing is active."""
    if not au_vector:
        return ""
    units = ", ".join(f"AU{au_id} ({format_intensity(v)})" for au_id, v in au_vector)
    return f"Facial action units: {units}."


def render_sd(factors: FactorTuple, space: FactorSpace) -> str:
    """Instantiate the full portrait template for the text-only generator."""
    adj = space.adjectives[factors.expression]
    pose = space.head_pose_phrases[factors.head_pose]
    return (
        f"A close-up portrait clearly showing an intense and highly expressive "
        f"{adj} facial expression ({factors.cue}). "
        f"The subject is a {factors.gender} {factors.age} of {factors.race} ethnicity. "
        f"{pose[0].upper()}{pose[1:]}, {factors.identity_trait}, "
        f"captured in a real-world environment."
    )


def render_fineface_v1(
    factors: FactorTuple,
    space: FactorSpace,
    au_map: AUMap,
    lexicon: Lexicon,
) -> tuple[str, AUVector]:
    """Subject-only prompt; the expression is carried by the AU vector alone."""
    pose = space.head_pose_phrases[factors.head_pose]
    prompt = (
        f"A close-up portrait of a {factors.age} {factors.gender} with "
        f"{factors.race} ethnicity, {factors.identity_trait}, {pose}, "
        f"photorealistic, natural lighting."
    )
    cue_phrases = [c for fmt in space.cue_formats for c in space.cues[(factors.expression, fmt)]]
    hits = lexicon.scan(prompt, extra_phrases=cue_phrases)
    if hits:
        raise StoplistViolation(
            f"expression vocabulary {hits} leaked into a subject-only prompt; "
            f"check the trait tables"
        )
    return prompt, au_map[factors.expression]


def render_fineface_v2(
    sd_prompt: str,
    factors: FactorTuple,
    space: FactorSpace,
    au_map: AUMap,
) -> tuple[str, AUVector]:
    """Strip expression phrases from a rendered full prompt and append an
    AU clause."""
    adj = space.adjectives[factors.expression]
    prompt = sd_prompt
    if factors.cue:
        parenthetical = f" ({factors.cue})"
        if parenthetical not in prompt:
            raise PromptSurgeryError(
                f"prompt does not contain the cue clause {parenthetical!r}"
            )
        prompt = prompt.replace(parenthetical, "", 1)
    fragment = (
        f" clearly showing an intense and highly expressive {adj} facial expression"
    )
    if fragment in prompt:
        prompt = prompt.replace(fragment, "", 1)
    elif re.search(rf"\b{re.escape(adj)}\b", prompt) or "facial expression" in prompt:
        # Expression phrasing is present but not in the removable shape.
        raise PromptSurgeryError(
            f"prompt does not contain the removable fragment {fragment!r}"
        )
    vector = au_map[factors.expression]
    clause = au_clause(vector)
    if clause:
        prompt = f"{prompt} {clause}"
    return prompt, vector


def enumerate_grid(
    space: FactorSpace,
    variant: str,
    seed: int,
    au_map: AUMap | None = None,
    lexicon: Lexicon | None = None,
) -> list[PromptSpec]:
    """One PromptSpec per element of the factor product, in lexicographic
    factor order. Cue and trait draws depend only on (seed, cell), so a
    restricted space reproduces the matching subset of the full grid."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if variant != VARIANT_SD:
        au_map = au_map or load_au_map()
        lexicon = lexicon or load_lexicon()

    specs: list[PromptSpec] = []
    for expr in space.expressions:
        for age in space.ages:
            for gender in space.genders:
                for race in space.races:
                    for pose in space.head_poses:
                        for fmt in space.cue_formats:
                            cell = (expr.canonical_name, age, gender, race, pose, fmt)
                            rng = rng_for(seed, "grid", *cell)
                            cue_list = space.cues[(expr, fmt)]
                            trait_list = space.traits[(expr, age, gender)]
                            factors = FactorTuple(
                                expression=expr,
                                age=age,
                                gender=gender,
                                race=race,
                                head_pose=pose,
                                cue_format=fmt,
                                cue=cue_list[int(rng.integers(len(cue_list)))],
                                identity_trait=trait_list[int(rng.integers(len(trait_list)))],
                            )
                            spec_seed = stable_u64(seed, "prompt", *cell)
                            if variant == VARIANT_SD:
                                prompt, vector = render_sd(factors, space), None
                            elif variant == VARIANT_FINEFACE_V1:
                                prompt, vector = render_fineface_v1(
                                    factors, space, au_map, lexicon
                                )
                            else:
                                prompt, vector = render_fineface_v2(
                                    render_sd(factors, space), factors, space, au_map
                                )
                            specs.append(
                                PromptSpec(
                                    factors=factors,
                                    prompt=prompt,
                                    variant=variant,
                                    au_vector=vector,
                                    seed=spec_seed,
                                )
                            )
    return specs


@dataclass(frozen=True)
class PromptRow:
    """One prompt-CSV row; the on-disk representation of a PromptSpec."""

    expression: str
    age: str
    gender: str
    race: str
    head_pose: str
    cue_format: str
    identity_trait: str
    variant: str
    seed: int
    au_vector: str
    prompt: str


def to_row(spec: PromptSpec) -> PromptRow:
    return PromptRow(
        expression=spec.factors.expression.canonical_name,
        age=spec.factors.age,
        gender=spec.factors.gender,
        race=spec.factors.race,
        head_pose=spec.factors.head_pose,
        cue_format=spec.factors.cue_format,
        identity_trait=spec.factors.identity_trait,
        variant=spec.variant,
        seed=spec.seed,
        au_vector=format_au_vector(spec.au_vector) if spec.au_vector is not None else "",
        prompt=spec.prompt,
    )


def write_prompt_csv(specs: Sequence[PromptSpec], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROMPT_CSV_HEADER)
        for spec in specs:
            row = to_row(spec)
            writer.writerow(
                [
                    row.expression,
                    row.age,
                    row.gender,
                    row.race,
                    row.head_pose,
                    row.cue_format,
                    row.identity_trait,
                    row.variant,
                    str(row.seed),
                    row.au_vector,
                    row.prompt,
                ]
            )


def load_prompt_csv(path: str | Path) -> list[PromptRow]:
    rows: list[PromptRow] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != PROMPT_CSV_HEADER:
            raise PromptTableError(f"{path}: unexpected header {header!r}")
        for raw in reader:
            if not raw:
                continue
            rows.append(
                PromptRow(
                    expression=raw[0],
                    age=raw[1],
                    gender=raw[2],
                    race=raw[3],
                    head_pose=raw[4],
                    cue_format=raw[5],
                    identity_trait=raw[6],
                    variant=raw[7],
                    seed=int(raw[8]),
                    au_vector=raw[9],
                    prompt=raw[10],
                )
            )
    return rows
