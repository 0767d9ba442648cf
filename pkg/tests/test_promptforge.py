from collections import Counter

import pytest

from ferforge.core import ClassLabel
from ferforge.promptforge import (
    FactorTuple,
    PromptSpec,
    PromptSurgeryError,
    StoplistViolation,
    au_clause,
    enumerate_grid,
    format_au_vector,
    load_au_map,
    load_factor_space,
    load_lexicon,
    load_prompt_csv,
    parse_au_vector,
    render_fineface_v1,
    render_fineface_v2,
    render_sd,
    to_row,
    write_prompt_csv,
)

WORKED_EXAMPLE = (
    "A close-up portrait clearly showing an intense and highly expressive "
    "disgusted facial expression (upper lip lifted with nose wrinkling and "
    "narrowed eyes). The subject is a female child of Latino ethnicity. "
    "Slightly turned to the right, short bob cut, captured in a real-world "
    "environment."
)


@pytest.fixture(scope="module")
def space():
    return load_factor_space()


@pytest.fixture(scope="module")
def au_map():
    return load_au_map()


@pytest.fixture(scope="module")
def lexicon():
    return load_lexicon()


def worked_factors():
    return FactorTuple(
        expression=ClassLabel.DISGUST,
        age="child",
        gender="female",
        race="Latino",
        head_pose="slight right yaw",
        cue_format="descriptive",
        cue="upper lip lifted with nose wrinkling and narrowed eyes",
        identity_trait="short bob cut",
    )


class TestGrid:
    def test_full_grid_cardinality(self, space):
        specs = enumerate_grid(space, "sd", seed=0)
        assert len(specs) == 7 * 5 * 2 * 5 * 5 * 3 == 5250

    def test_class_balance(self, space):
        specs = enumerate_grid(space, "sd", seed=0)
        counts = Counter(s.factors.expression for s in specs)
        assert set(counts.values()) == {750}

    def test_singleton_space(self, space):
        one = space.restrict(
            expressions=[ClassLabel.FEAR],
            ages=["adult"],
            genders=["male"],
            races=["Asian"],
            head_poses=["frontal"],
            cue_formats=["facs"],
        )
        specs = enumerate_grid(one, "sd", seed=0)
        assert len(specs) == 1

    def test_sub_space_cardinality_law(self, space):
        sub = space.restrict(ages=["child", "older"], races=["White"])
        specs = enumerate_grid(sub, "sd", seed=0)
        assert len(specs) == 7 * 2 * 2 * 1 * 5 * 3

    def test_same_seed_identical_csv(self, space, tmp_path):
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_prompt_csv(enumerate_grid(space, "sd", seed=9), p1)
        write_prompt_csv(enumerate_grid(space, "sd", seed=9), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_missing_table_entry_errors(self, space):
        broken = dict(space.cues)
        del broken[(ClassLabel.FEAR, "facs")]
        import dataclasses

        with pytest.raises(Exception, match="fear"):
            dataclasses.replace(space, cues=broken)


class TestRenderSd:
    def test_worked_example_verbatim(self, space):
        assert render_sd(worked_factors(), space) == WORKED_EXAMPLE

    def test_fixed_prefix(self, space):
        for spec in enumerate_grid(space, "sd", seed=1)[::97]:
            assert spec.prompt.startswith("A close-up portrait clearly showing")

    def test_each_factor_surface_string_once(self, space):
        specs = enumerate_grid(space, "sd", seed=2)
        for spec in specs:
            f = spec.factors
            surfaces = [
                space.adjectives[f.expression],
                f.age,
                f.gender,
                f.race,
                space.head_pose_phrases[f.head_pose],
                f.cue,
                f.identity_trait,
            ]
            lowered = spec.prompt.lower()
            for surface in surfaces:
                assert lowered.count(surface.lower()) == 1, (surface, spec.prompt)


class TestFineFaceV1:
    def test_happiness_au_vector(self, space, au_map, lexicon):
        factors = FactorTuple(
            ClassLabel.HAPPINESS, "adult", "male", "White", "frontal",
            "descriptive", "subtle smile", "wearing glasses",
        )
        _, vector = render_fineface_v1(factors, space, au_map, lexicon)
        ids = {au for au, _ in vector}
        assert 6 in ids and 12 in ids

    def test_lexicon_scan_clean(self, space, au_map, lexicon):
        specs = enumerate_grid(space, "fineface_v1", seed=3, au_map=au_map, lexicon=lexicon)
        for spec in specs:
            assert lexicon.scan(spec.prompt) == []

    def test_neutral_vector_empty(self, space, au_map, lexicon):
        factors = FactorTuple(
            ClassLabel.NEUTRAL, "young", "female", "Black", "frontal",
            "descriptive", "relaxed features with a level gaze", "high ponytail",
        )
        _, vector = render_fineface_v1(factors, space, au_map, lexicon)
        assert vector == au_map[ClassLabel.NEUTRAL] == ()

    def test_affect_trait_rejected(self, space, au_map, lexicon):
        factors = FactorTuple(
            ClassLabel.FEAR, "young", "male", "White", "frontal",
            "descriptive", "wide eyes", "smiling warmly",
        )
        with pytest.raises(StoplistViolation):
            render_fineface_v1(factors, space, au_map, lexicon)


class TestFineFaceV2:
    def test_worked_example_surgery(self, space, au_map):
        factors = worked_factors()
        prompt, vector = render_fineface_v2(WORKED_EXAMPLE, factors, space, au_map)
        assert "disgusted" not in prompt
        assert f"({factors.cue})" not in prompt
        assert "Facial action units: AU9 (1.0), AU15 (1.0)." in prompt
        assert vector == ((9, 1.0), (15, 1.0))

    def test_clean_neutral_prompt_append_only(self, space, au_map):
        factors = FactorTuple(
            ClassLabel.NEUTRAL, "adult", "female", "Asian", "frontal",
            "descriptive", "", "wearing a light scarf",
        )
        clean = "A close-up portrait. The subject is a female adult of Asian ethnicity."
        prompt, vector = render_fineface_v2(clean, factors, space, au_map)
        assert prompt == clean
        assert vector == ()

    def test_mangled_prompt_errors(self, space, au_map):
        factors = worked_factors()
        with pytest.raises(PromptSurgeryError):
            render_fineface_v2(
                f"A portrait of a disgusted face ({factors.cue}).", factors, space, au_map
            )

    def test_stripped_output_passes_lexicon(self, space, au_map, lexicon):
        specs = enumerate_grid(space, "fineface_v2", seed=4, au_map=au_map, lexicon=lexicon)
        for spec in specs[::53]:
            clause = au_clause(spec.au_vector)
            stripped = spec.prompt.replace(f" {clause}", "") if clause else spec.prompt
            hits = lexicon.scan(stripped)
            assert hits == [], (hits, stripped)


class TestPromptCsv:
    def test_row_count(self, space, tmp_path):
        specs = enumerate_grid(space, "sd", seed=5)
        path = tmp_path / "prompts.csv"
        write_prompt_csv(specs, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 5250 + 1

    def test_round_trip(self, space, au_map, lexicon, tmp_path):
        sub = space.restrict(ages=["adult"], races=["White", "Black"])
        specs = enumerate_grid(sub, "fineface_v1", seed=6, au_map=au_map, lexicon=lexicon)
        path = tmp_path / "prompts.csv"
        write_prompt_csv(specs, path)
        rows = load_prompt_csv(path)
        assert rows == [to_row(s) for s in specs]

    def test_sd_rows_have_empty_au_column(self, space, tmp_path):
        specs = enumerate_grid(space.restrict(ages=["child"]), "sd", seed=7)
        path = tmp_path / "prompts.csv"
        write_prompt_csv(specs, path)
        for row in load_prompt_csv(path):
            assert row.au_vector == ""


def test_au_vector_formatting():
    vec = ((6, 1.0), (12, 0.8))
    assert format_au_vector(vec) == "AU6:1.0;AU12:0.8"
    assert parse_au_vector("AU6:1.0;AU12:0.8") == vec
    assert parse_au_vector("") == ()
    assert au_clause(vec) == "Facial action units: AU6 (1.0), AU12 (0.8)."
    assert au_clause(()) == ""


def test_spec_invariant_au_iff_not_sd():
    factors = worked_factors()
    with pytest.raises(ValueError):
        PromptSpec(factors=factors, prompt="x", variant="sd", au_vector=(), seed=0)
    with pytest.raises(ValueError):
        PromptSpec(factors=factors, prompt="x", variant="fineface_v1", au_vector=None, seed=0)
