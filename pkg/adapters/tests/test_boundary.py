"""Boundary contract: every adapter output must load through the primary
engine's parsers with zero validation errors."""

import json

import numpy as np
import pytest

from ferforge_adapters import backends, exporters, formats, generators

# The primary engine is the other side of the contract.
ferforge_core = pytest.importorskip("ferforge.core")
from ferforge.core import load_embeddings, load_posteriors  # noqa: E402
from ferforge.editpipe import load_boxes_csv  # noqa: E402
from ferforge.metrics import AGE_BUCKETS, GENDERS, RACES, load_attributes  # noqa: E402


def read_skips(path):
    skip_path = formats.skip_file_for(path)
    return [json.loads(line) for line in skip_path.read_text().splitlines() if line]


class TestPosteriorBoundary:
    def test_loads_with_zero_errors(self, tmp_path, image_dir):
        out = tmp_path / "posteriors.csv"
        job = exporters.AdapterJob("teacher_classifier", image_dir, out, batch_size=6)
        rows, skips = exporters.export_posteriors(job, backends.StubTeacher())
        assert rows == 20 and skips == 0
        posteriors = load_posteriors(out)  # validates sums and ordering
        assert len(posteriors) == 20
        for post in posteriors:
            assert abs(sum(post.probs) - 1.0) <= 1e-4

    def test_outputs_and_skips_partition_inputs(self, tmp_path, image_dir):
        # Corrupt one file: it must land in the skip file, not the output.
        (image_dir / "img_007.png").write_bytes(b"not a png")
        out = tmp_path / "posteriors.csv"
        job = exporters.AdapterJob("teacher_classifier", image_dir, out)
        exporters.export_posteriors(job, backends.StubTeacher())
        produced = {p.image_id for p in load_posteriors(out)}
        skipped = {s["image_id"] for s in read_skips(out)}
        everything = {p.stem for p in image_dir.iterdir()}
        assert produced | skipped == everything
        assert not (produced & skipped)
        assert "img_007" in skipped

    def test_deterministic_across_runs(self, tmp_path, image_dir):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            job = exporters.AdapterJob("teacher_classifier", image_dir, out)
            exporters.export_posteriors(job, backends.StubTeacher())
        assert a.read_bytes() == b.read_bytes()


class TestEmbeddingBoundary:
    def test_round_trip_through_primary_loader(self, tmp_path, image_dir):
        out = tmp_path / "vectors.emb"
        job = exporters.AdapterJob("embedder", image_dir, out, batch_size=7)
        count, skips = exporters.export_embeddings(job, backends.StubEmbedder(dim=64))
        assert count == 20 and skips == 0
        emb = load_embeddings(out)
        assert emb.count == 20 and emb.dim == 64
        assert len(set(emb.ids)) == 20

    def test_duplicate_image_cosine_similarity(self, tmp_path, image_dir):
        out = tmp_path / "vectors.emb"
        job = exporters.AdapterJob("embedder", image_dir, out)
        exporters.export_embeddings(job, backends.StubEmbedder(dim=64))
        emb = load_embeddings(out)
        index = {image_id: i for i, image_id in enumerate(emb.ids)}
        a = emb.vectors[index["img_000"]].astype(np.float64)
        b = emb.vectors[index["img_018"]].astype(np.float64)
        cosine = float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))
        assert abs(cosine - 1.0) <= 1e-5

    def test_count_matches_survivors(self, tmp_path, image_dir):
        (image_dir / "img_003.png").write_bytes(b"broken")
        out = tmp_path / "vectors.emb"
        job = exporters.AdapterJob("embedder", image_dir, out)
        count, skips = exporters.export_embeddings(job, backends.StubEmbedder(dim=64))
        assert count == 19 and skips == 1
        assert load_embeddings(out).count == 19


class TestFaceBoundary:
    def test_boxes_and_attributes_load(self, tmp_path, image_dir):
        boxes_path = tmp_path / "boxes.csv"
        attrs_path = tmp_path / "attrs.csv"
        job = exporters.AdapterJob("face_detector", image_dir, boxes_path)
        detector, predictor = backends.make_face_backends("stub")
        n_boxes, n_skips = exporters.export_boxes_and_attributes(
            job, detector, predictor, attrs_path
        )
        assert n_boxes == 19 and n_skips == 1  # the flat frame has no face
        boxes = load_boxes_csv(boxes_path)
        for image_id, box in boxes.items():
            assert 0 <= box.x and 0 <= box.y
            assert box.x + box.w <= 48 and box.y + box.h <= 48
        attrs = load_attributes(attrs_path)  # primary loader validates categories
        assert set(attrs) == set(boxes)
        for record in attrs.values():
            assert record.gender in GENDERS
            assert record.race in RACES
            assert record.age_bucket in AGE_BUCKETS

    def test_undetectable_listed_in_skip_file(self, tmp_path, image_dir):
        boxes_path = tmp_path / "boxes.csv"
        job = exporters.AdapterJob("face_detector", image_dir, boxes_path)
        detector, predictor = backends.make_face_backends("stub")
        exporters.export_boxes_and_attributes(job, detector, predictor, tmp_path / "a.csv")
        skips = read_skips(boxes_path)
        assert len(skips) == 1
        assert skips[0]["image_id"] == "img_019_flat"
        assert skips[0]["reason"] == "no face"

    def test_partition_law(self, tmp_path, image_dir):
        boxes_path = tmp_path / "boxes.csv"
        job = exporters.AdapterJob("face_detector", image_dir, boxes_path)
        detector, predictor = backends.make_face_backends("stub")
        exporters.export_boxes_and_attributes(job, detector, predictor, tmp_path / "a.csv")
        produced = set(load_boxes_csv(boxes_path))
        skipped = {s["image_id"] for s in read_skips(boxes_path)}
        everything = {p.stem for p in image_dir.iterdir()}
        assert produced | skipped == everything
        assert not (produced & skipped)


class TestGeneratorBoundary:
    def _write_prompts(self, path, n=2):
        from ferforge.core import ClassLabel
        from ferforge.promptforge import enumerate_grid, load_factor_space, write_prompt_csv

        space = load_factor_space().restrict(
            expressions=[ClassLabel.HAPPINESS], ages=["adult"], genders=["female"],
            races=["White", "Black"][:n], head_poses=["frontal"], cue_formats=["descriptive"],
        )
        specs = enumerate_grid(space, "sd", seed=3)
        write_prompt_csv(specs, path)
        return len(specs)

    def test_two_prompts_two_samples(self, tmp_path):
        prompts = tmp_path / "prompts.csv"
        n_rows = self._write_prompts(prompts, n=2)
        assert n_rows == 2
        out = tmp_path / "generated"
        written, failed = generators.drive_generator(
            prompts, out, backends.StubGenerator(size=32), samples_per_prompt=2
        )
        assert written <= 4 and failed == 0
        images = sorted(p.name for p in out.glob("*.png"))
        assert images == ["00000_00.png", "00000_01.png", "00001_00.png", "00001_01.png"]

    def test_provenance_resolves_against_prompt_csv(self, tmp_path):
        prompts = tmp_path / "prompts.csv"
        n_rows = self._write_prompts(prompts, n=2)
        out = tmp_path / "generated"
        generators.drive_generator(
            prompts, out, backends.StubGenerator(size=32), samples_per_prompt=2
        )
        provenance = [
            json.loads(line)
            for line in (out / "provenance.jsonl").read_text().splitlines()
        ]
        rows = generators.read_prompt_csv(prompts)
        for entry in provenance:
            assert 0 <= entry["row_index"] < n_rows
            assert (out / f"{entry['image_id']}.png").exists()
            assert rows[entry["row_index"]]["expression"] == entry["expression"]

    def test_rerun_reproduces_file_names_and_bytes(self, tmp_path):
        prompts = tmp_path / "prompts.csv"
        self._write_prompts(prompts, n=2)
        out1, out2 = tmp_path / "g1", tmp_path / "g2"
        for out in (out1, out2):
            generators.drive_generator(
                prompts, out, backends.StubGenerator(size=32), samples_per_prompt=1
            )
        names1 = sorted(p.name for p in out1.glob("*.png"))
        names2 = sorted(p.name for p in out2.glob("*.png"))
        assert names1 == names2
        for name in names1:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_failing_row_logged_and_run_continues(self, tmp_path):
        prompts = tmp_path / "prompts.csv"
        self._write_prompts(prompts, n=2)

        class FlakyBackend(backends.StubGenerator):
            def generate(self, prompt, au_vector, seed, sample_index):
                if "Black" in prompt:
                    raise RuntimeError("backend crash")
                return super().generate(prompt, au_vector, seed, sample_index)

        out = tmp_path / "generated"
        written, failed = generators.drive_generator(
            prompts, out, FlakyBackend(size=32), samples_per_prompt=1
        )
        assert failed == 1 and written == 1
        failures = [
            json.loads(line) for line in (out / "failures.jsonl").read_text().splitlines()
        ]
        assert failures[0]["row_index"] == 1
