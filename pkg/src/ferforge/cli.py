"""Command-line entry points: every pipeline stage as a subcommand.

Each run writes a machine-readable summary JSON naming its input digests,
seed, and output counts, so identical (config, inputs, seed) runs can be
diffed byte-for-byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import assembler, editpipe, metrics, promptforge, pseudolabel
from .core import (
    ClassLabel,
    FormatError,
    load_embeddings,
    load_manifest,
    load_posteriors,
    write_manifest,
)
from .imageops import AugmentPolicy, load_image, save_image
from .seeding import stable_u64

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("ferforge")


def _sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_summary(
    summary_path: Path,
    subcommand: str,
    seed: int | None,
    inputs: dict[str, str | Path],
    outputs: dict[str, object],
) -> None:
    payload = {
        "subcommand": subcommand,
        "seed": seed,
        "inputs": {name: _sha256(p) for name, p in sorted(inputs.items())},
        "outputs": outputs,
    }
    summary_path.parent.mkdir(parents=True, exist_ok=True)
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _summary_path(explicit: str | None, out_dir: Path | None) -> Path:
    if explicit:
        return Path(explicit)
    base = out_dir if out_dir is not None else Path(".")
    return base / "run_summary.json"


def _resolve_workers(workers: int | None) -> int:
    return workers if workers else (os.cpu_count() or 1)


def _load_recipe(path: str | None) -> editpipe.DegradeRecipe:
    if path is None:
        return editpipe.DegradeRecipe()
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    return editpipe.DegradeRecipe(**raw.get("recipe", {}))


def _load_policy(path: str | None, seed: int) -> AugmentPolicy:
    if path is None:
        return AugmentPolicy(seed=seed)
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    section = dict(raw.get("augment", {}))
    if "scale_range" in section:
        section["scale_range"] = tuple(section["scale_range"])
    return AugmentPolicy(seed=seed, **section)


@click.group(no_args_is_help=True)
def cli() -> None:
    """Dataset-curation engine for balanced expression-recognition corpora."""
    logging.basicConfig(
        level=os.environ.get("FERFORGE_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.group()
def prompts() -> None:
    """Prompt-grid generation."""


@prompts.command("gen")
@click.option("--variant", type=click.Choice(promptforge.VARIANTS), default="sd")
@click.option("--seed", type=int, default=0)
@click.option("--space", "space_path", type=click.Path(exists=True), default=None)
@click.option("--cues", "cues_path", type=click.Path(exists=True), default=None)
@click.option("--traits", "traits_path", type=click.Path(exists=True), default=None)
@click.option("--au-map", "au_map_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--summary", "summary", type=click.Path(), default=None)
def prompts_gen(variant, seed, space_path, cues_path, traits_path, au_map_path, out_path, summary):
    """Enumerate the factor grid and write the prompt CSV."""
    space = promptforge.load_factor_space(space_path, cues_path, traits_path)
    au_map = promptforge.load_au_map(au_map_path)
    specs = promptforge.enumerate_grid(space, variant, seed, au_map=au_map)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    promptforge.write_prompt_csv(specs, out)
    log.info("wrote %d prompt specs to %s", len(specs), out)
    inputs = {
        name: p
        for name, p in (
            ("space", space_path),
            ("cues", cues_path),
            ("traits", traits_path),
            ("au_map", au_map_path),
        )
        if p
    }
    _write_summary(
        _summary_path(summary, out.parent),
        "prompts gen",
        seed,
        inputs,
        {"specs": len(specs), "variant": variant, "prompt_csv": out.name},
    )


@cli.group()
def pseudo() -> None:
    """Pseudo-label filtering."""


@pseudo.command("label")
@click.option("--posteriors", "posteriors_path", type=click.Path(exists=True), required=True)
@click.option("--pool", "pool_path", type=click.Path(exists=True), default=None,
              help="Manifest of the unlabeled pool, for paths and source tags.")
@click.option("--threshold", type=float, default=0.3, show_default=True)
@click.option("--cap", type=int, default=10_000, show_default=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--summary", type=click.Path(), default=None)
def pseudo_label(posteriors_path, pool_path, threshold, cap, out_path, summary):
    """Assign, threshold, and select pseudo-labels into a manifest."""
    posteriors = load_posteriors(posteriors_path)
    policy = pseudolabel.FilterPolicy(threshold=threshold, per_class_cap=cap)
    kept, discarded = pseudolabel.filter(posteriors, policy)
    pool = None
    inputs: dict[str, str | Path] = {"posteriors": posteriors_path}
    if pool_path:
        pool = {rec.image_id: rec for rec in load_manifest(pool_path)}
        inputs["pool"] = pool_path
    manifest = pseudolabel.select_top(kept, policy, pool=pool)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out)
    log.info("kept %d / discarded %d, selected %d", len(kept), discarded, len(manifest))
    _write_summary(
        _summary_path(summary, out.parent),
        "pseudo label",
        None,
        inputs,
        {"kept": len(kept), "discarded": discarded, "selected": len(manifest)},
    )


@cli.group()
def edit() -> None:
    """Expression-edit compositing and degradation."""


@edit.command("sample-codes")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--target", default="all", show_default=True,
              help="Class name, or 'all' to cycle through every class.")
@click.option("--policy", type=click.Choice(editpipe.POLICIES), default="fixed")
@click.option("--table", "table_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--summary", type=click.Path(), default=None)
def edit_sample_codes(manifest_path, target, policy, table_path, seed, out_path, summary):
    """Assign a polar expression code to every record of a manifest."""
    manifest = load_manifest(manifest_path)
    table = editpipe.load_angle_table(table_path)
    targets = list(ClassLabel) if target == "all" else [ClassLabel.from_name(target)]
    rows = editpipe.assign_codes(manifest, targets, policy, table, seed)
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    editpipe.write_codes_csv(rows, out)
    inputs: dict[str, str | Path] = {"manifest": manifest_path}
    if table_path:
        inputs["table"] = table_path
    _write_summary(
        _summary_path(summary, out.parent),
        "edit sample-codes",
        seed,
        inputs,
        {"codes": len(rows), "policy": policy},
    )


@edit.command("composite")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--originals-root", type=click.Path(exists=True), default=".")
@click.option("--crops", "crops_dir", type=click.Path(exists=True), required=True)
@click.option("--boxes", "boxes_path", type=click.Path(exists=True), required=True)
@click.option("--codes", "codes_path", type=click.Path(exists=True), required=True)
@click.option("--recipe", "recipe_path", type=click.Path(exists=True), default=None)
@click.option("--feather", type=int, default=12, show_default=True)
@click.option("--workers", type=int, default=None, help="Defaults to available parallelism.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--summary", type=click.Path(), default=None)
def edit_composite(manifest_path, originals_root, crops_dir, boxes_path, codes_path,
                   recipe_path, feather, workers, out_dir, summary):
    """Paste edited crops back, degrade the paste boundary, emit a manifest."""
    manifest = load_manifest(manifest_path)
    codes = editpipe.load_codes_csv(codes_path)
    boxes = editpipe.load_boxes_csv(boxes_path)
    recipe = _load_recipe(recipe_path)
    out = Path(out_dir)
    result, skipped = editpipe.run_edit_batch(
        manifest, codes, crops_dir, boxes, out, recipe,
        originals_root=originals_root, feather_width=feather,
        workers=_resolve_workers(workers),
    )
    write_manifest(result, out / "manifest.jsonl")
    with open(out / "skipped.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for skip in skipped:
            fh.write(json.dumps({"image_id": skip.image_id, "reason": skip.reason},
                                separators=(",", ":")))
            fh.write("\n")
    inputs: dict[str, str | Path] = {
        "manifest": manifest_path, "codes": codes_path, "boxes": boxes_path,
    }
    if recipe_path:
        inputs["recipe"] = recipe_path
    _write_summary(
        _summary_path(summary, out),
        "edit composite",
        None,
        inputs,
        {"written": len(result), "skipped": len(skipped)},
    )


@edit.command("degrade")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--images-root", type=click.Path(exists=True), default=".")
@click.option("--boxes", "boxes_path", type=click.Path(exists=True), required=True)
@click.option("--recipe", "recipe_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--workers", type=int, default=None, help="Defaults to available parallelism.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--summary", type=click.Path(), default=None)
def edit_degrade(manifest_path, images_root, boxes_path, recipe_path, seed, workers,
                 out_dir, summary):
    """Apply the two-scale ring degradation to already-composited images."""
    manifest = load_manifest(manifest_path)
    boxes = editpipe.load_boxes_csv(boxes_path)
    recipe = _load_recipe(recipe_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    def process(rec):
        box = boxes.get(rec.image_id)
        if box is None:
            log.warning("skipped %s: no face box", rec.image_id)
            return None
        image = load_image(Path(images_root) / rec.path)
        degraded = editpipe.degrade(image, box, recipe, seed=stable_u64(seed, rec.image_id))
        out_name = f"{rec.image_id}.png"
        save_image(degraded, out / out_name)
        return replace(rec, path=out_name)

    n_workers = _resolve_workers(workers)
    if n_workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(process, manifest))
    else:
        results = [process(rec) for rec in manifest]
    written = [rec for rec in results if rec is not None]
    skipped = [rec.image_id for rec, res in zip(manifest, results) if res is None]
    write_manifest(written, out / "manifest.jsonl")
    inputs: dict[str, str | Path] = {"manifest": manifest_path, "boxes": boxes_path}
    if recipe_path:
        inputs["recipe"] = recipe_path
    _write_summary(
        _summary_path(summary, out),
        "edit degrade",
        seed,
        inputs,
        {"written": len(written), "skipped": len(skipped)},
    )


@cli.command("assemble")
@click.option("--plan", "plan_path", type=click.Path(exists=True), required=True)
@click.option("--regime", type=click.Choice(assembler.REGIMES), default=None,
              help="Override the plan file's regime.")
@click.option("--cap", type=int, default=None, help="Override the per-class cap.")
@click.option("--seed", type=int, default=None, help="Override the plan seed.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--summary", type=click.Path(), default=None)
def assemble_cmd(plan_path, regime, cap, seed, out_dir, summary):
    """Run an assembly plan into a manifest plus count reports."""
    plan = assembler.load_plan(plan_path)
    overrides = {}
    if regime is not None:
        overrides["regime"] = regime
    if cap is not None:
        overrides["per_class_cap"] = cap
    if seed is not None:
        overrides["seed"] = seed
    if overrides:
        plan = replace(plan, **overrides)
    manifest, report = assembler.assemble(plan)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_manifest(manifest, out / "manifest.jsonl")

    lines = ["source,class,planned,achieved,shortfall"]
    for (source, label), cell in sorted(
        report.cells.items(), key=lambda kv: (kv[0][0], kv[0][1].value)
    ):
        lines.append(
            f"{source},{label.canonical_name},{cell.planned},{cell.achieved},"
            f"{'yes' if cell.shortfall else 'no'}"
        )
    (out / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out / "report.txt").write_text(
        assembler.report_counts(manifest).render() + "\n"
        + "".join(f"note: {n}\n" for n in report.notes),
        encoding="utf-8",
    )
    jobs_written = 0
    if plan.regime in ("addon", "allaug"):
        jobs = assembler.emit_augment_jobs(
            plan.real_manifest, plan.regime, plan.per_class_cap, seed=plan.seed
        )
        assembler.write_jobs(jobs, out / "jobs.jsonl")
        jobs_written = len(jobs)
    _write_summary(
        _summary_path(summary, out),
        "assemble",
        plan.seed,
        {"plan": plan_path},
        {"records": len(manifest), "regime": plan.regime, "jobs": jobs_written,
         "shortfalls": len(report.shortfalls())},
    )


@cli.group()
def augment() -> None:
    """Classical augmentation execution."""


@augment.command("run")
@click.option("--jobs", "jobs_path", type=click.Path(exists=True), required=True)
@click.option("--images-root", type=click.Path(exists=True), default=".")
@click.option("--base-manifest", "base_path", type=click.Path(exists=True), default=None,
              help="Originals to include alongside the augmented records.")
@click.option("--policy", "policy_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0, help="Policy seed (jobs carry their own draws).")
@click.option("--workers", type=int, default=None, help="Defaults to available parallelism.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--summary", type=click.Path(), default=None)
def augment_run(jobs_path, images_root, base_path, policy_path, seed, workers, out_dir, summary):
    """Execute augmentation jobs and write the original + augmented manifest."""
    jobs = assembler.load_jobs(jobs_path)
    policy = _load_policy(policy_path, seed)
    out = Path(out_dir)
    augmented = assembler.run_augment_jobs(
        jobs, policy, images_root, out, workers=_resolve_workers(workers)
    )
    write_manifest(augmented, out / "augmented.jsonl")
    combined = 0
    inputs: dict[str, str | Path] = {"jobs": jobs_path}
    if base_path:
        base = load_manifest(base_path)
        merged = sorted(
            base + augmented, key=lambda r: (r.label.value, r.source, r.image_id)
        )
        write_manifest(merged, out / "combined.jsonl")
        combined = len(merged)
        inputs["base_manifest"] = base_path
    if policy_path:
        inputs["policy"] = policy_path
    _write_summary(
        _summary_path(summary, out),
        "augment run",
        seed,
        inputs,
        {"augmented": len(augmented), "combined": combined},
    )


@cli.group("metrics")
def metrics_group() -> None:
    """Evaluation metrics."""


@metrics_group.command("eval")
@click.option("--preds", "preds_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), default=None)
@click.option("--summary", type=click.Path(), default=None)
def metrics_eval(preds_path, out_dir, summary):
    """Accuracy, macro-F1, class-wise accuracy, and the confusion matrix."""
    preds = metrics.load_predictions(preds_path)
    matrix = metrics.confusion(preds)
    report = metrics.render_classification_report(matrix)
    click.echo(report)
    out = Path(out_dir) if out_dir else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report + "\n", encoding="utf-8")
        with open(out / "confusion.csv", "w", encoding="utf-8", newline="\n") as fh:
            fh.write("true\\pred," + ",".join(c.canonical_name for c in ClassLabel) + "\n")
            for label in ClassLabel:
                fh.write(label.canonical_name + "," + ",".join(str(int(v)) for v in matrix[label.value]) + "\n")
    _write_summary(
        _summary_path(summary, out),
        "metrics eval",
        None,
        {"preds": preds_path},
        {
            "pairs": len(preds),
            "accuracy": metrics.accuracy(matrix),
            "macro_f1": metrics.macro_f1(matrix),
        },
    )


@metrics_group.command("fid")
@click.option("--a", "a_path", type=click.Path(exists=True), required=True)
@click.option("--b", "b_path", type=click.Path(exists=True), required=True)
@click.option("--summary", type=click.Path(), default=None)
def metrics_fid(a_path, b_path, summary):
    """Frechet distance between two embedding sets."""
    value = metrics.fid(load_embeddings(a_path), load_embeddings(b_path))
    click.echo(f"fid {value:.6f}")
    _write_summary(
        _summary_path(summary, None),
        "metrics fid",
        None,
        {"a": a_path, "b": b_path},
        {"fid": value},
    )


@metrics_group.command("kid")
@click.option("--a", "a_path", type=click.Path(exists=True), required=True)
@click.option("--b", "b_path", type=click.Path(exists=True), required=True)
@click.option("--subset-size", type=int, default=100, show_default=True)
@click.option("--n-subsets", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0)
@click.option("--summary", type=click.Path(), default=None)
def metrics_kid(a_path, b_path, subset_size, n_subsets, seed, summary):
    """Kernel distance (unbiased MMD^2) between two embedding sets."""
    mean, std = metrics.kid(
        load_embeddings(a_path), load_embeddings(b_path),
        subset_size=subset_size, n_subsets=n_subsets, seed=seed,
    )
    click.echo(f"kid {mean:.6f} +/- {std:.6f}")
    _write_summary(
        _summary_path(summary, None),
        "metrics kid",
        seed,
        {"a": a_path, "b": b_path},
        {"kid_mean": mean, "kid_std": std},
    )


@cli.group()
def report() -> None:
    """Count and demographic reports."""


@report.command("counts")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Also write a CSV.")
@click.option("--summary", type=click.Path(), default=None)
def report_counts_cmd(manifest_path, out_path, summary):
    """Per-source, per-class sample counts in the standard table layout."""
    manifest = load_manifest(manifest_path)
    table = assembler.report_counts(manifest)
    click.echo(table.render())
    if out_path:
        table.write_csv(out_path)
    _write_summary(
        _summary_path(summary, Path(out_path).parent if out_path else None),
        "report counts",
        None,
        {"manifest": manifest_path},
        {"records": len(manifest), "sources": list(table.source_order)},
    )


@report.command("demographics")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--attributes", "attributes_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None, help="Also write a CSV.")
@click.option("--summary", type=click.Path(), default=None)
def report_demographics(manifest_path, attributes_path, out_path, summary):
    """Gender/race/age tallies for a manifest."""
    manifest = load_manifest(manifest_path)
    attributes = metrics.load_attributes(attributes_path)
    tally = metrics.tally_attributes(manifest, attributes)
    click.echo(tally.render())
    if out_path:
        tally.write_csv(out_path)
    _write_summary(
        _summary_path(summary, Path(out_path).parent if out_path else None),
        "report demographics",
        None,
        {"manifest": manifest_path, "attributes": attributes_path},
        {"records": tally.total},
    )


def main(argv: list[str] | None = None) -> int:
    """Dispatch; exit 0 on success, 1 on validation errors, 2 on I/O errors."""
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show()
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (FormatError, ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
