"""ferforge-adapt: run a model backend over inputs and emit exchange files."""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from . import backends, exporters, generators

log = logging.getLogger("ferforge_adapters")


@click.group(no_args_is_help=True)
def cli() -> None:
    """Model adapters emitting the curation engine's exchange files."""
    logging.basicConfig(
        level=os.environ.get("FERFORGE_LOG", "INFO").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command("posteriors")
@click.option("--model", default="stub", show_default=True,
              help="stub or torchscript:<checkpoint path>")
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--output", "output_path", type=click.Path(), required=True)
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--device", default="cpu", show_default=True)
def posteriors_cmd(model, input_path, output_path, batch_size, device):
    """Teacher softmax posteriors for a directory of images."""
    job = exporters.AdapterJob(
        kind="teacher_classifier", input_path=Path(input_path),
        output_path=Path(output_path), batch_size=batch_size, device=device,
    )
    rows, skips = exporters.export_posteriors(job, backends.make_teacher(model, device))
    click.echo(f"posteriors: {rows} rows, {skips} skipped")


@cli.command("embeddings")
@click.option("--model", default="stub", show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--output", "output_path", type=click.Path(), required=True)
@click.option("--dim", type=int, default=64, show_default=True,
              help="Embedding width for the stub backend.")
@click.option("--batch-size", type=int, default=16, show_default=True)
@click.option("--device", default="cpu", show_default=True)
def embeddings_cmd(model, input_path, output_path, dim, batch_size, device):
    """Vision embeddings for a directory of images (EMB1 + id sidecar)."""
    job = exporters.AdapterJob(
        kind="embedder", input_path=Path(input_path),
        output_path=Path(output_path), batch_size=batch_size, device=device,
    )
    count, skips = exporters.export_embeddings(
        job, backends.make_embedder(model, dim=dim, device=device)
    )
    click.echo(f"embeddings: {count} vectors, {skips} skipped")


@cli.command("faces")
@click.option("--model", default="stub", show_default=True)
@click.option("--input", "input_path", type=click.Path(exists=True), required=True)
@click.option("--output", "output_path", type=click.Path(), required=True,
              help="Face-box CSV path.")
@click.option("--attributes", "attributes_path", type=click.Path(), required=True,
              help="Attribute CSV path.")
@click.option("--batch-size", type=int, default=16, show_default=True)
def faces_cmd(model, input_path, output_path, attributes_path, batch_size):
    """Face boxes plus demographic attributes; misses land in the skip file."""
    job = exporters.AdapterJob(
        kind="face_detector", input_path=Path(input_path),
        output_path=Path(output_path), batch_size=batch_size,
    )
    detector, predictor = backends.make_face_backends(model)
    boxes, skips = exporters.export_boxes_and_attributes(
        job, detector, predictor, attributes_path
    )
    click.echo(f"faces: {boxes} boxes, {skips} skipped")


@cli.command("generate")
@click.option("--model", default="stub", show_default=True)
@click.option("--prompts", "prompts_path", type=click.Path(exists=True), required=True)
@click.option("--output", "out_dir", type=click.Path(), required=True)
@click.option("--samples-per-prompt", type=int, default=1, show_default=True)
@click.option("--size", type=int, default=64, show_default=True,
              help="Output resolution for the stub backend.")
def generate_cmd(model, prompts_path, out_dir, samples_per_prompt, size):
    """Feed a prompt CSV to a generator backend; images + provenance out."""
    written, failed = generators.drive_generator(
        prompts_path, out_dir, backends.make_generator(model, size=size),
        samples_per_prompt=samples_per_prompt,
    )
    click.echo(f"generated: {written} images, {failed} failed rows")


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show()
        return 1
    except ValueError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"io error: {exc}", err=True)
        return 2


if __name__ == "__main__":
    sys.exit(main())
