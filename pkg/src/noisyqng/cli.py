"""Command-line entry point: ``noisyqng run`` and ``noisyqng validate``."""

from __future__ import annotations

import json
import logging
import sys
import traceback
from pathlib import Path

import click

from . import __version__
from .config import ConfigError, load_config, read_document, violations
from .experiments.studies import default_workers
from .io import ERROR_NAME, Manifest, write_json
from .runs import execute

EXIT_INVALID_CONFIG = 2
EXIT_RUNTIME_FAILURE = 1

log = logging.getLogger("noisyqng")


def _emit_error(kind: str, message: str, **extra) -> dict:
    record = {"status": "error", "kind": kind, "message": message, **extra}
    click.echo(json.dumps(record), err=True)
    return record


@click.group()
@click.version_option(__version__, prog_name="noisyqng")
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool):
    """Noisy-circuit natural gradient experiments."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
@click.option("--output-dir", type=click.Path(file_okay=False), default=None, help="Overrides output_dir in the config.")
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Worker processes (default: available cores).")
@click.option("--seed", type=click.IntRange(min=0), default=None, help="Overrides master_seed in the config.")
def run(config: str, output_dir: str | None, workers: int | None, seed: int | None):
    """Run the experiment described by CONFIG."""
    try:
        cfg = load_config(config, seed=seed, output_dir=output_dir)
    except ConfigError as exc:
        _emit_error("invalid-config", "configuration rejected", violations=exc.violations)
        sys.exit(EXIT_INVALID_CONFIG)
    out = Path(cfg.output_dir or "results")
    workers = workers or default_workers()
    manifest = Manifest(out, cfg.model_dump(mode="json"))
    files: list[Path] = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        manifest.start()
        log.info("running %s into %s with %d worker(s)", cfg.experiment, out, workers)
        files = execute(cfg, out, workers)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        record = _emit_error("runtime", f"{type(exc).__name__}: {exc}", traceback=traceback.format_exc())
        try:
            files.append(write_json(out / ERROR_NAME, record))
            manifest.finish(files, status="failed", error={"kind": "runtime", "message": record["message"]})
        except OSError:
            pass
        sys.exit(EXIT_RUNTIME_FAILURE)
    manifest.finish(files)
    for f in files:
        click.echo(str(f))


@main.command()
@click.argument("config", type=click.Path(dir_okay=False))
def validate(config: str):
    """List every constraint CONFIG violates. Writes nothing."""
    try:
        found = violations(read_document(config))
    except ConfigError as exc:
        found = exc.violations
    click.echo(json.dumps({"config": str(config), "valid": not found, "violations": found}, indent=2))
    sys.exit(EXIT_INVALID_CONFIG if found else 0)


if __name__ == "__main__":
    main()
