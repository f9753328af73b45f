"""``kgq`` command line."""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from . import combine as cmb
from .config import ConfigError, PipelineConfig, load_config, parse_types
from .constraints import build_indexes, read_specs
from .deprecation import extract_deprecated_stream
from .diff import (
    EmptySequence,
    annotate_redirects,
    diff_files,
    manifest_redirects,
    read_ledger,
    read_manifest,
)
from .fetch import ChecksumMismatch, NetworkFailure, fetch_dump
from .model import IdentityMode, MissingColumn, ParseReport, load_dump, read_redirects, read_statements
from .pipeline import (
    PipelineBusy,
    load_added_dir,
    read_community_keys,
    run_pipeline,
    stage_accumulate,
    stage_classify,
    stage_combine,
    stage_compile,
    stage_deprecated,
    stage_validate,
    write_redirect_report,
)

log = logging.getLogger("kgq")

_EXISTING = click.Path(exists=True, dir_okay=False, path_type=Path)
_EXISTING_DIR = click.Path(exists=True, file_okay=False, path_type=Path)
_OUT = click.Path(path_type=Path)

_DOMAIN_ERRORS = (ConfigError, MissingColumn, EmptySequence, ChecksumMismatch,
                  NetworkFailure, PipelineBusy, FileNotFoundError, ValueError)


def _cfg(ctx: click.Context) -> PipelineConfig:
    return ctx.obj


def _report_issues(report: ParseReport) -> None:
    for issue in report.issues[:20]:
        click.echo(f"warning: {issue}", err=True)
    if len(report.issues) > 20:
        click.echo(f"warning: ... {len(report.issues) - 20} more parse issues", err=True)


@click.group()
@click.option("--config", "config_path", type=_EXISTING, help="Pipeline config file.")
@click.option("--workers", type=click.IntRange(min=1), help="Parallel worker processes.")
@click.option("--scratch", type=_OUT, help="Directory for sort spill files.")
@click.option("--identity-mode", type=click.Choice(["content", "id"]),
              help="Statement identity used by all set operations.")
@click.option("-v", "--verbose", count=True)
@click.pass_context
def cli(ctx, config_path, workers, scratch, identity_mode, verbose):
    """Quality indicators for hyperrelational knowledge-graph dumps."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(config_path) if config_path else PipelineConfig()
    except ConfigError as exc:
        raise click.UsageError(str(exc)) from None
    if scratch is not None:
        scratch.mkdir(parents=True, exist_ok=True)
    ctx.obj = cfg.override(workers=workers, scratch=scratch,
                           identity_mode=IdentityMode(identity_mode) if identity_mode else None)


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        sys.exit(1)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except _DOMAIN_ERRORS as exc:
        click.echo(f"error: {type(exc).__name__}: {exc}", err=True)
        sys.exit(1)
    else:
        sys.exit(0)


@cli.command()
@click.option("--old", type=_EXISTING, required=True)
@click.option("--new", type=_EXISTING, required=True)
@click.option("--out", type=_OUT, required=True, help="Directory for added.tsv / removed.tsv.")
@click.pass_context
def diff(ctx, old, new, out):
    """Added and removed statements between two dumps."""
    cfg = _cfg(ctx)
    report = ParseReport()
    counts = diff_files(old, new, out, identity_mode=cfg.identity_mode,
                        chunk_size=cfg.chunk_size, scratch_dir=cfg.scratch, report=report)
    _report_issues(report)
    click.echo(f"added\t{counts.added}\nremoved\t{counts.removed}")


@cli.command()
@click.option("--manifest", type=_EXISTING, required=True,
              help="Dump paths in chronological order, one per line.")
@click.option("--out", type=_OUT, required=True, help="Ledger edge file.")
@click.option("--added-dir", type=_OUT, help="Also write each interval's added statements here.")
@click.option("--redirect-report", type=_OUT, help="Write redirect analysis of the ledger.")
@click.pass_context
def accumulate(ctx, manifest, out, added_dir, redirect_report):
    """Permanently removed statements across a dump sequence."""
    cfg = _cfg(ctx)
    entries = read_manifest(manifest)
    report = ParseReport()
    ledger = stage_accumulate(entries, out, added_dir, cfg, report)
    _report_issues(report)
    if redirect_report:
        write_redirect_report(annotate_redirects(ledger, manifest_redirects(entries)),
                              redirect_report)
    click.echo(f"removed\t{len(ledger)}")


@cli.command("classify-updates")
@click.option("--ledger", type=_EXISTING, required=True)
@click.option("--added", type=_EXISTING_DIR, required=True,
              help="Directory of per-interval added statements.")
@click.option("--out", type=_OUT, required=True)
@click.option("--redirects", type=_EXISTING, help="Redirect file (node1 -> node2).")
@click.pass_context
def classify_updates(ctx, ledger, added, out, redirects):
    """Split removals into pure removals, equivalent and significant updates."""
    cfg = _cfg(ctx)
    led = read_ledger(ledger, identity_mode=cfg.identity_mode)
    rmap = read_redirects(redirects) if redirects else None
    result, _ = stage_classify(led, load_added_dir(added), out, cfg, rmap)
    click.echo(f"classified\t{len(result.classifications)}\nlow_quality\t{len(result.low_quality)}")


@cli.command()
@click.option("--dump", "dump_path", type=_EXISTING, required=True)
@click.option("--instances", type=_EXISTING, help="Instance-of edges (defaults to the dump).")
@click.option("--out", type=_OUT, required=True)
@click.pass_context
def deprecated(ctx, dump_path, instances, out):
    """Deprecated-rank statements by property and subject class."""
    cfg = _cfg(ctx)
    dump = load_dump(dump_path, identity_mode=cfg.identity_mode)
    inst = list(read_statements(instances)) if instances else None
    dep = stage_deprecated(dump, inst, out)
    click.echo(f"deprecated\t{len(dep)}")


@cli.group()
def constraints():
    """Constraint compilation."""


@constraints.command("compile")
@click.option("--dump", "dump_path", type=_EXISTING, required=True)
@click.option("--config", "roles_path", type=_EXISTING,
              help="Config file whose role.* keys map qualifier roles.")
@click.option("--out", type=_OUT, required=True, help="Specs file.")
@click.pass_context
def compile_(ctx, dump_path, roles_path, out):
    """Compile constraint declarations found in a dump."""
    cfg = _cfg(ctx)
    if roles_path:
        cfg = cfg.override(roles=load_config(roles_path).roles)
    result = stage_compile(read_statements(dump_path), cfg, out)
    click.echo(f"specs\t{len(result.specs)}")
    for reason, n in sorted(result.skipped.items()):
        click.echo(f"skipped.{reason}\t{n}")


@cli.command()
@click.option("--specs", type=_EXISTING, required=True)
@click.option("--dump", "dump_path", type=_EXISTING, required=True)
@click.option("--types", default=None, help="Comma-separated subset of "
              "type,valuetype,irs,inverse,symmetric.")
@click.option("--out", type=_OUT, required=True)
@click.pass_context
def validate(ctx, specs, dump_path, types, out):
    """Validate constraints; writes per-spec partitions and summaries."""
    cfg = _cfg(ctx)
    if types:
        cfg = cfg.override(types=parse_types(types))
    dump = load_dump(dump_path, identity_mode=cfg.identity_mode)
    index, closure = build_indexes(dump, cfg.identity_mode)
    reports = stage_validate(read_specs(specs), index, closure, out, cfg)
    click.echo(f"reports\t{len(reports)}\nviolations\t{sum(len(r.incorrect) for r in reports)}")


@cli.command()
@click.option("--dump", "dump_path", type=_EXISTING, required=True)
@click.option("--ledger", type=_EXISTING, required=True)
@click.option("--specs", type=_EXISTING, required=True)
@click.option("--deprecated", "deprecated_path", type=_EXISTING, required=True)
@click.option("--classifications", type=_EXISTING,
              help="classifications.tsv; without it every removal counts as low quality.")
@click.option("--out", type=_OUT, required=True)
@click.pass_context
def combine(ctx, dump_path, ledger, specs, deprecated_path, classifications, out):
    """Violations with and without removals, overlap, and the low-quality union."""
    cfg = _cfg(ctx)
    dump = load_dump(dump_path, identity_mode=cfg.identity_mode)
    led = read_ledger(ledger, identity_mode=cfg.identity_mode)
    dep = extract_deprecated_stream(read_statements(deprecated_path), dump.label,
                                    cfg.identity_mode)
    community = read_community_keys(classifications, cfg.identity_mode) if classifications else None
    outcome = stage_combine(dump, led, read_specs(specs), dep.statements, community, out, cfg)
    click.echo(f"v\t{len(outcome.v)}\nv_del\t{len(outcome.v_del)}\n"
               f"v_fixed\t{len(outcome.indicators.fixed)}\nlow_quality\t{len(outcome.low_quality)}")
    click.echo(cmb.LIMITATION, err=True)


@cli.command()
@click.option("--manifest", type=_EXISTING, help="Overrides the config's manifest.")
@click.option("--out", type=_OUT, required=True, help="Report bundle directory.")
@click.pass_context
def run(ctx, manifest, out):
    """Run the whole pipeline and write a checksummed report bundle."""
    cfg = _cfg(ctx).override(manifest=manifest)
    result = run_pipeline(cfg, out)
    if result.status:
        click.echo(f"error: {result.error}", err=True)
        ctx.exit(result.status)
    click.echo(f"wrote {len(result.files)} files to {out}")


@cli.command()
@click.argument("url")
@click.argument("destination", type=_OUT)
@click.option("--checksum", help="algo:hexdigest (or bare hex digest).")
@click.option("--retries", default=3, show_default=True)
def fetch(url, destination, checksum, retries):
    """Download a dump with resume support."""
    path = fetch_dump(url, destination, checksum=checksum, retries=retries)
    click.echo(str(path))


if __name__ == "__main__":
    main()
