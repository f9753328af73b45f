"""Pipeline stages and the end-to-end run.

Every stage writes UTF-8 TSV files with header rows, sorted so that repeated
runs over the same inputs produce identical bytes.
"""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from filelock import FileLock, Timeout

from . import combine as cmb
from .config import PipelineConfig
from .constraints import (
    ConstraintSpec,
    ConstraintType,
    GraphIndex,
    IngestResult,
    Status,
    ViolationReport,
    build_indexes,
    ingest_constraints,
    validate_all,
    violation_ratio_table,
    write_partitions,
    write_ranked,
    write_specs,
    write_summary,
)
from .deprecation import (
    DeprecatedSet,
    aggregate_deprecated,
    build_instance_index,
    extract_deprecated,
)
from .diff import (
    ManifestEntry,
    RedirectReport,
    RemovalLedger,
    accumulate_paths,
    annotate_redirects,
    manifest_redirects,
    read_manifest,
    write_ledger,
)
from .model import (
    EDGE_COLUMNS,
    Dump,
    IdentityMode,
    Key,
    ParseReport,
    Statement,
    StatementWriter,
    iter_rows,
    load_dump,
    open_text,
    parse_literal,
    read_statements,
)
from .updates import (
    TAXONOMY_CATEGORIES,
    ClassificationResult,
    TaxonomyReport,
    classify_removals,
    taxonomy_switch_report,
)

log = logging.getLogger(__name__)

CLASSIFICATION_COLUMNS = ("category", "replacement_id", "replacement_node2",
                          "similarity_kind", "similarity", "low_quality")


SCRATCH_NAME = ".scratch"


class PipelineBusy(RuntimeError):
    """Another run holds the scratch directory lock."""


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
        self.stage = stage
        self.cause = cause


# --- accumulate ----------------------------------------------------------------

def stage_accumulate(entries: Sequence[ManifestEntry], ledger_path: Path,
                     added_dir: Path | None, cfg: PipelineConfig,
                     report: ParseReport | None = None) -> RemovalLedger:
    ledger = accumulate_paths(entries, identity_mode=cfg.identity_mode, added_dir=added_dir,
                              chunk_size=cfg.chunk_size, scratch_dir=cfg.scratch, report=report)
    write_ledger(ledger, ledger_path)
    return ledger


def write_redirect_report(rep: RedirectReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("section\titem\tcount\tpercent\n")
        fh.write(f"total\tremoved\t{rep.total}\t\n")
        fh.write(f"total\tredirected\t{rep.redirected}\t{100 * rep.fraction:.2f}\n")
        fh.write(f"total\tredirected_subject\t{rep.redirected_subject}\t\n")
        fh.write(f"total\tredirected_object\t{rep.redirected_object}\t\n")
        fh.write(f"total\tredirected_instance_of\t{rep.instance_of_redirected}\t\n")
        for section, rows in (("class_of_redirected_instances", rep.classes_of_redirected_instances),
                              ("redirected_class", rep.redirected_classes)):
            for cls, n, pct in rows:
                fh.write(f"{section}\t{cls}\t{n}\t{pct:.2f}\n")


# --- classify ------------------------------------------------------------------

def load_added_dir(path: str | Path) -> dict[str, list[Statement]]:
    """Interval name -> added statements.

    Accepts ``<old>__<new>.tsv`` files (as written by ``accumulate``) or
    ``<old>__<new>/added.tsv`` subdirectories (as written by ``diff``).
    """
    path = Path(path)
    out: dict[str, list[Statement]] = {}
    for p in sorted(path.iterdir()):
        if p.is_dir() and (p / "added.tsv").exists():
            out[p.name] = list(read_statements(p / "added.tsv"))
        elif p.is_file() and p.name.endswith(".tsv") and not p.name.endswith(".qualifiers.tsv"):
            out[p.name[: -len(".tsv")]] = list(read_statements(p))
    return out


def stage_classify(ledger: RemovalLedger, added: Mapping[str, Iterable[Statement]],
                   out_dir: Path, cfg: PipelineConfig,
                   redirects: Mapping[str, str] | None = None
                   ) -> tuple[ClassificationResult, TaxonomyReport]:
    out_dir.mkdir(parents=True, exist_ok=True)
    result = classify_removals(ledger, added, cfg.thresholds, redirects=redirects,
                               histogram_cap=cfg.histogram_cap, workers=cfg.workers)
    taxonomy = taxonomy_switch_report(ledger, added, redirects=redirects)
    with StatementWriter(out_dir / "classifications.tsv",
                         extra_columns=CLASSIFICATION_COLUMNS) as w:
        for c in result.classifications:
            repl = c.replacement
            w.write(c.removed, c.category.value, repl.id if repl else "",
                    repl.object.raw if repl else "", c.similarity.kind, c.similarity.render(),
                    "1" if c.low_quality else "0")
    with open(out_dir / "levenshtein_histogram.tsv", "w", encoding="utf-8", newline="") as fh:
        fh.write("bucket\tcount\n")
        for bucket, n in result.histogram.items():
            fh.write(f"{bucket}\t{n}\n")
    with open(out_dir / "update_fractions.tsv", "w", encoding="utf-8", newline="") as fh:
        fh.write("kind\tremoved\tupdated\tequivalent\tsignificant\tpure_removal\n")
        for kind, f in result.fractions().items():
            fh.write(f"{kind}\t{f['removed']}\t{f['updated']:.4f}\t{f['equivalent']:.4f}\t"
                     f"{f['significant']:.4f}\t{f['pure_removal']:.4f}\n")
    with open(out_dir / "taxonomy_switches.tsv", "w", encoding="utf-8", newline="") as fh:
        fh.write("before\tafter\tcount\texamples\n")
        for cat in TAXONOMY_CATEGORIES:
            ex = "; ".join(
                f"({st.subject},{st.property},{st.object.raw})->"
                + (",".join(f"({r.subject},{r.property},{r.object.raw})" for r in repl) or "none")
                for st, repl in taxonomy.examples[cat])
            fh.write(f"{cat[0]}\t{cat[1]}\t{taxonomy.counts[cat]}\t{ex}\n")
    return result, taxonomy


def read_community_keys(path: str | Path, identity_mode) -> set[Key]:
    """Low-quality keys from a ``classifications.tsv`` file."""
    id_mode = IdentityMode(identity_mode) is IdentityMode.ID
    keys = set()
    with open_text(path) as fh:
        for _, row in iter_rows(fh, EDGE_COLUMNS + CLASSIFICATION_COLUMNS, source=str(path)):
            if row["low_quality"] != "1":
                continue
            keys.add((row["id"],) if id_mode else
                     (row["node1"], row["label"], parse_literal(row["node2"]).canonical))
    return keys


# --- deprecated ------------------------------------------------------------------

def stage_deprecated(dump: Dump, instances: Iterable[Statement] | None,
                     out_dir: Path) -> DeprecatedSet:
    out_dir.mkdir(parents=True, exist_ok=True)
    dep = extract_deprecated(dump)
    index = build_instance_index(instances if instances is not None else dump)
    props, classes = aggregate_deprecated(dep, index)
    cmb.write_keyed(out_dir / "deprecated.tsv", dep.statements, dep.statements)
    for name, rows in (("by_property.tsv", props), ("by_class.tsv", classes)):
        with open(out_dir / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(("property" if name == "by_property.tsv" else "class") + "\tcount\n")
            for item, n in rows:
                fh.write(f"{item}\t{n}\n")
    return dep


# --- constraints -----------------------------------------------------------------

def stage_compile(statements: Iterable[Statement], cfg: PipelineConfig,
                  specs_path: Path) -> IngestResult:
    result = ingest_constraints(statements, cfg.roles)
    write_specs(result.specs, specs_path)
    for reason, n in sorted(result.skipped.items()):
        log.info("constraint declarations skipped (%s): %d", reason, n)
    return result


def stage_validate(specs: Sequence[ConstraintSpec], index: GraphIndex, closure,
                   out_dir: Path, cfg: PipelineConfig) -> list[ViolationReport]:
    out_dir.mkdir(parents=True, exist_ok=True)
    reports = validate_all(specs, index, closure, types=cfg.types, workers=cfg.workers)
    write_partitions(reports, index, out_dir)
    if reports:
        summary = violation_ratio_table(reports)
        write_summary(summary, out_dir / "summary.tsv")
        write_ranked(summary, out_dir / "vr_ranked.tsv")
    return reports


# --- combine ---------------------------------------------------------------------

@dataclass
class CombineOutcome:
    indicators: cmb.IndicatorResult
    overlap: dict
    low_quality: dict[Key, frozenset[str]]
    v: cmb.ViolationSet
    v_del: cmb.ViolationSet


def stage_combine(dump: Dump, ledger: RemovalLedger, specs: Sequence[ConstraintSpec],
                  deprecated: Iterable[Key], community: Iterable[Key] | None,
                  out_dir: Path, cfg: PipelineConfig,
                  reports: Sequence[ViolationReport] | None = None) -> CombineOutcome:
    """``community`` defaults to every ledger key when no classification is supplied."""
    out_dir.mkdir(parents=True, exist_ok=True)
    fp = cmb.config_fingerprint(specs, cfg.types, cfg.identity_mode)
    if reports is None:
        v = cmb.violations(dump.statements.values(), specs, identity_mode=cfg.identity_mode,
                           types=cfg.types, workers=cfg.workers)
    else:
        v = cmb.ViolationSet(frozenset(k for r in reports for k in r.incorrect), fp, tuple(reports))
    v_del = cmb.violations_with_removals(dump.statements, ledger, specs,
                                         identity_mode=cfg.identity_mode, types=cfg.types,
                                         workers=cfg.workers)
    fixed = cmb.fixed_violations(v, v_del)
    overlap = cmb.overlap_table(ledger, v_del.reports)
    dep = frozenset(deprecated)
    s_c = frozenset(ledger.entries if community is None else community)
    indicators = cmb.IndicatorResult(s_c, dep, v.keys, fixed)
    low = cmb.low_quality_union(s_c, dep, v.keys)

    payload = cmb.union_statements(dump.statements, ledger, cfg.identity_mode)
    cmb.write_keyed(out_dir / "v.tsv", v.keys, payload)
    cmb.write_keyed(out_dir / "v_del.tsv", v_del.keys, payload)
    cmb.write_keyed(out_dir / "v_fixed.tsv", fixed, payload)
    cmb.write_overlap(overlap, out_dir / "overlap.tsv")
    cmb.write_keyed(out_dir / "low_quality.tsv", low, payload,
                    {k: cmb.render_flags(f) for k, f in low.items()}, "flags")
    (out_dir / "LIMITATIONS.txt").write_text(cmb.LIMITATION + "\n", encoding="utf-8")
    return CombineOutcome(indicators, overlap, low, v, v_del)


# --- full run --------------------------------------------------------------------

@dataclass
class RunResult:
    status: int
    files: list[str] = field(default_factory=list)
    error: StageError | None = None


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir: Path) -> list[str]:
    files = sorted(p.relative_to(out_dir).as_posix() for p in out_dir.rglob("*")
                   if p.is_file() and p.name not in ("MANIFEST.tsv", "FAILED")
                   and SCRATCH_NAME not in p.relative_to(out_dir).parts)
    with open(out_dir / "MANIFEST.tsv", "w", encoding="utf-8", newline="") as fh:
        fh.write("path\tsha256\n")
        for f in files:
            fh.write(f"{f}\t{_sha256(out_dir / f)}\n")
    return files


def run_pipeline(cfg: PipelineConfig, out_dir: str | Path) -> RunResult:
    """accumulate -> classify-updates -> deprecated -> compile -> validate -> combine.

    On failure the partial bundle stays in place next to a ``FAILED`` marker
    naming the stage.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    failed = out / "FAILED"
    if failed.exists():
        failed.unlink()
    own_scratch = cfg.scratch is None
    scratch = out / SCRATCH_NAME if own_scratch else Path(cfg.scratch)
    scratch.mkdir(parents=True, exist_ok=True)
    cfg = cfg.override(scratch=scratch)
    lock = FileLock(str(scratch / "kgq.lock"))
    try:
        lock.acquire(timeout=0)
    except Timeout:
        raise PipelineBusy(f"another pipeline holds {scratch}") from None
    stage = "config"
    try:
        parse_report = ParseReport()
        summary: dict = {"limitation": cmb.LIMITATION}

        stage = "accumulate"
        if cfg.manifest is None:
            raise ValueError("no dump manifest configured")
        entries = read_manifest(cfg.manifest)
        ledger = stage_accumulate(entries, out / "ledger.tsv", out / "added", cfg, parse_report)
        redirects = manifest_redirects(entries)
        rrep = annotate_redirects(ledger, redirects)
        write_redirect_report(rrep, out / "redirects.tsv")
        summary["ledger"] = {"as_of": ledger.as_of, "removed": len(ledger),
                             "redirected": rrep.redirected,
                             "redirected_fraction": round(rrep.fraction, 6)}

        stage = "classify-updates"
        added = load_added_dir(out / "added")
        classes, taxonomy = stage_classify(ledger, added, out / "updates", cfg, redirects)
        summary["updates"] = {
            "fractions": classes.fractions(),
            "low_quality": len(classes.low_quality),
            "taxonomy": {f"{b}->{a}": n for (b, a), n in taxonomy.counts.items()},
        }

        stage = "deprecated"
        last = entries[-1]
        dump = load_dump(last.path, label=last.label, identity_mode=cfg.identity_mode,
                         report=parse_report)
        instances = list(read_statements(cfg.instances)) if cfg.instances else None
        dep = stage_deprecated(dump, instances, out / "deprecated")
        props, cls = aggregate_deprecated(dep, build_instance_index(instances or dump), 5)
        summary["deprecated"] = {"count": len(dep), "top_properties": props,
                                 "top_classes": cls}

        stage = "compile"
        # declarations are read unkeyed: two declarations of the same type on
        # one property differ only in their qualifiers
        ingest = stage_compile(read_statements(last.path), cfg, out / "specs.tsv")
        summary["constraints"] = {"specs": len(ingest.specs),
                                  "skipped": dict(sorted(ingest.skipped.items()))}

        stage = "validate"
        index, closure = build_indexes(dump, cfg.identity_mode)
        reports = stage_validate(ingest.specs, index, closure, out / "reports", cfg)
        if reports:
            vt = violation_ratio_table(reports)
            summary["violations"] = [
                {"ctype": r.ctype.value, "status": r.status.value, "correct": r.correct,
                 "incorrect": r.incorrect, "vr": round(r.violation_ratio, 4)}
                for r in vt.rows if r.properties]

        stage = "combine"
        outcome = stage_combine(dump, ledger, ingest.specs, dep.statements,
                                classes.low_quality, out / "combined", cfg, reports)
        summary["combined"] = {
            "v": len(outcome.v), "v_del": len(outcome.v_del),
            "v_fixed": len(outcome.indicators.fixed), "low_quality": len(outcome.low_quality),
            "overlap": {f"{t.value}/{s.value}": outcome.overlap[(t, s)].render()
                        for t in ConstraintType for s in Status},
        }
        summary["parse_issues"] = len(parse_report.issues)
        _write_issues(parse_report, out / "parse_issues.tsv")

        stage = "report"
        with open(out / "report.json", "w", encoding="utf-8", newline="") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True, ensure_ascii=False)
            fh.write("\n")
        files = write_manifest(out)
        return RunResult(0, files)
    except Exception as exc:  # every stage failure is reported the same way
        err = StageError(stage, exc)
        failed.write_text(f"{err}\n", encoding="utf-8")
        log.error("%s", err)
        return RunResult(1, error=err)
    finally:
        lock.release()
        if own_scratch:
            shutil.rmtree(scratch, ignore_errors=True)


def _write_issues(report: ParseReport, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("kind\tsource\tline\tmessage\n")
        for i in report.issues:
            src = Path(i.source).name if i.source else ""
            fh.write(f"{i.kind}\t{src}\t{'' if i.line is None else i.line}\t{i.message}\n")
