"""Pairwise dump diffs, the permanently-removed ledger, and redirect analysis.

For consecutive dumps ``old`` and ``new`` the added set is ``new - old`` and
the removed set is ``old - new``.  The ledger follows

    ledger(new) = (ledger(old) - added) | removed,    ledger(first) = {}

which, unrolled over a whole sequence, is every key ever seen minus the keys
of the last dump.
"""

from __future__ import annotations

import logging
import os
import tempfile
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Iterator, Mapping, Sequence

from .extsort import DEFAULT_CHUNK, external_sort, iter_run, sort_to_file
from .model import (
    EDGE_COLUMNS,
    QUALIFIER_COLUMNS,
    Dump,
    IdentityMode,
    Key,
    ParseReport,
    Rank,
    Statement,
    StatementWriter,
    dump_label,
    iter_rows,
    merge_redirects,
    open_text,
    parse_literal,
    qualifier_path,
    read_redirects,
    read_statements,
    statement_key,
)

log = logging.getLogger(__name__)

INSTANCE_OF = "P31"
SUBCLASS_OF = "P279"


class IdentityModeMismatch(ValueError):
    pass


class EmptySequence(ValueError):
    pass


@dataclass
class DumpDiff:
    """Added and removed statements between two dumps, keyed by statement key."""

    old_label: str
    new_label: str
    added: dict[Key, Statement] = field(default_factory=dict)
    removed: dict[Key, Statement] = field(default_factory=dict)

    @property
    def interval(self) -> str:
        return interval_name(self.old_label, self.new_label)


def interval_name(old_label: str, new_label: str) -> str:
    return f"{old_label}__{new_label}"


@dataclass(frozen=True, slots=True)
class LedgerEntry:
    statement: Statement
    last_seen: str   # label of the last dump containing the statement
    removed_in: str  # label of the first dump without it


@dataclass
class RemovalLedger:
    as_of: str
    entries: dict[Key, LedgerEntry] = field(default_factory=dict)
    identity_mode: IdentityMode = IdentityMode.CONTENT

    def keys(self) -> set[Key]:
        return set(self.entries)

    def statements(self) -> Iterator[Statement]:
        return (e.statement for e in self.entries.values())

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, key: Key) -> bool:
        return key in self.entries


# --- streaming merge ---------------------------------------------------------

def merge_diff(old: Iterable[tuple[Key, Statement]],
               new: Iterable[tuple[Key, Statement]]) -> Iterator[tuple[str, Key, Statement]]:
    """Single-pass diff of two key-sorted streams.

    Yields ``("removed", key, stmt)`` for keys only in ``old`` and
    ``("added", key, stmt)`` for keys only in ``new``.  Repeated keys within a
    stream collapse onto their first occurrence.
    """
    old_it, new_it = iter(old), iter(new)

    def advance(it, prev):
        for k, st in it:
            if k != prev:
                return k, st
        return None

    a = advance(old_it, None)
    b = advance(new_it, None)
    while a is not None and b is not None:
        if a[0] < b[0]:
            yield "removed", a[0], a[1]
            a = advance(old_it, a[0])
        elif b[0] < a[0]:
            yield "added", b[0], b[1]
            b = advance(new_it, b[0])
        else:
            ka, kb = a[0], b[0]
            a = advance(old_it, ka)
            b = advance(new_it, kb)
    while a is not None:
        yield "removed", a[0], a[1]
        a = advance(old_it, a[0])
    while b is not None:
        yield "added", b[0], b[1]
        b = advance(new_it, b[0])


def _first(pair):
    return pair[0]


def _sorted_items(dump: Dump) -> list[tuple[Key, Statement]]:
    return sorted(dump.statements.items(), key=_first)


def pairwise_diff(old: Dump, new: Dump) -> DumpDiff:
    if old.identity_mode is not new.identity_mode:
        raise IdentityModeMismatch(
            f"{old.label} uses {old.identity_mode.value}, {new.label} uses {new.identity_mode.value}")
    diff = DumpDiff(old.label, new.label)
    for tag, key, st in merge_diff(_sorted_items(old), _sorted_items(new)):
        (diff.added if tag == "added" else diff.removed)[key] = st
    return diff


def shard_bounds(keys: Iterable[Key], n_shards: int) -> list[Key]:
    """Split points that cut the sorted key space into ``n_shards`` ranges."""
    ordered = sorted(set(keys))
    if n_shards <= 1 or len(ordered) < n_shards:
        return []
    step = len(ordered) / n_shards
    return sorted({ordered[int(i * step)] for i in range(1, n_shards)})


def _shard_of(key: Key, bounds: Sequence[Key]) -> int:
    lo, hi = 0, len(bounds)
    while lo < hi:
        mid = (lo + hi) // 2
        if key < bounds[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def _diff_shard(args):
    old_items, new_items = args
    return list(merge_diff(old_items, new_items))


def diff_sharded(old: Dump, new: Dump, n_shards: int, *, workers: int = 1,
                 bounds: Sequence[Key] | None = None) -> DumpDiff:
    """Diff by independent key-range shards, concatenated in key order."""
    if old.identity_mode is not new.identity_mode:
        raise IdentityModeMismatch(f"{old.label} vs {new.label}")
    if bounds is None:
        bounds = shard_bounds(list(old.statements) + list(new.statements), n_shards)
    n = len(bounds) + 1
    olds: list[list] = [[] for _ in range(n)]
    news: list[list] = [[] for _ in range(n)]
    for item in _sorted_items(old):
        olds[_shard_of(item[0], bounds)].append(item)
    for item in _sorted_items(new):
        news[_shard_of(item[0], bounds)].append(item)
    jobs = list(zip(olds, news))
    if workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_diff_shard, jobs))
    else:
        parts = [_diff_shard(j) for j in jobs]
    diff = DumpDiff(old.label, new.label)
    for part in parts:
        for tag, key, st in part:
            (diff.added if tag == "added" else diff.removed)[key] = st
    return diff


# --- file-level streaming ----------------------------------------------------

def keyed_stream(statements: Iterable[Statement],
                 mode: IdentityMode) -> Iterator[tuple[Key, Statement]]:
    for st in statements:
        yield statement_key(st, mode), st


def sorted_statements(path: str | Path, mode: IdentityMode, *,
                      chunk_size: int = DEFAULT_CHUNK, scratch_dir: str | Path | None = None,
                      report: ParseReport | None = None) -> Iterator[tuple[Key, Statement]]:
    stream = read_statements(path, report=report, check_duplicate_ids=False)
    return external_sort(keyed_stream(stream, mode), _first,
                         chunk_size=chunk_size, scratch_dir=scratch_dir)


@dataclass
class DiffCounts:
    added: int = 0
    removed: int = 0


def diff_files(old_path: str | Path, new_path: str | Path, out_dir: str | Path, *,
               identity_mode: IdentityMode | str = IdentityMode.CONTENT,
               chunk_size: int = DEFAULT_CHUNK, scratch_dir: str | Path | None = None,
               report: ParseReport | None = None) -> DiffCounts:
    """Diff two edge files into ``out_dir/added.tsv`` and ``out_dir/removed.tsv``.

    Memory stays bounded by ``chunk_size``: both inputs are externally sorted
    and the diff is a single merge pass.
    """
    mode = IdentityMode(identity_mode)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    counts = DiffCounts()
    old = sorted_statements(old_path, mode, chunk_size=chunk_size, scratch_dir=scratch_dir,
                            report=report)
    new = sorted_statements(new_path, mode, chunk_size=chunk_size, scratch_dir=scratch_dir,
                            report=report)
    with StatementWriter(out / "added.tsv") as added, StatementWriter(out / "removed.tsv") as removed:
        for tag, _, st in merge_diff(old, new):
            if tag == "added":
                added.write(st)
                counts.added += 1
            else:
                removed.write(st)
                counts.removed += 1
    return counts


# --- accumulation ------------------------------------------------------------

def accumulate(dumps: Sequence[Dump], *,
               on_interval: Callable[[DumpDiff], None] | None = None) -> RemovalLedger:
    """Fold pairwise diffs of a chronological sequence into the removal ledger."""
    if not dumps:
        raise EmptySequence("accumulate needs at least one dump")
    ledger = RemovalLedger(dumps[0].label, identity_mode=dumps[0].identity_mode)
    for old, new in zip(dumps, dumps[1:]):
        diff = pairwise_diff(old, new)
        _apply(ledger, diff)
        if on_interval is not None:
            on_interval(diff)
    return ledger


def _apply(ledger: RemovalLedger, diff: DumpDiff) -> None:
    for key in diff.added:
        ledger.entries.pop(key, None)
    for key, st in diff.removed.items():
        ledger.entries[key] = LedgerEntry(st, diff.old_label, diff.new_label)
    ledger.as_of = diff.new_label


@dataclass(frozen=True)
class ManifestEntry:
    path: Path
    label: str
    redirects: Path | None = None


def read_manifest(path: str | Path) -> list[ManifestEntry]:
    """Read a dump manifest: one dump per line, oldest first.

    Each line is a path, optionally followed by tab-separated ``label=...``
    and ``redirects=...`` fields.  Relative paths resolve against the
    manifest's directory; blank lines and ``#`` comments are skipped.
    """
    path = Path(path)
    base = path.parent
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            first, *rest = line.split("\t")
            opts = dict(f.split("=", 1) for f in rest if "=" in f)
            dump_path = base / first
            redirects = base / opts["redirects"] if "redirects" in opts else None
            entries.append(ManifestEntry(dump_path, opts.get("label", dump_label(dump_path)),
                                         redirects))
    return entries


def accumulate_paths(entries: Sequence[ManifestEntry], *,
                     identity_mode: IdentityMode | str = IdentityMode.CONTENT,
                     added_dir: str | Path | None = None,
                     chunk_size: int = DEFAULT_CHUNK,
                     scratch_dir: str | Path | None = None,
                     report: ParseReport | None = None) -> RemovalLedger:
    """Streaming :func:`accumulate` over edge files.

    Each dump is externally sorted once; only the ledger is held in memory.
    When ``added_dir`` is given, each interval's added statements are written
    to ``added_dir/<old>__<new>.tsv``.
    """
    if not entries:
        raise EmptySequence("manifest lists no dumps")
    mode = IdentityMode(identity_mode)
    if added_dir is not None:
        Path(added_dir).mkdir(parents=True, exist_ok=True)
    ledger = RemovalLedger(entries[0].label, identity_mode=mode)
    tmp = tempfile.mkdtemp(prefix="kgq-acc-", dir=scratch_dir)

    def sort_one(i: int) -> str:
        out = os.path.join(tmp, f"{i}.pkl")
        stream = keyed_stream(read_statements(entries[i].path, report=report,
                                              check_duplicate_ids=False), mode)
        sort_to_file(stream, _first, out, chunk_size=chunk_size, scratch_dir=tmp)
        return out

    try:
        prev = sort_one(0)
        for i in range(1, len(entries)):
            cur = sort_one(i)
            old_label, new_label = entries[i - 1].label, entries[i].label
            writer = (StatementWriter(Path(added_dir) / f"{interval_name(old_label, new_label)}.tsv")
                      if added_dir is not None else None)
            try:
                for tag, key, st in merge_diff(iter_run(prev), iter_run(cur)):
                    if tag == "added":
                        ledger.entries.pop(key, None)
                        if writer is not None:
                            writer.write(st)
                    else:
                        ledger.entries[key] = LedgerEntry(st, old_label, new_label)
            finally:
                if writer is not None:
                    writer.close()
            ledger.as_of = new_label
            os.remove(prev)
            prev = cur
        os.remove(prev)
    finally:
        for name in os.listdir(tmp):
            os.remove(os.path.join(tmp, name))
        os.rmdir(tmp)
    return ledger


def manifest_redirects(entries: Sequence[ManifestEntry]) -> dict[str, str]:
    return merge_redirects(read_redirects(e.redirects) for e in entries if e.redirects)


LEDGER_COLUMNS = ("last_seen", "removed_in")


def write_ledger(ledger: RemovalLedger, path: str | Path) -> int:
    stale = qualifier_path(path)
    if stale.exists():
        stale.unlink()
    with StatementWriter(path, extra_columns=LEDGER_COLUMNS) as w:
        for key in sorted(ledger.entries):
            e = ledger.entries[key]
            w.write(e.statement, e.last_seen, e.removed_in)
    return w.count


def read_ledger(path: str | Path, *, identity_mode: IdentityMode | str = IdentityMode.CONTENT,
                as_of: str = "", report: ParseReport | None = None) -> RemovalLedger:
    mode = IdentityMode(identity_mode)
    ledger = RemovalLedger(as_of, identity_mode=mode)
    latest = ""
    quals: dict[str, list] = defaultdict(list)
    qpath = qualifier_path(path)
    if qpath.exists():
        with open_text(qpath) as qfh:
            for _, row in iter_rows(qfh, QUALIFIER_COLUMNS, report=report, source=str(qpath)):
                quals[row["node1"]].append((row["label"], parse_literal(row["node2"])))
    # rows are read directly: ledger ids need not be unique and there are no
    # inline qualifier rows to recognise
    with open_text(path) as fh:
        for lineno, row in iter_rows(fh, EDGE_COLUMNS + LEDGER_COLUMNS, report=report,
                                     source=str(path)):
            try:
                rank = Rank.parse(row.get("rank", ""))
            except ValueError:
                if report is not None:
                    report.add("MalformedRow", lineno, f"unknown rank {row['rank']!r}", str(path))
                continue
            st = Statement(row["id"], row["node1"], row["label"], parse_literal(row["node2"]),
                           rank, frozenset(quals.get(row["id"], ())))
            ledger.entries[statement_key(st, mode)] = LedgerEntry(st, row["last_seen"],
                                                                  row["removed_in"])
            latest = max(latest, row["removed_in"])
    if not as_of:
        ledger.as_of = latest
    return ledger


# --- redirects ---------------------------------------------------------------

@dataclass
class RedirectReport:
    total: int
    redirected: int
    redirected_subject: int
    redirected_object: int
    instance_of_redirected: int
    classes_of_redirected_instances: list[tuple[str, int, float]]
    redirected_classes: list[tuple[str, int, float]]

    @property
    def fraction(self) -> float:
        return self.redirected / self.total if self.total else 0.0


def _top(counter: Counter, total: int, k: int) -> list[tuple[str, int, float]]:
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return [(c, n, 100.0 * n / total if total else 0.0) for c, n in ranked]


def annotate_redirects(ledger: RemovalLedger | Iterable[Statement],
                       redirects: Mapping[str, str], *, top_k: int = 5) -> RedirectReport:
    """Count removed statements whose subject or entity object was redirected.

    For instance-of statements it also ranks the classes of redirected
    instances and the classes that were themselves redirected.  Those two
    lists are percentages of the redirected instance-of statements.
    """
    statements = ledger.statements() if isinstance(ledger, RemovalLedger) else ledger
    total = redirected = by_subject = by_object = p31 = 0
    instance_classes: Counter = Counter()
    redirected_classes: Counter = Counter()
    for st in statements:
        total += 1
        subj = st.subject in redirects
        obj = st.object.is_entity and st.object.canonical in redirects
        by_subject += subj
        by_object += obj
        if not (subj or obj):
            continue
        redirected += 1
        if st.property == INSTANCE_OF and st.object.is_entity:
            p31 += 1
            if subj:
                instance_classes[st.object.canonical] += 1
            if obj:
                redirected_classes[st.object.canonical] += 1
    return RedirectReport(total, redirected, by_subject, by_object, p31,
                          _top(instance_classes, p31, top_k), _top(redirected_classes, p31, top_k))
