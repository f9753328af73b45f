"""Statement model and the tab-separated edge-file format.

Edge files carry one statement per row with the columns ``id node1 label
node2`` and an optional ``rank``.  Qualifiers live either in a separate file
(``node1`` is the parent statement id) or inline, directly after their parent
row, with ``node1`` set to the parent id.
"""

from __future__ import annotations

import enum
import gzip
import io
import logging
import re
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Iterator, Mapping, TextIO

log = logging.getLogger(__name__)

Key = tuple[str, ...]

EDGE_COLUMNS = ("id", "node1", "label", "node2")
QUALIFIER_COLUMNS = ("node1", "label", "node2")
REDIRECT_COLUMNS = ("node1", "node2")


class Rank(str, enum.Enum):
    PREFERRED = "preferred"
    NORMAL = "normal"
    DEPRECATED = "deprecated"

    @classmethod
    def parse(cls, text: str) -> "Rank":
        t = text.strip().lower()
        if not t:
            return cls.NORMAL
        if t.endswith("rank"):
            t = t[: -len("rank")]
        return cls(t)


class LiteralKind(str, enum.Enum):
    ENTITY = "entity"
    STRING = "string"
    DATE = "date"
    QUANTITY = "quantity"
    OTHER = "other"


class IdentityMode(str, enum.Enum):
    CONTENT = "content"
    ID = "id"


class MissingColumn(ValueError):
    """The header row lacks a required column."""


@dataclass(frozen=True, slots=True)
class LiteralValue:
    kind: LiteralKind
    raw: str
    canonical: str
    date_precision: int | None = None
    magnitude: float | None = None
    unit: str | None = None

    def __post_init__(self):
        if (self.date_precision is not None) != (self.kind is LiteralKind.DATE):
            raise ValueError("date_precision must be set exactly for dates")
        if (self.magnitude is not None) != (self.kind is LiteralKind.QUANTITY):
            raise ValueError("magnitude must be set exactly for quantities")

    def __reduce__(self):
        # much cheaper than the generic dataclass state protocol
        return (_literal, (self.kind.value, self.raw, self.canonical, self.date_precision,
                           self.magnitude, self.unit))

    @property
    def is_entity(self) -> bool:
        return self.kind is LiteralKind.ENTITY

    @property
    def text(self) -> str:
        """Surface text without string quoting or a language tag."""
        raw = self.raw
        if self.kind is not LiteralKind.STRING:
            return self.canonical
        m = _LANG_STRING.match(raw)
        if m:
            return m.group(1)
        if len(raw) >= 2 and raw[0] == raw[-1] == '"':
            return raw[1:-1]
        return raw


@dataclass(frozen=True, slots=True)
class Statement:
    id: str
    subject: str
    property: str
    object: LiteralValue
    rank: Rank = Rank.NORMAL
    qualifiers: frozenset[tuple[str, LiteralValue]] = frozenset()

    def __reduce__(self):
        return (_statement, (self.id, self.subject, self.property, self.object,
                             self.rank.value, self.qualifiers))

    def with_qualifiers(self, pairs: Iterable[tuple[str, LiteralValue]]) -> "Statement":
        return Statement(self.id, self.subject, self.property, self.object,
                         self.rank, self.qualifiers | frozenset(pairs))


_KINDS = {k.value: k for k in LiteralKind}
_RANKS = {r.value: r for r in Rank}


def _literal(kind, raw, canonical, date_precision, magnitude, unit) -> LiteralValue:
    return LiteralValue(_KINDS[kind], raw, canonical, date_precision, magnitude, unit)


def _statement(sid, subject, prop, obj, rank, qualifiers) -> Statement:
    return Statement(sid, subject, prop, obj, _RANKS[rank], qualifiers)


@dataclass
class Dump:
    label: str
    statements: dict[Key, Statement]
    redirects: dict[str, str] = field(default_factory=dict)
    identity_mode: IdentityMode = IdentityMode.CONTENT

    @classmethod
    def from_statements(cls, label: str, statements: Iterable[Statement],
                        identity_mode: IdentityMode | str = IdentityMode.CONTENT,
                        redirects: Mapping[str, str] | None = None) -> "Dump":
        mode = IdentityMode(identity_mode)
        keyed: dict[Key, Statement] = {}
        for st in statements:
            keyed.setdefault(statement_key(st, mode), st)
        return cls(label, keyed, dict(redirects or {}), mode)

    def keys(self) -> set[Key]:
        return set(self.statements)

    def __len__(self) -> int:
        return len(self.statements)

    def __iter__(self) -> Iterator[Statement]:
        return iter(self.statements.values())


# --- literals ---------------------------------------------------------------

_ENTITY = re.compile(r"^(?:[QP]\d+|L\d+(?:-[SF]\d+)?)$")
_DATE = re.compile(
    r"^\^?(?P<sign>[+-]?)(?P<year>\d+)-(?P<month>\d\d)-(?P<day>\d\d)"
    r"T(?P<time>\d\d:\d\d:\d\d)Z(?:/(?P<precision>\d{1,2}))?$"
)
_NUM = r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_QUANTITY = re.compile(
    rf"^(?P<amount>{_NUM})(?:\[(?P<low>{_NUM}),(?P<high>{_NUM})\])?(?P<unit>Q\d+)?$"
)
_LANG_STRING = re.compile(r"^'(.*)'@[A-Za-z0-9-]+$", re.S)

DEFAULT_DATE_PRECISION = 11


def _number(text: str) -> str:
    d = Decimal(text)
    if d == 0:
        return "0"
    return format(d.normalize(), "f")


def parse_literal(text: str) -> LiteralValue:
    """Detect the literal kind of ``text`` and compute its canonical form.

    Dates lose leading zeros in the year (and a ``+`` sign or ``^`` marker);
    a missing precision suffix is read as day precision.  Quantity numbers
    are rendered without redundant zeros or exponents.  Anything that does
    not match a known syntax is a plain string and keeps its text verbatim.
    """
    if _ENTITY.match(text):
        return LiteralValue(LiteralKind.ENTITY, text, text)

    m = _DATE.match(text)
    if m:
        precision = int(m["precision"]) if m["precision"] else DEFAULT_DATE_PRECISION
        if 0 <= precision <= 14:
            year = int(m["year"])
            sign = "-" if m["sign"] == "-" and year else ""
            canonical = f"{sign}{year}-{m['month']}-{m['day']}T{m['time']}Z/{precision}"
            return LiteralValue(LiteralKind.DATE, text, canonical, date_precision=precision)

    m = _QUANTITY.match(text)
    if m:
        try:
            amount = _number(m["amount"])
            canonical = amount
            if m["low"] is not None:
                canonical += f"[{_number(m['low'])},{_number(m['high'])}]"
            if m["unit"]:
                canonical += m["unit"]
            return LiteralValue(LiteralKind.QUANTITY, text, canonical,
                                magnitude=float(Decimal(m["amount"])), unit=m["unit"])
        except InvalidOperation:
            pass

    if text.startswith("@"):
        return LiteralValue(LiteralKind.OTHER, text, text)
    return LiteralValue(LiteralKind.STRING, text, text)


def statement_key(st: Statement, mode: IdentityMode | str = IdentityMode.CONTENT) -> Key:
    """Identity used by every set operation: content triple or statement id."""
    if IdentityMode(mode) is IdentityMode.ID:
        return (st.id,)
    return (st.subject, st.property, st.object.canonical)


# --- parsing ----------------------------------------------------------------

@dataclass(frozen=True)
class ParseIssue:
    kind: str  # "MalformedRow" | "DanglingQualifier" | "DuplicateId"
    line: int | None
    message: str
    source: str = "<stream>"

    def __str__(self) -> str:
        where = f"{self.source}:{self.line}" if self.line is not None else self.source
        return f"{self.kind} at {where}: {self.message}"


@dataclass
class ParseReport:
    issues: list[ParseIssue] = field(default_factory=list)

    def add(self, kind: str, line: int | None, message: str, source: str) -> None:
        issue = ParseIssue(kind, line, message, source)
        log.debug("%s", issue)
        self.issues.append(issue)

    def count(self, kind: str) -> int:
        return sum(1 for i in self.issues if i.kind == kind)

    def __bool__(self) -> bool:
        return bool(self.issues)


def _unescape(line: str) -> list[str]:
    return line.rstrip("\r\n").split("\t")


def iter_rows(lines: Iterable[str], required: Iterable[str], *,
              report: ParseReport | None = None,
              source: str = "<stream>") -> Iterator[tuple[int, dict[str, str]]]:
    """Yield ``(line_number, row)`` for each data row of a headed TSV stream.

    Raises :class:`MissingColumn` when the header lacks a required column.
    Rows with the wrong number of cells are reported and skipped.
    """
    it = iter(lines)
    try:
        header = _unescape(next(it))
    except StopIteration:
        raise MissingColumn(f"{source}: empty file, expected header") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumn(f"{source}: header lacks {', '.join(missing)}")
    width = len(header)
    for lineno, line in enumerate(it, start=2):
        if not line.strip("\r\n"):
            continue
        cells = _unescape(line)
        if len(cells) != width:
            if report is not None:
                report.add("MalformedRow", lineno,
                           f"expected {width} columns, got {len(cells)}", source)
            continue
        yield lineno, dict(zip(header, cells))


def parse_edge_file(lines: Iterable[str], *, qualifiers: Iterable[str] | None = None,
                    report: ParseReport | None = None, source: str = "<stream>",
                    check_duplicate_ids: bool = True) -> Iterator[Statement]:
    """Stream statements from an edge file.

    Inline qualifier rows (``node1`` equal to the id of the row just before)
    attach to that statement.  With ``qualifiers`` given, rows of that file
    attach by statement id; any left unclaimed at the end are reported as
    dangling.
    """
    if report is None:
        report = ParseReport()
    external: dict[str, list[tuple[int, str, LiteralValue]]] = {}
    qsource = f"{source}:qualifiers"
    if qualifiers is not None:
        for lineno, row in iter_rows(qualifiers, QUALIFIER_COLUMNS, report=report, source=qsource):
            if not row["node1"] or not row["label"]:
                report.add("MalformedRow", lineno, "empty node1 or label", qsource)
                continue
            external.setdefault(row["node1"], []).append(
                (lineno, row["label"], parse_literal(row["node2"])))

    seen: set[str] = set()
    pending: Statement | None = None
    inline: list[tuple[str, LiteralValue]] = []

    def finish(st: Statement) -> Statement:
        pairs = list(inline)
        for _, prop, value in external.pop(st.id, ()):
            pairs.append((prop, value))
        return st.with_qualifiers(pairs) if pairs else st

    for lineno, row in iter_rows(lines, EDGE_COLUMNS, report=report, source=source):
        sid, node1, label = row["id"], row["node1"], row["label"]
        if pending is not None and node1 == pending.id:
            inline.append((label, parse_literal(row["node2"])))
            continue
        if not sid or not node1 or not label:
            report.add("MalformedRow", lineno, "empty id, node1 or label", source)
            continue
        try:
            rank = Rank.parse(row.get("rank", ""))
        except ValueError:
            report.add("MalformedRow", lineno, f"unknown rank {row['rank']!r}", source)
            continue
        if check_duplicate_ids:
            if sid in seen:
                report.add("DuplicateId", lineno, f"statement id {sid} repeated", source)
                continue
            seen.add(sid)
        if pending is not None:
            yield finish(pending)
        inline = []
        pending = Statement(sid, node1, label, parse_literal(row["node2"]), rank)
    if pending is not None:
        yield finish(pending)

    for sid, rows in sorted(external.items()):
        for lineno, prop, _ in rows:
            report.add("DanglingQualifier", lineno,
                       f"qualifier {prop} references unknown statement {sid}", qsource)


def open_text(path: str | Path) -> TextIO:
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def qualifier_path(path: str | Path) -> Path:
    """Sibling file holding qualifiers for the edge file at ``path``."""
    path = Path(path)
    name = path.name
    for suffix in (".tsv.gz", ".tsv"):
        if name.endswith(suffix):
            return path.with_name(name[: -len(suffix)] + ".qualifiers" + suffix)
    return path.with_name(name + ".qualifiers")


def read_statements(path: str | Path, *, qualifiers: str | Path | None = None,
                    report: ParseReport | None = None,
                    check_duplicate_ids: bool = True) -> Iterator[Statement]:
    """Stream statements from ``path``, picking up a sibling qualifier file."""
    qpath = Path(qualifiers) if qualifiers else qualifier_path(path)
    with open_text(path) as fh:
        if qpath.exists():
            with open_text(qpath) as qfh:
                yield from parse_edge_file(fh, qualifiers=qfh, report=report, source=str(path),
                                           check_duplicate_ids=check_duplicate_ids)
        else:
            if qualifiers:
                raise FileNotFoundError(qpath)
            yield from parse_edge_file(fh, report=report, source=str(path),
                                       check_duplicate_ids=check_duplicate_ids)


# --- writing ----------------------------------------------------------------

class StatementWriter:
    """Write statements as edge rows; qualifiers go to the sibling file.

    The qualifier file is only created once a qualifier is written.
    """

    def __init__(self, path: str | Path, *, extra_columns: tuple[str, ...] = ()):
        self.path = Path(path)
        self.extra_columns = extra_columns
        self._fh = open(self.path, "w", encoding="utf-8", newline="")
        self._fh.write("\t".join(EDGE_COLUMNS + ("rank",) + extra_columns) + "\n")
        self._qfh: TextIO | None = None
        self.count = 0

    def write(self, st: Statement, *extra: str) -> None:
        self._fh.write(f"{st.id}\t{st.subject}\t{st.property}\t{st.object.raw}\t{st.rank.value}")
        for value in extra:
            self._fh.write("\t" + value)
        self._fh.write("\n")
        if st.qualifiers:
            if self._qfh is None:
                self._qfh = open(qualifier_path(self.path), "w", encoding="utf-8", newline="")
                self._qfh.write("\t".join(QUALIFIER_COLUMNS) + "\n")
            for prop, value in sorted(st.qualifiers, key=lambda q: (q[0], q[1].raw)):
                self._qfh.write(f"{st.id}\t{prop}\t{value.raw}\n")
        self.count += 1

    def close(self) -> None:
        self._fh.close()
        if self._qfh is not None:
            self._qfh.close()

    def __enter__(self) -> "StatementWriter":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def write_statements(path: str | Path, statements: Iterable[Statement]) -> int:
    stale = qualifier_path(path)
    if stale.exists():
        stale.unlink()
    with StatementWriter(path) as w:
        for st in statements:
            w.write(st)
    return w.count


def write_edge_stream(statements: Iterable[Statement], out: TextIO,
                      qualifiers_out: TextIO | None = None) -> None:
    """Serialize to open text streams (used for round-trip checks)."""
    out.write("\t".join(EDGE_COLUMNS + ("rank",)) + "\n")
    if qualifiers_out is not None:
        qualifiers_out.write("\t".join(QUALIFIER_COLUMNS) + "\n")
    for st in statements:
        out.write(f"{st.id}\t{st.subject}\t{st.property}\t{st.object.raw}\t{st.rank.value}\n")
        if st.qualifiers:
            if qualifiers_out is None:
                raise ValueError(f"statement {st.id} has qualifiers but no qualifier stream")
            for prop, value in sorted(st.qualifiers, key=lambda q: (q[0], q[1].raw)):
                qualifiers_out.write(f"{st.id}\t{prop}\t{value.raw}\n")


# --- redirects & dumps --------------------------------------------------------

def read_redirects(path: str | Path, *, report: ParseReport | None = None) -> dict[str, str]:
    with open_text(path) as fh:
        return {row["node1"]: row["node2"]
                for _, row in iter_rows(fh, REDIRECT_COLUMNS, report=report, source=str(path))}


def collapse_redirects(redirects: Mapping[str, str]) -> dict[str, str]:
    """Resolve redirect chains to their final target.

    Nodes on a redirect cycle have no well-defined target and are dropped.
    """
    out: dict[str, str] = {}
    for start in redirects:
        path = [start]
        node = redirects[start]
        seen = {start}
        while node in redirects and node not in seen:
            seen.add(node)
            path.append(node)
            node = redirects[node]
        if node in seen:
            log.warning("redirect cycle through %s dropped", start)
            continue
        out[start] = node
    return out


def merge_redirects(maps: Iterable[Mapping[str, str]]) -> dict[str, str]:
    """Merge redirect maps in order (later maps win), then collapse chains."""
    merged: dict[str, str] = {}
    for m in maps:
        merged.update(m)
    return collapse_redirects(merged)


def load_dump(path: str | Path, *, qualifiers: str | Path | None = None,
              redirects: str | Path | None = None, label: str | None = None,
              identity_mode: IdentityMode | str = IdentityMode.CONTENT,
              report: ParseReport | None = None) -> Dump:
    path = Path(path)
    if report is None:
        report = ParseReport()
    dump = Dump.from_statements(label or dump_label(path),
                                read_statements(path, qualifiers=qualifiers, report=report),
                                identity_mode)
    if redirects:
        rmap = collapse_redirects(read_redirects(redirects, report=report))
        subjects = {st.subject for st in dump}
        clash = sorted(set(rmap) & subjects)
        for node in clash:
            log.warning("%s: %s is both a redirect source and a subject; redirect ignored",
                        path, node)
            del rmap[node]
        dump.redirects = rmap
    return dump


def dump_label(path: str | Path) -> str:
    name = Path(path).name
    for suffix in (".tsv.gz", ".tsv", ".gz"):
        if name.endswith(suffix):
            return name[: -len(suffix)]
    return name
