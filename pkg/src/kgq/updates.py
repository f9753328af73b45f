"""Classify removed statements as pure removals or updates.

A removed statement is matched against statements added for the same
subject and property in the interval where it disappeared.  Without a
match it is a pure removal; with one, the per-kind similarity decides
between an equivalent (stylistic) and a significant update.  Pure removals
and significant updates form the community low-quality set.
"""

from __future__ import annotations

import enum
import math
import multiprocessing
import re
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .diff import INSTANCE_OF, SUBCLASS_OF, RemovalLedger, interval_name
from .model import Key, LiteralKind, LiteralValue, Statement, statement_key


class UnparsableDate(ValueError):
    pass


class IncomparableUnits(ValueError):
    pass


class UpdateCategory(str, enum.Enum):
    PURE_REMOVAL = "PureRemoval"
    EQUIVALENT_UPDATE = "EquivalentUpdate"
    SIGNIFICANT_UPDATE = "SignificantUpdate"


@dataclass(frozen=True)
class Thresholds:
    string_abs: int = 2
    string_rel: float = 0.1
    quantity_rel: float = 1e-9


# --- distances ---------------------------------------------------------------

def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit costs, two-row dynamic programme."""
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


string_distance = levenshtein


_CANON_DATE = re.compile(r"^(-?\d+)-(\d\d)-(\d\d)T(\d\d):(\d\d):(\d\d)Z/(\d+)$")

_UNITS = {10: "months", 11: "days", 12: "hours", 13: "minutes", 14: "seconds"}
# rough length of each unit in days, only used to rank candidates
_UNIT_DAYS = {"years": 365.2425, "months": 30.436875, "days": 1.0,
              "hours": 1 / 24, "minutes": 1 / 1440, "seconds": 1 / 86400}


@dataclass(frozen=True)
class DateDistance:
    amount: int
    unit: str
    equivalent: bool

    @property
    def days(self) -> float:
        return self.amount * _UNIT_DAYS[self.unit]


def _days_from_civil(y: int, m: int, d: int) -> int:
    # proleptic Gregorian day count, valid for any integer year
    y -= m <= 2
    era = (y if y >= 0 else y - 399) // 400
    yoe = y - era * 400
    doy = (153 * (m + (-3 if m > 2 else 9)) + 2) // 5 + d - 1
    doe = yoe * 365 + yoe // 4 - yoe // 100 + doy
    return era * 146097 + doe - 719468


def _date_parts(v: LiteralValue) -> tuple[int, ...]:
    if v.kind is not LiteralKind.DATE:
        raise UnparsableDate(f"not a date: {v.raw!r}")
    m = _CANON_DATE.match(v.canonical)
    if not m:
        raise UnparsableDate(f"unparsable date: {v.raw!r}")
    return tuple(int(g) for g in m.groups())


def date_distance(a: LiteralValue, b: LiteralValue) -> DateDistance:
    """Distance between two dates at the coarser of their precisions.

    Equivalence means identical canonical form, i.e. the same timestamp at
    the same precision.
    """
    ya, ma, da, ha, mia, sa, pa = _date_parts(a)
    yb, mb, db, hb, mib, sb, pb = _date_parts(b)
    p = min(pa, pb)
    equivalent = a.canonical == b.canonical
    if p <= 9:
        scale = 10 ** (9 - p)
        return DateDistance(abs(ya // scale - yb // scale) * scale, "years", equivalent)
    ma, mb, da, db = max(ma, 1), max(mb, 1), max(da, 1), max(db, 1)
    if p == 10:
        return DateDistance(abs((ya * 12 + ma) - (yb * 12 + mb)), "months", equivalent)
    days = _days_from_civil(ya, ma, da) - _days_from_civil(yb, mb, db)
    if p == 11:
        return DateDistance(abs(days), "days", equivalent)
    secs_a = ha * 3600 + mia * 60 + sa
    secs_b = hb * 3600 + mib * 60 + sb
    unit_secs = {12: 3600, 13: 60, 14: 1}[p]
    total_a = _days_from_civil(ya, ma, da) * 86400 + secs_a
    total_b = _days_from_civil(yb, mb, db) * 86400 + secs_b
    return DateDistance(abs(total_a // unit_secs - total_b // unit_secs), _UNITS[p], equivalent)


_DIMENSIONLESS = {None, "Q199"}


def quantity_distance(a: LiteralValue, b: LiteralValue) -> float:
    if a.kind is not LiteralKind.QUANTITY or b.kind is not LiteralKind.QUANTITY:
        raise TypeError("quantity_distance needs two quantities")
    if a.unit != b.unit and not (a.unit in _DIMENSIONLESS and b.unit in _DIMENSIONLESS):
        raise IncomparableUnits(f"{a.unit} vs {b.unit}")
    return abs(a.magnitude - b.magnitude)


# --- similarity --------------------------------------------------------------

@dataclass(frozen=True)
class Similarity:
    kind: str  # "edit" | "time" | "magnitude" | "none"
    value: float | None = None
    unit: str | None = None

    def render(self) -> str:
        if self.value is None:
            return ""
        if self.kind == "time":
            return f"{self.value:g} {self.unit}"
        return f"{self.value:g}"


NO_SIMILARITY = Similarity("none")


def compare(old: LiteralValue, new: LiteralValue, thresholds: Thresholds = Thresholds(),
            redirects: Mapping[str, str] | None = None) -> tuple[Similarity, bool, float]:
    """Return ``(similarity, equivalent, rank_score)`` for a removed/added value pair.

    ``rank_score`` orders candidate replacements (lower is closer).
    """
    if old.kind is LiteralKind.DATE and new.kind is LiteralKind.DATE:
        try:
            dd = date_distance(old, new)
        except UnparsableDate:
            pass
        else:
            return Similarity("time", dd.amount, dd.unit), dd.equivalent, dd.days
    if old.kind is LiteralKind.QUANTITY and new.kind is LiteralKind.QUANTITY:
        try:
            delta = quantity_distance(old, new)
        except IncomparableUnits:
            return Similarity("magnitude"), False, math.inf
        scale = max(abs(old.magnitude), abs(new.magnitude))
        return Similarity("magnitude", delta), delta <= thresholds.quantity_rel * scale, delta
    if old.kind is LiteralKind.ENTITY and new.kind is LiteralKind.ENTITY:
        r = redirects or {}
        same = r.get(old.canonical, old.canonical) == r.get(new.canonical, new.canonical)
        return NO_SIMILARITY, same, 0.0 if same else 1.0
    a, b = old.text, new.text
    d = levenshtein(a, b)
    longest = max(len(a), len(b))
    equivalent = d <= thresholds.string_abs or (longest > 0 and d / longest <= thresholds.string_rel)
    return Similarity("edit", d), equivalent, float(d)


# --- matching ----------------------------------------------------------------

class AddedIndex:
    """Statements added in one interval, indexed by subject and property."""

    def __init__(self, statements: Iterable[Statement] = ()):
        self.by_sp: dict[tuple[str, str], list[Statement]] = defaultdict(list)
        self.taxonomy: dict[str, list[Statement]] = defaultdict(list)
        for st in statements:
            self.add(st)

    def add(self, st: Statement) -> None:
        self.by_sp[(st.subject, st.property)].append(st)
        if st.property in (INSTANCE_OF, SUBCLASS_OF):
            self.taxonomy[st.subject].append(st)

    def candidates(self, subject: str, prop: str) -> list[Statement]:
        return self.by_sp.get((subject, prop), [])


def _as_index(added) -> AddedIndex:
    return added if isinstance(added, AddedIndex) else AddedIndex(added)


def _resolve(node: str, redirects: Mapping[str, str] | None) -> str:
    return redirects.get(node, node) if redirects else node


def match_update(removed: Statement, added: AddedIndex | Iterable[Statement],
                 thresholds: Thresholds = Thresholds(),
                 redirects: Mapping[str, str] | None = None) -> Statement | None:
    """Closest added statement with the removed one's subject and property.

    A redirected subject is looked up under its redirect target as well.
    Ties on similarity go to the lexicographically smallest canonical value.
    """
    index = _as_index(added)
    cands = list(index.candidates(removed.subject, removed.property))
    target = _resolve(removed.subject, redirects)
    if target != removed.subject:
        cands += index.candidates(target, removed.property)
    if not cands:
        return None
    return min(cands, key=lambda c: (_rank(removed, c, thresholds, redirects),
                                     c.object.canonical, c.subject, c.id))


def _rank(removed: Statement, cand: Statement, thresholds: Thresholds, redirects) -> tuple:
    _, equivalent, score = compare(removed.object, cand.object, thresholds, redirects)
    return (not equivalent, score)


@dataclass(frozen=True)
class UpdateClassification:
    key: Key
    removed: Statement
    replacement: Statement | None
    category: UpdateCategory
    similarity: Similarity = NO_SIMILARITY

    @property
    def low_quality(self) -> bool:
        return self.category is not UpdateCategory.EQUIVALENT_UPDATE


def classify_one(key: Key, removed: Statement, added: AddedIndex | None,
                 thresholds: Thresholds = Thresholds(),
                 redirects: Mapping[str, str] | None = None) -> UpdateClassification:
    repl = match_update(removed, added, thresholds, redirects) if added is not None else None
    if repl is None:
        return UpdateClassification(key, removed, None, UpdateCategory.PURE_REMOVAL)
    sim, equivalent, _ = compare(removed.object, repl.object, thresholds, redirects)
    cat = UpdateCategory.EQUIVALENT_UPDATE if equivalent else UpdateCategory.SIGNIFICANT_UPDATE
    return UpdateClassification(key, removed, repl, cat, sim)


@dataclass
class ClassificationResult:
    classifications: list[UpdateClassification]
    histogram: dict[str, int]
    by_kind: dict[str, Counter] = field(default_factory=dict)

    @property
    def low_quality(self) -> set[Key]:
        return {c.key for c in self.classifications if c.low_quality}

    def fractions(self) -> dict[str, dict[str, float]]:
        """Per literal kind: share of removals that were updated / equivalent / significant."""
        out = {}
        for kind, counts in sorted(self.by_kind.items()):
            total = sum(counts.values())
            updated = counts[UpdateCategory.EQUIVALENT_UPDATE] + counts[UpdateCategory.SIGNIFICANT_UPDATE]
            out[kind] = {
                "removed": total,
                "updated": updated / total if total else 0.0,
                "equivalent": counts[UpdateCategory.EQUIVALENT_UPDATE] / total if total else 0.0,
                "significant": counts[UpdateCategory.SIGNIFICANT_UPDATE] / total if total else 0.0,
                "pure_removal": counts[UpdateCategory.PURE_REMOVAL] / total if total else 0.0,
            }
        return out


def histogram_buckets(cap: int) -> list[str]:
    return [str(i) for i in range(cap + 1)] + [f">{cap}"]


def bucket_of(distance: int, cap: int) -> str:
    return str(distance) if distance <= cap else f">{cap}"


_WORK: dict = {}


def _classify_chunk(items):
    indexes, thresholds, redirects = _WORK["indexes"], _WORK["thresholds"], _WORK["redirects"]
    return [classify_one(key, entry.statement,
                         indexes.get(interval_name(entry.last_seen, entry.removed_in)),
                         thresholds, redirects)
            for key, entry in items]


def classify_removals(ledger: RemovalLedger,
                      added_per_interval: Mapping[str, AddedIndex | Iterable[Statement]],
                      thresholds: Thresholds = Thresholds(), *,
                      redirects: Mapping[str, str] | None = None,
                      histogram_cap: int = 50, workers: int = 1) -> ClassificationResult:
    """Classify every ledger entry against additions of its own interval.

    ``added_per_interval`` maps ``"<old>__<new>"`` interval names to the
    statements added in that interval.
    """
    indexes = {name: _as_index(v) for name, v in added_per_interval.items()}
    items = sorted(ledger.entries.items(), key=lambda kv: kv[0])
    _WORK.update(indexes=indexes, thresholds=thresholds, redirects=redirects)
    try:
        if workers > 1 and len(items) > 1:
            size = math.ceil(len(items) / workers)
            chunks = [items[i:i + size] for i in range(0, len(items), size)]
            ctx = multiprocessing.get_context("fork")
            with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
                results = [c for part in pool.map(_classify_chunk, chunks) for c in part]
        else:
            results = _classify_chunk(items)
    finally:
        _WORK.clear()

    hist = dict.fromkeys(histogram_buckets(histogram_cap), 0)
    by_kind: dict[str, Counter] = defaultdict(Counter)
    for c in results:
        by_kind[c.removed.object.kind.value][c.category] += 1
        if (c.replacement is not None and c.removed.object.kind is LiteralKind.STRING
                and c.replacement.object.kind is LiteralKind.STRING):
            hist[bucket_of(int(c.similarity.value), histogram_cap)] += 1
    return ClassificationResult(results, hist, dict(by_kind))


# --- taxonomy switches ---------------------------------------------------------

TAXONOMY_AFTER = ("P31", "P279", "both", "none")
TAXONOMY_CATEGORIES = tuple((before, after) for before in (INSTANCE_OF, SUBCLASS_OF)
                            for after in TAXONOMY_AFTER)


@dataclass
class TaxonomyReport:
    counts: dict[tuple[str, str], int]
    examples: dict[tuple[str, str], list[tuple[Statement, list[Statement]]]]


def taxonomy_category(removed: Statement, added: AddedIndex,
                      redirects: Mapping[str, str] | None = None) -> tuple[str, str]:
    """Which taxonomy statements replaced a removed instance-of/subclass-of edge."""
    subject = removed.subject
    props = {st.property for st in added.taxonomy.get(subject, ())}
    target = _resolve(subject, redirects)
    if target != subject:
        props |= {st.property for st in added.taxonomy.get(target, ())}
    has31, has279 = INSTANCE_OF in props, SUBCLASS_OF in props
    after = "both" if has31 and has279 else "P31" if has31 else "P279" if has279 else "none"
    return removed.property, after


def taxonomy_switch_report(ledger: RemovalLedger,
                           added_per_interval: Mapping[str, AddedIndex | Iterable[Statement]], *,
                           redirects: Mapping[str, str] | None = None,
                           max_examples: int = 3) -> TaxonomyReport:
    indexes = {name: _as_index(v) for name, v in added_per_interval.items()}
    empty = AddedIndex()
    counts = dict.fromkeys(TAXONOMY_CATEGORIES, 0)
    examples: dict = {c: [] for c in TAXONOMY_CATEGORIES}
    for key in sorted(ledger.entries):
        entry = ledger.entries[key]
        st = entry.statement
        if st.property not in (INSTANCE_OF, SUBCLASS_OF):
            continue
        index = indexes.get(interval_name(entry.last_seen, entry.removed_in), empty)
        cat = taxonomy_category(st, index, redirects)
        counts[cat] += 1
        if len(examples[cat]) < max_examples:
            subject = _resolve(st.subject, redirects)
            repl = sorted({*index.taxonomy.get(st.subject, ()), *index.taxonomy.get(subject, ())},
                          key=lambda s: statement_key(s))
            examples[cat].append((st, repl))
    return TaxonomyReport(counts, examples)
