"""Property-constraint declarations and their validation.

Five constraint types are supported: type, value type, item-requires-statement,
inverse and symmetric.  Each validator splits the statements of one property
into a satisfying and a violating set.  The satisfying set is computed first
and the violating set is the remainder, so the two always cover the property.
"""

from __future__ import annotations

import enum
import logging
import multiprocessing
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .diff import INSTANCE_OF, SUBCLASS_OF
from .model import (
    IdentityMode,
    Key,
    Statement,
    StatementWriter,
    iter_rows,
    open_text,
    statement_key,
)

log = logging.getLogger(__name__)


class ConstraintType(str, enum.Enum):
    TYPE = "type"
    VALUE_TYPE = "valuetype"
    ITEM_REQUIRES_STATEMENT = "irs"
    INVERSE = "inverse"
    SYMMETRIC = "symmetric"

    @property
    def qid(self) -> str:
        return _CTYPE_QIDS[self]


_CTYPE_QIDS = {
    ConstraintType.TYPE: "Q21503250",
    ConstraintType.VALUE_TYPE: "Q21510865",
    ConstraintType.ITEM_REQUIRES_STATEMENT: "Q21503247",
    ConstraintType.INVERSE: "Q21510855",
    ConstraintType.SYMMETRIC: "Q21510862",
}
CTYPE_BY_QID = {q: t for t, q in _CTYPE_QIDS.items()}


class Status(str, enum.Enum):
    MANDATORY = "mandatory"
    NORMAL = "normal"
    SUGGESTED = "suggested"


class RelationMode(str, enum.Enum):
    INSTANCE_OF = "instance_of"
    SUBCLASS_OF = "subclass_of"
    INSTANCE_OR_SUBCLASS = "instance_or_subclass"


class UnknownRelationValue(ValueError):
    pass


class MissingAllowedClasses(ValueError):
    pass


@dataclass(frozen=True)
class RoleConfig:
    """Which qualifier properties carry each part of a constraint declaration.

    Defaults follow Wikidata's constraint vocabulary.
    """

    declaration: str = "P2302"
    allowed_class: str = "P2308"
    relation: str = "P2309"
    required_property: str = "P2306"
    required_value: str = "P2305"
    exception: str = "P2303"
    status: str = "P2316"
    mandatory: str = "Q21502408"
    suggested: str = "Q62026391"
    instance_of_relation: str = "Q21503252"
    subclass_of_relation: str = "Q21514624"
    instance_or_subclass_relation: str = "Q30208840"
    datatype: str = "datatype"
    external_id: str = "external-id"

    @classmethod
    def from_mapping(cls, values: Mapping[str, str]) -> "RoleConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(values) - names
        if unknown:
            raise KeyError(f"unknown role(s): {', '.join(sorted(unknown))}")
        return cls(**values)

    def relation_mode(self, value: str) -> RelationMode:
        table = {
            self.instance_of_relation: RelationMode.INSTANCE_OF,
            self.subclass_of_relation: RelationMode.SUBCLASS_OF,
            self.instance_or_subclass_relation: RelationMode.INSTANCE_OR_SUBCLASS,
        }
        try:
            return table[value]
        except KeyError:
            raise UnknownRelationValue(value) from None


_CLASS_TYPES = (ConstraintType.TYPE, ConstraintType.VALUE_TYPE)
_PROP_TYPES = (ConstraintType.ITEM_REQUIRES_STATEMENT, ConstraintType.INVERSE)


@dataclass(frozen=True)
class ConstraintSpec:
    spec_id: str
    property: str
    ctype: ConstraintType
    status: Status = Status.NORMAL
    allowed_classes: frozenset[str] = frozenset()
    relation_mode: RelationMode | None = None
    required_property: str | None = None
    required_values: frozenset[str] = frozenset()
    exceptions: frozenset[str] = frozenset()

    def __post_init__(self):
        cls_type = self.ctype in _CLASS_TYPES
        if cls_type != bool(self.allowed_classes) or cls_type != (self.relation_mode is not None):
            raise ValueError(f"{self.spec_id}: allowed classes/relation only apply to (value) type")
        if (self.ctype in _PROP_TYPES) != (self.required_property is not None):
            raise ValueError(f"{self.spec_id}: required property only applies to irs/inverse")
        if self.required_values and self.ctype is not ConstraintType.ITEM_REQUIRES_STATEMENT:
            raise ValueError(f"{self.spec_id}: required values only apply to irs")


# --- ingestion ---------------------------------------------------------------

@dataclass
class IngestResult:
    specs: list[ConstraintSpec]
    skipped: Counter = field(default_factory=Counter)


def external_id_properties(statements: Iterable[Statement], roles: RoleConfig) -> set[str]:
    return {st.subject for st in statements
            if st.property == roles.datatype and st.object.text == roles.external_id}


def ingest_constraints(statements: Iterable[Statement], roles: RoleConfig = RoleConfig(),
                       *, external_ids: Iterable[str] = ()) -> IngestResult:
    """Compile constraint declarations into specs.

    Declarations of unsupported types and declarations on external-identifier
    properties are skipped and counted, as are malformed ones.
    """
    statements = list(statements)
    ext = external_id_properties(statements, roles) | set(external_ids)
    decls = sorted((st for st in statements if st.property == roles.declaration),
                   key=lambda st: (st.subject, st.id))
    known_roles = {roles.allowed_class, roles.relation, roles.required_property,
                   roles.required_value, roles.exception, roles.status}
    result = IngestResult([])
    numbering: Counter = Counter()
    for decl in decls:
        ctype = CTYPE_BY_QID.get(decl.object.canonical)
        if ctype is None:
            result.skipped["unsupported_type"] += 1
            continue
        prop = decl.subject
        if prop in ext:
            result.skipped["external_id"] += 1
            continue
        q: dict[str, list[str]] = defaultdict(list)
        for qp, qv in decl.qualifiers:
            q[qp].append(qv.canonical)
            if qp not in known_roles:
                result.skipped["ignored_qualifier"] += 1
                log.info("%s: qualifier %s on %s constraint ignored", prop, qp, ctype.value)
        try:
            spec_fields = _spec_fields(ctype, q, roles)
        except (UnknownRelationValue, MissingAllowedClasses, ValueError) as exc:
            kind = {UnknownRelationValue: "unknown_relation",
                    MissingAllowedClasses: "missing_allowed_classes"}.get(type(exc), "malformed")
            log.warning("%s %s constraint (%s) skipped: %s: %s", prop, ctype.value, decl.id,
                        type(exc).__name__, exc)
            result.skipped[kind] += 1
            continue
        numbering[(prop, ctype)] += 1
        spec_id = f"{prop}.{ctype.value}.{numbering[(prop, ctype)]}"
        result.specs.append(ConstraintSpec(spec_id, prop, ctype, **spec_fields))
    return result


def _spec_fields(ctype: ConstraintType, q: Mapping[str, list[str]], roles: RoleConfig) -> dict:
    status_values = q.get(roles.status, [])
    status = Status.NORMAL
    if roles.mandatory in status_values:
        status = Status.MANDATORY
    elif roles.suggested in status_values:
        status = Status.SUGGESTED
    out: dict = {"status": status, "exceptions": frozenset(q.get(roles.exception, ()))}
    if ctype in _CLASS_TYPES:
        classes = frozenset(q.get(roles.allowed_class, ()))
        if not classes:
            raise MissingAllowedClasses("no allowed classes")
        relations = sorted(set(q.get(roles.relation, ())))
        if len(relations) > 1:
            raise UnknownRelationValue(f"conflicting relations {relations}")
        out["allowed_classes"] = classes
        out["relation_mode"] = (roles.relation_mode(relations[0]) if relations
                                else RelationMode.INSTANCE_OF)
    elif ctype in _PROP_TYPES:
        props = sorted(set(q.get(roles.required_property, ())))
        if len(props) != 1:
            raise ValueError(f"expected one required property, got {props}")
        out["required_property"] = props[0]
        if ctype is ConstraintType.ITEM_REQUIRES_STATEMENT:
            out["required_values"] = frozenset(q.get(roles.required_value, ()))
    return out


SPEC_COLUMNS = ("spec_id", "property", "ctype", "status", "relation", "allowed_classes",
                "required_property", "required_values", "exceptions")


def _join(values: Iterable[str]) -> str:
    return ",".join(sorted(values))


def _split(text: str) -> frozenset[str]:
    return frozenset(v for v in text.split(",") if v)


def write_specs(specs: Iterable[ConstraintSpec], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(SPEC_COLUMNS) + "\n")
        for s in specs:
            fh.write("\t".join((
                s.spec_id, s.property, s.ctype.value, s.status.value,
                s.relation_mode.value if s.relation_mode else "",
                _join(s.allowed_classes), s.required_property or "",
                _join(s.required_values), _join(s.exceptions))) + "\n")


def read_specs(path: str | Path) -> list[ConstraintSpec]:
    with open_text(path) as fh:
        return [ConstraintSpec(
            spec_id=row["spec_id"], property=row["property"],
            ctype=ConstraintType(row["ctype"]), status=Status(row["status"]),
            allowed_classes=_split(row["allowed_classes"]),
            relation_mode=RelationMode(row["relation"]) if row["relation"] else None,
            required_property=row["required_property"] or None,
            required_values=_split(row["required_values"]),
            exceptions=_split(row["exceptions"]),
        ) for _, row in iter_rows(fh, SPEC_COLUMNS, source=str(path))]


# --- closure -------------------------------------------------------------------

def strongly_connected(nodes: Iterable[str], succ: Mapping[str, Iterable[str]]) -> list[list[str]]:
    """Tarjan's algorithm without recursion.

    Components come out in reverse topological order: every component is
    emitted after all components reachable from it.
    """
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    stack: list[str] = []
    on_stack: set[str] = set()
    comps: list[list[str]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(succ.get(root, ())))]
        while work:
            v, it = work[-1]
            descended = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ.get(w, ()))))
                    descended = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if descended:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                low[u] = min(low[u], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


class ClosureIndex:
    """Reflexive-transitive subclass-of closure plus direct instance-of classes.

    Subclass cycles collapse into one component whose members share a single
    ancestor set.
    """

    def __init__(self, parents: Mapping[str, Iterable[str]],
                 instance_of: Mapping[str, Iterable[str]]):
        self.parents = {c: frozenset(ps) for c, ps in parents.items()}
        self.instance_of = {s: frozenset(cs) for s, cs in instance_of.items()}
        children: dict[str, set[str]] = defaultdict(set)
        for c, ps in self.parents.items():
            for p in ps:
                children[p].add(c)
        self.children = dict(children)
        self._stars: dict[str, frozenset[str]] | None = None
        self._desc_cache: dict[frozenset[str], frozenset[str]] = {}

    def _build_stars(self) -> dict[str, frozenset[str]]:
        nodes = sorted(set(self.parents) | set(self.children))
        comps = strongly_connected(nodes, self.parents)
        cycles = [c for c in comps if len(c) > 1]
        if cycles:
            log.warning("%d subclass-of cycle(s), e.g. %s", len(cycles), sorted(cycles[0]))
        comp_of = {n: i for i, comp in enumerate(comps) for n in comp}
        comp_star: list[frozenset[str]] = []
        for i, comp in enumerate(comps):
            acc = set(comp)
            for n in comp:
                for p in self.parents.get(n, ()):
                    j = comp_of[p]
                    if j != i:
                        acc |= comp_star[j]
            comp_star.append(frozenset(acc))
        return {n: comp_star[comp_of[n]] for n in nodes}

    def subclass_star(self, node: str) -> frozenset[str]:
        if self._stars is None:
            self._stars = self._build_stars()
        return self._stars.get(node) or frozenset((node,))

    def descendants(self, classes: Iterable[str]) -> frozenset[str]:
        """Every node whose subclass closure meets ``classes`` (the classes included)."""
        key = frozenset(classes)
        hit = self._desc_cache.get(key)
        if hit is not None:
            return hit
        seen = set(key)
        todo = list(key)
        while todo:
            n = todo.pop()
            for c in self.children.get(n, ()):
                if c not in seen:
                    seen.add(c)
                    todo.append(c)
        out = frozenset(seen)
        self._desc_cache[key] = out
        return out


def build_closure(statements: Iterable[Statement]) -> ClosureIndex:
    parents: dict[str, set[str]] = defaultdict(set)
    instance_of: dict[str, set[str]] = defaultdict(set)
    for st in statements:
        if not st.object.is_entity:
            continue
        if st.property == SUBCLASS_OF:
            parents[st.subject].add(st.object.canonical)
        elif st.property == INSTANCE_OF:
            instance_of[st.subject].add(st.object.canonical)
    return ClosureIndex(parents, instance_of)


class GraphIndex:
    """Statements grouped by property, plus (subject, property) -> object values."""

    def __init__(self, statements: Iterable[Statement],
                 identity_mode: IdentityMode | str = IdentityMode.CONTENT):
        self.identity_mode = IdentityMode(identity_mode)
        self.by_property: dict[str, list[Statement]] = defaultdict(list)
        self.values: dict[tuple[str, str], set[str]] = defaultdict(set)
        for st in statements:
            self.by_property[st.property].append(st)
            self.values[(st.subject, st.property)].add(st.object.canonical)
        self.by_property = dict(self.by_property)
        self.values = dict(self.values)

    def has(self, subject: str, prop: str, obj: str) -> bool:
        vals = self.values.get((subject, prop))
        return vals is not None and obj in vals

    def statements_of(self, prop: str) -> list[Statement]:
        return self.by_property.get(prop, [])


def build_indexes(statements: Iterable[Statement],
                  identity_mode: IdentityMode | str = IdentityMode.CONTENT
                  ) -> tuple[GraphIndex, ClosureIndex]:
    statements = list(statements)
    return GraphIndex(statements, identity_mode), build_closure(statements)


# --- validation ------------------------------------------------------------------

@dataclass(frozen=True)
class ViolationReport:
    spec_id: str
    property: str
    ctype: ConstraintType
    status: Status
    correct: frozenset[Key]
    incorrect: frozenset[Key]

    @property
    def total(self) -> int:
        return len(self.correct) + len(self.incorrect)

    @property
    def violation_ratio(self) -> float:
        return violation_ratio(len(self.correct), len(self.incorrect))


def violation_ratio(correct: int, incorrect: int) -> float:
    total = correct + incorrect
    return 100.0 * incorrect / total if total else 0.0


def _partition(spec: ConstraintSpec, statements: Iterable[Statement], ok,
               mode: IdentityMode) -> ViolationReport:
    correct, incorrect = set(), set()
    exceptions = spec.exceptions
    for st in statements:
        key = statement_key(st, mode)
        if st.subject in exceptions or ok(st):
            correct.add(key)
        else:
            incorrect.add(key)
    # a key seen twice under different verdicts cannot happen for content keys;
    # id keys are unique per dump
    return ViolationReport(spec.spec_id, spec.property, spec.ctype, spec.status,
                           frozenset(correct), frozenset(incorrect - correct))


def _class_test(spec: ConstraintSpec, closure: ClosureIndex):
    ok_classes = closure.descendants(spec.allowed_classes)
    inst = closure.instance_of
    mode = spec.relation_mode

    def test(node: str) -> bool:
        if mode is not RelationMode.SUBCLASS_OF:
            for c in inst.get(node, ()):
                if c in ok_classes:
                    return True
        if mode is not RelationMode.INSTANCE_OF:
            return node in ok_classes
        return False

    return test


def _check(spec: ConstraintSpec, ctype: ConstraintType) -> None:
    if spec.ctype is not ctype:
        raise ValueError(f"{spec.spec_id} is a {spec.ctype.value} constraint, not {ctype.value}")


def validate_type(spec: ConstraintSpec, statements: Iterable[Statement], closure: ClosureIndex,
                  mode: IdentityMode = IdentityMode.CONTENT) -> ViolationReport:
    _check(spec, ConstraintType.TYPE)
    test = _class_test(spec, closure)
    return _partition(spec, statements, lambda st: test(st.subject), mode)


def validate_value_type(spec: ConstraintSpec, statements: Iterable[Statement],
                        closure: ClosureIndex,
                        mode: IdentityMode = IdentityMode.CONTENT) -> ViolationReport:
    _check(spec, ConstraintType.VALUE_TYPE)
    test = _class_test(spec, closure)
    return _partition(spec, statements,
                      lambda st: st.object.is_entity and test(st.object.canonical), mode)


def validate_item_requires_statement(spec: ConstraintSpec, statements: Iterable[Statement],
                                     index: GraphIndex,
                                     mode: IdentityMode = IdentityMode.CONTENT) -> ViolationReport:
    _check(spec, ConstraintType.ITEM_REQUIRES_STATEMENT)
    req, allowed = spec.required_property, spec.required_values

    def ok(st: Statement) -> bool:
        vals = index.values.get((st.subject, req))
        if not vals:
            return False
        return not allowed or not vals.isdisjoint(allowed)

    return _partition(spec, statements, ok, mode)


def validate_inverse(spec: ConstraintSpec, statements: Iterable[Statement], index: GraphIndex,
                     mode: IdentityMode = IdentityMode.CONTENT) -> ViolationReport:
    _check(spec, ConstraintType.INVERSE)
    inv = spec.required_property
    return _partition(spec, statements,
                      lambda st: st.object.is_entity and index.has(st.object.canonical, inv, st.subject),
                      mode)


def validate_symmetric(spec: ConstraintSpec, statements: Iterable[Statement], index: GraphIndex,
                       mode: IdentityMode = IdentityMode.CONTENT) -> ViolationReport:
    _check(spec, ConstraintType.SYMMETRIC)
    return _partition(spec, statements,
                      lambda st: st.object.is_entity
                      and index.has(st.object.canonical, st.property, st.subject),
                      mode)


def validate(spec: ConstraintSpec, index: GraphIndex, closure: ClosureIndex) -> ViolationReport:
    statements = index.statements_of(spec.property)
    mode = index.identity_mode
    if spec.ctype is ConstraintType.TYPE:
        return validate_type(spec, statements, closure, mode)
    if spec.ctype is ConstraintType.VALUE_TYPE:
        return validate_value_type(spec, statements, closure, mode)
    if spec.ctype is ConstraintType.ITEM_REQUIRES_STATEMENT:
        return validate_item_requires_statement(spec, statements, index, mode)
    if spec.ctype is ConstraintType.INVERSE:
        return validate_inverse(spec, statements, index, mode)
    return validate_symmetric(spec, statements, index, mode)


_SHARED: dict = {}


def _validate_batch(specs: Sequence[ConstraintSpec]) -> list[ViolationReport]:
    return [validate(s, _SHARED["index"], _SHARED["closure"]) for s in specs]


def validate_all(specs: Iterable[ConstraintSpec], index: GraphIndex, closure: ClosureIndex, *,
                 types: Iterable[ConstraintType | str] | None = None,
                 workers: int = 1) -> list[ViolationReport]:
    """Validate every spec; reports come back in spec order regardless of ``workers``.

    With several workers each spec is an independent task; the indexes are
    inherited by forked workers and only read.
    """
    wanted = {ConstraintType(t) for t in types} if types is not None else set(ConstraintType)
    todo = [s for s in specs if s.ctype in wanted]
    if workers <= 1 or len(todo) <= 1:
        return [validate(s, index, closure) for s in todo]
    _SHARED.update(index=index, closure=closure)
    try:
        batches = [todo[i::workers] for i in range(workers)]
        ctx = multiprocessing.get_context("fork")
        with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
            done = {r.spec_id: r for batch in pool.map(_validate_batch, batches) for r in batch}
    finally:
        _SHARED.clear()
    return [done[s.spec_id] for s in todo]


# --- summaries -------------------------------------------------------------------

@dataclass(frozen=True)
class SummaryRow:
    ctype: ConstraintType
    status: Status
    properties: int
    correct: int
    incorrect: int

    @property
    def violation_ratio(self) -> float:
        return violation_ratio(self.correct, self.incorrect)


@dataclass(frozen=True)
class RankedEntry:
    ctype: ConstraintType
    spec_id: str
    property: str
    status: Status
    statements: int
    violation_ratio: float


@dataclass
class ViolationSummary:
    rows: list[SummaryRow]
    ranked: list[RankedEntry]

    def top(self, ctype: ConstraintType | str, k: int = 3) -> list[RankedEntry]:
        ctype = ConstraintType(ctype)
        return [e for e in self.ranked if e.ctype is ctype][:k]

    def row(self, ctype: ConstraintType | str, status: Status | str) -> SummaryRow:
        ctype, status = ConstraintType(ctype), Status(status)
        return next(r for r in self.rows if r.ctype is ctype and r.status is status)


def violation_ratio_table(reports: Sequence[ViolationReport]) -> ViolationSummary:
    """Status-stratified totals per constraint type and per-spec ratios, highest first."""
    if not reports:
        raise ValueError("violation_ratio_table needs at least one report")
    agg: dict[tuple, list[int]] = {(t, s): [0, 0, 0] for t in ConstraintType for s in Status}
    for r in reports:
        cell = agg[(r.ctype, r.status)]
        cell[0] += 1
        cell[1] += len(r.correct)
        cell[2] += len(r.incorrect)
    rows = [SummaryRow(t, s, *agg[(t, s)]) for t in ConstraintType for s in Status]
    order = {t: i for i, t in enumerate(ConstraintType)}
    ranked = sorted((RankedEntry(r.ctype, r.spec_id, r.property, r.status, r.total,
                                 r.violation_ratio) for r in reports),
                    key=lambda e: (order[e.ctype], -e.violation_ratio, -e.statements, e.spec_id))
    return ViolationSummary(rows, ranked)


def write_summary(summary: ViolationSummary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("ctype\tstatus\tproperties\tcorrect\tincorrect\tvr_percent\n")
        for r in summary.rows:
            fh.write(f"{r.ctype.value}\t{r.status.value}\t{r.properties}\t{r.correct}\t"
                     f"{r.incorrect}\t{r.violation_ratio:.2f}\n")


def write_ranked(summary: ViolationSummary, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("ctype\tspec_id\tproperty\tstatus\tstatements\tvr_percent\n")
        for e in summary.ranked:
            fh.write(f"{e.ctype.value}\t{e.spec_id}\t{e.property}\t{e.status.value}\t"
                     f"{e.statements}\t{e.violation_ratio:.2f}\n")


def write_partitions(reports: Iterable[ViolationReport], index: GraphIndex,
                     out_dir: str | Path) -> list[Path]:
    """Write ``<spec_id>.correct.tsv`` / ``<spec_id>.incorrect.tsv`` edge files."""
    out = Path(out_dir)
    written = []
    mode = index.identity_mode
    for r in reports:
        stmts = sorted(index.statements_of(r.property), key=lambda st: statement_key(st, mode))
        for name, keys in (("correct", r.correct), ("incorrect", r.incorrect)):
            path = out / f"{r.spec_id}.{name}.tsv"
            with StatementWriter(path) as w:
                for st in stmts:
                    if statement_key(st, mode) in keys:
                        w.write(st)
            written.append(path)
    return written


def iter_incorrect(reports: Iterable[ViolationReport]) -> Iterator[Key]:
    for r in reports:
        yield from r.incorrect
