"""Combine the removal, deprecation and constraint indicators.

``V`` is the violating set of the current dump and ``V_del`` the violating
set after putting every permanently removed statement back.  Their
difference ``V_del - V`` holds the violations that the removals fixed.
Additions can fix or create violations too; that effect is not modelled.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .constraints import (
    ConstraintSpec,
    ConstraintType,
    Status,
    ViolationReport,
    build_indexes,
    validate_all,
)
from .diff import RemovalLedger
from .model import IdentityMode, Key, Statement, StatementWriter, statement_key

LIMITATION = ("Limitation: violations that were fixed or introduced by added statements "
              "are not accounted for; only removals are compared.")

FLAGS = ("community", "deprecated", "constraint")


class ConfigMismatch(ValueError):
    pass


@dataclass(frozen=True)
class ViolationSet:
    """Violating statement keys together with the configuration that produced them."""

    keys: frozenset[Key]
    config: str
    reports: tuple[ViolationReport, ...] = ()

    def __len__(self) -> int:
        return len(self.keys)


@dataclass(frozen=True)
class IndicatorResult:
    community: frozenset[Key]
    deprecated: frozenset[Key]
    violating: frozenset[Key]
    fixed: frozenset[Key]

    def __post_init__(self):
        if self.fixed & self.violating:
            raise ValueError("fixed violations must not be current violations")


def config_fingerprint(specs: Iterable[ConstraintSpec], types: Iterable[ConstraintType | str] | None,
                       identity_mode: IdentityMode | str) -> str:
    h = hashlib.sha256()
    for s in sorted(specs, key=lambda s: s.spec_id):
        h.update(repr((s.spec_id, s.property, s.ctype.value, s.status.value,
                       sorted(s.allowed_classes), s.relation_mode and s.relation_mode.value,
                       s.required_property, sorted(s.required_values),
                       sorted(s.exceptions))).encode())
    wanted = sorted(ConstraintType(t).value for t in types) if types is not None else ["*"]
    h.update(repr((wanted, IdentityMode(identity_mode).value)).encode())
    return h.hexdigest()[:16]


def violations(statements: Iterable[Statement], specs: Sequence[ConstraintSpec], *,
               identity_mode: IdentityMode | str = IdentityMode.CONTENT,
               types: Iterable[ConstraintType | str] | None = None,
               workers: int = 1) -> ViolationSet:
    index, closure = build_indexes(statements, identity_mode)
    reports = validate_all(specs, index, closure, types=types, workers=workers)
    keys = frozenset(k for r in reports for k in r.incorrect)
    return ViolationSet(keys, config_fingerprint(specs, types, identity_mode), tuple(reports))


def union_statements(live: Mapping[Key, Statement] | Iterable[Statement],
                     ledger: RemovalLedger,
                     identity_mode: IdentityMode | str = IdentityMode.CONTENT) -> dict[Key, Statement]:
    """Live statements plus ledger payloads; live statements win key collisions."""
    mode = IdentityMode(identity_mode)
    if isinstance(live, Mapping):
        merged = dict(live)
    else:
        merged = {}
        for st in live:
            merged.setdefault(statement_key(st, mode), st)
    for key, entry in ledger.entries.items():
        merged.setdefault(key, entry.statement)
    return merged


def violations_with_removals(live: Mapping[Key, Statement] | Iterable[Statement],
                             ledger: RemovalLedger, specs: Sequence[ConstraintSpec], *,
                             identity_mode: IdentityMode | str = IdentityMode.CONTENT,
                             types: Iterable[ConstraintType | str] | None = None,
                             workers: int = 1) -> ViolationSet:
    """Re-validate everything over the live statements plus the removed ones."""
    merged = union_statements(live, ledger, identity_mode)
    return violations(merged.values(), specs, identity_mode=identity_mode, types=types,
                      workers=workers)


def fixed_violations(v: ViolationSet, v_del: ViolationSet) -> frozenset[Key]:
    if v.config != v_del.config:
        raise ConfigMismatch(f"violation sets come from different configurations "
                             f"({v.config} vs {v_del.config})")
    return v_del.keys - v.keys


@dataclass(frozen=True)
class OverlapCell:
    violating: int
    in_scope: int

    @property
    def percent(self) -> float | None:
        return 100.0 * self.violating / self.in_scope if self.in_scope else None

    def render(self) -> str:
        pct = self.percent
        return f"{self.violating}/{self.in_scope} ({'—' if pct is None else f'{pct:.2f}%'})"


def overlap_table(ledger: RemovalLedger | Iterable[Key],
                  reports: Iterable[ViolationReport]) -> dict[tuple[ConstraintType, Status], OverlapCell]:
    """Share of removed statements violating each (constraint type, status) class.

    ``reports`` must come from validating the live dump plus the ledger, so
    that removed statements are in scope.  A removed statement counts once
    per class even when several specs of that class cover it.
    """
    removed = set(ledger.entries) if isinstance(ledger, RemovalLedger) else set(ledger)
    scope: dict[tuple, set[Key]] = {(t, s): set() for t in ConstraintType for s in Status}
    bad: dict[tuple, set[Key]] = {(t, s): set() for t in ConstraintType for s in Status}
    for r in reports:
        cls = (r.ctype, r.status)
        scope[cls] |= (r.correct | r.incorrect) & removed
        bad[cls] |= r.incorrect & removed
    return {cls: OverlapCell(len(bad[cls]), len(scope[cls])) for cls in scope}


def low_quality_union(community: Iterable[Key], deprecated: Iterable[Key],
                      violating: Iterable[Key]) -> dict[Key, frozenset[str]]:
    """Union of the three indicator sets, each key tagged with its sources."""
    flags: dict[Key, set[str]] = {}
    for name, keys in zip(FLAGS, (community, deprecated, violating)):
        for k in keys:
            flags.setdefault(k, set()).add(name)
    return {k: frozenset(v) for k, v in flags.items()}


def render_flags(flags: Iterable[str]) -> str:
    return ",".join(f for f in FLAGS if f in flags)


def write_keyed(path: str | Path, keys: Iterable[Key], payload: Mapping[Key, Statement],
                extra: Mapping[Key, str] | None = None, extra_column: str | None = None) -> int:
    """Write the statements behind ``keys`` as edge rows, in key order."""
    cols = (extra_column,) if extra_column else ()
    with StatementWriter(path, extra_columns=cols) as w:
        for k in sorted(keys):
            st = payload[k]
            if extra_column:
                w.write(st, extra[k])
            else:
                w.write(st)
    return w.count


def write_overlap(table: Mapping[tuple[ConstraintType, Status], OverlapCell],
                  path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("ctype\t" + "\t".join(s.value for s in Status) + "\n")
        for t in ConstraintType:
            fh.write(t.value + "\t" + "\t".join(table[(t, s)].render() for s in Status) + "\n")
