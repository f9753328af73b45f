"""Deprecated-rank statements and their distribution over properties and classes."""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .diff import INSTANCE_OF
from .model import Dump, IdentityMode, Key, Rank, Statement, statement_key

UNTYPED = "<untyped>"


@dataclass
class DeprecatedSet:
    source_dump: str
    statements: dict[Key, Statement] = field(default_factory=dict)

    def __post_init__(self):
        for st in self.statements.values():
            if st.rank is not Rank.DEPRECATED:
                raise ValueError(f"{st.id} is not deprecated")

    def keys(self) -> set[Key]:
        return set(self.statements)

    def __len__(self) -> int:
        return len(self.statements)


def partition(dump: Dump) -> tuple[DeprecatedSet, dict[Key, Statement]]:
    """Split a dump into its deprecated statements and everything else."""
    deprecated, rest = {}, {}
    for key, st in dump.statements.items():
        (deprecated if st.rank is Rank.DEPRECATED else rest)[key] = st
    return DeprecatedSet(dump.label, deprecated), rest


def extract_deprecated(dump: Dump) -> DeprecatedSet:
    return partition(dump)[0]


def extract_deprecated_stream(statements: Iterable[Statement], label: str,
                              mode: IdentityMode = IdentityMode.CONTENT) -> DeprecatedSet:
    return DeprecatedSet(label, {statement_key(st, mode): st for st in statements
                                 if st.rank is Rank.DEPRECATED})


def build_instance_index(statements: Iterable[Statement]) -> dict[str, set[str]]:
    index: dict[str, set[str]] = defaultdict(set)
    for st in statements:
        if st.property == INSTANCE_OF and st.object.is_entity:
            index[st.subject].add(st.object.canonical)
    return dict(index)


def count_shard(statements: Iterable[Statement],
                instance_index: Mapping[str, Iterable[str]]) -> tuple[Counter, Counter]:
    """Per-shard property and class counters; merge shards by adding counters."""
    props, classes = Counter(), Counter()
    for st in statements:
        props[st.property] += 1
        for c in instance_index.get(st.subject) or (UNTYPED,):
            classes[c] += 1
    return props, classes


def _ranked(counter: Counter, k: int | None) -> list[tuple[str, int]]:
    items = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return items if k is None else items[:k]


def aggregate_deprecated(deprecated: DeprecatedSet,
                         instance_index: Mapping[str, Iterable[str]],
                         k: int | None = None) -> tuple[list[tuple[str, int]], list[tuple[str, int]]]:
    """Top properties and top subject classes among deprecated statements.

    A subject with several instance-of classes counts once for each class;
    subjects without one fall under ``<untyped>``.
    """
    props, classes = count_shard(deprecated.statements.values(), instance_index)
    return _ranked(props, k), _ranked(classes, k)
