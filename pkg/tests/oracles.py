"""Slow, obviously-correct reference implementations used only by tests.

Nothing here imports the code under test beyond the plain data types, so a
bug in the production algorithms cannot leak into the expected values.
"""

from __future__ import annotations

from collections import deque
from functools import lru_cache

import numpy as np


def levenshtein_matrix(a: str, b: str) -> int:
    """Full (len(a)+1) x (len(b)+1) Wagner-Fischer table."""
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        table[i][0] = i
    for j in range(len(b) + 1):
        table[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            sub = 0 if a[i - 1] == b[j - 1] else 1
            table[i][j] = min(table[i - 1][j] + 1, table[i][j - 1] + 1,
                              table[i - 1][j - 1] + sub)
    return table[len(a)][len(b)]


def levenshtein_recursive(a: str, b: str) -> int:
    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == 0:
            return j
        if j == 0:
            return i
        return min(d(i - 1, j) + 1, d(i, j - 1) + 1,
                   d(i - 1, j - 1) + (a[i - 1] != b[j - 1]))
    return d(len(a), len(b))


def ledger_closed_form(key_sets: list[set]) -> set:
    """Everything ever seen minus what the newest dump still has."""
    seen = set().union(*key_sets)
    return seen - key_sets[-1]


def ledger_by_replay(key_sets: list[set]) -> set:
    """Walk the dumps in order keeping a removed/re-added flag per key."""
    state: dict = {}
    for prev, cur in zip(key_sets, key_sets[1:]):
        for k in prev:
            if k not in cur:
                state[k] = True
        for k in cur:
            if k not in prev:
                state[k] = False
    return {k for k, gone in state.items() if gone}


def ancestors_bfs(node: str, parents: dict[str, set[str]]) -> set[str]:
    """Reflexive-transitive ancestors by plain breadth-first search."""
    out = {node}
    queue = deque([node])
    while queue:
        cur = queue.popleft()
        for p in parents.get(cur, ()):
            if p not in out:
                out.add(p)
                queue.append(p)
    return out


def reachability_matrix(nodes: list[str], parents: dict[str, set[str]]) -> np.ndarray:
    """Boolean reflexive-transitive closure by repeated squaring."""
    pos = {n: i for i, n in enumerate(nodes)}
    m = np.eye(len(nodes), dtype=bool)
    for child, ps in parents.items():
        for p in ps:
            m[pos[child], pos[p]] = True
    while True:
        nxt = (m.astype(np.int64) @ m.astype(np.int64)) > 0
        if (nxt == m).all():
            return m
        m = nxt


def _parents(statements) -> dict[str, set[str]]:
    parents: dict[str, set[str]] = {}
    for st in statements:
        if st.property == "P279" and st.object.is_entity:
            parents.setdefault(st.subject, set()).add(st.object.canonical)
    return parents


def _classes_of(statements) -> dict[str, set[str]]:
    out: dict[str, set[str]] = {}
    for st in statements:
        if st.property == "P31" and st.object.is_entity:
            out.setdefault(st.subject, set()).add(st.object.canonical)
    return out


def _conforms(node, allowed, relation, parents, classes) -> bool:
    if relation in ("instance_of", "instance_or_subclass"):
        for c in classes.get(node, ()):
            if ancestors_bfs(c, parents) & allowed:
                return True
    if relation in ("subclass_of", "instance_or_subclass"):
        if ancestors_bfs(node, parents) & allowed:
            return True
    return False


def brute_force_violations(statements, spec) -> set[tuple]:
    """Content keys of statements violating ``spec``, checked one by one.

    ``spec`` is a plain dict: property, ctype, allowed, relation,
    required_property, required_values, exceptions.
    """
    statements = list(statements)
    parents = _parents(statements)
    classes = _classes_of(statements)
    facts = {(st.subject, st.property, st.object.canonical) for st in statements}
    bad = set()
    for st in statements:
        if st.property != spec["property"]:
            continue
        if st.subject in spec.get("exceptions", set()):
            continue
        obj = st.object.canonical
        kind = spec["ctype"]
        if kind == "type":
            ok = _conforms(st.subject, spec["allowed"], spec["relation"], parents, classes)
        elif kind == "valuetype":
            ok = st.object.is_entity and _conforms(obj, spec["allowed"], spec["relation"],
                                                   parents, classes)
        elif kind == "irs":
            req = spec["required_property"]
            vals = {o for (s, p, o) in facts if s == st.subject and p == req}
            wanted = spec.get("required_values") or set()
            ok = bool(vals) and (not wanted or bool(vals & wanted))
        elif kind == "inverse":
            ok = st.object.is_entity and (obj, spec["required_property"], st.subject) in facts
        elif kind == "symmetric":
            ok = st.object.is_entity and (obj, st.property, st.subject) in facts
        else:
            raise ValueError(kind)
        if not ok:
            bad.add((st.subject, st.property, obj))
    return bad
