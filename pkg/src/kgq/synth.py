"""Synthetic dumps for benchmarks and scale tests."""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterator

from .constraints import ConstraintSpec, ConstraintType, RelationMode
from .model import LiteralKind, LiteralValue, Statement


@dataclass
class SynthConfig:
    statements: int = 1_000_000
    classes: int = 10_000
    entities: int = 200_000
    max_parents: int = 2
    untyped_share: float = 0.05
    prop: str = "P1"
    seed: int = 0


def _entity(q: str, cache: dict) -> LiteralValue:
    v = cache.get(q)
    if v is None:
        v = cache[q] = LiteralValue(LiteralKind.ENTITY, q, q)
    return v


def synth_statements(cfg: SynthConfig) -> Iterator[Statement]:
    """Taxonomy edges, one instance-of per typed entity, then ``cfg.prop`` edges.

    Class ``k`` only subclasses classes with a smaller index, so the taxonomy
    is acyclic with a single root ``Q1000000``.
    """
    rng = random.Random(cfg.seed)
    cache: dict = {}
    classes = [f"Q{1_000_000 + i}" for i in range(cfg.classes)]
    entities = [f"Q{i + 1}" for i in range(cfg.entities)]
    n = 0
    for i in range(1, cfg.classes):
        for parent in {rng.randrange(i) for _ in range(rng.randint(1, cfg.max_parents))}:
            yield Statement(f"t{n}", classes[i], "P279", _entity(classes[parent], cache))
            n += 1
    for e in entities:
        if rng.random() >= cfg.untyped_share:
            yield Statement(f"t{n}", e, "P31", _entity(rng.choice(classes), cache))
            n += 1
    while n < cfg.statements:
        yield Statement(f"t{n}", rng.choice(entities), cfg.prop,
                        _entity(rng.choice(entities), cache))
        n += 1


def synth_type_spec(cfg: SynthConfig, n_allowed: int = 20) -> ConstraintSpec:
    rng = random.Random(cfg.seed + 1)
    allowed = frozenset(f"Q{1_000_000 + i}" for i in rng.sample(range(cfg.classes), n_allowed))
    return ConstraintSpec(f"{cfg.prop}.type.1", cfg.prop, ConstraintType.TYPE,
                          allowed_classes=allowed, relation_mode=RelationMode.INSTANCE_OF)
