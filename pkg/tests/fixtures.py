"""Hand-built and randomised statement fixtures shared by several test modules."""

from __future__ import annotations

import random

from kgq.constraints import ConstraintSpec, ConstraintType, RelationMode, Status

from conftest import st

# --- occupation (P106) ------------------------------------------------------------

P106_TYPE_CLASSES = ("Q5", "Q95074", "Q215627")
P106_VALUE_CLASSES = ("Q12737077", "Q28640", "Q4164871")
PRESCRIBER = "Q99393050"


def occupation_statements():
    return [
        st("c1", "Q15632617", "P279", "Q95074"),
        st("c2", "Q28640", "P279", "Q12737077"),
        st("c3", "Q82594", "P31", "Q28640"),
        st("c4", "Q1234", "P1", "Q9"),
        st("h1", "Q1", "P31", "Q5"),
        st("h2", "Q1", "P106", "Q82594"),
        st("f1", "Q2", "P31", "Q15632617"),
        st("f2", "Q2", "P106", "Q82594"),
        st("u1", "Q3", "P106", "Q82594"),
        st("p1", PRESCRIBER, "P106", "Q82594"),
        st("k1", "Q4", "P31", "Q515"),
        st("k2", "Q4", "P106", "Q28640"),
        st("v1", "Q5000", "P31", "Q5"),
        st("v2", "Q5000", "P106", "Q1234"),
        st("v3", "Q5000", "P106", '"carpenter"'),
    ]


def occupation_specs():
    return [
        ConstraintSpec("P106.type.1", "P106", ConstraintType.TYPE,
                       allowed_classes=frozenset(P106_TYPE_CLASSES),
                       relation_mode=RelationMode.INSTANCE_OF,
                       exceptions=frozenset({PRESCRIBER})),
        ConstraintSpec("P106.valuetype.1", "P106", ConstraintType.VALUE_TYPE,
                       allowed_classes=frozenset(P106_VALUE_CLASSES),
                       relation_mode=RelationMode.INSTANCE_OR_SUBCLASS),
        ConstraintSpec("P106.irs.1", "P106", ConstraintType.ITEM_REQUIRES_STATEMENT,
                       required_property="P31"),
    ]


# hand enumeration, content keys (subject, P106, object)
OCCUPATION_EXPECTED = {
    "P106.type.1": (
        {("Q1", "P106", "Q82594"), ("Q2", "P106", "Q82594"), (PRESCRIBER, "P106", "Q82594"),
         ("Q5000", "P106", "Q1234"), ("Q5000", "P106", '"carpenter"')},
        {("Q3", "P106", "Q82594"), ("Q4", "P106", "Q28640")}),
    "P106.valuetype.1": (
        {("Q1", "P106", "Q82594"), ("Q2", "P106", "Q82594"), ("Q3", "P106", "Q82594"),
         (PRESCRIBER, "P106", "Q82594"), ("Q4", "P106", "Q28640")},
        {("Q5000", "P106", "Q1234"), ("Q5000", "P106", '"carpenter"')}),
    "P106.irs.1": (
        {("Q1", "P106", "Q82594"), ("Q2", "P106", "Q82594"), ("Q4", "P106", "Q28640"),
         ("Q5000", "P106", "Q1234"), ("Q5000", "P106", '"carpenter"')},
        {("Q3", "P106", "Q82594"), (PRESCRIBER, "P106", "Q82594")}),
}


# --- place of origin (Switzerland) (P1321) -----------------------------------------------

FLACHSLANDEN = "Q1583384"


def origin_statements(with_declarations: bool = True):
    """About twenty statements: two requirement declarations and the items they govern."""
    decl = [
        st("P1321-irs-human", "P1321", "P2302", "Q21503247",
           qualifiers=[("P2306", "P31"), ("P2305", "Q5"), ("P2303", FLACHSLANDEN)]),
        st("P1321-irs-swiss", "P1321", "P2302", "Q21503247",
           qualifiers=[("P2306", "P27"), ("P2305", "Q39"), ("P2303", FLACHSLANDEN)]),
    ]
    items = [
        st("e1", FLACHSLANDEN, "P1321", "Q70"),
        st("a1", "Q101", "P31", "Q5"), st("a2", "Q101", "P27", "Q39"),
        st("a3", "Q101", "P1321", "Q70"),
        st("b1", "Q102", "P31", "Q5"), st("b2", "Q102", "P27", "Q183"),
        st("b3", "Q102", "P1321", "Q72"),
        st("c1", "Q103", "P31", "Q43229"), st("c2", "Q103", "P27", "Q39"),
        st("c3", "Q103", "P1321", "Q70"),
        st("d1", "Q104", "P1321", "Q70"),
        st("f1", "Q105", "P31", "Q5"), st("f2", "Q105", "P27", "Q183"),
        st("f3", "Q105", "P27", "Q39"), st("f4", "Q105", "P1321", "Q68"),
        st("g1", "Q106", "P31", "Q15632617"), st("g2", "Q106", "P27", "Q39"),
        st("g3", "Q106", "P1321", "Q70"),
    ]
    return (decl if with_declarations else []) + items


def _k(subject, obj="Q70"):
    return (subject, "P1321", obj)


ORIGIN_EXPECTED = {
    # requires instance-of human
    "P1321.irs.1": ({_k(FLACHSLANDEN), _k("Q101"), _k("Q102", "Q72"), _k("Q105", "Q68")},
                    {_k("Q103"), _k("Q104"), _k("Q106")}),
    # requires citizenship Switzerland
    "P1321.irs.2": ({_k(FLACHSLANDEN), _k("Q101"), _k("Q103"), _k("Q105", "Q68"), _k("Q106")},
                    {_k("Q102", "Q72"), _k("Q104")}),
}


# --- towards (P5051): every use violates -------------------------------------------------

def towards_statements(n: int = 64):
    out = [st("t0", "Q548662", "P279", "Q1")]
    for i in range(n):
        vein = f"Q{900000 + i}"
        out.append(st(f"t{i}a", vein, "P31", "Q9609" if i < 28 else "Q12280"))
        out.append(st(f"t{i}b", vein, "P5051", f"Q{800000 + i}"))
    return out


def towards_spec():
    return ConstraintSpec("P5051.type.1", "P5051", ConstraintType.TYPE,
                          allowed_classes=frozenset({"Q548662"}),
                          relation_mode=RelationMode.INSTANCE_OF)


# --- randomised graphs -------------------------------------------------------------------

PROPS = ("P10", "P11", "P12")


def random_graph(rng: random.Random, n_statements: int, n_nodes: int = 40, n_classes: int = 15):
    """Random statements over a small vocabulary: taxonomy, instance-of and plain edges.

    Subclass-of edges are drawn freely, so cycles do occur.
    """
    nodes = [f"Q{i}" for i in range(1, n_nodes + 1)]
    classes = [f"Q{1000 + i}" for i in range(n_classes)]
    out = []
    for i in range(n_statements):
        roll = rng.random()
        if roll < 0.15:
            out.append(st(f"s{i}", rng.choice(classes), "P279", rng.choice(classes)))
        elif roll < 0.35:
            out.append(st(f"s{i}", rng.choice(nodes + classes), "P31", rng.choice(classes)))
        elif roll < 0.45:
            out.append(st(f"s{i}", rng.choice(nodes), rng.choice(PROPS), f'"lit{rng.randrange(5)}"'))
        else:
            out.append(st(f"s{i}", rng.choice(nodes), rng.choice(PROPS), rng.choice(nodes + classes)))
    return out, nodes, classes


def random_spec(rng: random.Random, ctype: ConstraintType, nodes, classes, n: int = 1):
    prop = rng.choice(PROPS)
    exceptions = frozenset(rng.sample(nodes, rng.randrange(3)))
    status = rng.choice(list(Status))
    sid = f"{prop}.{ctype.value}.{n}"
    if ctype in (ConstraintType.TYPE, ConstraintType.VALUE_TYPE):
        return ConstraintSpec(sid, prop, ctype, status,
                              allowed_classes=frozenset(rng.sample(classes, rng.randint(1, 3))),
                              relation_mode=rng.choice(list(RelationMode)), exceptions=exceptions)
    if ctype is ConstraintType.ITEM_REQUIRES_STATEMENT:
        values = frozenset(rng.sample(classes + nodes, rng.randrange(3)))
        return ConstraintSpec(sid, prop, ctype, status, required_property=rng.choice(("P31",) + PROPS),
                              required_values=values, exceptions=exceptions)
    if ctype is ConstraintType.INVERSE:
        return ConstraintSpec(sid, prop, ctype, status, required_property=rng.choice(PROPS),
                              exceptions=exceptions)
    return ConstraintSpec(sid, prop, ctype, status, exceptions=exceptions)


def spec_as_dict(spec: ConstraintSpec) -> dict:
    """Plain-data view of a spec for the brute-force oracle."""
    return {"property": spec.property, "ctype": spec.ctype.value,
            "allowed": set(spec.allowed_classes),
            "relation": spec.relation_mode.value if spec.relation_mode else None,
            "required_property": spec.required_property,
            "required_values": set(spec.required_values),
            "exceptions": set(spec.exceptions)}
