import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as s

from kgq.constraints import (
    ClosureIndex,
    ConstraintSpec,
    ConstraintType,
    RelationMode,
    RoleConfig,
    Status,
    build_closure,
    build_indexes,
    ingest_constraints,
    read_specs,
    strongly_connected,
    validate,
    validate_all,
    violation_ratio,
    violation_ratio_table,
    write_partitions,
    write_specs,
)
from kgq.model import read_statements, statement_key

from conftest import st
from fixtures import (
    FLACHSLANDEN,
    OCCUPATION_EXPECTED,
    ORIGIN_EXPECTED,
    PRESCRIBER,
    occupation_specs,
    occupation_statements,
    origin_statements,
    random_graph,
    random_spec,
    spec_as_dict,
    towards_spec,
    towards_statements,
)
from oracles import ancestors_bfs, brute_force_violations, reachability_matrix


def _run(specs, statements, **kw):
    index, closure = build_indexes(statements)
    return {r.spec_id: r for r in validate_all(specs, index, closure, **kw)}


# --- ingestion -----------------------------------------------------------------

def test_ingest_origin_declarations():
    res = ingest_constraints(origin_statements())
    assert [s.spec_id for s in res.specs] == ["P1321.irs.1", "P1321.irs.2"]
    human, swiss = res.specs
    assert (human.required_property, human.required_values) == ("P31", {"Q5"})
    assert (swiss.required_property, swiss.required_values) == ("P27", {"Q39"})
    assert human.exceptions == swiss.exceptions == {FLACHSLANDEN}
    assert human.status is Status.NORMAL


def test_ingest_type_defaults_and_skips():
    stmts = [
        st("d1", "P106", "P2302", "Q21503250", qualifiers=[("P2308", "Q5"), ("P2303", PRESCRIBER)]),
        st("d2", "P106", "P2302", "Q21510865",
           qualifiers=[("P2308", "Q28640"), ("P2309", "Q30208840"), ("P2316", "Q21502408")]),
        st("d3", "P1", "P2302", "Q21510862", qualifiers=[("P2316", "Q62026391"), ("P9999", "Q1")]),
        st("d4", "P213", "P2302", "Q21503250", qualifiers=[("P2308", "Q5")]),
        st("d5", "P213", "datatype", "external-id"),
        st("d6", "P2", "P2302", "Q19474404"),
        st("d7", "P3", "P2302", "Q21503250", qualifiers=[("P2309", "Q21503252")]),
        st("d8", "P4", "P2302", "Q21503250", qualifiers=[("P2308", "Q5"), ("P2309", "Q777")]),
        st("d9", "P5", "P2302", "Q21510855"),
    ]
    res = ingest_constraints(stmts)
    by_id = {s.spec_id: s for s in res.specs}
    assert set(by_id) == {"P106.type.1", "P106.valuetype.1", "P1.symmetric.1"}
    assert by_id["P106.type.1"].relation_mode is RelationMode.INSTANCE_OF
    assert by_id["P106.type.1"].exceptions == {PRESCRIBER}
    assert by_id["P106.valuetype.1"].status is Status.MANDATORY
    assert by_id["P106.valuetype.1"].relation_mode is RelationMode.INSTANCE_OR_SUBCLASS
    assert by_id["P1.symmetric.1"].status is Status.SUGGESTED
    assert res.skipped == {"external_id": 1, "unsupported_type": 1, "missing_allowed_classes": 1,
                           "unknown_relation": 1, "malformed": 1, "ignored_qualifier": 1}


def test_custom_roles():
    roles = RoleConfig(declaration="P9", exception="P8")
    res = ingest_constraints([st("d", "P1", "P9", "Q21510862", qualifiers=[("P8", "Q3")])], roles)
    assert res.specs[0].exceptions == {"Q3"}
    with pytest.raises(KeyError):
        RoleConfig.from_mapping({"bogus": "P1"})


def test_spec_field_rules():
    with pytest.raises(ValueError):
        ConstraintSpec("x", "P1", ConstraintType.TYPE)
    with pytest.raises(ValueError):
        ConstraintSpec("x", "P1", ConstraintType.SYMMETRIC, required_property="P2")
    with pytest.raises(ValueError):
        ConstraintSpec("x", "P1", ConstraintType.INVERSE, required_property="P2",
                       required_values=frozenset({"Q1"}))


def test_specs_round_trip(tmp_path):
    specs = occupation_specs() + ingest_constraints(origin_statements()).specs
    write_specs(specs, tmp_path / "specs.tsv")
    assert read_specs(tmp_path / "specs.tsv") == specs


# --- closure -------------------------------------------------------------------------

def test_closure_chain_and_cycle():
    stmts = [st("1", "Q1", "P279", "Q2"), st("2", "Q2", "P279", "Q3"),
             st("3", "Q3", "P279", "Q2"), st("4", "Q9", "P31", "Q1")]
    c = build_closure(stmts)
    assert c.subclass_star("Q1") == {"Q1", "Q2", "Q3"}
    assert c.subclass_star("Q2") is c.subclass_star("Q3")
    assert c.subclass_star("Q7") == {"Q7"}
    assert c.descendants({"Q3"}) == {"Q1", "Q2", "Q3"}
    assert c.instance_of["Q9"] == {"Q1"}


def test_tarjan_reverse_topological():
    succ = {"a": ["b"], "b": ["c"], "c": ["b", "d"]}
    comps = strongly_connected(["a", "b", "c", "d"], succ)
    order = {n: i for i, comp in enumerate(comps) for n in comp}
    assert sorted(map(sorted, comps)) == [["a"], ["b", "c"], ["d"]]
    assert order["d"] < order["b"] < order["a"]


def test_closure_matches_oracles_on_random_dag_with_cycles():
    rng = random.Random(2)
    nodes = [f"C{i}" for i in range(200)]
    parents: dict = {}
    for _ in range(400):
        a, b = rng.choice(nodes), rng.choice(nodes)
        parents.setdefault(a, set()).add(b)
    c = ClosureIndex(parents, {})
    matrix = reachability_matrix(nodes, parents)
    for i, n in enumerate(nodes):
        expected = ancestors_bfs(n, parents)
        assert c.subclass_star(n) == expected
        assert {nodes[j] for j in np.flatnonzero(matrix[i])} == expected
    for target in rng.sample(nodes, 10):
        assert c.descendants({target}) == {n for n in nodes if target in ancestors_bfs(n, parents)}


# --- validators on hand fixtures -----------------------------------------------------

def test_occupation_fixture():
    reports = _run(occupation_specs(), occupation_statements())
    for spec_id, (correct, incorrect) in OCCUPATION_EXPECTED.items():
        assert reports[spec_id].correct == correct, spec_id
        assert reports[spec_id].incorrect == incorrect, spec_id


def test_origin_fixture():
    stmts = origin_statements()
    specs = ingest_constraints(stmts).specs
    reports = _run(specs, stmts)
    for spec_id, (correct, incorrect) in ORIGIN_EXPECTED.items():
        assert reports[spec_id].correct == correct
        assert reports[spec_id].incorrect == incorrect


def test_inverse_and_symmetric():
    stmts = [st("1", "Q20", "P1605", "Q21"), st("2", "Q21", "P1606", "Q20"),
             st("3", "Q22", "P1605", "Q23"), st("4", "Q22", "P1605", '"lit"'),
             st("5", "Q24", "P1706", "Q25"), st("6", "Q25", "P1706", "Q24"),
             st("7", "Q26", "P1706", "Q27"), st("8", "Q28", "P1706", "Q28")]
    specs = [ConstraintSpec("inv", "P1605", ConstraintType.INVERSE, required_property="P1606"),
             ConstraintSpec("sym", "P1706", ConstraintType.SYMMETRIC)]
    r = _run(specs, stmts)
    assert r["inv"].incorrect == {("Q22", "P1605", "Q23"), ("Q22", "P1605", '"lit"')}
    assert r["sym"].incorrect == {("Q26", "P1706", "Q27")}
    assert ("Q28", "P1706", "Q28") in r["sym"].correct


def test_id_mode_partitions_use_statement_ids():
    stmts = occupation_statements()
    index, closure = build_indexes(stmts, "id")
    r = validate(occupation_specs()[0], index, closure)
    assert r.incorrect == {("u1",), ("k2",)}


def test_towards_all_violating():
    r = _run([towards_spec()], towards_statements())["P5051.type.1"]
    assert (len(r.correct), len(r.incorrect)) == (0, 64)
    assert r.violation_ratio == 100.0


# --- validators against brute force -----------------------------------------------------

@pytest.mark.parametrize("ctype", list(ConstraintType))
def test_validators_match_brute_force(ctype):
    rng = random.Random(hash(ctype.value) & 0xFFFF)
    for trial in range(15):
        stmts, nodes, classes = random_graph(rng, rng.randint(0, 300))
        spec = random_spec(rng, ctype, nodes, classes)
        index, closure = build_indexes(stmts)
        r = validate(spec, index, closure)
        in_scope = {statement_key(x) for x in stmts if x.property == spec.property}
        expected_bad = brute_force_violations(stmts, spec_as_dict(spec))
        assert r.incorrect == expected_bad
        assert r.correct == in_scope - expected_bad
        assert not r.correct & r.incorrect


@settings(max_examples=60)
@given(s.integers(0, 10**6))
def test_exceptions_always_correct_and_monotone(seed):
    rng = random.Random(seed)
    stmts, nodes, classes = random_graph(rng, 150)
    ctype = rng.choice(list(ConstraintType))
    spec = random_spec(rng, ctype, nodes, classes)
    index, closure = build_indexes(stmts)
    base = validate(spec, index, closure)
    extra = frozenset(rng.sample(nodes, 5)) | spec.exceptions
    widened = ConstraintSpec(**{**spec.__dict__, "exceptions": extra})
    more = validate(widened, index, closure)
    assert not {k for k in more.incorrect if k[0] in extra}
    assert more.incorrect <= base.incorrect
    assert more.correct | more.incorrect == base.correct | base.incorrect


def test_adding_allowed_class_never_adds_violations():
    rng = random.Random(9)
    for _ in range(20):
        stmts, nodes, classes = random_graph(rng, 200)
        spec = random_spec(rng, ConstraintType.TYPE, nodes, classes)
        index, closure = build_indexes(stmts)
        wider = ConstraintSpec(**{**spec.__dict__,
                                  "allowed_classes": spec.allowed_classes | {rng.choice(classes)}})
        assert validate(wider, index, closure).incorrect <= validate(spec, index, closure).incorrect


def test_parallel_validation_matches_serial():
    rng = random.Random(4)
    stmts, nodes, classes = random_graph(rng, 400)
    specs = [random_spec(rng, t, nodes, classes, n) for n, t in
             enumerate(list(ConstraintType) * 3, start=1)]
    specs = list({x.spec_id: x for x in specs}.values())
    index, closure = build_indexes(stmts)
    assert validate_all(specs, index, closure) == validate_all(specs, index, closure, workers=3)
    only = validate_all(specs, index, closure, types=["symmetric"])
    assert {r.ctype for r in only} == {ConstraintType.SYMMETRIC}


# --- ratios and summaries ------------------------------------------------------------------

def test_violation_ratio_arithmetic():
    assert violation_ratio(0, 0) == 0.0
    assert violation_ratio(3, 1) == 25.0
    assert violation_ratio(0, 64) == 100.0
    rng = random.Random(1)
    for _ in range(1000):
        c, i = rng.randrange(10**6), rng.randrange(10**6)
        if c + i:
            assert abs(violation_ratio(c, i) - 100 * i / (c + i)) < 1e-9


def test_summary_table():
    stmts = occupation_statements() + towards_statements()
    reports = list(_run(occupation_specs() + [towards_spec()], stmts).values())
    summary = violation_ratio_table(reports)
    assert len(summary.rows) == 15
    row = summary.row("type", "normal")
    assert (row.properties, row.correct, row.incorrect) == (2, 5, 66)
    assert [e.spec_id for e in summary.top("type")] == ["P5051.type.1", "P106.type.1"]
    with pytest.raises(ValueError):
        violation_ratio_table([])


def test_write_partitions(tmp_path):
    stmts = occupation_statements()
    index, closure = build_indexes(stmts)
    reports = validate_all(occupation_specs(), index, closure)
    write_partitions(reports, index, tmp_path)
    bad = [x.subject for x in read_statements(tmp_path / "P106.type.1.incorrect.tsv")]
    assert bad == ["Q3", "Q4"]
