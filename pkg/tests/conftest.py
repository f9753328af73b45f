from pathlib import Path

import pytest

from kgq.model import Rank, Statement, parse_literal

TOY = Path(__file__).resolve().parent.parent / "data" / "toy"


def st(sid, subject, prop, obj, rank="normal", qualifiers=()):
    """Shorthand statement constructor used throughout the tests."""
    return Statement(sid, subject, prop, parse_literal(obj), Rank.parse(rank),
                     frozenset((p, parse_literal(v)) for p, v in qualifiers))


def write_tsv(path, header, rows):
    path = Path(path)
    path.write_text("\n".join("\t".join(r) for r in [header, *rows]) + "\n", encoding="utf-8")
    return path


@pytest.fixture
def toy_dir():
    return TOY


# acceptance criterion number -> (description, passed); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[str, bool]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        desc, ok = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:>2}: {'PASS' if ok else 'FAIL'}  {desc}")
