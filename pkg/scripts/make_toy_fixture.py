"""Regenerate the bundled two-dump toy fixture under data/toy/.

The fixture is small enough to read by eye and touches every stage:
literal updates, taxonomy switches, a redirect, deprecated statements and
one declaration for each supported constraint type (plus two that get
skipped).
"""

from pathlib import Path

OUT = Path(__file__).resolve().parent.parent / "data" / "toy"

CONSTRAINTS = [
    ("P106-P2302-type", "P106", "P2302", "Q21503250"),
    ("P106-P2302-vt", "P106", "P2302", "Q21510865"),
    ("P106-P2302-irs", "P106", "P2302", "Q21503247"),
    ("P1321-P2302-irs1", "P1321", "P2302", "Q21503247"),
    ("P1321-P2302-irs2", "P1321", "P2302", "Q21503247"),
    ("P1605-P2302-inv", "P1605", "P2302", "Q21510855"),
    ("P1706-P2302-sym", "P1706", "P2302", "Q21510862"),
    ("P213-P2302-type", "P213", "P2302", "Q21503250"),
    ("P569-P2302-single", "P569", "P2302", "Q19474404"),
    ("P213-datatype", "P213", "datatype", "external-id"),
]

CONSTRAINT_QUALIFIERS = [
    ("P106-P2302-type", "P2308", "Q5"),
    ("P106-P2302-type", "P2308", "Q215627"),
    ("P106-P2302-type", "P2309", "Q21503252"),
    ("P106-P2302-type", "P2303", "Q99393050"),
    ("P106-P2302-vt", "P2308", "Q12737077"),
    ("P106-P2302-vt", "P2309", "Q30208840"),
    ("P106-P2302-irs", "P2306", "P31"),
    ("P1321-P2302-irs1", "P2306", "P31"),
    ("P1321-P2302-irs1", "P2305", "Q5"),
    ("P1321-P2302-irs1", "P2303", "Q1583384"),
    ("P1321-P2302-irs2", "P2306", "P27"),
    ("P1321-P2302-irs2", "P2305", "Q39"),
    ("P1321-P2302-irs2", "P2303", "Q1583384"),
    ("P1321-P2302-irs2", "P2316", "Q21502408"),
    ("P1605-P2302-inv", "P2306", "P1606"),
    ("P1706-P2302-sym", "P2316", "Q62026391"),
    ("P213-P2302-type", "P2308", "Q5"),
    ("P213-P2302-type", "P2309", "Q21503252"),
]

# present in both dumps
STABLE = [
    ("Q5-P279-1", "Q5", "P279", "Q215627", "normal"),
    ("Q28640-P279-1", "Q28640", "P279", "Q12737077", "normal"),
    ("Q100-P31-1", "Q100", "P31", "Q28640", "normal"),
    ("Q101-P279-1", "Q101", "P279", "Q28640", "normal"),
    ("Q1-P31-1", "Q1", "P31", "Q5", "normal"),
    ("Q1-P106-1", "Q1", "P106", "Q100", "normal"),
    ("Q2-P31-1", "Q2", "P31", "Q5", "normal"),
    ("Q2-P106-1", "Q2", "P106", "Q101", "normal"),
    ("Q3-P106-1", "Q3", "P106", "Q100", "normal"),
    ("Q99393050-P106-1", "Q99393050", "P106", "Q100", "normal"),
    ("Q4-P31-1", "Q4", "P31", "Q5", "normal"),
    ("Q4-P27-1", "Q4", "P27", "Q39", "normal"),
    ("Q4-P1321-1", "Q4", "P1321", "Q70", "normal"),
    ("Q1-P1321-1", "Q1", "P1321", "Q70", "normal"),
    ("Q1583384-P1321-1", "Q1583384", "P1321", "Q70", "normal"),
    ("Q20-P1605-1", "Q20", "P1605", "Q21", "normal"),
    ("Q21-P1606-1", "Q21", "P1606", "Q20", "normal"),
    ("Q22-P1605-1", "Q22", "P1605", "Q23", "normal"),
    ("Q24-P1706-1", "Q24", "P1706", "Q25", "normal"),
    ("Q25-P1706-1", "Q25", "P1706", "Q24", "normal"),
    ("Q26-P1706-1", "Q26", "P1706", "Q27", "normal"),
    ("Q18-P31-1", "Q18", "P31", "Q17", "normal"),
    ("Q30-P31-1", "Q30", "P31", "Q523", "normal"),
    ("Q30-P31-2", "Q30", "P31", "Q67206691", "deprecated"),
    ("Q30-P2215-1", "Q30", "P2215", "5.2", "deprecated"),
    ("Q31-P31-1", "Q31", "P31", "Q523", "normal"),
    ("Q31-P2215-1", "Q31", "P2215", "1.0", "deprecated"),
    ("Q32-P2215-1", "Q32", "P2215", "3.3", "deprecated"),
    ("Q33-P2214-1", "Q33", "P2214", "0.5", "preferred"),
]

OLD_ONLY = [
    ("Q6-P31-1", "Q6", "P31", "Q7", "normal"),
    ("Q6-P106-1", "Q6", "P106", "Q100", "normal"),
    ("Q8-P1477-1", "Q8", "P1477", '"Pamela C Rasmussen"', "normal"),
    ("Q9-P1477-1", "Q9", "P1477", '"Meredith Boyle Metzger"', "normal"),
    ("Q10-P569-1", "Q10", "P569", "1964-00-00T00:00:00Z/9", "normal"),
    ("Q11-P2048-1", "Q11", "P2048", "5Q11573", "normal"),
    ("Q12-P31-1", "Q12", "P31", "Q13", "normal"),
    ("Q14-P279-1", "Q14", "P279", "Q15", "normal"),
    ("Q16-P31-1", "Q16", "P31", "Q17", "normal"),
    ("Q19-P570-1", "Q19", "P570", "000000001990-00-00T00:00:00Z/9", "normal"),
]

NEW_ONLY = [
    ("Q6-P31-2", "Q6", "P31", "Q35", "normal"),
    ("Q8-P1477-2", "Q8", "P1477", '"Pamela C. Rasmussen"', "normal"),
    ("Q9-P1477-2", "Q9", "P1477", '"Susan Michaelis"', "normal"),
    ("Q10-P569-2", "Q10", "P569", "1965-00-00T00:00:00Z/9", "normal"),
    ("Q11-P2048-2", "Q11", "P2048", "7.5Q11573", "normal"),
    ("Q12-P279-1", "Q12", "P279", "Q13", "normal"),
    ("Q14-P31-1", "Q14", "P31", "Q15", "normal"),
    ("Q19-P570-1", "Q19", "P570", "1990-00-00T00:00:00Z/9", "normal"),
]

STATEMENT_QUALIFIERS = [
    ("Q1-P31-1", "P580", "^2020-01-01T00:00:00Z/11"),
]


def write(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    decls = [c + ("normal",) for c in CONSTRAINTS]
    edge_header = ("id", "node1", "label", "node2", "rank")
    quals = CONSTRAINT_QUALIFIERS + STATEMENT_QUALIFIERS
    for label, extra in (("2020-12-01", OLD_ONLY), ("2021-01-04", NEW_ONLY)):
        write(OUT / f"dump-{label}.tsv", edge_header, decls + STABLE + extra)
        write(OUT / f"dump-{label}.qualifiers.tsv", ("node1", "label", "node2"), quals)
    write(OUT / "redirects-2021-01-04.tsv", ("node1", "node2"), [("Q16", "Q18")])
    (OUT / "dumps.txt").write_text(
        "# oldest first\n"
        "dump-2020-12-01.tsv\tlabel=2020-12-01\n"
        "dump-2021-01-04.tsv\tlabel=2021-01-04\tredirects=redirects-2021-01-04.tsv\n",
        encoding="utf-8")
    (OUT / "toy.cfg").write_text(
        "schema_version = 1\n"
        "manifest = dumps.txt\n"
        "identity_mode = content\n"
        "workers = 1\n"
        "string_abs_threshold = 2\n"
        "string_rel_threshold = 0.1\n"
        "histogram_cap = 50\n",
        encoding="utf-8")
    print(f"wrote fixture to {OUT}")


if __name__ == "__main__":
    main()
