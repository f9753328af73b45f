"""Write a sequence of synthetic dumps with churn, plus a manifest and config.

    python3 scripts/synth_dump_sequence.py --out /tmp/synth --dumps 4 --statements 200000
    kgq --config /tmp/synth/synth.cfg run --out /tmp/synth-report
"""

import argparse
import random
from pathlib import Path

from kgq.model import LiteralKind, LiteralValue, Statement, write_statements
from kgq.synth import SynthConfig, synth_statements


def _type_declaration(classes: int, rng: random.Random) -> Statement:
    allowed = rng.sample(range(classes), 10)
    st = Statement("decl-P1-type", "P1", "P2302", LiteralValue(LiteralKind.ENTITY, "Q21503250",
                                                                "Q21503250"))
    quals = [("P2308", f"Q{1_000_000 + c}") for c in allowed] + [("P2309", "Q21503252")]
    return st.with_qualifiers((p, LiteralValue(LiteralKind.ENTITY, v, v)) for p, v in quals)


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--dumps", type=int, default=4)
    ap.add_argument("--statements", type=int, default=200_000)
    ap.add_argument("--classes", type=int, default=2_000)
    ap.add_argument("--churn", type=float, default=0.02, help="share removed per interval")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = random.Random(args.seed)
    args.out.mkdir(parents=True, exist_ok=True)
    cfg = SynthConfig(statements=args.statements, classes=args.classes,
                      entities=max(args.statements // 5, 10), seed=args.seed)
    current = list(synth_statements(cfg))
    decl = _type_declaration(args.classes, rng)
    lines = []
    for i in range(args.dumps):
        label = f"2021-{i + 1:02d}-01"
        name = f"dump-{label}.tsv"
        write_statements(args.out / name, [decl] + current)
        lines.append(f"{name}\tlabel={label}")
        keep = [st for st in current if rng.random() >= args.churn]
        fresh = len(current) - len(keep)
        extra = SynthConfig(statements=fresh, classes=args.classes, entities=cfg.entities,
                            seed=args.seed + i + 1, untyped_share=1.0)
        # new edges only; taxonomy is not regenerated
        new = [Statement(f"{label}-{j}", st.subject, st.property, st.object)
               for j, st in enumerate(x for x in synth_statements(extra) if x.property == cfg.prop)]
        current = keep + new[:fresh]
    (args.out / "dumps.txt").write_text("\n".join(lines) + "\n")
    (args.out / "synth.cfg").write_text("schema_version = 1\nmanifest = dumps.txt\n")
    print(f"wrote {args.dumps} dumps to {args.out}")


if __name__ == "__main__":
    main()
