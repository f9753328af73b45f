"""Time one type-constraint validation over a synthetic dump.

    python3 scripts/bench_type_validation.py --statements 1000000 --classes 10000
"""

import argparse
import time

from kgq.constraints import build_indexes, validate
from kgq.synth import SynthConfig, synth_statements, synth_type_spec


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--statements", type=int, default=1_000_000)
    ap.add_argument("--classes", type=int, default=10_000)
    ap.add_argument("--entities", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    cfg = SynthConfig(statements=args.statements, classes=args.classes,
                      entities=args.entities, seed=args.seed)

    t0 = time.perf_counter()
    stmts = list(synth_statements(cfg))
    t1 = time.perf_counter()
    index, closure = build_indexes(stmts)
    t2 = time.perf_counter()
    report = validate(synth_type_spec(cfg), index, closure)
    t3 = time.perf_counter()
    print(f"statements        {len(stmts)}")
    print(f"in scope          {report.total}")
    print(f"violation ratio   {report.violation_ratio:.2f}%")
    print(f"generate          {t1 - t0:.1f}s")
    print(f"index + closure   {t2 - t1:.1f}s")
    print(f"validate          {t3 - t2:.1f}s")
    print(f"index + validate  {t3 - t1:.1f}s")


if __name__ == "__main__":
    main()
