#!/usr/bin/env python3
"""Score run_all against the seeded-violation corpus.

Prints per-fixture precision and recall, the rules each fixture exercises,
and total wall time.

    python scripts/run_corpus.py [--corpus tests/corpus] [--verbose]
"""
import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
import corpus_oracle as co  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description="Score the checker against the fixture corpus.")
    ap.add_argument("--corpus", type=Path, default=co.CORPUS)
    ap.add_argument("--verbose", action="store_true", help="list missed and spurious violations")
    args = ap.parse_args()

    start = time.perf_counter()
    fixtures = co.fixtures(args.corpus)
    perfect = 0
    for fx in fixtures:
        p, r, found = co.score(fx)
        perfect += p == 1.0 and r == 1.0
        rules = ",".join(sorted({k[0] for k in fx.expected})) or "-"
        print(f"{fx.name:<30} precision {p:.3f}  recall {r:.3f}  expects {rules}")
        if args.verbose and (p < 1.0 or r < 1.0):
            for k in sorted(set(fx.expected) - set(found)):
                print(f"    missed   {k}")
            for k in sorted(set(found) - set(fx.expected)):
                print(f"    spurious {k}")
    elapsed = time.perf_counter() - start
    print(f"\n{perfect}/{len(fixtures)} fixtures exact, {elapsed:.3f}s total")
    return 0 if perfect == len(fixtures) else 1


if __name__ == "__main__":
    sys.exit(main())
