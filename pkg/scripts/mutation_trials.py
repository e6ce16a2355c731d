#!/usr/bin/env python3
"""Certificate robustness trials over the corpus.

For each fixture: issue a certificate, then verify it against (a) the
unchanged workbook, (b) every single-input value edit and (c) each of the
five structural mutation classes. Prints a table of outcomes per class.

    python scripts/mutation_trials.py [--delta 7]
"""
import argparse
import sys
from collections import Counter
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "tests"))
import corpus_oracle as co  # noqa: E402
from mutations import STRUCTURAL, data_mutation  # noqa: E402

from sheetcert.certify import VerifyResult, issue, verify  # noqa: E402
from sheetcert.regions import RegionClass  # noqa: E402
from sheetcert.rules import manifest_regions, run_all  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description="Run certificate mutation trials.")
    ap.add_argument("--delta", type=int, default=7, help="amount added to numeric inputs")
    args = ap.parse_args()

    tally: dict[str, Counter] = {}
    expect = {"unchanged": VerifyResult.VALID, "input value": VerifyResult.VALID}
    expect.update({name: VerifyResult.STRUCTURALLY_CHANGED for name in STRUCTURAL})

    def record(cls, result):
        tally.setdefault(cls, Counter())[result.value] += 1

    for fx in co.fixtures():
        decl = manifest_regions(fx.manifest)
        res = run_all(fx.wb, fx.manifest, fx.cfg)
        cert = issue(fx.wb, res.violations, fx.cfg, overrides=decl, rm=res.regions)
        record("unchanged", verify(fx.wb, cert, fx.cfg, decl))
        for target in sorted(res.regions.cells_of(RegionClass.INPUT)):
            mutated = data_mutation(fx.wb, target, args.delta)
            if mutated is not None:
                record("input value", verify(mutated, cert, fx.cfg, decl))
        for name, mutate in STRUCTURAL.items():
            mutated = mutate(fx.wb)
            if mutated is not None:
                record(name, verify(mutated, cert, fx.cfg, decl))

    bad = 0
    print(f"{'mutation class':<18} {'expected':<20} outcomes")
    for cls, counts in tally.items():
        want = expect[cls].value
        bad += sum(n for k, n in counts.items() if k != want)
        outcomes = ", ".join(f"{k} {n}" for k, n in sorted(counts.items()))
        print(f"{cls:<18} {want:<20} {outcomes}")
    print(f"\n{'all trials as expected' if not bad else f'{bad} unexpected outcomes'}")
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
