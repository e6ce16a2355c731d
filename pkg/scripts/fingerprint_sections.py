#!/usr/bin/env python3
"""Print a manifest skeleton listing every section that needs a record.

Each record carries the section's current fingerprint, so the output can be
pasted into a manifest once the section has actually been reviewed.

    python scripts/fingerprint_sections.py model.xlsx [--manifest m.manifest]
"""
import argparse

from sheetcert import graph as gr
from sheetcert.ingest import load_manifest, load_workbook
from sheetcert.regions import SectionKind, infer, section_fingerprint
from sheetcert.rules import manifest_regions


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("workbook")
    ap.add_argument("--manifest", help="existing manifest, for its region declarations")
    args = ap.parse_args()
    wb = load_workbook(args.workbook)
    decl = manifest_regions(load_manifest(args.manifest)) if args.manifest else []
    rm = infer(wb, gr.build(wb), decl)
    for s in rm.sections:
        if s.kind is SectionKind.OUTPUT:
            continue
        print(f"[section {s.sheet}!{s.label}]")
        print(f"# {s.kind.value}, rows {s.row_span[0]}-{s.row_span[1]}")
        print(f"fingerprint = {section_fingerprint(wb, rm, s)}")
        print()


if __name__ == "__main__":
    main()
