"""Command-line interface: ``sheetcert check|certify|verify|rules``.

Exit codes::

    0  compliant / certificate valid
    1  compliant with warnings
    2  non-compliant / workbook structurally changed since certification
    3  workbook, manifest or certificate could not be loaded
    4  usage error (bad flags, config or region declarations)
    5  certificate file could not be written
    6  configuration changed since certification
    7  malformed certificate
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from . import certify as ct
from . import graph as gr
from .ingest import IngestError, Manifest, load_manifest, load_workbook
from .regions import BadRegionSpec, OverrideConflict, parse_region_flag
from .rules import (
    RULES, RULESET_VERSION, SEVERITY_RANK, ConfigError, Location, RuleConfig, Severity, Verdict,
    Violation, catalog, manifest_regions, parse_config, run_all,
)

EXIT_CODES = {Verdict.COMPLIANT: 0, Verdict.WARNINGS: 1, Verdict.NON_COMPLIANT: 2}
EXIT_LOAD, EXIT_USAGE, EXIT_WRITE, EXIT_CONFIG_CHANGED, EXIT_MALFORMED = 3, 4, 5, 6, 7
VERIFY_EXIT = {ct.VerifyResult.VALID: 0, ct.VerifyResult.DATA_CHANGED_ONLY: 0,
               ct.VerifyResult.STRUCTURALLY_CHANGED: 2, ct.VerifyResult.CONFIG_CHANGED: EXIT_CONFIG_CHANGED}
CONFIG_ENV = "SHEETCERT_CONFIG"


class UsageError(Exception):
    pass


class LoadError(Exception):
    pass


@dataclass
class Report:
    workbook_path: str
    ruleset_version: str
    verdict: Verdict
    violations: list[Violation]
    region_summary: dict[str, dict[str, int]]
    not_assessable: list[str]
    notes: dict[str, str] = field(default_factory=dict, compare=False)


def render_json(report: Report) -> str:
    doc = {
        "workbook": report.workbook_path,
        "ruleset_version": report.ruleset_version,
        "verdict": report.verdict.value,
        "region_summary": report.region_summary,
        "violations": [
            {
                "rule": v.rule,
                "severity": v.severity.value,
                "sheet": v.sheet,
                "location": {"kind": v.location.kind, "ref": v.location.ref},
                "message": v.message,
                "details": dict(v.details),
            }
            for v in report.violations
        ],
        "not_assessable": list(report.not_assessable),
    }
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def parse_report(text: str) -> Report:
    doc = json.loads(text)
    violations = [
        Violation(v["rule"], v["sheet"], Location(v["location"]["kind"], v["location"]["ref"]),
                  v["message"], tuple(v["details"].items()))
        for v in doc["violations"]
    ]
    return Report(doc["workbook"], doc["ruleset_version"], Verdict(doc["verdict"]), violations,
                  doc["region_summary"], doc["not_assessable"])


def render_text(report: Report) -> str:
    lines = [f"{report.workbook_path}: {report.verdict.value} (ruleset {report.ruleset_version})"]
    for sheet, counts in report.region_summary.items():
        parts = ", ".join(f"{k} {n}" for k, n in counts.items() if n)
        lines.append(f"  sheet {sheet}: {parts or 'empty'}")
    by_sev: dict[Severity, list[Violation]] = {}
    for v in report.violations:
        by_sev.setdefault(v.severity, []).append(v)
    for sev in sorted(by_sev, key=SEVERITY_RANK.get):
        items = by_sev[sev]
        lines.append("")
        lines.append(f"{sev.value} ({len(items)})")
        for v in items:
            meta = RULES[v.rule]
            where = f"{v.sheet}!{v.location}" if v.sheet and v.location.kind == "cell" else (
                f"{v.sheet} {v.location}" if v.sheet else str(v.location))
            lines.append(f"  {v.rule} [item {meta.appendix_item}] {where}: {v.message}")
            for k, val in v.details:
                lines.append(f"      {k}: {val}")
    if report.not_assessable:
        lines.append("")
        lines.append("Not assessable")
        for rid in report.not_assessable:
            note = report.notes.get(rid, "")
            lines.append(f"  {rid} [item {RULES[rid].appendix_item}] {RULES[rid].title}" + (f": {note}" if note else ""))
    if not report.violations:
        lines.append("")
        lines.append("No violations.")
    return "\n".join(lines) + "\n"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("path", help="workbook (.xlsx) or text fixture")
    p.add_argument("--manifest", help="compliance manifest")
    p.add_argument("--config", help=f"rule configuration file (default: ${CONFIG_ENV})")
    p.add_argument("--region", action="append", default=[], metavar="CLASS=SHEET!A1:B2",
                   help="declare a region; repeatable")
    p.add_argument("--disable", default="", metavar="R04,R14", help="rules to switch off")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sheetcert", description="Spreadsheet code-of-practice checker and certifier.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    p = sub.add_parser("check", help="check a workbook and report violations")
    _add_common(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p = sub.add_parser("certify", help="check and write a compliance certificate")
    _add_common(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("--out", help="certificate path (default: <path>.cert)")
    p = sub.add_parser("verify", help="verify a workbook against its certificate")
    _add_common(p)
    p.add_argument("cert_path", nargs="?", help="certificate (default: <path>.cert)")
    sub.add_parser("rules", help="list the rule catalog")
    return parser


def _load_config(args) -> RuleConfig:
    path = args.config or os.environ.get(CONFIG_ENV)
    cfg = RuleConfig()
    try:
        if path:
            try:
                text = Path(path).read_text(encoding="utf-8")
            except OSError as exc:
                raise UsageError(f"cannot read config {path}: {exc}") from exc
            cfg = parse_config(text)
        extra = {r.strip().upper() for r in args.disable.split(",") if r.strip()}
        if extra:
            cfg = cfg.with_overrides(disabled_rules=cfg.disabled_rules | extra)
    except ConfigError as exc:
        raise UsageError(f"config: {exc}") from exc
    return cfg


@dataclass
class _Context:
    wb: object
    manifest: Manifest | None
    cfg: RuleConfig
    flags: list
    overrides: list  # manifest declarations followed by --region flags


def _prepare(args) -> _Context:
    cfg = _load_config(args)
    try:
        flags = [parse_region_flag(r) for r in args.region]
    except BadRegionSpec as exc:
        raise UsageError(f"--region: {exc}") from exc
    try:
        wb = load_workbook(args.path)
        manifest = load_manifest(args.manifest) if args.manifest else None
        declared = manifest_regions(manifest)
    except IngestError as exc:
        raise LoadError(str(exc)) from exc
    except BadRegionSpec as exc:
        raise LoadError(f"manifest region: {exc}") from exc
    return _Context(wb, manifest, cfg, flags, [*declared, *flags])


def _analyse(ctx: _Context, path: str):
    try:
        result = run_all(ctx.wb, ctx.manifest, ctx.cfg, overrides=ctx.flags)
    except OverrideConflict as exc:
        raise UsageError(str(exc)) from exc
    except gr.RangeTooLarge as exc:
        raise LoadError(str(exc)) from exc
    report = Report(path, RULESET_VERSION, result.verdict, result.violations,
                    result.regions.summary(ctx.wb), result.not_assessable, result.notes)
    return result, report


def cmd_check(args, out) -> int:
    ctx = _prepare(args)
    _, report = _analyse(ctx, args.path)
    out.write(render_json(report) if args.format == "json" else render_text(report))
    return EXIT_CODES[report.verdict]


def cmd_certify(args, out) -> int:
    ctx = _prepare(args)
    result, report = _analyse(ctx, args.path)
    cert = ct.issue(ctx.wb, result.violations, ctx.cfg, overrides=ctx.overrides, rm=result.regions)
    target = args.out or args.path + ".cert"
    try:
        ct.write_certificate(cert, target)
    except OSError as exc:
        print(f"sheetcert: cannot write certificate {target}: {exc}", file=sys.stderr)
        return EXIT_WRITE
    out.write(render_json(report) if args.format == "json" else render_text(report))
    if args.format != "json":
        out.write(f"certificate written to {target} ({cert.verdict.value})\n")
    return EXIT_CODES[report.verdict]


def cmd_verify(args, out) -> int:
    ctx = _prepare(args)
    cert_path = args.cert_path or args.path + ".cert"
    try:
        cert = ct.read_certificate(cert_path)
    except ct.MalformedCertificate as exc:
        print(f"sheetcert: malformed certificate: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    try:
        result = ct.verify(ctx.wb, cert, ctx.cfg, ctx.overrides)
    except OverrideConflict as exc:
        raise UsageError(str(exc)) from exc
    out.write(f"{args.path}: {result.value} (certified {cert.verdict.value} at "
              f"{cert.issued_at.strftime('%Y-%m-%dT%H:%M:%SZ')})\n")
    return VERIFY_EXIT[result]


def cmd_rules(args, out) -> int:
    for m in catalog():
        out.write(f"{m.id}  {m.severity.value:<11}  item {m.appendix_item:>2}  {m.checkable.value:<13}  {m.title}\n")
    return 0


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required: check, certify, verify or rules")
        handler = {"check": cmd_check, "certify": cmd_certify, "verify": cmd_verify, "rules": cmd_rules}
        return handler[args.command](args, out)
    except UsageError as exc:
        print(f"sheetcert: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LoadError as exc:
        print(f"sheetcert: {exc}", file=sys.stderr)
        return EXIT_LOAD


if __name__ == "__main__":
    sys.exit(main())
