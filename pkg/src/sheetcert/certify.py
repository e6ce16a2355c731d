"""Compliance certificates bound to a workbook's structural fingerprint.

A certificate stays valid while only input values change. Any other edit
(formulas, labels, cell positions, sheet names, hidden flags, settings)
changes the fingerprint and voids it.

File format: UTF-8 ``key = value`` lines, the last of which is
``signature = <sha256 of every preceding byte>``.
"""
from __future__ import annotations

import enum
import hashlib
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterable

from . import __version__
from . import graph as gr
from .model import Workbook, canonical_serialize
from .regions import DeclaredRegion, RegionClass, RegionMap, infer, region_ref_text
from .rules import RULESET_VERSION, RuleConfig, Severity, Verdict, Violation, verdict

HASH_ALGORITHM = "sha256"
_FIELDS = ("format", "hash_algorithm", "fingerprint", "ruleset_version", "config_digest",
           "issued_at", "verdict", "violation_counts", "tool_version")
_HEX64 = re.compile(r"[0-9a-f]{64}")
_TIMESTAMP = "%Y-%m-%dT%H:%M:%SZ"


class ClockUnavailable(RuntimeError):
    pass


class MalformedCertificate(ValueError):
    pass


class VerifyResult(enum.Enum):
    VALID = "Valid"
    DATA_CHANGED_ONLY = "DataChangedOnly"  # never returned: data-only edits verify as VALID
    STRUCTURALLY_CHANGED = "StructurallyChanged"
    CONFIG_CHANGED = "ConfigChanged"


@dataclass(frozen=True)
class Certificate:
    fingerprint: str
    ruleset_version: str
    config_digest: str
    issued_at: datetime
    verdict: Verdict
    violation_counts: dict[Severity, int]
    tool_version: str
    hash_algorithm: str = HASH_ALGORITHM


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def structural_fingerprint(wb: Workbook, rm: RegionMap) -> str:
    inputs = frozenset(k for k, v in rm.class_of.items() if v is RegionClass.INPUT)
    return _sha256(canonical_serialize(wb, data_cells=inputs))


def config_digest(cfg: RuleConfig, overrides: Iterable[DeclaredRegion] = ()) -> str:
    """Digest of the rule configuration plus every declared region.

    Declarations decide which cells count as data, so they are part of what
    a certificate commits to.
    """
    lines = [cfg.canonical_text()]
    lines += sorted(f"region.{r.cls.value.lower()} = {region_ref_text(r)}" for r in overrides)
    return _sha256("\n".join(lines).encode("utf-8"))


def _utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _regions(wb: Workbook, overrides) -> RegionMap:
    return infer(wb, gr.build(wb), overrides)


def issue(wb: Workbook, violations: Iterable[Violation], cfg: RuleConfig,
          clock: Callable[[], datetime] = _utc_now, overrides: Iterable[DeclaredRegion] = (),
          rm: RegionMap | None = None) -> Certificate:
    """Certificate for ``wb`` given the violations found under ``cfg``.

    ``overrides`` must be every region declaration the check ran with
    (manifest and command line); ``rm`` is recomputed from them when omitted.
    """
    overrides = list(overrides)
    rm = rm if rm is not None else _regions(wb, overrides)
    try:
        now = clock()
    except Exception as exc:
        raise ClockUnavailable(str(exc)) from exc
    if not isinstance(now, datetime) or now.tzinfo is None:
        raise ClockUnavailable("clock must return an aware datetime")
    violations = list(violations)
    counts = {sev: 0 for sev in Severity}
    for v in violations:
        counts[v.severity] += 1
    return Certificate(
        fingerprint=structural_fingerprint(wb, rm),
        ruleset_version=RULESET_VERSION,
        config_digest=config_digest(cfg, overrides),
        issued_at=now.astimezone(timezone.utc).replace(microsecond=0),
        verdict=verdict(violations),
        violation_counts=counts,
        tool_version=__version__,
    )


def render_certificate(cert: Certificate) -> str:
    counts = ",".join(f"{sev.value}={cert.violation_counts.get(sev, 0)}" for sev in Severity)
    values = {
        "format": "sheetcert-certificate/1",
        "hash_algorithm": cert.hash_algorithm,
        "fingerprint": cert.fingerprint,
        "ruleset_version": cert.ruleset_version,
        "config_digest": cert.config_digest,
        "issued_at": cert.issued_at.strftime(_TIMESTAMP),
        "verdict": cert.verdict.value,
        "violation_counts": counts,
        "tool_version": cert.tool_version,
    }
    body = "".join(f"{k} = {values[k]}\n" for k in _FIELDS)
    return body + f"signature = {_sha256(body.encode('utf-8'))}\n"


def parse_certificate(data: bytes | str) -> Certificate:
    if isinstance(data, bytes):
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedCertificate("not UTF-8") from exc
    else:
        text = data
    marker = text.rfind("signature = ")
    if marker < 0 or (marker and text[marker - 1] != "\n"):
        raise MalformedCertificate("missing signature line")
    body, sig_line = text[:marker], text[marker:]
    m = re.fullmatch(r"signature = ([0-9a-f]{64})\n", sig_line)
    if not m:
        raise MalformedCertificate("bad signature line")
    if m.group(1) != _sha256(body.encode("utf-8")):
        raise MalformedCertificate("signature does not match contents")
    values = {}
    for line in body.splitlines():
        key, eq, value = line.partition(" = ")
        if not eq or key in values:
            raise MalformedCertificate(f"bad line {line!r}")
        values[key] = value
    if tuple(values) != _FIELDS:
        raise MalformedCertificate("unexpected or missing fields")
    if values["format"] != "sheetcert-certificate/1" or values["hash_algorithm"] != HASH_ALGORITHM:
        raise MalformedCertificate("unsupported certificate format")
    for key in ("fingerprint", "config_digest"):
        if not _HEX64.fullmatch(values[key]):
            raise MalformedCertificate(f"{key} is not a sha256 hex digest")
    try:
        issued = datetime.strptime(values["issued_at"], _TIMESTAMP).replace(tzinfo=timezone.utc)
        result = Verdict(values["verdict"])
        counts = {}
        for item in values["violation_counts"].split(","):
            name, _, n = item.partition("=")
            counts[Severity(name)] = int(n)
    except ValueError as exc:
        raise MalformedCertificate(str(exc)) from exc
    if set(counts) != set(Severity):
        raise MalformedCertificate("violation_counts must list every severity")
    return Certificate(values["fingerprint"], values["ruleset_version"], values["config_digest"],
                       issued, result, counts, values["tool_version"], values["hash_algorithm"])


def write_certificate(cert: Certificate, path) -> None:
    Path(path).write_text(render_certificate(cert), encoding="utf-8")


def read_certificate(path) -> Certificate:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise MalformedCertificate(f"{path}: {exc}") from exc
    return parse_certificate(data)


def verify(wb: Workbook, cert: Certificate, cfg: RuleConfig, overrides: Iterable[DeclaredRegion] = (),
           rm: RegionMap | None = None) -> VerifyResult:
    """Compare a workbook against a certificate.

    The configuration is compared first: a changed configuration can itself
    reclassify cells and so move the fingerprint.
    """
    overrides = list(overrides)
    if cert.ruleset_version != RULESET_VERSION or cert.config_digest != config_digest(cfg, overrides):
        return VerifyResult.CONFIG_CHANGED
    rm = rm if rm is not None else _regions(wb, overrides)
    if cert.fingerprint != structural_fingerprint(wb, rm):
        return VerifyResult.STRUCTURALLY_CHANGED
    return VerifyResult.VALID

