"""Scan application source for call sites of KB-listed incompatible APIs and
report those not protected by an SDK-version guard covering the boundary.

The analysis is intraprocedural: guards are recognized in the lexically
enclosing conditional chain of the call site (plus the early-return idiom).
Guards placed in helper methods are not propagated, which is a known source
of false positives and is stated in the report header.
"""

from __future__ import annotations

import logging
import re
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from pathlib import Path

from . import javasrc
from .errors import ManifestMissingError, ManifestParseError
from .extraction import render_signature
from .knowledge_base import (
    KIND_SIGNATURE,
    KnowledgeBase,
    IncompatibilityEntry,
    LABEL_ADDITION,
    LABEL_REMOVAL,
)

log = logging.getLogger(__name__)

MIN_SDK_LEVEL = 1
DEFAULT_MAX_LEVEL = 33

ANDROID_NS = "http://schemas.android.com/apk/res/android"

REPORT_HEADER = (
    "# apidrift compatibility issues\n"
    "# Guard analysis is intraprocedural: only conditionals lexically enclosing\n"
    "# the call site (and early-return guards in the same block) are credited.\n"
    "# Guards placed in helper methods are not recognized and may cause false\n"
    "# positives.\n"
)


@dataclass(frozen=True)
class SdkRange:
    min_level: int
    max_level: int

    def __post_init__(self):
        if self.min_level > self.max_level:
            raise ValueError(f"empty range [{self.min_level}, {self.max_level}]")

    def intersect(self, other: "SdkRange | None") -> "SdkRange | None":
        if other is None:
            return None
        lo = max(self.min_level, other.min_level)
        hi = min(self.max_level, other.max_level)
        return SdkRange(lo, hi) if lo <= hi else None

    def __str__(self) -> str:
        return f"[{self.min_level}, {self.max_level}]"


@dataclass(frozen=True)
class GuardConstraint:
    """Interval from the enclosing conditionals; unconstrained when none of
    them mentioned the SDK-version symbol."""

    interval: SdkRange | None  # None means provably unreachable
    unconstrained: bool


@dataclass(frozen=True)
class CallSite:
    file: str
    line: int
    receiver: str
    method: str
    arg_count: int
    resolved_class: str | None
    guard: GuardConstraint


@dataclass(frozen=True)
class CompatIssue:
    call_site: CallSite
    entry: IncompatibilityEntry
    kind: str
    reachable_levels: SdkRange
    explanation: str
    confidence: str  # "high" | "low"


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------

@dataclass
class ManifestInfo:
    sdk_range: SdkRange
    target_sdk: int | None
    warnings: list[str]


def parse_manifest_info(manifest_text: str, max_level: int = DEFAULT_MAX_LEVEL) -> ManifestInfo:
    try:
        root = ET.fromstring(manifest_text)
    except ET.ParseError as exc:
        raise ManifestParseError(f"malformed manifest XML: {exc}") from exc
    uses_sdk = None
    for el in root.iter():
        if el.tag.split("}")[-1] == "uses-sdk":
            uses_sdk = el
            break
    warnings: list[str] = []
    if uses_sdk is None:
        warnings.append("no uses-sdk element; assuming the full SDK range")
        log.warning("manifest has no uses-sdk element; assuming [%d, %d]",
                    MIN_SDK_LEVEL, max_level)
        return ManifestInfo(SdkRange(MIN_SDK_LEVEL, max_level), None, warnings)

    def attr(name: str) -> str | None:
        return uses_sdk.get(f"{{{ANDROID_NS}}}{name}") or uses_sdk.get(name)

    def int_attr(name: str) -> int | None:
        raw = attr(name)
        if raw is None:
            return None
        try:
            return int(raw)
        except ValueError:
            warnings.append(f"non-integer {name}={raw!r} ignored")
            return None

    min_sdk = int_attr("minSdkVersion")
    max_sdk = int_attr("maxSdkVersion")
    target = int_attr("targetSdkVersion")
    return ManifestInfo(
        SdkRange(min_sdk if min_sdk is not None else MIN_SDK_LEVEL,
                 max_sdk if max_sdk is not None else max_level),
        target, warnings)


def parse_manifest(manifest_text: str, max_level: int = DEFAULT_MAX_LEVEL) -> SdkRange:
    """Supported range from uses-sdk; defaults are [1, max_level]."""
    return parse_manifest_info(manifest_text, max_level).sdk_range


# ---------------------------------------------------------------------------
# Guard condition recognition
# ---------------------------------------------------------------------------

_SDK_SYMBOL = r"(?:[A-Za-z_$][\w$]*\s*\.\s*)*SDK_INT"
_ATOM_SYM_FIRST = re.compile(
    rf"^\s*{_SDK_SYMBOL}\s*(>=|<=|==|!=|>|<)\s*(\d+)\s*$")
_ATOM_LIT_FIRST = re.compile(
    rf"^\s*(\d+)\s*(>=|<=|==|!=|>|<)\s*{_SDK_SYMBOL}\s*$")

_FLIP = {">=": "<=", "<=": ">=", ">": "<", "<": ">", "==": "==", "!=": "!="}
_NEGATE = {">=": "<", "<": ">=", "<=": ">", ">": "<=", "==": "!=", "!=": "=="}


def _interval_for(op: str, value: int, max_level: int) -> SdkRange | None:
    full = SdkRange(MIN_SDK_LEVEL, max_level)
    if op == ">=":
        lo, hi = value, max_level
    elif op == ">":
        lo, hi = value + 1, max_level
    elif op == "<=":
        lo, hi = MIN_SDK_LEVEL, value
    elif op == "<":
        lo, hi = MIN_SDK_LEVEL, value - 1
    elif op == "==":
        lo, hi = value, value
    else:  # != is not an interval; contributes nothing
        return None
    if lo > hi:
        return None
    try:
        return full.intersect(SdkRange(max(lo, MIN_SDK_LEVEL), min(hi, max_level)))
    except ValueError:
        return None


def _split_bool(cond: str, op: str) -> list[str]:
    parts = []
    depth = 0
    buf = []
    i = 0
    while i < len(cond):
        c = cond[i]
        if c in "([":
            depth += 1
        elif c in ")]":
            depth -= 1
        if depth == 0 and cond.startswith(op, i):
            parts.append("".join(buf))
            buf = []
            i += len(op)
            continue
        buf.append(c)
        i += 1
    parts.append("".join(buf))
    return parts


def _strip_outer_parens(s: str) -> str:
    s = s.strip()
    while s.startswith("(") and s.endswith(")"):
        depth = 0
        balanced = True
        for i, c in enumerate(s):
            if c == "(":
                depth += 1
            elif c == ")":
                depth -= 1
                if depth == 0 and i != len(s) - 1:
                    balanced = False
                    break
        if not balanced:
            break
        s = s[1:-1].strip()
    return s


def _constraint_of(cond: str, polarity: bool, max_level: int) -> SdkRange | None:
    """Interval implied by this condition under the given branch polarity.

    Unrecognized shapes contribute nothing (None), which is conservative: an
    unknown guard never suppresses an issue, and the negation of a
    conjunction or a disjunction's positive branch cannot be represented as a
    single interval either.
    """
    cond = _strip_outer_parens(cond)
    if cond.startswith("!") and not cond.startswith("!="):
        return _constraint_of(cond[1:], not polarity, max_level)

    ands = _split_bool(cond, "&&")
    if len(ands) > 1:
        if not polarity:
            return None
        interval: SdkRange | None = SdkRange(MIN_SDK_LEVEL, max_level)
        any_found = False
        for part in ands:
            c = _constraint_of(part, True, max_level)
            if c is not None:
                any_found = True
                interval = c.intersect(interval) if interval is not None else None
                if interval is None:
                    return SdkRange(MIN_SDK_LEVEL, MIN_SDK_LEVEL)  # unreachable sentinel
        return interval if any_found else None

    ors = _split_bool(cond, "||")
    if len(ors) > 1:
        if polarity:
            return None
        interval = SdkRange(MIN_SDK_LEVEL, max_level)
        any_found = False
        for part in ors:
            c = _constraint_of(part, False, max_level)
            if c is not None:
                any_found = True
                next_interval = c.intersect(interval)
                if next_interval is None:
                    return None
                interval = next_interval
        return interval if any_found else None

    m = _ATOM_SYM_FIRST.match(cond)
    if m:
        op, value = m.group(1), int(m.group(2))
    else:
        m = _ATOM_LIT_FIRST.match(cond)
        if not m:
            return None
        value, op = int(m.group(1)), _FLIP[m.group(2)]
    if not polarity:
        op = _NEGATE[op]
    return _interval_for(op, value, max_level)


def extract_guard(call_context: list[tuple[str, bool]],
                  max_level: int = DEFAULT_MAX_LEVEL) -> GuardConstraint:
    """Intersect every recognized SDK_INT comparison over the enclosing
    conditional chain, branch polarity applied. Unrecognized conditions
    contribute nothing, so unconstrained iff the interval stays full."""
    full = SdkRange(MIN_SDK_LEVEL, max_level)
    interval: SdkRange | None = full
    for cond, polarity in call_context:
        c = _constraint_of(cond, polarity, max_level)
        if c is None:
            continue
        interval = c.intersect(interval) if interval is not None else None
    return GuardConstraint(interval=interval, unconstrained=interval == full)


# ---------------------------------------------------------------------------
# Source scanning
# ---------------------------------------------------------------------------

_IF_RE = re.compile(r"\bif\s*\(")
_CALL_RE = re.compile(r"((?:[A-Za-z_$][\w$]*(?:\(\))?\.)*)([A-Za-z_$][\w$]*)\s*\(")
_NON_CALL_WORDS = frozenset((
    "if", "for", "while", "switch", "catch", "return", "throw", "new",
    "synchronized", "do", "else", "try", "assert", "this", "super",
))
_DECL_RE = re.compile(
    r"\b([A-Z][\w$]*(?:\.[A-Z][\w$]*)*)\s*(?:<[^<>;(){}]*>)?\s+([a-z_$][\w$]*)\s*[=;,):]")
_JUMP_BODY_RE = re.compile(r"^\s*\{?\s*(?:return\b[^;{}]*|throw\b[^;{}]*|break|continue)\s*;\s*\}?\s*$")


@dataclass
class _IfInfo:
    cond: str
    cond_end: int          # offset just past the closing paren
    then_span: tuple[int, int]
    else_span: tuple[int, int] | None
    stmt_end: int
    early_exit: bool       # then-branch is a single jump statement


def _statement_span(code: str, start: int) -> int:
    """End offset of the statement beginning at start (block or simple)."""
    i = start
    n = len(code)
    while i < n and code[i].isspace():
        i += 1
    if i >= n:
        return n
    if code[i] == "{":
        close = javasrc.match_brace(code, i)
        return (close + 1) if close != -1 else n
    depth = 0
    while i < n:
        c = code[i]
        if c in "({[":
            depth += 1
        elif c in ")}]":
            depth -= 1
        elif c == ";" and depth <= 0:
            return i + 1
        i += 1
    return n


def _collect_ifs(views: javasrc.SourceViews) -> list[_IfInfo]:
    code = views.code
    infos = []
    for m in _IF_RE.finditer(code):
        open_p = m.end() - 1
        close_p = javasrc.match_paren(code, open_p)
        if close_p == -1:
            continue
        cond = views.text[open_p + 1:close_p]
        then_start = close_p + 1
        then_end = _statement_span(code, then_start)
        else_span = None
        stmt_end = then_end
        k = then_end
        while k < len(code) and code[k].isspace():
            k += 1
        if code.startswith("else", k):
            else_start = k + 4
            else_end = _statement_span(code, else_start)
            else_span = (else_start, else_end)
            stmt_end = else_end
        early = bool(_JUMP_BODY_RE.match(code[then_start:then_end])) and else_span is None
        infos.append(_IfInfo(cond, close_p + 1, (then_start, then_end),
                             else_span, stmt_end, early))
    return infos


def _brace_spans(code: str) -> list[tuple[int, int]]:
    spans = []
    stack = []
    for i, c in enumerate(code):
        if c == "{":
            stack.append(i)
        elif c == "}" and stack:
            spans.append((stack.pop(), i))
    return spans


def _enclosing_block(spans: list[tuple[int, int]], offset: int) -> tuple[int, int]:
    best = (0, 1 << 60)
    for a, b in spans:
        if a < offset <= b and (b - a) < (best[1] - best[0]):
            best = (a, b)
    return best


def guard_context(views: javasrc.SourceViews, ifs: list[_IfInfo],
                  spans: list[tuple[int, int]], offset: int) -> list[tuple[str, bool]]:
    """Enclosing-conditional chain for a call at offset, outermost first."""
    chain: list[tuple[str, bool]] = []
    for info in ifs:
        a, b = info.then_span
        if a <= offset < b:
            chain.append((info.cond, True))
        elif info.else_span and info.else_span[0] <= offset < info.else_span[1]:
            chain.append((info.cond, False))
        elif info.early_exit and info.stmt_end <= offset:
            # 'if (...) return;' means the code after it runs under the negation,
            # provided the call sits in the same enclosing block.
            block = _enclosing_block(spans, info.cond_end)
            if block[0] < offset <= block[1]:
                chain.append((info.cond, False))
    return chain


def scan_call_sites(source_text: str, file_path: str,
                    max_level: int = DEFAULT_MAX_LEVEL) -> list[CallSite]:
    """Every call expression in the file with its guard constraint and a
    lexically resolved receiver class where possible."""
    views = javasrc.build_views(source_text)
    code = views.code
    ifs = _collect_ifs(views)
    spans = _brace_spans(code)
    var_types: dict[str, str] = {}
    for m in _DECL_RE.finditer(code):
        var_types.setdefault(m.group(2), m.group(1))

    sites = []
    for m in _CALL_RE.finditer(code):
        name = m.group(2)
        if name in _NON_CALL_WORDS:
            continue
        receiver = m.group(1).rstrip(".")
        open_p = m.end() - 1
        close_p = javasrc.match_paren(code, open_p)
        argc = 0
        if close_p != -1:
            inner = code[open_p + 1:close_p]
            if inner.strip():
                argc = _count_args(inner)
        resolved = None
        if receiver:
            if "(" in receiver or ")" in receiver:
                resolved = None  # chained call expression; static type unknown
            elif receiver.split(".")[-1][:1].isupper():
                resolved = receiver.split(".")[-1]  # static call on a class name
            else:
                simple = receiver.split(".")[0]
                declared = var_types.get(simple)
                if declared and receiver == simple:
                    resolved = declared.split(".")[-1]
        chain = guard_context(views, ifs, spans, m.start(2))
        guard = extract_guard(chain, max_level)
        sites.append(CallSite(
            file=file_path,
            line=javasrc.line_of(views.text, m.start(2)),
            receiver=receiver,
            method=name,
            arg_count=argc,
            resolved_class=resolved,
            guard=guard,
        ))
    return sites


def _count_args(inner: str) -> int:
    depth = 0
    count = 1
    for c in inner:
        if c in "([{<":
            depth += 1
        elif c in ")]}>":
            depth -= 1
        elif c == "," and depth == 0:
            count += 1
    return count


# ---------------------------------------------------------------------------
# Checking
# ---------------------------------------------------------------------------

def _kb_index(kb: KnowledgeBase):
    by_class: dict[tuple[str, str, int], list[IncompatibilityEntry]] = {}
    by_name: dict[tuple[str, int], list[IncompatibilityEntry]] = {}
    for entry in kb.entries():
        sig = entry.signature
        simple = sig.class_fqn.split(".")[-1]
        by_class.setdefault((simple, sig.method_name, len(sig.param_types)), []).append(entry)
        by_name.setdefault((sig.method_name, len(sig.param_types)), []).append(entry)
    return by_class, by_name


def _match_entries(site: CallSite, by_class, by_name):
    if site.resolved_class is not None:
        return [(e, "high") for e in
                by_class.get((site.resolved_class, site.method, site.arg_count), [])]
    return [(e, "low") for e in by_name.get((site.method, site.arg_count), [])]


def _violation(entry: IncompatibilityEntry, reach: SdkRange) -> str | None:
    x, x1 = entry.boundary
    if entry.kind == KIND_SIGNATURE:
        reasons = []
        if LABEL_ADDITION in entry.labels and reach.min_level <= x:
            reasons.append(
                f"API first exists at level {x1} but levels <= {x} are reachable")
        if LABEL_REMOVAL in entry.labels and reach.max_level >= x1:
            reasons.append(
                f"API last exists at level {x} but levels >= {x1} are reachable")
        return "; ".join(reasons) or None
    if reach.min_level <= x and reach.max_level >= x1:
        return (f"behavior differs across boundary ({x}, {x1}) and both sides "
                f"are reachable")
    return None


def check_app(app_root, kb: KnowledgeBase,
              assume_sdk_range: tuple[int, int] | None = None,
              max_level: int = DEFAULT_MAX_LEVEL,
              allow_missing_manifest: bool = False,
              jobs: int = 1) -> list[CompatIssue]:
    """Unguarded, boundary-spanning call sites of KB-listed APIs.

    Addition at (x, x[+1]): flagged when any reachable level <= x.
    Removal: flagged when any reachable level >= x+1. Semantic: flagged when
    the reachable range covers both sides of the boundary. File scanning may
    run in parallel; the report order is fixed regardless.
    """
    root = Path(app_root)
    manifest_path = root / "AndroidManifest.xml"
    if not manifest_path.is_file():
        candidates = sorted(root.rglob("AndroidManifest.xml"))
        manifest_path = candidates[0] if candidates else None
    if manifest_path is None:
        if assume_sdk_range is None and not allow_missing_manifest:
            raise ManifestMissingError(f"no AndroidManifest.xml under {root}")
        sdk = SdkRange(MIN_SDK_LEVEL, max_level)
    else:
        sdk = parse_manifest(manifest_path.read_text(encoding="utf-8"), max_level)
    if assume_sdk_range is not None:
        sdk = SdkRange(assume_sdk_range[0], assume_sdk_range[1])

    by_class, by_name = _kb_index(kb)
    files = sorted(root.rglob("*.java"))

    def _scan(path: Path):
        rel = path.relative_to(root).as_posix()
        return scan_call_sites(path.read_text(encoding="utf-8", errors="replace"),
                               rel, max_level)

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_file = list(pool.map(_scan, files))
    else:
        per_file = [_scan(p) for p in files]

    issues: list[CompatIssue] = []
    for sites in per_file:
        for site in sites:
            for entry, confidence in _match_entries(site, by_class, by_name):
                reach = sdk.intersect(site.guard.interval)
                if reach is None:
                    continue
                reason = _violation(entry, reach)
                if reason is None:
                    continue
                issues.append(CompatIssue(
                    call_site=site,
                    entry=entry,
                    kind=entry.kind,
                    reachable_levels=reach,
                    explanation=f"{render_signature(entry.signature)}: {reason} "
                                f"(reachable {reach})",
                    confidence=confidence,
                ))
    issues.sort(key=lambda i: (i.call_site.file, i.call_site.line,
                               render_signature(i.entry.signature)))
    return issues


def issue_to_json(issue: CompatIssue) -> dict:
    return {
        "file": issue.call_site.file,
        "line": issue.call_site.line,
        "signature": render_signature(issue.entry.signature),
        "boundary": list(issue.entry.boundary),
        "kind": issue.kind,
        "labels": sorted(issue.entry.labels),
        "reachable": [issue.reachable_levels.min_level, issue.reachable_levels.max_level],
        "confidence": issue.confidence,
    }


def issues_report(issues: list[CompatIssue]) -> str:
    """Human-readable summary table."""
    lines = [REPORT_HEADER.rstrip("\n"), ""]
    if not issues:
        lines.append("No compatibility issues found.")
        return "\n".join(lines) + "\n"
    header = f"{'file:line':<40} {'kind':<10} {'labels':<30} signature"
    lines += [header, "-" * len(header)]
    for issue in issues:
        loc = f"{issue.call_site.file}:{issue.call_site.line}"
        labels = ",".join(sorted(issue.entry.labels))
        lines.append(f"{loc:<40} {issue.kind:<10} {labels:<30} "
                     f"{render_signature(issue.entry.signature)}")
    lines.append("")
    lines.append(f"{len(issues)} issue(s).")
    return "\n".join(lines) + "\n"
