"""Semantic incompatibility verdicts for retained-changed pairs.

Two routes produce a verdict: a deterministic rule-based baseline (change
types mapped straight onto the two semantic labels) and a model backend
driven by a few-shot prompt that, with chain-of-thought enabled, demands the
change-type analysis before the final verdict.
"""

from __future__ import annotations

import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources

from .backends import ModelBackend, RateLimiter, request_with_retries
from .change_classifier import (
    ChangeReport,
    ChangeType,
    classify_change,
    parse_change_type,
    to_ast_text,
)
from .errors import ConfigurationError, InputError, MalformedOutputError
from .extraction import ApiRecord, ApiSignature, render_signature
from .knowledge_base import LABEL_EHM, LABEL_RVA

SEMANTIC_LABELS = (LABEL_RVA, LABEL_EHM)
_LABEL_BY_CANONICAL = {l.lower(): l for l in SEMANTIC_LABELS}

UNPARSEABLE = "model-output-unparseable"

_RETRY_SUFFIX = ("\n\nYour previous answer could not be parsed. Respond again, "
                 "ending with exactly the required answer lines.")


@dataclass(frozen=True)
class BehaviorDelta:
    """Which facets of the behavior tuple differ between the two versions."""

    return_facet_changed: bool
    exception_facet_changed: bool
    signature_changed: bool = False


@dataclass(frozen=True)
class PromptOptions:
    include_comments: bool = False
    include_ast: bool = False
    use_cot: bool = True
    shots: int = 3

    def __post_init__(self):
        if self.shots < 0:
            raise ConfigurationError("shots must be >= 0")


@dataclass(frozen=True)
class SemanticVerdict:
    signature: ApiSignature
    boundary: tuple[int, int]
    labels: frozenset[str]
    change_types: frozenset[ChangeType]
    rationale: str
    source: str  # "baseline" or "model:<name>"

    @property
    def failed(self) -> bool:
        return self.rationale == UNPARSEABLE


# ---------------------------------------------------------------------------
# Demonstration bank
# ---------------------------------------------------------------------------

def load_demonstrations() -> list[dict]:
    """The curated in-context examples shipped with the package."""
    raw = resources.files("apidrift").joinpath("data/demonstrations.jsonl").read_text("utf-8")
    return [json.loads(line) for line in raw.splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# Prompt construction
# ---------------------------------------------------------------------------

_TASK_COT = """\
Task: You are given the source of an Android framework API method at an earlier and a later SDK version.
First analyse the code change between the two versions and classify it with one or more of these change types:
Return Statement Changed; Exception Handling Statement Changed; Control Dependency Changed; Other Statement Changed; Dependent API Changed; No Change.
Then decide whether the change makes the API semantically incompatible, and of which kind:
Return Value Alteration (the API potentially returns different variable types or values in the two versions);
Exception Handling Modification (the API potentially throws different exceptions in the two versions).
End your answer with exactly these two lines:
CHANGE_TYPES: [comma-separated change types]
VERDICT: [comma-separated incompatibility kinds, or None]"""

_TASK_PLAIN = """\
Task: You are given the source of an Android framework API method at an earlier and a later SDK version.
Decide whether the change between the two versions makes the API semantically incompatible, and of which kind:
Return Value Alteration (the API potentially returns different variable types or values in the two versions);
Exception Handling Modification (the API potentially throws different exceptions in the two versions).
End your answer with exactly this line:
VERDICT: [comma-separated incompatibility kinds, or None]"""


def _version_block(title: str, level, annotations, comment: str, body: str,
                   options: PromptOptions) -> list[str]:
    lines = [f"{title} (API level {level}):"]
    lines.append("Annotations: " + (" ".join(annotations) if annotations else "(none)"))
    if options.include_comments:
        lines.append("Comment:")
        lines.append(comment if comment else "(none)")
    lines.append("Body:")
    lines.append(body if body else "(empty)")
    if options.include_ast:
        lines.append("AST:")
        lines.append(to_ast_text(body) if body else "(empty)")
    return lines


def _pair_block(signature: str, level_old, level_new, annotations_old,
                annotations_new, comment_old, comment_new, body_old, body_new,
                options: PromptOptions) -> list[str]:
    lines = [f"Signature: {signature}"]
    lines += _version_block("Earlier version", level_old, annotations_old,
                            comment_old, body_old, options)
    lines += _version_block("Later version", level_new, annotations_new,
                            comment_new, body_new, options)
    return lines


def build_prompt(old: ApiRecord, new: ApiRecord, options: PromptOptions,
                 demonstrations: list[dict] | None = None) -> str:
    """Task description, `shots` demonstrations, then the query pair.

    Output is byte-identical across runs for fixed inputs and options.
    """
    if old.signature.key != new.signature.key:
        raise InputError("identity mismatch between prompt pair records")
    demos = load_demonstrations() if demonstrations is None else demonstrations
    if len(demos) < options.shots:
        raise ConfigurationError(
            f"demonstration bank holds {len(demos)} examples, need {options.shots}")

    sections = [_TASK_COT if options.use_cot else _TASK_PLAIN]
    for k, demo in enumerate(demos[:options.shots], start=1):
        lines = [f"Example {k}:"]
        lines += _pair_block(
            demo["signature"], demo["level_old"], demo["level_new"],
            demo["annotations_old"], demo["annotations_new"],
            demo["comment_old"], demo["comment_new"],
            demo["body_old"], demo["body_new"], options)
        if options.use_cot:
            lines.append("CHANGE_TYPES: [" + ", ".join(demo["change_types"]) + "]")
        lines.append("VERDICT: [" + (", ".join(demo["labels"]) or "None") + "]")
        sections.append("\n".join(lines))

    query = ["Now analyse this API change."]
    query += _pair_block(
        render_signature(old.signature), old.level, new.level,
        old.annotations, new.annotations, old.comment, new.comment,
        old.body, new.body, options)
    if options.use_cot:
        query.append("CHANGE_TYPES:")
    query.append("VERDICT:")
    sections.append("\n".join(query))
    return "\n\n".join(sections) + "\n"


# ---------------------------------------------------------------------------
# Response parsing
# ---------------------------------------------------------------------------

_CT_LINE = re.compile(r"^\s*CHANGE_TYPES\s*:\s*\[(.*?)\]\s*$", re.I | re.M)
_VERDICT_LINE = re.compile(r"^\s*VERDICT\s*:\s*\[(.*?)\]\s*$", re.I | re.M)


def parse_model_output(text: str, require_change_types: bool = True
                       ) -> tuple[frozenset[ChangeType], frozenset[str]]:
    """Parse the answer grammar, tolerating surrounding prose.

    Labels match canonical names only, case-insensitively; anything else is a
    malformed output.
    """
    verdict_matches = _VERDICT_LINE.findall(text)
    if not verdict_matches:
        raise MalformedOutputError("no VERDICT line found")
    labels = set()
    for item in verdict_matches[-1].split(","):
        item = item.strip()
        if not item or item.lower() in ("none", "n/a", "-"):
            continue
        canonical = _LABEL_BY_CANONICAL.get(item.lower())
        if canonical is None:
            raise MalformedOutputError(f"unknown verdict label: {item!r}")
        labels.add(canonical)

    ct_matches = _CT_LINE.findall(text)
    change_types = set()
    if ct_matches:
        for item in ct_matches[-1].split(","):
            item = item.strip()
            if not item or item.lower() == "none":
                continue
            ct = parse_change_type(item)
            if ct is None:
                raise MalformedOutputError(f"unknown change type: {item!r}")
            change_types.add(ct)
    elif require_change_types:
        raise MalformedOutputError("no CHANGE_TYPES line found")
    return frozenset(change_types), frozenset(labels)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------

def baseline_verdict(change_types: frozenset[ChangeType],
                     return_type_changed: bool = False) -> frozenset[str]:
    """Deterministic rule table mapping change facets onto semantic labels."""
    if not change_types:
        raise InputError("change_types must be non-empty")
    delta = BehaviorDelta(
        return_facet_changed=(ChangeType.RETURN in change_types or return_type_changed),
        exception_facet_changed=ChangeType.EXCEPTION in change_types,
    )
    labels = set()
    if delta.return_facet_changed:
        labels.add(LABEL_RVA)
    if delta.exception_facet_changed:
        labels.add(LABEL_EHM)
    return frozenset(labels)


def _evidence_summary(report: ChangeReport) -> str:
    names = sorted(ct.value for ct in report.change_types)
    return "change types: " + ", ".join(names)


def detect_semantic(old: ApiRecord, new: ApiRecord,
                    backend: ModelBackend | None = None,
                    options: PromptOptions = PromptOptions(),
                    demonstrations: list[dict] | None = None,
                    limiter: RateLimiter | None = None) -> SemanticVerdict:
    """Verdict for one retained-changed pair.

    backend=None selects the baseline. Pairs whose bodies, return type and
    throws clause are all unchanged short-circuit without a backend request.
    """
    report = classify_change(old, new)
    boundary = (old.level, new.level)
    rt_changed = old.signature.return_type != new.signature.return_type

    if report.change_types == frozenset((ChangeType.NO_CHANGE,)):
        return SemanticVerdict(old.signature, boundary, frozenset(),
                               report.change_types,
                               "no change detected; backend not consulted",
                               "baseline")
    if backend is None:
        return SemanticVerdict(old.signature, boundary,
                               baseline_verdict(report.change_types, rt_changed),
                               report.change_types, _evidence_summary(report),
                               "baseline")

    prompt = build_prompt(old, new, options, demonstrations)
    source = f"model:{backend.name}"
    text = request_with_retries(backend, prompt, limiter=limiter)
    try:
        change_types, labels = parse_model_output(text, options.use_cot)
    except MalformedOutputError:
        text = request_with_retries(backend, prompt + _RETRY_SUFFIX, limiter=limiter)
        try:
            change_types, labels = parse_model_output(text, options.use_cot)
        except MalformedOutputError:
            return SemanticVerdict(old.signature, boundary, frozenset(),
                                   frozenset(), UNPARSEABLE, source)
    return SemanticVerdict(old.signature, boundary, labels, change_types,
                           text.strip(), source)


def detect_semantic_batch(pairs, backend: ModelBackend | None = None,
                          options: PromptOptions = PromptOptions(),
                          jobs: int = 1,
                          rate_limit: float = 0.0) -> list[SemanticVerdict]:
    """Verdicts for many pairs; results follow the input order regardless of
    worker scheduling."""
    limiter = RateLimiter(rate_limit) if rate_limit > 0 else None
    demos = load_demonstrations()

    def one(pair):
        old, new = pair
        return detect_semantic(old, new, backend, options, demos, limiter)

    pairs = list(pairs)
    if jobs <= 1 or backend is None:
        return [one(p) for p in pairs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, pairs))


def verdict_to_json(v: SemanticVerdict) -> dict:
    return {
        "signature": render_signature(v.signature),
        "boundary": list(v.boundary),
        "labels": sorted(v.labels),
        "change_types": sorted(ct.value for ct in v.change_types),
        "source": v.source,
        "rationale": v.rationale,
    }
