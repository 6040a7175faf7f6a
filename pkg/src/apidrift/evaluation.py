"""Benchmark loading, classifier metrics, and annotation agreement.

Precision/recall/F1 are computed one-vs-rest over set membership; the macro
average runs over labels with at least one gold positive (micro totals are
also emitted). Krippendorff's alpha takes a pluggable set distance because
the agreement coefficient depends on it: Jaccard by default (multi-label),
nominal 0/1 selectable.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .change_classifier import ChangeType, parse_change_type
from .errors import (
    BenchmarkSchemaError,
    InputError,
    InsufficientDataError,
    UndefinedMetricError,
)
from .extraction import ApiRecord, normalize_signature
from .knowledge_base import LABEL_EHM, LABEL_RVA

_SEMANTIC_BY_LOWER = {LABEL_RVA.lower(): LABEL_RVA, LABEL_EHM.lower(): LABEL_EHM}


@dataclass(frozen=True)
class LabeledPair:
    old: ApiRecord
    new: ApiRecord
    gold_change_types: frozenset[ChangeType]
    gold_labels: frozenset[str]


@dataclass(frozen=True)
class LabelScore:
    precision: float
    recall: float
    f1: float
    support: int  # gold positives


@dataclass(frozen=True)
class Metrics:
    per_label: dict[str, LabelScore]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float


def load_benchmark(path) -> list[LabeledPair]:
    """Line-delimited JSON benchmark; schema violations carry line numbers."""
    pairs: list[LabeledPair] = []
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as exc:
            raise BenchmarkSchemaError(f"invalid JSON: {exc}", lineno) from exc
        for key in ("signature", "level_old", "level_new", "body_old", "body_new",
                    "gold_change_types", "gold_labels"):
            if key not in d:
                raise BenchmarkSchemaError(f"missing field {key!r}", lineno)
        try:
            sig = normalize_signature(d["signature"])
        except Exception as exc:
            raise BenchmarkSchemaError(f"bad signature: {exc}", lineno) from exc

        gold_ct = set()
        for name in d["gold_change_types"]:
            ct = parse_change_type(str(name))
            if ct is None:
                raise BenchmarkSchemaError(f"unknown change type {name!r}", lineno)
            gold_ct.add(ct)
        if ChangeType.NO_CHANGE in gold_ct and len(gold_ct) > 1:
            raise BenchmarkSchemaError(
                "No Change is exclusive of other change types", lineno)

        gold_labels = set()
        for name in d["gold_labels"]:
            canonical = _SEMANTIC_BY_LOWER.get(str(name).strip().lower())
            if canonical is None:
                raise BenchmarkSchemaError(f"unknown semantic label {name!r}", lineno)
            gold_labels.add(canonical)

        old = ApiRecord(signature=sig, level=int(d["level_old"]), body=d["body_old"],
                        annotations=tuple(d.get("annotations_old", ())),
                        comment=d.get("comment_old", ""))
        new = ApiRecord(signature=sig, level=int(d["level_new"]), body=d["body_new"],
                        annotations=tuple(d.get("annotations_new", ())),
                        comment=d.get("comment_new", ""))
        pairs.append(LabeledPair(old, new, frozenset(gold_ct), frozenset(gold_labels)))
    if not pairs:
        import logging
        logging.getLogger(__name__).warning("benchmark %s is empty", path)
    return pairs


def compute_prf(predictions, golds, label_universe) -> Metrics:
    """Per-label binary precision/recall/F1 over set membership."""
    predictions, golds = list(predictions), list(golds)
    if len(predictions) != len(golds):
        raise InputError(
            f"{len(predictions)} predictions vs {len(golds)} golds")
    universe = list(label_universe)
    allowed = set(universe)
    for i, (p, g) in enumerate(zip(predictions, golds)):
        stray = (set(p) | set(g)) - allowed
        if stray:
            raise InputError(f"item {i} uses labels outside the universe: {sorted(map(str, stray))}")

    per_label: dict[str, LabelScore] = {}
    tp_total = fp_total = fn_total = 0
    macro_terms: list[LabelScore] = []
    for label in universe:
        tp = sum(1 for p, g in zip(predictions, golds) if label in p and label in g)
        fp = sum(1 for p, g in zip(predictions, golds) if label in p and label not in g)
        fn = sum(1 for p, g in zip(predictions, golds) if label not in p and label in g)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
        score = LabelScore(precision, recall, f1, support=tp + fn)
        per_label[_label_name(label)] = score
        tp_total, fp_total, fn_total = tp_total + tp, fp_total + fp, fn_total + fn
        if score.support >= 1:
            macro_terms.append(score)

    def mean(values):
        return sum(values) / len(values) if values else 0.0

    micro_p = tp_total / (tp_total + fp_total) if tp_total + fp_total else 0.0
    micro_r = tp_total / (tp_total + fn_total) if tp_total + fn_total else 0.0
    micro_f1 = 0.0 if micro_p + micro_r == 0 else 2 * micro_p * micro_r / (micro_p + micro_r)
    return Metrics(
        per_label=per_label,
        macro_precision=mean([s.precision for s in macro_terms]),
        macro_recall=mean([s.recall for s in macro_terms]),
        macro_f1=mean([s.f1 for s in macro_terms]),
        micro_precision=micro_p,
        micro_recall=micro_r,
        micro_f1=micro_f1,
    )


def _label_name(label) -> str:
    return label.value if isinstance(label, ChangeType) else str(label)


def accuracy_success_rate(predictions, golds) -> tuple[float, float]:
    """Binary view: a non-empty label set means incompatible.

    Accuracy is the fraction of matching binary judgments; success rate is
    the recall of the incompatible class.
    """
    predictions, golds = list(predictions), list(golds)
    if not predictions or len(predictions) != len(golds):
        raise InputError("need equal, non-zero prediction/gold lists")
    binary = [(bool(p), bool(g)) for p, g in zip(predictions, golds)]
    accuracy = sum(1 for bp, bg in binary if bp == bg) / len(binary)
    positives = sum(1 for _, bg in binary if bg)
    if positives == 0:
        raise UndefinedMetricError("success rate undefined: no gold-incompatible items")
    found = sum(1 for bp, bg in binary if bg and bp)
    return accuracy, found / positives


# ---------------------------------------------------------------------------
# Krippendorff's alpha
# ---------------------------------------------------------------------------

def jaccard_distance(a: frozenset, b: frozenset) -> float:
    if not a and not b:
        return 0.0
    union = a | b
    return 1.0 - len(a & b) / len(union)


def nominal_distance(a: frozenset, b: frozenset) -> float:
    return 0.0 if a == b else 1.0

DISTANCES = {"jaccard": jaccard_distance, "nominal": nominal_distance}


def krippendorff_alpha(annotations, distance=jaccard_distance) -> float:
    """alpha = 1 - D_o / D_e over label-set values.

    annotations: one row per item, one entry per annotator (None = missing).
    Observed disagreement averages over pairable values within items;
    expected disagreement pools all pairable values.
    """
    if isinstance(distance, str):
        distance = DISTANCES[distance]
    rows = [[None if v is None else frozenset(v) for v in row] for row in annotations]
    if rows and max(len(r) for r in rows) < 2:
        raise InsufficientDataError("need at least 2 annotators")
    units = [[v for v in row if v is not None] for row in rows]
    units = [vals for vals in units if len(vals) >= 2]
    n = sum(len(vals) for vals in units)
    if not units or n < 2:
        raise InsufficientDataError("fewer than 2 pairable values")

    observed = 0.0
    for vals in units:
        m = len(vals)
        within = sum(distance(vals[i], vals[j])
                     for i in range(m) for j in range(m) if i != j)
        observed += within / (m - 1)
    observed /= n

    pooled: dict[frozenset, int] = {}
    for vals in units:
        for v in vals:
            pooled[v] = pooled.get(v, 0) + 1
    expected = 0.0
    values = list(pooled)
    for i, c in enumerate(values):
        for k in values:
            if c == k:
                continue
            expected += pooled[c] * pooled[k] * distance(c, k)
    expected /= n * (n - 1)
    if expected == 0.0:
        raise InsufficientDataError(
            "expected disagreement is zero (all values identical)")
    return 1.0 - observed / expected
