"""Adjacent-level comparison: added/removed signatures plus the
retained-but-changed pair list handed to semantic analysis."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import InputError, InternalConsistencyError
from .extraction import ApiRecord, ApiSignature, CorpusIndex, render_signature
from .knowledge_base import (
    IncompatibilityEntry,
    KIND_SIGNATURE,
    LABEL_ADDITION,
    LABEL_REMOVAL,
)


@dataclass
class SignatureDiff:
    level_x: int
    level_x1: int
    added: list[ApiSignature] = field(default_factory=list)
    removed: list[ApiSignature] = field(default_factory=list)
    retained_changed: list[tuple[ApiRecord, ApiRecord]] = field(default_factory=list)
    retained_identical: int = 0

    @property
    def boundary(self) -> tuple[int, int]:
        return (self.level_x, self.level_x1)


def _records_by_key(records: list[ApiRecord], side: str) -> dict:
    by_key = {}
    for rec in records:
        k = rec.signature.key
        if k in by_key:
            raise InternalConsistencyError(
                f"duplicate identity key in {side} facts: {render_signature(rec.signature)} "
                f"({by_key[k].file} and {rec.file})")
        by_key[k] = rec
    return by_key


def _records_changed(a: ApiRecord, b: ApiRecord) -> bool:
    return (a.body, a.annotations, a.comment, a.signature.return_type, a.throws_types) != \
           (b.body, b.annotations, b.comment, b.signature.return_type, b.throws_types)


def diff_levels(facts_x: list[ApiRecord], facts_x1: list[ApiRecord],
                level_x: int | None = None, level_x1: int | None = None) -> SignatureDiff:
    """added = keys(x1) \\ keys(x); removed = keys(x) \\ keys(x1); retained
    split into changed/identical by exact record comparison."""
    for recs, name in ((facts_x, "facts_x"), (facts_x1, "facts_x1")):
        levels = {r.level for r in recs}
        if len(levels) > 1:
            raise InputError(f"{name} mixes levels {sorted(levels)}")
    if level_x is None:
        if not facts_x:
            raise InputError("facts_x empty and level_x not given")
        level_x = facts_x[0].level
    if level_x1 is None:
        if not facts_x1:
            raise InputError("facts_x1 empty and level_x1 not given")
        level_x1 = facts_x1[0].level

    by_x = _records_by_key(facts_x, "earlier")
    by_x1 = _records_by_key(facts_x1, "later")
    keys_x, keys_x1 = set(by_x), set(by_x1)

    diff = SignatureDiff(level_x=level_x, level_x1=level_x1)
    diff.added = sorted((by_x1[k].signature for k in keys_x1 - keys_x),
                        key=render_signature)
    diff.removed = sorted((by_x[k].signature for k in keys_x - keys_x1),
                          key=render_signature)
    for k in sorted(keys_x & keys_x1):
        old, new = by_x[k], by_x1[k]
        if _records_changed(old, new):
            diff.retained_changed.append((old, new))
        else:
            diff.retained_identical += 1
    diff.retained_changed.sort(key=lambda pair: render_signature(pair[0].signature))
    return diff


def detect_signature_incompat(diff: SignatureDiff,
                              provenance: str = "") -> list[IncompatibilityEntry]:
    """One Addition entry per added key, one Removal entry per removed key."""
    entries = [
        IncompatibilityEntry(sig, diff.boundary, KIND_SIGNATURE,
                             frozenset((LABEL_ADDITION,)), provenance)
        for sig in diff.added
    ] + [
        IncompatibilityEntry(sig, diff.boundary, KIND_SIGNATURE,
                             frozenset((LABEL_REMOVAL,)), provenance)
        for sig in diff.removed
    ]
    entries.sort(key=lambda e: (render_signature(e.signature), sorted(e.labels)))
    return entries


def diff_corpus(index: CorpusIndex) -> list[SignatureDiff]:
    """Diff every pair of consecutive present levels."""
    return [diff_levels(index.facts[x], index.facts[x1], x, x1)
            for x, x1 in index.boundaries()]


def diff_to_report_lines(diff: SignatureDiff) -> list[str]:
    """Line-delimited JSON report rows for one boundary."""
    boundary = [diff.level_x, diff.level_x1]
    lines = []
    for sig in diff.added:
        lines.append(json.dumps(
            {"boundary": boundary, "kind": "added", "signature": render_signature(sig)}))
    for sig in diff.removed:
        lines.append(json.dumps(
            {"boundary": boundary, "kind": "removed", "signature": render_signature(sig)}))
    for old, _ in diff.retained_changed:
        lines.append(json.dumps({"boundary": boundary, "kind": "retained_changed",
                                 "signature": render_signature(old.signature)}))
    lines.append(json.dumps({"boundary": boundary, "kind": "retained_identical_count",
                             "signature": None, "count": diff.retained_identical}))
    return lines
