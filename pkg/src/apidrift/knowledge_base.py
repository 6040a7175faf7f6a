"""Persisted incompatibility entries plus the exported configuration files.

Two text exports mirror the checker-tool configuration surface:
``android_api_lifetime.txt`` (presence intervals reconstructed from
addition/removal boundaries) and ``android_api_semantic.txt`` (per-boundary
semantic labels). Both round-trip through the import functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .change_classifier import ChangeType
from .errors import ValidationError
from .extraction import ApiSignature, normalize_signature, render_signature

KIND_SIGNATURE = "signature"
KIND_SEMANTIC = "semantic"

LABEL_ADDITION = "Addition"
LABEL_REMOVAL = "Removal"
LABEL_RVA = "Return Value Alteration"
LABEL_EHM = "Exception Handling Modification"

LABELS_BY_KIND = {
    KIND_SIGNATURE: frozenset((LABEL_ADDITION, LABEL_REMOVAL)),
    KIND_SEMANTIC: frozenset((LABEL_RVA, LABEL_EHM)),
}
SHORT_LABEL = {LABEL_RVA: "RVA", LABEL_EHM: "EHM"}
LONG_LABEL = {v: k for k, v in SHORT_LABEL.items()}

SEMANTIC_HEADER = "# <canonical-signature>\t<levelX>:<levelX1>\t<RVA|EHM[,...]>"


@dataclass(frozen=True)
class IncompatibilityEntry:
    """One incompatible API at one version boundary."""

    signature: ApiSignature
    boundary: tuple[int, int]
    kind: str
    labels: frozenset[str]
    provenance: str = ""

    @property
    def key(self):
        return (self.signature.key, self.boundary, self.kind)


def validate_entry(entry: IncompatibilityEntry) -> None:
    if not entry.labels:
        raise ValidationError(f"entry with empty labels: {render_signature(entry.signature)}")
    allowed = LABELS_BY_KIND.get(entry.kind)
    if allowed is None:
        raise ValidationError(f"unknown entry kind: {entry.kind}")
    if not entry.labels <= allowed:
        raise ValidationError(
            f"labels {sorted(entry.labels)} inconsistent with kind {entry.kind}")
    if entry.boundary[0] >= entry.boundary[1]:
        raise ValidationError(f"bad boundary {entry.boundary}")


class KnowledgeBase:
    """Set of validated entries over a fixed, sorted level universe."""

    def __init__(self, levels):
        self.levels = sorted(set(int(x) for x in levels))
        if len(self.levels) < 1:
            raise ValidationError("knowledge base needs at least one level")
        self._entries: dict[tuple, IncompatibilityEntry] = {}

    @property
    def level_min(self) -> int:
        return self.levels[0]

    @property
    def level_max(self) -> int:
        return self.levels[-1]

    def boundaries(self) -> list[tuple[int, int]]:
        return list(zip(self.levels, self.levels[1:]))

    def entries(self) -> list[IncompatibilityEntry]:
        return sorted(
            self._entries.values(),
            key=lambda e: (render_signature(e.signature), e.boundary, e.kind))

    def __len__(self) -> int:
        return len(self._entries)


def merge_entries(kb: KnowledgeBase, entries) -> KnowledgeBase:
    """Set-union by (signature identity, boundary, kind); labels unioned on
    collision. Idempotent."""
    for entry in entries:
        validate_entry(entry)
        existing = kb._entries.get(entry.key)
        if existing is None:
            kb._entries[entry.key] = entry
        else:
            kb._entries[entry.key] = IncompatibilityEntry(
                signature=existing.signature,
                boundary=existing.boundary,
                kind=existing.kind,
                labels=existing.labels | entry.labels,
                provenance=existing.provenance or entry.provenance,
            )
    return kb


# ---------------------------------------------------------------------------
# Lifetime reconstruction and exports
# ---------------------------------------------------------------------------

def _presence_intervals(kb: KnowledgeBase, events) -> list[tuple[int, int]]:
    """Walk Addition/Removal events into disjoint, ordered presence intervals.

    'Added at (x, x1)' means first present at x1; 'removed at (x, x1)' means
    last present at x. No event before the first Removal means present since
    the corpus minimum; present at the end extends to the corpus maximum.
    """
    intervals: list[tuple[int, int]] = []
    current_start: int | None = None
    seen_any = False
    for boundary, label in sorted(events):
        if label == LABEL_REMOVAL:
            if current_start is not None:
                intervals.append((current_start, boundary[0]))
                current_start = None
            elif not seen_any:
                intervals.append((kb.level_min, boundary[0]))
        elif label == LABEL_ADDITION and current_start is None:
            current_start = boundary[1]
        seen_any = True
    if current_start is not None:
        intervals.append((current_start, kb.level_max))
    if not intervals and not seen_any:
        return []
    return intervals


def export_cid_lifetime(kb: KnowledgeBase) -> str:
    """One line per signature-kind API: signature TAB first TAB last level."""
    events_by_sig: dict[str, list] = {}
    sig_by_str: dict[str, ApiSignature] = {}
    for e in kb.entries():
        if e.kind != KIND_SIGNATURE:
            continue
        s = render_signature(e.signature)
        sig_by_str[s] = e.signature
        for label in sorted(e.labels):
            events_by_sig.setdefault(s, []).append((e.boundary, label))
    lines = []
    for s in sorted(events_by_sig):
        for a, b in _presence_intervals(kb, events_by_sig[s]):
            lines.append(f"{s}\t{a}\t{b}")
    return "".join(line + "\n" for line in lines)


def export_semantic_list(kb: KnowledgeBase) -> str:
    """One line per semantic entry: signature TAB x:x1 TAB labels."""
    lines = [SEMANTIC_HEADER]
    for e in kb.entries():
        if e.kind != KIND_SEMANTIC:
            continue
        codes = ",".join(SHORT_LABEL[l] for l in (LABEL_RVA, LABEL_EHM) if l in e.labels)
        lines.append(f"{render_signature(e.signature)}\t{e.boundary[0]}:{e.boundary[1]}\t{codes}")
    return "".join(line + "\n" for line in lines)


def _prev_level(levels: list[int], level: int) -> int:
    idx = levels.index(level)
    if idx == 0:
        raise ValidationError(f"level {level} has no predecessor in {levels}")
    return levels[idx - 1]


def _next_level(levels: list[int], level: int) -> int:
    idx = levels.index(level)
    if idx == len(levels) - 1:
        raise ValidationError(f"level {level} has no successor in {levels}")
    return levels[idx + 1]


def import_cid_lifetime(text: str, levels, provenance: str = "import") -> list[IncompatibilityEntry]:
    levels = sorted(set(int(x) for x in levels))
    entries = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sig_str, a_str, b_str = line.split("\t")
        sig = normalize_signature(sig_str)
        a, b = int(a_str), int(b_str)
        if a not in levels or b not in levels:
            raise ValidationError(f"interval [{a}, {b}] outside level universe")
        if a > levels[0]:
            entries.append(IncompatibilityEntry(
                sig, (_prev_level(levels, a), a), KIND_SIGNATURE,
                frozenset((LABEL_ADDITION,)), provenance))
        if b < levels[-1]:
            entries.append(IncompatibilityEntry(
                sig, (b, _next_level(levels, b)), KIND_SIGNATURE,
                frozenset((LABEL_REMOVAL,)), provenance))
    return entries


def import_semantic_list(text: str, provenance: str = "import") -> list[IncompatibilityEntry]:
    entries = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        sig_str, boundary_str, codes = line.split("\t")
        x, x1 = boundary_str.split(":")
        labels = frozenset(LONG_LABEL[c.strip()] for c in codes.split(",") if c.strip())
        entries.append(IncompatibilityEntry(
            normalize_signature(sig_str), (int(x), int(x1)), KIND_SEMANTIC,
            labels, provenance))
    return entries


# ---------------------------------------------------------------------------
# Journal (line-delimited JSON snapshot)
# ---------------------------------------------------------------------------

def entry_to_json(e: IncompatibilityEntry) -> dict:
    return {
        "signature": render_signature(e.signature),
        "boundary": list(e.boundary),
        "kind": e.kind,
        "labels": sorted(e.labels),
        "provenance": e.provenance,
    }


def entry_from_json(d: dict) -> IncompatibilityEntry:
    return IncompatibilityEntry(
        signature=normalize_signature(d["signature"]),
        boundary=(int(d["boundary"][0]), int(d["boundary"][1])),
        kind=d["kind"],
        labels=frozenset(d["labels"]),
        provenance=d.get("provenance", ""),
    )


def save_kb(kb: KnowledgeBase, path: Path) -> None:
    """Write a sorted snapshot: a header line, then one entry per line."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps({"type": "header", "levels": kb.levels}) + "\n")
        for e in kb.entries():
            fh.write(json.dumps(entry_to_json(e)) + "\n")


def append_journal(path: Path, entries) -> None:
    """Append entries to an existing journal; loading merges by key."""
    with open(path, "a", encoding="utf-8", newline="\n") as fh:
        for e in entries:
            validate_entry(e)
            fh.write(json.dumps(entry_to_json(e)) + "\n")


def load_kb(path: Path) -> KnowledgeBase:
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise ValidationError(f"empty knowledge base file: {path}")
    header = json.loads(lines[0])
    if header.get("type") != "header" or "levels" not in header:
        raise ValidationError(f"missing header line in {path}")
    kb = KnowledgeBase(header["levels"])
    merge_entries(kb, (entry_from_json(json.loads(ln)) for ln in lines[1:]))
    return kb


# ---------------------------------------------------------------------------
# Statistics
# ---------------------------------------------------------------------------

STATS_CSV_HEADER = ("boundary,additions,removals,rva_only,ehm_only,both,"
                    "ct_return,ct_exception,ct_control,ct_other,ct_dependent,"
                    "ct_nochange,accumulated")

_CT_COLUMNS = (
    ChangeType.RETURN, ChangeType.EXCEPTION, ChangeType.CONTROL,
    ChangeType.OTHER, ChangeType.DEPENDENT, ChangeType.NO_CHANGE,
)


@dataclass
class LevelStats:
    boundary: tuple[int, int] | None  # None marks the grand-total row
    additions: int = 0
    removals: int = 0
    rva_only: int = 0
    ehm_only: int = 0
    both: int = 0
    ct_return: int = 0
    ct_exception: int = 0
    ct_control: int = 0
    ct_other: int = 0
    ct_dependent: int = 0
    ct_nochange: int = 0
    accumulated: int = 0

    @property
    def incompatible_total(self) -> int:
        return self.additions + self.removals + self.rva_only + self.ehm_only + self.both

    def csv_row(self) -> str:
        b = "total" if self.boundary is None else f"{self.boundary[0]}:{self.boundary[1]}"
        return ",".join(str(v) for v in (
            b, self.additions, self.removals, self.rva_only, self.ehm_only,
            self.both, self.ct_return, self.ct_exception, self.ct_control,
            self.ct_other, self.ct_dependent, self.ct_nochange, self.accumulated,
        ))


def stats(kb: KnowledgeBase, change_reports=()) -> list[LevelStats]:
    """Per-boundary counts plus a grand-total row.

    Semantic counting: rva_only counts label set {RVA}, ehm_only counts {EHM},
    both counts {RVA, EHM}; the buckets are exclusive.
    """
    rows = {b: LevelStats(boundary=b) for b in kb.boundaries()}
    for e in kb.entries():
        row = rows.get(e.boundary)
        if row is None:
            row = rows[e.boundary] = LevelStats(boundary=e.boundary)
        if e.kind == KIND_SIGNATURE:
            if LABEL_ADDITION in e.labels:
                row.additions += 1
            if LABEL_REMOVAL in e.labels:
                row.removals += 1
        else:
            has_rva, has_ehm = LABEL_RVA in e.labels, LABEL_EHM in e.labels
            if has_rva and has_ehm:
                row.both += 1
            elif has_rva:
                row.rva_only += 1
            elif has_ehm:
                row.ehm_only += 1
    for report in change_reports:
        row = rows.get(tuple(report.boundary))
        if row is None:
            continue
        for ct, attr in zip(_CT_COLUMNS, ("ct_return", "ct_exception", "ct_control",
                                          "ct_other", "ct_dependent", "ct_nochange")):
            if ct in report.change_types:
                setattr(row, attr, getattr(row, attr) + 1)

    ordered = [rows[b] for b in sorted(rows)]
    running = 0
    for row in ordered:
        running += row.incompatible_total
        row.accumulated = running
    total = LevelStats(boundary=None, accumulated=running)
    for row in ordered:
        for attr in ("additions", "removals", "rva_only", "ehm_only", "both",
                     "ct_return", "ct_exception", "ct_control", "ct_other",
                     "ct_dependent", "ct_nochange"):
            setattr(total, attr, getattr(total, attr) + getattr(row, attr))
    return ordered + [total]


def stats_to_csv(rows: list[LevelStats]) -> str:
    return "".join(line + "\n" for line in [STATS_CSV_HEADER] + [r.csv_row() for r in rows])
