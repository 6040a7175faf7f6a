from __future__ import annotations

import random

import pytest

from apidrift.errors import InternalConsistencyError
from apidrift.extraction import ApiRecord, ApiSignature, render_signature
from apidrift.knowledge_base import LABEL_ADDITION, LABEL_REMOVAL
from apidrift.signature_diff import (
    detect_signature_incompat,
    diff_corpus,
    diff_levels,
    diff_to_report_lines,
)


def _rec(name, level, body="{ }", cls="a.C", params=(), ret="void", **kw):
    return ApiRecord(ApiSignature(cls, name, tuple(params), ret), level, body, **kw)


def test_identical_records_retained():
    a = _rec("f", 10)
    a2 = _rec("f", 11)
    diff = diff_levels([a], [a2])
    assert diff.added == [] and diff.removed == []
    assert diff.retained_identical == 1 and diff.retained_changed == []


def test_added_key():
    diff = diff_levels([_rec("a", 10)], [_rec("a", 11), _rec("b", 11)])
    assert [s.method_name for s in diff.added] == ["b"]
    assert diff.removed == []


def test_retained_changed_on_body_difference():
    old = _rec("f", 10, body="{ return 1; }")
    new = _rec("f", 11, body="{ return 2; }")
    diff = diff_levels([old], [new])
    assert diff.added == [] and diff.removed == []
    assert len(diff.retained_changed) == 1
    assert diff.retained_identical == 0


def test_return_type_change_is_retained_not_add_remove():
    old = _rec("f", 10, ret="int")
    new = _rec("f", 11, ret="long")
    diff = diff_levels([old], [new])
    assert diff.added == [] and diff.removed == []
    assert len(diff.retained_changed) == 1


def test_duplicate_key_raises():
    with pytest.raises(InternalConsistencyError):
        diff_levels([_rec("f", 10), _rec("f", 10)], [_rec("f", 11)])


def _brute_force(facts_x, facts_x1):
    """Naive nested-loop set comparison oracle."""
    added, removed, retained_changed, retained_same = [], [], [], 0
    for rec in facts_x1:
        if not any(r.signature.key == rec.signature.key for r in facts_x):
            added.append(rec.signature)
    for rec in facts_x:
        match = None
        for r in facts_x1:
            if r.signature.key == rec.signature.key:
                match = r
                break
        if match is None:
            removed.append(rec.signature)
        elif (rec.body, rec.annotations, rec.comment, rec.signature.return_type,
              rec.throws_types) != (match.body, match.annotations, match.comment,
                                    match.signature.return_type, match.throws_types):
            retained_changed.append((rec, match))
        else:
            retained_same += 1
    key = render_signature
    return (sorted(added, key=key), sorted(removed, key=key),
            sorted(retained_changed, key=lambda p: key(p[0].signature)), retained_same)


def random_level_pair(rng, max_records=500):
    pool = [f"m{i}" for i in range(max_records)]
    n_x = rng.randrange(1, max_records)
    n_new = rng.randrange(0, max_records // 2)
    names_x = rng.sample(pool, n_x)
    facts_x = [_rec(name, 10, body=f"{{ return {rng.randrange(3)}; }}") for name in names_x]
    facts_x1 = []
    for rec in facts_x:
        roll = rng.random()
        if roll < 0.2:
            continue  # removed
        body = rec.body if roll < 0.7 else "{ return 9; }"
        facts_x1.append(_rec(rec.signature.method_name, 11, body=body))
    extra = [p for p in pool if p not in set(names_x)][:n_new]
    facts_x1.extend(_rec(name, 11) for name in extra)
    return facts_x, facts_x1


def run_oracle_equivalence(pairs=100, seed=20240527):
    rng = random.Random(seed)
    for _ in range(pairs):
        facts_x, facts_x1 = random_level_pair(rng)
        diff = diff_levels(facts_x, facts_x1, 10, 11)
        added, removed, retained_changed, retained_same = _brute_force(facts_x, facts_x1)
        assert diff.added == added
        assert diff.removed == removed
        assert diff.retained_changed == retained_changed
        assert diff.retained_identical == retained_same


def test_randomized_oracle_equivalence():
    run_oracle_equivalence(pairs=25)


def test_cardinality_identity():
    rng = random.Random(7)
    for _ in range(10):
        facts_x, facts_x1 = random_level_pair(rng, max_records=80)
        diff = diff_levels(facts_x, facts_x1, 10, 11)
        assert len(facts_x1) == len(facts_x) - len(diff.removed) + len(diff.added)


# --- detect_signature_incompat -----------------------------------------------

def test_entries_for_added_and_removed():
    diff = diff_levels([_rec("c", 10)], [_rec("b", 11)], 10, 11)
    entries = detect_signature_incompat(diff)
    by_name = {e.signature.method_name: e for e in entries}
    assert by_name["b"].labels == frozenset((LABEL_ADDITION,))
    assert by_name["c"].labels == frozenset((LABEL_REMOVAL,))
    assert all(e.boundary == (10, 11) for e in entries)


def test_empty_diff_empty_entries():
    diff = diff_levels([_rec("a", 10)], [_rec("a", 11)], 10, 11)
    assert detect_signature_incompat(diff) == []


def test_getdeviceids_is_not_a_signature_entry(mini_index):
    diffs = {d.boundary: d for d in diff_corpus(mini_index)}
    d = diffs[(15, 16)]
    changed = {render_signature(old.signature) for old, _ in d.retained_changed}
    assert "<android.view.InputDevice: int[] getDeviceIds()>" in changed
    for entry in detect_signature_incompat(d):
        assert entry.signature.method_name != "getDeviceIds"


def test_reintroduced_api_yields_two_entries():
    present = _rec("gone", 10)
    e1 = detect_signature_incompat(diff_levels([present], [], 10, 11))
    e2 = detect_signature_incompat(diff_levels([], [_rec("gone", 13)], 12, 13))
    assert e1[0].labels == frozenset((LABEL_REMOVAL,)) and e1[0].boundary == (10, 11)
    assert e2[0].labels == frozenset((LABEL_ADDITION,)) and e2[0].boundary == (12, 13)


def test_detect_idempotent_and_sorted():
    diff = diff_levels([_rec("z", 10), _rec("a", 10)], [_rec("m", 11)], 10, 11)
    entries = detect_signature_incompat(diff)
    assert entries == detect_signature_incompat(diff)
    rendered = [render_signature(e.signature) for e in entries]
    assert rendered == sorted(rendered)


def test_gap_boundary_records_actual_levels(mini_index):
    boundaries = [d.boundary for d in diff_corpus(mini_index)]
    assert (16, 20) in boundaries and (21, 23) in boundaries


def test_report_lines_shape():
    diff = diff_levels([_rec("a", 10)], [_rec("b", 11)], 10, 11)
    lines = diff_to_report_lines(diff)
    import json
    rows = [json.loads(l) for l in lines]
    kinds = [r["kind"] for r in rows]
    assert kinds == ["added", "removed", "retained_identical_count"]
    assert rows[-1]["count"] == 0
    assert all(r["boundary"] == [10, 11] for r in rows)
