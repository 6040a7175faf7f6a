from __future__ import annotations

import shutil

import pytest

from apidrift.app_checker import (
    SdkRange,
    check_app,
    extract_guard,
    issues_report,
    parse_manifest,
    parse_manifest_info,
    scan_call_sites,
)
from apidrift.errors import ManifestMissingError, ManifestParseError
from apidrift.extraction import ApiSignature
from apidrift.knowledge_base import (
    KIND_SEMANTIC,
    KIND_SIGNATURE,
    KnowledgeBase,
    IncompatibilityEntry,
    LABEL_ADDITION,
    LABEL_EHM,
    LABEL_REMOVAL,
    LABEL_RVA,
    merge_entries,
)

from conftest import DEMO_APP


def _manifest(attrs: str) -> str:
    return ('<?xml version="1.0" encoding="utf-8"?>\n'
            '<manifest xmlns:android="http://schemas.android.com/apk/res/android" '
            'package="com.example">\n'
            f'  <uses-sdk {attrs} />\n'
            "</manifest>\n")


def test_manifest_min_only():
    assert parse_manifest(_manifest('android:minSdkVersion="19"')) == SdkRange(19, 33)


def test_manifest_min_and_max():
    rng = parse_manifest(_manifest('android:minSdkVersion="19" android:maxSdkVersion="25"'))
    assert rng == SdkRange(19, 25)


def test_manifest_no_uses_sdk_defaults_with_warning():
    text = ('<manifest xmlns:android="http://schemas.android.com/apk/res/android">'
            "<application/></manifest>")
    info = parse_manifest_info(text)
    assert info.sdk_range == SdkRange(1, 33)
    assert info.warnings


def test_manifest_malformed_raises():
    with pytest.raises(ManifestParseError):
        parse_manifest("<manifest><uses-sdk")


def test_manifest_target_sdk_reported_not_used():
    info = parse_manifest_info(_manifest(
        'android:minSdkVersion="15" android:targetSdkVersion="24"'))
    assert info.target_sdk == 24
    assert info.sdk_range == SdkRange(15, 33)


# --- extract_guard --------------------------------------------------------------

def test_guard_then_branch_ge():
    g = extract_guard([("android.os.Build.VERSION.SDK_INT >= 23", True)])
    assert g.interval == SdkRange(23, 33) and not g.unconstrained


def test_guard_else_branch_negates():
    g = extract_guard([("Build.VERSION.SDK_INT >= 21", False)])
    assert g.interval == SdkRange(1, 20)


def test_guard_nested_intersection():
    g = extract_guard([("Build.VERSION.SDK_INT < 29", True),
                       ("Build.VERSION.SDK_INT >= 16", True)])
    assert g.interval == SdkRange(16, 28)


def test_guard_unrecognized_contributes_nothing():
    g = extract_guard([("featureEnabled() && ready", True)])
    assert g.unconstrained and g.interval == SdkRange(1, 33)


def test_guard_conjunction_then_branch():
    g = extract_guard([("SDK_INT >= 16 && isReady()", True)])
    assert g.interval == SdkRange(16, 33)


def test_guard_disjunction_else_branch():
    g = extract_guard([("SDK_INT < 16 || disabled()", False)])
    assert g.interval == SdkRange(16, 33)


def test_guard_disjunction_then_branch_nothing():
    g = extract_guard([("SDK_INT >= 16 || legacy()", True)])
    assert g.unconstrained


def test_guard_not_operator():
    g = extract_guard([("!(Build.VERSION.SDK_INT < 24)", True)])
    assert g.interval == SdkRange(24, 33)


def test_guard_literal_first_comparison():
    g = extract_guard([("23 <= Build.VERSION.SDK_INT", True)])
    assert g.interval == SdkRange(23, 33)


def test_guard_equality():
    g = extract_guard([("SDK_INT == 21", True)])
    assert g.interval == SdkRange(21, 21)


def test_guard_contradiction_unreachable():
    g = extract_guard([("SDK_INT >= 24", True), ("SDK_INT < 20", True)])
    assert g.interval is None


# --- call sites -----------------------------------------------------------------

def test_scan_resolves_local_variable_receiver():
    src = """package p;
class T {
    void go() {
        android.view.InputDevice device = getDevice();
        int[] ids = device.getDeviceIds();
    }
}
"""
    sites = [s for s in scan_call_sites(src, "T.java") if s.method == "getDeviceIds"]
    assert sites[0].resolved_class == "InputDevice"


def test_scan_static_receiver_is_class_name():
    src = "package p;\nclass T { void go() { long t = SystemClock.uptimeMillis(); } }\n"
    sites = [s for s in scan_call_sites(src, "T.java") if s.method == "uptimeMillis"]
    assert sites[0].resolved_class == "SystemClock"


def test_scan_unresolved_receiver():
    src = "package p;\nclass T { void go() { helper().getThing(); } }\n"
    sites = [s for s in scan_call_sites(src, "T.java") if s.method == "getThing"]
    assert sites[0].resolved_class is None


def test_scan_early_return_guard_recognized():
    src = """package p;
class T {
    void go(android.os.PowerManager pm) {
        if (Build.VERSION.SDK_INT >= 24) return;
        pm.isScreenOn();
    }
}
"""
    sites = [s for s in scan_call_sites(src, "T.java") if s.method == "isScreenOn"]
    assert sites[0].guard.interval == SdkRange(1, 23)


# --- check_app -------------------------------------------------------------------

def _demo_kb() -> KnowledgeBase:
    kb = KnowledgeBase([15, 16, 20, 21, 23, 24])
    merge_entries(kb, [
        IncompatibilityEntry(
            ApiSignature("android.view.InputDevice", "getDeviceIds", (), "int[]"),
            (15, 16), KIND_SEMANTIC, frozenset({LABEL_RVA, LABEL_EHM}), "t"),
        IncompatibilityEntry(
            ApiSignature("android.content.res.TypedArray", "getIndexCount", (), "int"),
            (16, 20), KIND_SIGNATURE, frozenset({LABEL_ADDITION}), "t"),
        IncompatibilityEntry(
            ApiSignature("android.os.PowerManager", "isScreenOn", (), "boolean"),
            (23, 24), KIND_SIGNATURE, frozenset({LABEL_REMOVAL}), "t"),
    ])
    return kb


def test_demo_app_exactly_three_seeded_violations():
    issues = check_app(DEMO_APP, _demo_kb())
    assert len(issues) == 3
    kinds = [(i.kind, tuple(sorted(i.entry.labels))) for i in issues]
    assert (KIND_SEMANTIC, (LABEL_EHM, LABEL_RVA)) in kinds
    assert (KIND_SIGNATURE, (LABEL_ADDITION,)) in kinds
    assert (KIND_SIGNATURE, (LABEL_REMOVAL,)) in kinds
    assert all(i.confidence == "high" for i in issues)


def test_semantic_rule_unguarded_spans_boundary():
    issues = check_app(DEMO_APP, _demo_kb())
    semantic = [i for i in issues if i.kind == KIND_SEMANTIC][0]
    assert semantic.reachable_levels == SdkRange(15, 33)
    assert semantic.entry.boundary == (15, 16)


def test_semantic_rule_guard_confines_to_one_side(tmp_path):
    app = tmp_path / "app"
    shutil.copytree(DEMO_APP, app)
    issues = check_app(app, _demo_kb(), assume_sdk_range=(16, 33))
    assert all(i.kind != KIND_SEMANTIC for i in issues)


def test_removal_rule_boundary():
    issues = check_app(DEMO_APP, _demo_kb())
    removal = [i for i in issues if LABEL_REMOVAL in i.entry.labels][0]
    assert removal.reachable_levels.max_level >= removal.entry.boundary[1]


def test_missing_manifest_raises(tmp_path):
    (tmp_path / "Empty.java").write_text("class Empty {}")
    with pytest.raises(ManifestMissingError):
        check_app(tmp_path, _demo_kb())
    assert check_app(tmp_path, _demo_kb(), allow_missing_manifest=True) == []


def test_monotonicity_raising_min_sdk():
    kb = _demo_kb()
    counts = [len(check_app(DEMO_APP, kb, assume_sdk_range=(m, 33)))
              for m in range(15, 34)]
    assert all(a >= b for a, b in zip(counts, counts[1:]))
    assert counts[0] == 3


def test_guard_sufficiency_fixture_transformation(tmp_path):
    """Wrapping every flagged call in a one-sided guard empties the report."""
    app = tmp_path / "app"
    shutil.copytree(DEMO_APP, app)
    src_path = app / "src/com/example/demo/DeviceTools.java"
    text = src_path.read_text()
    text = text.replace(
        "    public int[] listDevicesUnguarded(InputDevice device) {\n"
        "        return device.getDeviceIds();\n"
        "    }",
        "    public int[] listDevicesUnguarded(InputDevice device) {\n"
        "        if (Build.VERSION.SDK_INT >= 16) {\n"
        "            return device.getDeviceIds();\n"
        "        }\n"
        "        return new int[0];\n"
        "    }")
    text = text.replace(
        "    public int indexCountUnguarded(TypedArray array) {\n"
        "        return array.getIndexCount();\n"
        "    }",
        "    public int indexCountUnguarded(TypedArray array) {\n"
        "        if (Build.VERSION.SDK_INT >= 20) {\n"
        "            return array.getIndexCount();\n"
        "        }\n"
        "        return 0;\n"
        "    }")
    text = text.replace(
        "    public boolean screenOnUnguarded(PowerManager manager) {\n"
        "        return manager.isScreenOn();\n"
        "    }",
        "    public boolean screenOnUnguarded(PowerManager manager) {\n"
        "        if (Build.VERSION.SDK_INT < 24) {\n"
        "            return manager.isScreenOn();\n"
        "        }\n"
        "        return false;\n"
        "    }")
    src_path.write_text(text)
    assert check_app(app, _demo_kb()) == []


def test_unrecognized_guard_never_suppresses(tmp_path):
    app = tmp_path / "app"
    shutil.copytree(DEMO_APP, app)
    src_path = app / "src/com/example/demo/DeviceTools.java"
    text = src_path.read_text().replace(
        "if (Build.VERSION.SDK_INT >= 16) {",
        "if (isInputReady()) {")
    src_path.write_text(text)
    issues = check_app(app, _demo_kb())
    assert len(issues) == 4  # the previously guarded call now counts too


def test_determinism_byte_identical_reports():
    import json
    from apidrift.app_checker import issue_to_json
    a = [json.dumps(issue_to_json(i)) for i in check_app(DEMO_APP, _demo_kb())]
    b = [json.dumps(issue_to_json(i)) for i in check_app(DEMO_APP, _demo_kb())]
    assert a == b


def test_report_header_documents_intraprocedural_scope():
    report = issues_report(check_app(DEMO_APP, _demo_kb()))
    assert "intraprocedural" in report
    assert "3 issue(s)." in report


def test_low_confidence_name_arity_match(tmp_path):
    app = tmp_path / "app"
    (app / "src").mkdir(parents=True)
    (app / "AndroidManifest.xml").write_text(_manifest('android:minSdkVersion="15"'))
    (app / "src" / "U.java").write_text(
        "package p;\nclass U { void go() { helper().getDeviceIds(); } }\n")
    issues = check_app(app, _demo_kb())
    assert len(issues) == 1
    assert issues[0].confidence == "low"
