from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apidrift.errors import (
    CorpusNotFoundError,
    EmptyCorpusError,
    ExtractionError,
    SignatureParseError,
)
from apidrift.extraction import (
    ApiSignature,
    extract_api_records,
    normalize_signature,
    read_facts,
    record_from_json,
    record_to_json,
    render_signature,
    scan_corpus,
    write_facts,
)

from conftest import MINI_AOSP

INPUTDEVICE_V16_SOURCE = """package android.view;

public final class InputDevice {
    public static int[] getDeviceIds() {
        return InputManager.getInstance().getInputDeviceIds();
    }
}
"""


def test_inputdevice_v16_single_record():
    recs = extract_api_records(INPUTDEVICE_V16_SOURCE, 16, "InputDevice.java")
    assert len(recs) == 1
    rec = recs[0]
    assert rec.signature.class_fqn == "android.view.InputDevice"
    assert rec.signature.method_name == "getDeviceIds"
    assert rec.signature.param_types == ()
    assert rec.signature.return_type == "int[]"
    assert "return InputManager.getInstance().getInputDeviceIds();" in rec.body


def test_class_with_zero_methods():
    src = "package a;\npublic class Empty {\n    private int field;\n}\n"
    assert extract_api_records(src, 10, "Empty.java") == []


# Expected records written by hand before implementation: three methods, the
# deprecated one carrying its annotation and doc comment.
FIXTURE_THREE = """package com.example;

public class Widget {
    public int first() { return 1; }

    /** Old entry point, use first() instead. */
    @Deprecated
    public int second(int x) { return x; }

    void third(String s, long when) { log(s, when); }
}
"""


def test_annotations_and_doc_comment():
    recs = extract_api_records(FIXTURE_THREE, 21, "Widget.java")
    assert [r.signature.method_name for r in recs] == ["first", "second", "third"]
    second = recs[1]
    assert second.annotations == ("@Deprecated",)
    assert second.comment == "/** Old entry point, use first() instead. */"
    assert recs[0].annotations == () and recs[0].comment == ""
    assert recs[2].signature.param_types == ("String", "long")


def test_nested_class_fqn_uses_dots(mini_index):
    sigs = {render_signature(r.signature) for r in mini_index.facts[15]}
    assert "<android.hardware.Camera.Parameters: Size getPictureSize()>" in sigs


def test_constructor_recorded_with_class_name():
    src = """package a;
public class Conn {
    public Conn(String url) { this.url = url; }
}
"""
    recs = extract_api_records(src, 10, "Conn.java")
    assert len(recs) == 1
    assert recs[0].signature.method_name == "Conn"
    assert recs[0].signature.param_types == ("String",)


def test_abstract_and_native_bodies_empty():
    src = """package a;
public abstract class Base {
    public abstract int size();
    public native long handle();
}
"""
    recs = extract_api_records(src, 10, "Base.java")
    assert [r.body for r in recs] == ["", ""]


def test_throws_clause_captured():
    src = """package a;
public class F {
    public void go() throws java.io.IOException, IllegalStateException { run(); }
}
"""
    recs = extract_api_records(src, 10, "F.java")
    assert recs[0].throws_types == ("java.io.IOException", "IllegalStateException")


def test_varargs_normalized_to_array():
    src = "package a;\npublic class V { public void log(String fmt, Object... args) {} }\n"
    recs = extract_api_records(src, 10, "V.java")
    assert recs[0].signature.param_types == ("String", "Object[]")


def test_string_aware_brace_matching():
    src = '''package a;
public class S {
    public String quote() {
        return "brace } in a string";
    }
    public char c() { return '}'; }
}
'''
    recs = extract_api_records(src, 10, "S.java")
    assert len(recs) == 2
    assert '"brace } in a string"' in recs[0].body


def test_unbalanced_braces_raise():
    with pytest.raises(ExtractionError):
        extract_api_records("package a;\nclass B { void f() { if (x) { }\n", 10, "B.java")


# --- normalize_signature -----------------------------------------------------

def test_normalize_paper_example():
    sig = normalize_signature("< android.hardware.Camera.Parameters : Size getPictureSize () >")
    assert sig == ApiSignature("android.hardware.Camera.Parameters",
                               "getPictureSize", (), "Size")


def test_normalize_getdeviceids_header():
    sig = normalize_signature("<android.view.InputDevice: int[] getDeviceIds()>")
    assert sig == ApiSignature("android.view.InputDevice", "getDeviceIds", (), "int[]")


def test_normalize_whitespace_insensitive():
    a = normalize_signature("<a.B: void f(int,int)>")
    b = normalize_signature("<a.B:  void  f( int , int )>")
    assert a == b


def test_normalize_generics_erased():
    sig = normalize_signature("<a.B: Map<String,Integer> f(List<String>,int)>")
    assert sig.return_type == "Map"
    assert sig.param_types == ("List", "int")


@pytest.mark.parametrize("raw", ["no brackets", "<a.B int f()>", "<a.B: int>", "<a.B: f()>"])
def test_normalize_parse_errors(raw):
    with pytest.raises(SignatureParseError):
        normalize_signature(raw)


_IDENT = st.from_regex(r"[A-Za-z][A-Za-z0-9]{0,8}", fullmatch=True)
_TYPE = st.sampled_from(["int", "long", "boolean", "String", "int[]",
                         "java.util.List", "Object[]", "Size"])


@settings(max_examples=60, deadline=None, derandomize=True)
@given(
    pkg=st.lists(_IDENT, min_size=1, max_size=3),
    cls=_IDENT,
    method=_IDENT,
    params=st.lists(_TYPE, max_size=4),
    ret=_TYPE,
)
def test_render_normalize_roundtrip(pkg, cls, method, params, ret):
    sig = ApiSignature(".".join(pkg) + "." + cls, method, tuple(params), ret)
    assert normalize_signature(render_signature(sig)) == sig


# --- corpus scan -------------------------------------------------------------

def test_scan_corpus_layout():
    index = scan_corpus(MINI_AOSP, 15, 16)
    assert index.levels == [15, 16]


def test_scan_corpus_range_intersection():
    index = scan_corpus(MINI_AOSP, 4, 33)
    assert index.levels == [15, 16, 20, 21, 23, 24]
    assert len(index.missing_levels) == (33 - 4 + 1) - 6


def test_scan_corpus_missing_root(tmp_path):
    with pytest.raises(CorpusNotFoundError):
        scan_corpus(tmp_path / "nope", 1, 33)


def test_scan_corpus_empty(tmp_path):
    (tmp_path / "notalevel").mkdir()
    with pytest.raises(EmptyCorpusError):
        scan_corpus(tmp_path, 1, 33)


def _method_count_oracle(text: str) -> int:
    """Independent regex pass: count declaration headers with a body or an
    abstract/native terminator. Only valid for the plain fixtures below."""
    return len(re.findall(
        r"^\s*(?:public|protected|private)[^;{}=()]*\([^()]*\)[^;{}]*[;{]",
        text, re.M))


def test_malformed_file_recorded_count_matches_oracle(tmp_path):
    good1 = "package a;\npublic class A {\n    public int one() { return 1; }\n}\n"
    good2 = ("package a;\npublic class B {\n"
             "    public int two() { return 2; }\n"
             "    protected void three(int x) { y = x; }\n}\n")
    bad = "package a;\npublic class C { public void broken() { if (x) {\n"
    lv = tmp_path / "7"
    lv.mkdir()
    (lv / "A.java").write_text(good1)
    (lv / "B.java").write_text(good2)
    (lv / "C.java").write_text(bad)
    index = scan_corpus(tmp_path, 7, 7)
    assert [s.file for s in index.skipped] == ["7/C.java"]
    expected = _method_count_oracle(good1) + _method_count_oracle(good2)
    assert len(index.facts[7]) == expected == 3


def test_duplicate_keys_keep_smallest_path(tmp_path):
    src = "package a;\npublic class D { public int f() { return %d; } }\n"
    lv = tmp_path / "5"
    (lv / "x").mkdir(parents=True)
    (lv / "x" / "D.java").write_text(src % 2)
    (lv / "D.java").write_text(src % 1)
    index = scan_corpus(tmp_path, 5, 5)
    assert len(index.facts[5]) == 1
    assert index.facts[5][0].file == "5/D.java"
    assert len(index.duplicates) == 1


def test_scan_determinism(mini_index):
    again = scan_corpus(MINI_AOSP, 15, 24)
    assert again.levels == mini_index.levels
    for lv in again.levels:
        assert again.facts[lv] == mini_index.facts[lv]


def test_no_level_mixing(mini_index):
    for lv, records in mini_index.facts.items():
        assert all(r.level == lv for r in records)


def test_public_only_switch():
    src = """package a;
public class M {
    public int pub() { return 1; }
    int pkg() { return 2; }
    private int priv() { return 3; }
}
"""
    all_recs = extract_api_records(src, 9, "M.java")
    pub_recs = extract_api_records(src, 9, "M.java", public_only=True)
    assert len(all_recs) == 3
    assert [r.signature.method_name for r in pub_recs] == ["pub"]


def test_parallel_scan_matches_sequential(mini_index):
    parallel = scan_corpus(MINI_AOSP, 15, 24, jobs=4)
    assert parallel.levels == mini_index.levels
    for lv in parallel.levels:
        assert parallel.facts[lv] == mini_index.facts[lv]


ADVERSARIAL = """package a.b;

import java.util.List;

public class Outer {
    public enum Mode {
        FAST(1), SLOW(2);
        private final int weight;
        Mode(int weight) { this.weight = weight; }
        public int weight() { return weight; }
    }

    public interface Callback {
        void onDone(int code);
        default int retries() { return 3; }
    }

    @interface Marker {
        int value() default 0;
    }

    private Runnable task = new Runnable() {
        public void run() { work(); }
    };

    public <T extends Comparable<T>> T max(List<T> items) {
        return items.get(0);
    }

    static int[][] GRID = new int[][]{{1}, {2}};

    public int area(int w, int h) { return w * h; }
}
"""


def test_adversarial_constructs():
    rendered = [render_signature(r.signature)
                for r in extract_api_records(ADVERSARIAL, 30, "Outer.java")]
    assert rendered == [
        "<a.b.Outer.Mode: void Mode(int)>",
        "<a.b.Outer.Mode: int weight()>",
        "<a.b.Outer.Callback: void onDone(int)>",
        "<a.b.Outer.Callback: int retries()>",
        "<a.b.Outer: T max(List)>",
        "<a.b.Outer: int area(int,int)>",
    ]


def test_facts_file_roundtrip(tmp_path, mini_index):
    records = mini_index.facts[15]
    path = tmp_path / "facts.jsonl"
    write_facts(records, path)
    assert read_facts(path) == records
    d = record_to_json(records[0])
    assert set(d) == {"signature", "level", "body", "annotations", "comment",
                      "throws", "file", "line"}
    assert record_from_json(d) == records[0]
