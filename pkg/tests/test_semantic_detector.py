from __future__ import annotations

import pytest

from apidrift.backends import (
    CachingBackend,
    ModelBackend,
    StubBackend,
    request_with_retries,
)
from apidrift.change_classifier import ChangeType
from apidrift.errors import (
    BackendUnavailableError,
    ConfigurationError,
    MalformedOutputError,
)
from apidrift.extraction import ApiRecord, ApiSignature
from apidrift.knowledge_base import LABEL_EHM, LABEL_RVA
from apidrift.semantic_detector import (
    UNPARSEABLE,
    PromptOptions,
    baseline_verdict,
    build_prompt,
    detect_semantic,
    detect_semantic_batch,
    load_demonstrations,
    parse_model_output,
)

from conftest import GOLDENS


# --- prompt golden files ------------------------------------------------------

GOLDEN_BY_OPTIONS = {
    "prompt_cot.txt": PromptOptions(),
    "prompt_cot_comments.txt": PromptOptions(include_comments=True),
    "prompt_cot_ast.txt": PromptOptions(include_ast=True),
    "prompt_cot_comments_ast.txt": PromptOptions(include_comments=True, include_ast=True),
    "prompt_nocot.txt": PromptOptions(use_cot=False),
}


@pytest.mark.parametrize("golden_name", sorted(GOLDEN_BY_OPTIONS))
def test_prompt_matches_golden(golden_name, getdeviceids_pair):
    options = GOLDEN_BY_OPTIONS[golden_name]
    prompt = build_prompt(*getdeviceids_pair, options)
    golden = (GOLDENS / golden_name).read_bytes()
    assert prompt.encode("utf-8") == golden


def test_prompt_without_comments_has_no_comment_section(getdeviceids_pair):
    prompt = build_prompt(*getdeviceids_pair, PromptOptions())
    assert "Comment:" not in prompt
    assert prompt.count("Example ") == 3


def test_prompt_comment_flag_adds_one_section_per_version_block(getdeviceids_pair):
    base = build_prompt(*getdeviceids_pair, PromptOptions())
    with_comments = build_prompt(*getdeviceids_pair, PromptOptions(include_comments=True))
    # 3 demonstrations + 1 query pair, two version blocks each.
    assert with_comments.count("Comment:") == 8
    assert base.count("Earlier version") == with_comments.count("Earlier version")


def test_prompt_zero_shots(getdeviceids_pair):
    prompt = build_prompt(*getdeviceids_pair, PromptOptions(shots=0))
    assert "Example" not in prompt
    assert "Now analyse this API change." in prompt


def test_prompt_no_cot_drops_change_types(getdeviceids_pair):
    prompt = build_prompt(*getdeviceids_pair, PromptOptions(use_cot=False))
    assert "CHANGE_TYPES" not in prompt
    assert "VERDICT:" in prompt


def test_prompt_requires_enough_demonstrations(getdeviceids_pair):
    with pytest.raises(ConfigurationError):
        build_prompt(*getdeviceids_pair, PromptOptions(shots=4),
                     demonstrations=load_demonstrations()[:2])


def test_prompt_options_validation():
    with pytest.raises(ConfigurationError):
        PromptOptions(shots=-1)


def test_demo_bank_covers_all_three_outcomes():
    demos = load_demonstrations()
    assert len(demos) >= 3
    outcomes = [tuple(sorted(d["labels"])) for d in demos]
    assert ("Return Value Alteration",) in outcomes
    assert ("Exception Handling Modification",) in outcomes
    assert () in outcomes


# --- output grammar -----------------------------------------------------------

def test_parse_change_types_and_verdict():
    cts, labels = parse_model_output(
        "CHANGE_TYPES: [Return Statement Changed]\nVERDICT: [Return Value Alteration]")
    assert cts == {ChangeType.RETURN}
    assert labels == {LABEL_RVA}


def test_parse_tolerates_surrounding_prose():
    cts, labels = parse_model_output(
        "Let me think.\nThe body changed.\nCHANGE_TYPES: [No Change]\nVERDICT: [None]\nDone.")
    assert cts == {ChangeType.NO_CHANGE}
    assert labels == set()


def test_parse_missing_grammar_is_malformed():
    with pytest.raises(MalformedOutputError):
        parse_model_output("The API changed a lot.")


def test_parse_unknown_label_is_malformed():
    with pytest.raises(MalformedOutputError):
        parse_model_output("CHANGE_TYPES: [No Change]\nVERDICT: [Sometimes Crashes]")


def test_parse_case_insensitive():
    cts, labels = parse_model_output(
        "change_types: [return statement changed, no change]\n"
        "verdict: [EXCEPTION HANDLING MODIFICATION]")
    assert ChangeType.RETURN in cts
    assert labels == {LABEL_EHM}


def test_parse_verdict_only_mode():
    with pytest.raises(MalformedOutputError):
        parse_model_output("VERDICT: [None]", require_change_types=True)
    cts, labels = parse_model_output("VERDICT: [None]", require_change_types=False)
    assert cts == frozenset() and labels == frozenset()


# --- baseline rule table --------------------------------------------------------

def test_baseline_return_statement_maps_to_rva():
    assert baseline_verdict(frozenset({ChangeType.RETURN})) == {LABEL_RVA}


def test_baseline_other_and_dependent_map_to_nothing():
    assert baseline_verdict(frozenset({ChangeType.OTHER, ChangeType.DEPENDENT})) == frozenset()


def test_baseline_exception_with_control_maps_to_ehm():
    assert baseline_verdict(frozenset({ChangeType.EXCEPTION, ChangeType.CONTROL})) == {LABEL_EHM}


def test_baseline_return_type_flag_forces_rva():
    assert baseline_verdict(frozenset({ChangeType.OTHER}), return_type_changed=True) == {LABEL_RVA}


# --- detect_semantic ------------------------------------------------------------

def test_getdeviceids_baseline_verdict(getdeviceids_pair):
    verdict = detect_semantic(*getdeviceids_pair)
    assert verdict.labels == {LABEL_RVA, LABEL_EHM}
    assert verdict.source == "baseline"


def test_getnotificationpolicy_baseline_verdict(getnotificationpolicy_pair):
    verdict = detect_semantic(*getnotificationpolicy_pair)
    assert LABEL_RVA in verdict.labels
    assert verdict.labels == {LABEL_RVA, LABEL_EHM}


def test_getboolean_baseline_verdict(getboolean_pair):
    verdict = detect_semantic(*getboolean_pair)
    assert verdict.labels == {LABEL_EHM}


class _ExplodingBackend(ModelBackend):
    name = "exploding"

    def __init__(self):
        self.calls = 0

    def complete(self, prompt):
        self.calls += 1
        raise AssertionError("backend must not be consulted")


def test_nochange_short_circuits_backend():
    sig = ApiSignature("a.C", "f", (), "int")
    old = ApiRecord(sig, 10, "{ return 1; }", comment="/** a */")
    new = ApiRecord(sig, 11, "{ return 1; }", comment="/** b */")
    backend = _ExplodingBackend()
    verdict = detect_semantic(old, new, backend=backend)
    assert backend.calls == 0
    assert verdict.labels == frozenset()
    assert verdict.change_types == {ChangeType.NO_CHANGE}


def test_stub_backend_roundtrip(tmp_path, getdeviceids_pair):
    stub = StubBackend(tmp_path, name="canned")
    prompt = build_prompt(*getdeviceids_pair, PromptOptions())
    stub.record(prompt, "CHANGE_TYPES: [Return Statement Changed]\n"
                        "VERDICT: [Return Value Alteration]")
    verdict = detect_semantic(*getdeviceids_pair, backend=stub)
    assert verdict.labels == {LABEL_RVA}
    assert verdict.source == "model:canned"
    assert verdict.change_types == {ChangeType.RETURN}


def test_malformed_output_retries_once_then_records_failure(tmp_path, getdeviceids_pair):
    stub = StubBackend(tmp_path, name="canned")
    prompt = build_prompt(*getdeviceids_pair, PromptOptions())
    stub.record(prompt, "I cannot decide.")
    # The retry prompt carries a corrective suffix; leave it unanswered as
    # well so both attempts are malformed... then seed it malformed too.
    from apidrift.semantic_detector import _RETRY_SUFFIX
    stub.record(prompt + _RETRY_SUFFIX, "Still no idea.")
    verdict = detect_semantic(*getdeviceids_pair, backend=stub)
    assert verdict.labels == frozenset()
    assert verdict.rationale == UNPARSEABLE
    assert verdict.failed


def test_malformed_then_valid_on_retry(tmp_path, getdeviceids_pair):
    stub = StubBackend(tmp_path, name="canned")
    prompt = build_prompt(*getdeviceids_pair, PromptOptions())
    from apidrift.semantic_detector import _RETRY_SUFFIX
    stub.record(prompt, "No answer lines here.")
    stub.record(prompt + _RETRY_SUFFIX,
                "CHANGE_TYPES: [Exception Handling Statement Changed]\n"
                "VERDICT: [Exception Handling Modification]")
    verdict = detect_semantic(*getdeviceids_pair, backend=stub)
    assert verdict.labels == {LABEL_EHM}


def test_missing_canned_response_exhausts_retries(tmp_path, getdeviceids_pair):
    stub = StubBackend(tmp_path, name="empty")
    with pytest.raises(BackendUnavailableError):
        detect_semantic(*getdeviceids_pair, backend=stub)


def test_cache_prevents_second_inner_call(tmp_path):
    class Counting(ModelBackend):
        name = "counting"

        def __init__(self):
            self.calls = 0

        def complete(self, prompt):
            self.calls += 1
            return "VERDICT: [None]"

    inner = Counting()
    cached = CachingBackend(inner, tmp_path / "cache")
    assert request_with_retries(cached, "p1") == "VERDICT: [None]"
    assert request_with_retries(cached, "p1") == "VERDICT: [None]"
    assert inner.calls == 1
    assert request_with_retries(cached, "p2") == "VERDICT: [None]"
    assert inner.calls == 2


def test_batch_preserves_input_order(tmp_path, getdeviceids_pair, getnotificationpolicy_pair, getboolean_pair):
    pairs = [getdeviceids_pair, getboolean_pair, getnotificationpolicy_pair]
    verdicts = detect_semantic_batch(pairs, backend=None, jobs=4)
    assert [v.signature.method_name for v in verdicts] == \
        ["getDeviceIds", "getBoolean", "getNotificationPolicy"]


def test_baseline_determinism(getdeviceids_pair):
    first = detect_semantic(*getdeviceids_pair)
    second = detect_semantic(*getdeviceids_pair)
    assert first == second
