"""apidrift: mine incompatible framework APIs across SDK versions and flag
unguarded call sites in application source."""

__version__ = "0.1.0"

from .app_checker import CompatIssue, GuardConstraint, SdkRange, check_app, extract_guard, parse_manifest
from .change_classifier import ChangeReport, ChangeType, classify_change, normalize_body, to_ast_text
from .evaluation import accuracy_success_rate, compute_prf, krippendorff_alpha, load_benchmark
from .extraction import (
    ApiRecord,
    ApiSignature,
    CorpusIndex,
    extract_api_records,
    normalize_signature,
    render_signature,
    scan_corpus,
)
from .knowledge_base import (
    IncompatibilityEntry,
    KnowledgeBase,
    export_cid_lifetime,
    export_semantic_list,
    merge_entries,
    stats,
)
from .semantic_detector import (
    BehaviorDelta,
    PromptOptions,
    SemanticVerdict,
    baseline_verdict,
    build_prompt,
    detect_semantic,
    parse_model_output,
)
from .signature_diff import SignatureDiff, detect_signature_incompat, diff_levels

__all__ = [
    "ApiRecord", "ApiSignature", "BehaviorDelta", "ChangeReport", "ChangeType",
    "CompatIssue", "CorpusIndex", "GuardConstraint", "IncompatibilityEntry",
    "KnowledgeBase", "PromptOptions", "SdkRange", "SemanticVerdict",
    "SignatureDiff", "accuracy_success_rate", "baseline_verdict", "build_prompt",
    "check_app", "classify_change", "compute_prf", "detect_semantic",
    "detect_signature_incompat", "diff_levels", "export_cid_lifetime",
    "export_semantic_list", "extract_api_records", "extract_guard",
    "krippendorff_alpha", "load_benchmark", "merge_entries", "normalize_body",
    "normalize_signature", "parse_manifest", "parse_model_output",
    "render_signature", "scan_corpus", "stats", "to_ast_text",
]
