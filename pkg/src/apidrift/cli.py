"""Command-line entry point: extract, diff, classify, detect, kb-export,
check-app, eval, stats, and the pipeline chaining the first five."""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .app_checker import DEFAULT_MAX_LEVEL, check_app, issue_to_json, issues_report
from .backends import CachingBackend, HttpChatBackend, ModelBackend, StubBackend
from .change_classifier import classify_change
from .errors import ApidriftError, ConfigurationError
from .evaluation import (
    DISTANCES,
    accuracy_success_rate,
    compute_prf,
    krippendorff_alpha,
    load_benchmark,
)
from .extraction import render_signature, scan_corpus, write_facts
from .knowledge_base import (
    KIND_SEMANTIC,
    KnowledgeBase,
    IncompatibilityEntry,
    export_cid_lifetime,
    export_semantic_list,
    load_kb,
    merge_entries,
    save_kb,
    stats,
    stats_to_csv,
)
from .semantic_detector import (
    UNPARSEABLE,
    PromptOptions,
    detect_semantic_batch,
    verdict_to_json,
)
from .signature_diff import detect_signature_incompat, diff_corpus, diff_to_report_lines

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_PARTIAL = 2
EXIT_USAGE = 64

TOKEN_ENV = "APIDRIFT_API_TOKEN"
ENV_PREFIX = "APIDRIFT_"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    corpus: str | None
    levels: tuple[int, int]
    out: Path
    backend: str
    model_url: str | None
    prompt_options: PromptOptions
    jobs: int
    public_only: bool
    assume_sdk_range: tuple[int, int] | None
    distance: str
    app: str | None
    kb: str | None
    benchmark: str | None
    agreement: str | None

    def to_manifest_dict(self) -> dict:
        # The output directory is where the manifest lives; recording it
        # would make otherwise-identical runs differ.
        return {
            "command": self.command,
            "corpus": self.corpus,
            "levels": list(self.levels),
            "backend": self.backend,
            "model_url": self.model_url,
            "prompt_options": {
                "include_comments": self.prompt_options.include_comments,
                "include_ast": self.prompt_options.include_ast,
                "use_cot": self.prompt_options.use_cot,
                "shots": self.prompt_options.shots,
            },
            "jobs": self.jobs,
            "public_only": self.public_only,
            "assume_sdk_range": list(self.assume_sdk_range) if self.assume_sdk_range else None,
            "distance": self.distance,
            "app": self.app,
            "kb": self.kb,
            "benchmark": self.benchmark,
            "agreement": self.agreement,
        }


def build_parser() -> _Parser:
    parser = _Parser(prog="apidrift", description=__doc__)
    parser.add_argument("--version", action="version", version=f"apidrift {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def add_common(p, corpus=False, backend=False, out=True):
        p.add_argument("--config", help="key=value config file (flags > env > file)")
        if out:
            p.add_argument("--out", help="run output directory (default: out)")
        if corpus:
            p.add_argument("--corpus", help="corpus root with <level>/**/*.java")
            p.add_argument("--levels", help="level range MIN:MAX (default 4:33)")
            p.add_argument("--public-only", action="store_true", default=None,
                           help="extract public methods only")
            p.add_argument("--jobs", type=int, help="parallel workers (default 1)")
        if backend:
            p.add_argument("--backend",
                           help="baseline | stub | <model name> (default baseline)")
            p.add_argument("--model-url",
                           help="chat endpoint URL, or canned-response dir for stub; "
                                f"auth token read from ${TOKEN_ENV}")
            p.add_argument("--include-comments", action="store_true", default=None,
                           help="include API comments in prompts")
            p.add_argument("--include-ast", action="store_true", default=None,
                           help="include the AST text rendering in prompts")
            p.add_argument("--no-cot", action="store_true", default=None,
                           help="drop the chain-of-thought change-type step")
            p.add_argument("--shots", type=int, help="demonstration count (default 3)")
        return p

    add_common(sub.add_parser("extract", help="extract per-level API facts"), corpus=True)
    add_common(sub.add_parser("diff", help="diff adjacent levels"), corpus=True)
    add_common(sub.add_parser("classify", help="classify retained-changed pairs"), corpus=True)
    add_common(sub.add_parser("detect", help="semantic verdicts for retained pairs"),
               corpus=True, backend=True)
    add_common(sub.add_parser("kb-export", help="build and export the knowledge base"),
               corpus=True, backend=True)
    add_common(sub.add_parser("pipeline",
                              help="extract, diff, classify, detect, kb-export"),
               corpus=True, backend=True)

    p_stats = add_common(sub.add_parser("stats", help="stats CSV plus figures"),
                         corpus=True, backend=True)
    p_stats.add_argument("--kb", help="reuse a kb-export/pipeline output directory")

    p_check = add_common(sub.add_parser("check-app", help="flag unguarded call sites"))
    p_check.add_argument("--app", required=True, help="application source root")
    p_check.add_argument("--kb", required=True,
                         help="kb.jsonl file or directory containing it")
    p_check.add_argument("--assume-sdk-range", metavar="MIN:MAX",
                         help="override or substitute the manifest SDK range")
    p_check.add_argument("--max-level", type=int,
                         help=f"highest known level (default {DEFAULT_MAX_LEVEL})")
    p_check.add_argument("--jobs", type=int, help="parallel file scans (default 1)")

    p_eval = add_common(sub.add_parser("eval", help="benchmark metrics"), backend=True)
    p_eval.add_argument("--benchmark", help="benchmark JSONL file")
    p_eval.add_argument("--agreement",
                        help="annotation JSONL for Krippendorff's alpha")
    p_eval.add_argument("--distance", choices=sorted(DISTANCES),
                        help="set distance for alpha (default jaccard)")
    return parser


# ---------------------------------------------------------------------------
# Config resolution: flags > environment > config file > defaults
# ---------------------------------------------------------------------------

def _read_config_file(path: str | None) -> dict:
    values = {}
    if not path:
        return values
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        line = raw.strip()
        if not line or line.startswith("#") or "=" not in line:
            continue
        key, _, value = line.partition("=")
        values[key.strip().lower().replace("-", "_")] = value.strip()
    return values


def _setting(args, cfg_file: dict, name: str, default=None):
    flag = getattr(args, name, None)
    if flag is not None:
        return flag
    env = os.environ.get(ENV_PREFIX + name.upper())
    if env is not None:
        return env
    if name in cfg_file:
        return cfg_file[name]
    return default


def _bool_setting(args, cfg_file: dict, name: str, default: bool = False) -> bool:
    value = _setting(args, cfg_file, name, default)
    if isinstance(value, bool):
        return value
    if isinstance(value, str):
        lowered = value.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off", ""):
            return False
        raise ConfigurationError(f"{name}: expected a boolean, got {value!r}")
    return bool(value)


def _parse_range(text: str, flag: str) -> tuple[int, int]:
    try:
        lo, hi = text.split(":")
        lo, hi = int(lo), int(hi)
    except ValueError:
        raise ConfigurationError(f"{flag} expects MIN:MAX, got {text!r}")
    if lo > hi or lo < 1:
        raise ConfigurationError(f"{flag}: invalid range {text!r}")
    return lo, hi


def resolve_config(args) -> RunConfig:
    cfg_file = _read_config_file(getattr(args, "config", None))
    levels_text = _setting(args, cfg_file, "levels", "4:33")
    assume = _setting(args, cfg_file, "assume_sdk_range")
    opts = PromptOptions(
        include_comments=_bool_setting(args, cfg_file, "include_comments"),
        include_ast=_bool_setting(args, cfg_file, "include_ast"),
        use_cot=not _bool_setting(args, cfg_file, "no_cot"),
        shots=int(_setting(args, cfg_file, "shots", 3)),
    )
    return RunConfig(
        command=args.command,
        corpus=_setting(args, cfg_file, "corpus"),
        levels=_parse_range(str(levels_text), "--levels"),
        out=Path(_setting(args, cfg_file, "out", "out")),
        backend=str(_setting(args, cfg_file, "backend", "baseline")),
        model_url=_setting(args, cfg_file, "model_url"),
        prompt_options=opts,
        jobs=int(_setting(args, cfg_file, "jobs", 1)),
        public_only=_bool_setting(args, cfg_file, "public_only"),
        assume_sdk_range=_parse_range(str(assume), "--assume-sdk-range") if assume else None,
        distance=str(_setting(args, cfg_file, "distance", "jaccard")),
        app=_setting(args, cfg_file, "app"),
        kb=_setting(args, cfg_file, "kb"),
        benchmark=_setting(args, cfg_file, "benchmark"),
        agreement=_setting(args, cfg_file, "agreement"),
    )


def make_backend(cfg: RunConfig) -> ModelBackend | None:
    if cfg.backend == "baseline":
        return None
    if cfg.backend == "stub":
        if not cfg.model_url:
            raise ConfigurationError("stub backend needs --model-url DIR")
        return StubBackend(cfg.model_url)
    if not cfg.model_url:
        raise ConfigurationError(f"model backend {cfg.backend!r} needs --model-url")
    inner = HttpChatBackend(cfg.model_url, cfg.backend, token_env=TOKEN_ENV)
    return CachingBackend(inner, cfg.out / "cache")


# ---------------------------------------------------------------------------
# Provenance
# ---------------------------------------------------------------------------

def _hash_tree(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        digest.update(path.relative_to(root).as_posix().encode())
        digest.update(hashlib.sha256(path.read_bytes()).digest())
    return digest.hexdigest()


def _input_hashes(cfg: RunConfig) -> dict:
    hashes = {}
    for name in ("corpus", "app", "benchmark", "agreement"):
        value = getattr(cfg, name)
        if value and Path(value).is_dir():
            hashes[name] = _hash_tree(Path(value))
        elif value and Path(value).is_file():
            hashes[name] = hashlib.sha256(Path(value).read_bytes()).hexdigest()
    if cfg.kb:
        kb_file = _kb_file(cfg.kb)
        if kb_file.is_file():
            hashes["kb"] = hashlib.sha256(kb_file.read_bytes()).hexdigest()
    return hashes


def run_id_for(cfg: RunConfig, input_hashes: dict) -> str:
    payload = json.dumps([cfg.to_manifest_dict(), input_hashes], sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()[:12]


def write_manifest(cfg: RunConfig, input_hashes: dict) -> None:
    manifest = {
        "tool": "apidrift",
        "version": __version__,
        "run_id": run_id_for(cfg, input_hashes),
        "config": cfg.to_manifest_dict(),
        "inputs": input_hashes,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_lines(path: Path, lines) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")


def _kb_file(kb_arg: str) -> Path:
    path = Path(kb_arg)
    return path / "kb.jsonl" if path.is_dir() else path


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def _stage_extract(cfg: RunConfig):
    if not cfg.corpus:
        raise ConfigurationError("--corpus is required")
    index = scan_corpus(cfg.corpus, cfg.levels[0], cfg.levels[1],
                        public_only=cfg.public_only, jobs=cfg.jobs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    for level in index.levels:
        write_facts(index.facts[level], cfg.out / f"facts-{level}.jsonl")
    report = {
        "levels": index.levels,
        "missing_level_count": len(index.missing_levels),
        "records": {str(lv): len(index.facts[lv]) for lv in index.levels},
        "skipped": [{"level": s.level, "file": s.file, "reason": s.reason}
                    for s in index.skipped],
        "duplicates": [{"level": s.level, "file": s.file, "reason": s.reason}
                       for s in index.duplicates],
    }
    (cfg.out / "scan-report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return index


def _stage_diff(cfg: RunConfig, index):
    diffs = diff_corpus(index)
    for diff in diffs:
        _write_lines(cfg.out / f"diff-{diff.level_x}-{diff.level_x1}.jsonl",
                     diff_to_report_lines(diff))
    return diffs


def _stage_classify(cfg: RunConfig, diffs):
    reports = []
    for diff in diffs:
        for old, new in diff.retained_changed:
            reports.append(classify_change(old, new))
    _write_lines(cfg.out / "changes.jsonl", (
        json.dumps({
            "signature": render_signature(r.signature),
            "boundary": list(r.boundary),
            "change_types": sorted(ct.value for ct in r.change_types),
            "evidence": [[ct.value, old_s, new_s] for ct, old_s, new_s in r.evidence],
        }) for r in reports))
    return reports


def _stage_detect(cfg: RunConfig, diffs, backend):
    pairs = [pair for diff in diffs for pair in diff.retained_changed]
    verdicts = detect_semantic_batch(pairs, backend, cfg.prompt_options, jobs=cfg.jobs)
    _write_lines(cfg.out / "verdicts.jsonl",
                 (json.dumps(verdict_to_json(v)) for v in verdicts))
    failures = [v for v in verdicts if v.rationale == UNPARSEABLE]
    if failures:
        _write_lines(cfg.out / "failures.jsonl",
                     (json.dumps(verdict_to_json(v)) for v in failures))
    return verdicts, failures


def _stage_kb(cfg: RunConfig, index, diffs, verdicts, run_id: str) -> KnowledgeBase:
    kb = KnowledgeBase(index.levels)
    for diff in diffs:
        merge_entries(kb, detect_signature_incompat(diff, provenance=run_id))
    merge_entries(kb, (
        IncompatibilityEntry(v.signature, v.boundary, KIND_SEMANTIC,
                             frozenset(v.labels), run_id)
        for v in verdicts if v.labels))
    save_kb(kb, cfg.out / "kb.jsonl")
    (cfg.out / "android_api_lifetime.txt").write_text(
        export_cid_lifetime(kb), encoding="utf-8", newline="\n")
    (cfg.out / "android_api_semantic.txt").write_text(
        export_semantic_list(kb), encoding="utf-8", newline="\n")
    return kb


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def _cmd_extract(cfg):
    index = _stage_extract(cfg)
    total = sum(len(v) for v in index.facts.values())
    print(f"extracted {total} records over levels {index.levels}; "
          f"{len(index.skipped)} file(s) skipped")
    return EXIT_OK


def _cmd_diff(cfg):
    index = _stage_extract(cfg)
    diffs = _stage_diff(cfg, index)
    for d in diffs:
        print(f"boundary ({d.level_x}, {d.level_x1}): +{len(d.added)} "
              f"-{len(d.removed)} ~{len(d.retained_changed)} ={d.retained_identical}")
    return EXIT_OK


def _cmd_classify(cfg):
    index = _stage_extract(cfg)
    diffs = _stage_diff(cfg, index)
    reports = _stage_classify(cfg, diffs)
    print(f"classified {len(reports)} retained-changed pair(s)")
    return EXIT_OK


def _cmd_detect(cfg):
    index = _stage_extract(cfg)
    diffs = _stage_diff(cfg, index)
    _stage_classify(cfg, diffs)
    verdicts, failures = _stage_detect(cfg, diffs, make_backend(cfg))
    incompatible = sum(1 for v in verdicts if v.labels)
    print(f"{len(verdicts)} verdict(s), {incompatible} incompatible, "
          f"{len(failures)} unparseable")
    return EXIT_PARTIAL if failures else EXIT_OK


def _cmd_kb_export(cfg):
    index = _stage_extract(cfg)
    diffs = _stage_diff(cfg, index)
    _stage_classify(cfg, diffs)
    verdicts, failures = _stage_detect(cfg, diffs, make_backend(cfg))
    kb = _stage_kb(cfg, index, diffs, verdicts, run_id_for(cfg, _input_hashes(cfg)))
    print(f"knowledge base: {len(kb)} entr(ies) over levels {kb.levels}")
    return EXIT_PARTIAL if failures else EXIT_OK


def _cmd_pipeline(cfg):
    return _cmd_kb_export(cfg)


def _cmd_stats(cfg):
    if cfg.kb:
        kb = load_kb(_kb_file(cfg.kb))
        reports = []
        changes = _kb_file(cfg.kb).parent / "changes.jsonl"
        if changes.is_file():
            from .change_classifier import ChangeReport, parse_change_type
            from .extraction import normalize_signature
            for line in changes.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                d = json.loads(line)
                reports.append(ChangeReport(
                    normalize_signature(d["signature"]),
                    tuple(d["boundary"]),
                    frozenset(parse_change_type(n) for n in d["change_types"]),
                ))
    else:
        index = _stage_extract(cfg)
        diffs = _stage_diff(cfg, index)
        reports = _stage_classify(cfg, diffs)
        verdicts, _ = _stage_detect(cfg, diffs, make_backend(cfg))
        kb = _stage_kb(cfg, index, diffs, verdicts,
                       run_id_for(cfg, _input_hashes(cfg)))
    rows = stats(kb, reports)
    csv_text = stats_to_csv(rows)
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "stats.csv").write_text(csv_text, encoding="utf-8", newline="\n")
    from .figures import render_stats_figures
    written = render_stats_figures(rows, cfg.out / "figures")
    print(csv_text, end="")
    print(f"figures: {', '.join(p.name for p in written)}")
    return EXIT_OK


def _cmd_check_app(cfg):
    kb = load_kb(_kb_file(cfg.kb))
    issues = check_app(cfg.app, kb,
                       assume_sdk_range=cfg.assume_sdk_range,
                       max_level=max(DEFAULT_MAX_LEVEL, kb.level_max),
                       jobs=cfg.jobs)
    cfg.out.mkdir(parents=True, exist_ok=True)
    _write_lines(cfg.out / "issues.jsonl",
                 (json.dumps(issue_to_json(i)) for i in issues))
    report = issues_report(issues)
    (cfg.out / "issues.txt").write_text(report, encoding="utf-8", newline="\n")
    print(report, end="")
    return EXIT_OK


def _cmd_eval(cfg):
    from .change_classifier import ChangeType

    results = {}
    if cfg.benchmark:
        pairs = load_benchmark(cfg.benchmark)
        backend = make_backend(cfg)
        verdicts = detect_semantic_batch(((p.old, p.new) for p in pairs),
                                         backend, cfg.prompt_options, jobs=cfg.jobs)
        ct_metrics = compute_prf([v.change_types for v in verdicts],
                                 [p.gold_change_types for p in pairs],
                                 list(ChangeType))
        label_metrics = compute_prf([v.labels for v in verdicts],
                                    [p.gold_labels for p in pairs],
                                    ["Return Value Alteration",
                                     "Exception Handling Modification"])
        results["change_types"] = _metrics_dict(ct_metrics)
        results["semantic_labels"] = _metrics_dict(label_metrics)
        try:
            accuracy, success = accuracy_success_rate(
                [v.labels for v in verdicts], [p.gold_labels for p in pairs])
            results["accuracy"] = accuracy
            results["success_rate"] = success
        except ApidriftError as exc:
            results["accuracy_error"] = str(exc)
        print(f"change types : macro P={ct_metrics.macro_precision:.3f} "
              f"R={ct_metrics.macro_recall:.3f} F1={ct_metrics.macro_f1:.3f}")
        print(f"semantic     : macro P={label_metrics.macro_precision:.3f} "
              f"R={label_metrics.macro_recall:.3f} F1={label_metrics.macro_f1:.3f}")
        if "accuracy" in results:
            print(f"binary       : accuracy={results['accuracy']:.3f} "
                  f"success_rate={results['success_rate']:.3f}")
        else:
            print(f"binary       : {results['accuracy_error']}")
    if cfg.agreement:
        matrix = _load_agreement(cfg.agreement)
        alpha = krippendorff_alpha(matrix, cfg.distance)
        results["krippendorff_alpha"] = alpha
        results["distance"] = cfg.distance
        print(f"agreement    : alpha={alpha:.3f} ({cfg.distance} distance)")
    if not results:
        raise ConfigurationError("eval needs --benchmark and/or --agreement")
    cfg.out.mkdir(parents=True, exist_ok=True)
    (cfg.out / "metrics.json").write_text(
        json.dumps(results, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return EXIT_OK


def _metrics_dict(m) -> dict:
    return {
        "per_label": {k: {"precision": s.precision, "recall": s.recall,
                          "f1": s.f1, "support": s.support}
                      for k, s in m.per_label.items()},
        "macro": {"precision": m.macro_precision, "recall": m.macro_recall,
                  "f1": m.macro_f1},
        "micro": {"precision": m.micro_precision, "recall": m.micro_recall,
                  "f1": m.micro_f1},
    }


def _load_agreement(path: str) -> list[list[frozenset | None]]:
    by_item: dict[str, dict[str, frozenset]] = {}
    annotators: list[str] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        d = json.loads(raw)
        item, annotator = str(d["item"]), str(d["annotator"])
        by_item.setdefault(item, {})[annotator] = frozenset(d["labels"])
        if annotator not in annotators:
            annotators.append(annotator)
    return [[by_item[item].get(a) for a in annotators] for item in sorted(by_item)]


_COMMANDS = {
    "extract": _cmd_extract,
    "diff": _cmd_diff,
    "classify": _cmd_classify,
    "detect": _cmd_detect,
    "kb-export": _cmd_kb_export,
    "pipeline": _cmd_pipeline,
    "stats": _cmd_stats,
    "check-app": _cmd_check_app,
    "eval": _cmd_eval,
}


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_USAGE
    try:
        cfg = resolve_config(args)
        cfg.out.mkdir(parents=True, exist_ok=True)
        code = _COMMANDS[args.command](cfg)
        write_manifest(cfg, _input_hashes(cfg))
        return code
    except ApidriftError as exc:
        print(f"apidrift: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except KeyboardInterrupt:
        print("apidrift: interrupted; partial outputs were flushed per stage",
              file=sys.stderr)
        return 130


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
