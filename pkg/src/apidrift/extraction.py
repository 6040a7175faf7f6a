"""Corpus ingestion: per-method API facts from a version-indexed source tree.

The extractor is a lightweight lexer, not a compiler front end: it performs
comment/string-aware brace matching plus a declaration-header grammar, which
is enough to recover signature, body, annotations and doc comment for every
method, including methods of nested classes.
"""

from __future__ import annotations

import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import javasrc
from .errors import (
    CorpusNotFoundError,
    EmptyCorpusError,
    ExtractionError,
    SignatureParseError,
)

log = logging.getLogger(__name__)

MIN_API_LEVEL = 1

MODIFIERS = {
    "public", "protected", "private", "static", "final", "abstract",
    "native", "synchronized", "strictfp", "transient", "volatile", "default",
}
TYPE_KEYWORDS = {"class", "interface", "enum", "record"}

_WORD_RE = re.compile(r"[A-Za-z_$][\w$]*")
_PACKAGE_RE = re.compile(r"\bpackage\s+([\w.]+)\s*;")


@dataclass(frozen=True)
class ApiSignature:
    """Normalized identity of a method plus its (non-identifying) return type."""

    class_fqn: str
    method_name: str
    param_types: tuple[str, ...]
    return_type: str

    def __post_init__(self):
        if not self.class_fqn or any(ch.isspace() for ch in self.class_fqn):
            raise ValueError(f"bad class name: {self.class_fqn!r}")
        if any(not p for p in self.param_types):
            raise ValueError(f"empty parameter type in {self.method_name}")

    @property
    def key(self) -> tuple[str, str, tuple[str, ...]]:
        """Identity key: (class, name, parameter types). Return type excluded,
        so a return-type edit surfaces as a retained-changed pair instead of a
        spurious removal plus addition."""
        return (self.class_fqn, self.method_name, self.param_types)


@dataclass(frozen=True)
class ApiRecord:
    """One framework method at one API level."""

    signature: ApiSignature
    level: int
    body: str
    annotations: tuple[str, ...] = ()
    comment: str = ""
    throws_types: tuple[str, ...] = ()
    file: str = ""
    line: int = 0


@dataclass
class SkippedFile:
    level: int
    file: str
    reason: str


@dataclass
class CorpusIndex:
    """API facts for every level directory found in the requested range."""

    levels: list[int]
    facts: dict[int, list[ApiRecord]]
    source_roots: dict[int, Path]
    skipped: list[SkippedFile] = field(default_factory=list)
    duplicates: list[SkippedFile] = field(default_factory=list)
    missing_levels: list[int] = field(default_factory=list)

    def boundaries(self) -> list[tuple[int, int]]:
        """Consecutive present levels; gaps keep both actual level numbers."""
        return list(zip(self.levels, self.levels[1:]))


def render_signature(sig: ApiSignature) -> str:
    """Canonical angle-bracket form: ``<pkg.Cls: Ret name(T1,T2)>``."""
    return f"<{sig.class_fqn}: {sig.return_type} {sig.method_name}({','.join(sig.param_types)})>"


def normalize_signature(raw: str) -> ApiSignature:
    """Parse an angle-bracket signature string, whitespace-insensitively."""
    s = raw.strip()
    if not s.startswith("<"):
        raise SignatureParseError("expected '<'", offset=0)
    if not s.endswith(">"):
        raise SignatureParseError("expected trailing '>'", offset=len(raw) - 1)
    inner = s[1:-1]
    colon = inner.find(":")
    if colon < 0:
        raise SignatureParseError("expected ':' after class name", offset=1)
    class_fqn = inner[:colon].strip()
    if not class_fqn:
        raise SignatureParseError("empty class name", offset=1)
    rest = inner[colon + 1:]
    open_p = rest.find("(")
    close_p = rest.rfind(")")
    if open_p < 0 or close_p < open_p:
        raise SignatureParseError("expected '(...)' parameter list", offset=colon + 2)
    head = rest[:open_p].split()
    if len(head) < 2:
        raise SignatureParseError("expected return type and method name", offset=colon + 2)
    method_name = head[-1]
    return_type = canonical_type(" ".join(head[:-1]))
    params = tuple(canonical_type(p) for p in _split_top_level(rest[open_p + 1:close_p]) if p.strip())
    return ApiSignature(class_fqn, method_name, params, return_type)


def erase_generics(s: str) -> str:
    out = []
    depth = 0
    for ch in s:
        if ch == "<":
            depth += 1
        elif ch == ">":
            depth = max(0, depth - 1)
        elif depth == 0:
            out.append(ch)
    return "".join(out)


def canonical_type(s: str) -> str:
    """Erase generic arguments, normalize varargs to arrays, drop whitespace."""
    s = erase_generics(s)
    s = s.replace("...", "[]")
    return "".join(s.split())


def _split_top_level(s: str) -> list[str]:
    parts = []
    depth = 0
    buf = []
    for ch in s:
        if ch in "<([":
            depth += 1
        elif ch in ">)]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


# ---------------------------------------------------------------------------
# Declaration-header parsing
# ---------------------------------------------------------------------------

@dataclass
class _Callable:
    name: str
    return_type: str
    param_types: tuple[str, ...]
    throws_types: tuple[str, ...]
    annotations: tuple[str, ...]
    modifiers: frozenset[str]
    name_offset: int


def _skip_ws(code: str, i: int, end: int) -> int:
    while i < end and code[i].isspace():
        i += 1
    return i


def _read_word(code: str, i: int, end: int) -> tuple[str, int]:
    m = _WORD_RE.match(code, i, end)
    if not m:
        return "", i
    return m.group(0), m.end()


def _skip_angles(code: str, i: int, end: int) -> int:
    depth = 0
    while i < end:
        if code[i] == "<":
            depth += 1
        elif code[i] == ">":
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    return end


def _parse_annotations_and_modifiers(views: javasrc.SourceViews, start: int, end: int):
    """Consume leading annotations/modifiers; annotations keep their raw text."""
    code = views.code
    annotations: list[str] = []
    modifiers: set[str] = set()
    i = _skip_ws(code, start, end)
    while i < end:
        if code[i] == "@":
            a_start = i
            i += 1
            while True:
                w, i = _read_word(code, i, end)
                if i < end and code[i] == ".":
                    i += 1
                    continue
                break
            j = _skip_ws(code, i, end)
            if j < end and code[j] == "(":
                closed = javasrc.match_paren(code, j, end)
                if closed == -1:
                    break
                i = closed + 1
            raw = views.nocomment[a_start:i]
            annotations.append(" ".join(raw.split()))
            i = _skip_ws(code, i, end)
        else:
            w, nxt = _read_word(code, i, end)
            if w in MODIFIERS:
                modifiers.add(w)
                i = _skip_ws(code, nxt, end)
            else:
                break
    return tuple(annotations), frozenset(modifiers), i


def _split_param(piece: str) -> str | None:
    """One parameter declaration -> canonical type name, or None to drop."""
    s = piece.strip()
    if not s:
        return None
    # Strip parameter annotations such as @NonNull or @Size(2).
    while s.startswith("@"):
        m = _WORD_RE.match(s, 1)
        if not m:
            return None
        j = m.end()
        while j < len(s) and s[j] == ".":
            m = _WORD_RE.match(s, j + 1)
            if not m:
                break
            j = m.end()
        rest = s[j:].lstrip()
        if rest.startswith("("):
            closed = javasrc.match_paren(rest, 0)
            if closed == -1:
                return None
            rest = rest[closed + 1:].lstrip()
        s = rest
    tokens = [t for t in erase_generics(s).replace("...", "[] ").split() if t != "final"]
    if not tokens:
        return None
    if len(tokens) == 1:
        return canonical_type(tokens[0])
    name = tokens[-1]
    if name.rstrip("[]") == "this":  # receiver parameter, not a real argument
        return None
    extra = "[]" * name.count("]")  # C-style dims sit on the name: 'int x[]'
    return canonical_type(" ".join(tokens[:-1])) + extra


def _parse_params(code_slice: str) -> tuple[str, ...] | None:
    params = []
    for piece in _split_top_level(code_slice):
        p = _split_param(piece)
        if p == "":
            return None
        if p is not None:
            params.append(p)
    return tuple(params)


def _parse_callable(views: javasrc.SourceViews, start: int, end: int,
                    chain: list[str]) -> _Callable | None:
    """Parse a member header as a method/constructor declaration, or None."""
    code = views.code
    annotations, modifiers, i = _parse_annotations_and_modifiers(views, start, end)
    i = _skip_ws(code, i, end)
    if i < end and code[i] == "<":  # generic method type parameters
        i = _skip_ws(code, _skip_angles(code, i, end), end)
    # Locate the parameter list: first '(' at this nesting level.
    par = -1
    depth = 0
    for k in range(i, end):
        c = code[k]
        if c == "<":
            depth += 1
        elif c == ">":
            depth = max(0, depth - 1)
        elif c == "(" and depth == 0:
            par = k
            break
        elif c == "=" and depth == 0:
            return None  # field initializer
    if par == -1:
        return None
    close_par = javasrc.match_paren(code, par, end)
    if close_par == -1:
        return None
    # Method name is the identifier immediately before '('.
    k = par - 1
    while k >= i and code[k].isspace():
        k -= 1
    name_end = k + 1
    while k >= i and (code[k].isalnum() or code[k] in "_$"):
        k -= 1
    name_start = k + 1
    name = code[name_start:name_end]
    if not name or not _WORD_RE.fullmatch(name) or name in TYPE_KEYWORDS:
        return None
    return_type = canonical_type(code[i:name_start])
    if not return_type:
        if not chain or name != chain[-1]:
            return None  # not a constructor: enum constant, call, ...
        return_type = "void"
    params = _parse_params(code[par + 1:close_par])
    if params is None:
        return None
    throws: tuple[str, ...] = ()
    j = _skip_ws(code, close_par + 1, end)
    w, j2 = _read_word(code, j, end)
    if w == "throws":
        throws = tuple(
            canonical_type(p) for p in _split_top_level(code[j2:end]) if p.strip()
        )
    elif w and w not in ("", "default"):
        # Unrecognized trailing tokens: not a plain method header.
        return None
    return _Callable(name, return_type, params, throws, annotations, modifiers, name_start)


def _doc_comment(views: javasrc.SourceViews, seg_start: int, anchor: int) -> str:
    """Comment whose end is separated from the declaration start only by
    whitespace (annotations are part of the declaration and sit after it)."""
    doc = ""
    for cm in views.comments:
        if cm.start >= seg_start and cm.end <= anchor:
            doc = views.text[cm.start:cm.end]
        elif cm.start >= anchor:
            break
    return doc


# ---------------------------------------------------------------------------
# Member walker
# ---------------------------------------------------------------------------

def extract_api_records(source_text: str, level: int, file_path: str = "",
                        public_only: bool = False) -> list[ApiRecord]:
    """Extract one ApiRecord per concrete or abstract method declaration.

    Raises ExtractionError when braces are unbalanced beyond recovery; the
    corpus scan records that per file and continues.
    """
    views = javasrc.build_views(source_text)
    m = _PACKAGE_RE.search(views.code)
    package = m.group(1) if m else ""
    records: list[ApiRecord] = []
    _walk_members(views, 0, len(views.code), [], package, level, file_path,
                  public_only, False, records)
    return records


def _walk_members(views, start, end, chain, package, level, file_path,
                  public_only, in_interface, records):
    code = views.code
    i = start
    seg_start = start
    while i < end:
        c = code[i]
        if c == ";":
            _emit_member(views, seg_start, i, None, chain, package, level,
                         file_path, public_only, in_interface, records)
            i += 1
            seg_start = i
        elif c == "(":
            closed = javasrc.match_paren(code, i, end)
            if closed == -1:
                raise ExtractionError("unbalanced parentheses", file_path)
            i = closed + 1
        elif c == "=":
            i = javasrc.skip_to_semicolon(code, i + 1, end)
            if i < end:
                i += 1  # consume the ';' terminating the field
            seg_start = i
        elif c == "{":
            closed = javasrc.match_brace(code, i, end)
            if closed == -1:
                raise ExtractionError("unbalanced braces", file_path)
            kind, name, is_iface = _classify_block(views, seg_start, i)
            if kind == "type":
                _walk_members(views, i + 1, closed, chain + [name], package,
                              level, file_path, public_only, is_iface, records)
            elif kind == "member":
                _emit_member(views, seg_start, i, (i, closed + 1), chain,
                             package, level, file_path, public_only,
                             in_interface, records)
            i = closed + 1
            seg_start = i
        elif c == "}":
            i += 1
            seg_start = i
        else:
            i += 1


def _classify_block(views, seg_start, brace_pos):
    """Is this brace a type body, a potential method body, or noise?"""
    code = views.code
    _, _, i = _parse_annotations_and_modifiers(views, seg_start, brace_pos)
    i = _skip_ws(code, i, brace_pos)
    w, j = _read_word(code, i, brace_pos)
    if w in TYPE_KEYWORDS:
        if w == "interface" and i > 0 and code[:i].rstrip().endswith("@"):
            return ("skip", "", False)  # annotation type declaration
        name, _ = _read_word(code, _skip_ws(code, j, brace_pos), brace_pos)
        if name:
            return ("type", name, w == "interface")
        return ("skip", "", False)
    if "(" in code[seg_start:brace_pos]:
        return ("member", "", False)
    return ("skip", "", False)


def _emit_member(views, seg_start, header_end, body_span, chain, package,
                 level, file_path, public_only, in_interface, records):
    if not chain:
        return  # package/import statements, stray tokens at file level
    parsed = _parse_callable(views, seg_start, header_end, chain)
    if parsed is None:
        return
    if public_only:
        implicit_public = in_interface and not ({"private", "protected"} & parsed.modifiers)
        if "public" not in parsed.modifiers and not implicit_public:
            return
    body = views.text[body_span[0]:body_span[1]] if body_span else ""
    anchor = _skip_ws(views.code, seg_start, header_end)
    class_fqn = ".".join(([package] if package else []) + chain)
    sig = ApiSignature(class_fqn, parsed.name, parsed.param_types, parsed.return_type)
    records.append(ApiRecord(
        signature=sig,
        level=level,
        body=body,
        annotations=parsed.annotations,
        comment=_doc_comment(views, seg_start, anchor),
        throws_types=parsed.throws_types,
        file=file_path,
        line=javasrc.line_of(views.text, parsed.name_offset),
    ))


# ---------------------------------------------------------------------------
# Corpus scan
# ---------------------------------------------------------------------------

def scan_corpus(root_path, level_min: int, level_max: int,
                public_only: bool = False, jobs: int = 1) -> CorpusIndex:
    """Index every ``<root>/<level>/**/*.java`` with level in range.

    Extraction failures are recorded per file and never abort the scan.
    Duplicate identity keys within one level keep the record from the
    lexicographically smallest file path.
    """
    root = Path(root_path)
    if not root.is_dir():
        raise CorpusNotFoundError(f"corpus root not found: {root}")
    present = sorted(
        int(p.name) for p in root.iterdir()
        if p.is_dir() and p.name.isdigit() and level_min <= int(p.name) <= level_max
    )
    if not present:
        raise EmptyCorpusError(
            f"no level directories in [{level_min}, {level_max}] under {root}")
    missing = [lv for lv in range(level_min, level_max + 1) if lv not in set(present)]
    if missing:
        log.warning("corpus %s: %d levels in [%d, %d] have no directory",
                    root, len(missing), level_min, level_max)

    index = CorpusIndex(levels=present, facts={}, source_roots={},
                        missing_levels=missing)
    for lv in present:
        lv_root = root / str(lv)
        index.source_roots[lv] = lv_root
        files = sorted(p for p in lv_root.rglob("*.java") if p.is_file())
        rels = [p.relative_to(root).as_posix() for p in files]

        def _one(args):
            path, rel = args
            try:
                text = path.read_text(encoding="utf-8", errors="replace")
                return rel, extract_api_records(text, lv, rel, public_only), None
            except ExtractionError as exc:
                return rel, [], str(exc)

        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_one, zip(files, rels)))
        else:
            results = [_one(a) for a in zip(files, rels)]

        level_records: list[ApiRecord] = []
        for rel, recs, err in results:  # results follow sorted file order
            if err is not None:
                index.skipped.append(SkippedFile(lv, rel, err))
            else:
                level_records.extend(recs)
        index.facts[lv] = _dedup(level_records, lv, index)
    return index


def _dedup(records: list[ApiRecord], level: int, index: CorpusIndex) -> list[ApiRecord]:
    seen: dict[tuple, ApiRecord] = {}
    out = []
    for rec in records:
        k = rec.signature.key
        if k in seen:
            index.duplicates.append(SkippedFile(
                level, rec.file,
                f"duplicate of {render_signature(rec.signature)} kept from {seen[k].file}"))
        else:
            seen[k] = rec
            out.append(rec)
    return out


# ---------------------------------------------------------------------------
# Facts file format (line-delimited JSON)
# ---------------------------------------------------------------------------

def record_to_json(rec: ApiRecord) -> dict:
    return {
        "signature": render_signature(rec.signature),
        "level": rec.level,
        "body": rec.body,
        "annotations": list(rec.annotations),
        "comment": rec.comment,
        "throws": list(rec.throws_types),
        "file": rec.file,
        "line": rec.line,
    }


def record_from_json(d: dict) -> ApiRecord:
    return ApiRecord(
        signature=normalize_signature(d["signature"]),
        level=int(d["level"]),
        body=d.get("body", ""),
        annotations=tuple(d.get("annotations", ())),
        comment=d.get("comment", ""),
        throws_types=tuple(d.get("throws", ())),
        file=d.get("file", ""),
        line=int(d.get("line", 0)),
    )


def write_facts(records: list[ApiRecord], path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec)) + "\n")


def read_facts(path: Path) -> list[ApiRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_json(json.loads(line)))
    return records
