"""Multi-label classification of a retained-changed pair, by statement-facet
diffing of the normalized bodies, plus the textual AST rendering used as an
optional prompt input.

Facets are compared as multisets of normalized statement texts rather than as
positional diffs: formatting noise never flags, while any textual difference
inside a facet does. Pure statement reordering falls into the residual bucket.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum

from . import javasrc
from .errors import InputError
from .extraction import ApiRecord, ApiSignature

__all__ = [
    "ChangeType", "ChangeReport", "normalize_body", "classify_change",
    "to_ast_text", "parse_change_type",
]


class ChangeType(Enum):
    RETURN = "Return Statement Changed"
    EXCEPTION = "Exception Handling Statement Changed"
    CONTROL = "Control Dependency Changed"
    OTHER = "Other Statement Changed"
    DEPENDENT = "Dependent API Changed"
    NO_CHANGE = "No Change"


_BY_CANONICAL = {ct.value.lower(): ct for ct in ChangeType}


def parse_change_type(name: str) -> ChangeType | None:
    """Case-insensitive lookup against the canonical names only."""
    return _BY_CANONICAL.get(name.strip().lower())


@dataclass(frozen=True)
class ChangeReport:
    signature: ApiSignature
    boundary: tuple[int, int]
    change_types: frozenset[ChangeType]
    evidence: tuple[tuple[ChangeType, str, str], ...] = ()


def normalize_body(body: str) -> str:
    """Strip comments (string-literal-aware), collapse whitespace runs."""
    parts = []
    for r in javasrc.scan_regions(body):
        seg = body[r.start:r.end]
        parts.append(" " if r.kind in javasrc.COMMENT_KINDS else seg)
    joined = "".join(parts)
    out = []
    for r in javasrc.scan_regions(joined):
        seg = joined[r.start:r.end]
        out.append(re.sub(r"\s+", " ", seg) if r.kind == javasrc.CODE else seg)
    return "".join(out).strip()


# ---------------------------------------------------------------------------
# Statement segmentation (brace/semicolon-driven, literal-aware)
# ---------------------------------------------------------------------------

CONTROL_KINDS = ("if", "for", "while", "do", "switch")
_SIMPLE_KINDS = ("return", "throw", "simple")
_WORD_RE = re.compile(r"[A-Za-z_$][\w$]*")


@dataclass
class Stmt:
    kind: str                 # return|throw|simple | if|for|while|do|switch|try|block
    text: str                 # normalized source slice, ';' trimmed on simple kinds
    header: str = ""          # condition text for controls; '' otherwise
    blocks: tuple = ()        # (name, body_text, [child Stmts]) per sub-block


class _Cursor:
    def __init__(self, s: str):
        self.s = s
        self.code = javasrc.build_views(s).code

    def skip_ws(self, i: int) -> int:
        while i < len(self.s) and self.code[i].isspace():
            i += 1
        return i

    def word_at(self, i: int) -> str:
        m = _WORD_RE.match(self.code, i)
        return m.group(0) if m else ""


def parse_statements(normalized_body: str) -> list[Stmt]:
    """Top-level statements of a normalized body; total, never raises."""
    cur = _Cursor(normalized_body)
    i = cur.skip_ws(0)
    if i < len(cur.s) and cur.code[i] == "{":
        close = javasrc.match_brace(cur.code, i)
        if close != -1:
            return _parse_region(cur, i + 1, close, in_switch=False)
    return _parse_region(cur, i, len(cur.s), in_switch=False)


def _parse_region(cur: _Cursor, i: int, end: int, in_switch: bool) -> list[Stmt]:
    stmts: list[Stmt] = []
    while True:
        i = cur.skip_ws(i)
        if i >= end:
            return stmts
        if cur.code[i] == ";":
            i += 1
            continue
        if in_switch:
            w = cur.word_at(i)
            if w in ("case", "default"):
                j = i + len(w)
                while j < end and cur.code[j] != ":":
                    j += 1
                i = j + 1
                continue
        st, i = _parse_stmt(cur, i, end)
        if st is None:
            return stmts
        stmts.append(st)


def _block_or_single(cur: _Cursor, i: int, end: int, in_switch=False):
    """Parse either a braced block or a single statement as a sub-block.

    Returns (body_text, children, next_index).
    """
    i = cur.skip_ws(i)
    if i < end and cur.code[i] == "{":
        close = javasrc.match_brace(cur.code, i, end)
        if close == -1:
            close = end - 1
        children = _parse_region(cur, i + 1, close, in_switch)
        return cur.s[i + 1:close].strip(), children, close + 1
    st, nxt = _parse_stmt(cur, i, end)
    if st is None:
        return "", [], end
    return st.text, [st], nxt


def _parse_stmt(cur: _Cursor, i: int, end: int):
    s, code = cur.s, cur.code
    start = i
    if code[i] == "{":
        close = javasrc.match_brace(code, i, end)
        if close == -1:
            close = end - 1
        children = _parse_region(cur, i + 1, close, False)
        return Stmt("block", s[i:close + 1],
                    blocks=(("block", s[i + 1:close].strip(), children),)), close + 1

    w = cur.word_at(i)

    if w == "if":
        return _parse_if(cur, i, end)
    if w in ("for", "while", "switch", "synchronized"):
        j = cur.skip_ws(i + len(w))
        if j < end and code[j] == "(":
            close_p = javasrc.match_paren(code, j, end)
            if close_p != -1:
                header = s[j + 1:close_p].strip()
                body, children, nxt = _block_or_single(
                    cur, close_p + 1, end, in_switch=(w == "switch"))
                kind = w if w != "synchronized" else "block"
                blocks = ((("body", body, children),) if w != "synchronized"
                          else (("block", body, children),))
                return Stmt(kind, s[start:nxt].strip(), header=header, blocks=blocks), nxt
    if w == "do":
        body, children, nxt = _block_or_single(cur, i + 2, end)
        j = cur.skip_ws(nxt)
        header = ""
        if cur.word_at(j) == "while":
            j = cur.skip_ws(j + 5)
            if j < end and code[j] == "(":
                close_p = javasrc.match_paren(code, j, end)
                if close_p != -1:
                    header = s[j + 1:close_p].strip()
                    nxt = close_p + 1
                    if nxt < end and code[nxt] == ";":
                        nxt += 1
        return Stmt("do", s[start:nxt].strip(), header=header,
                    blocks=(("body", body, children),)), nxt
    if w == "try":
        return _parse_try(cur, i, end)

    # Simple statement: scan to ';' at depth zero.
    depth = 0
    j = i
    while j < end:
        c = code[j]
        if c in "({[":
            depth += 1
        elif c in ")}]":
            depth -= 1
        elif c == ";" and depth <= 0:
            break
        j += 1
    text = s[i:j].strip()
    nxt = j + 1 if j < end else end
    if not text:
        return None, nxt
    kind = "return" if w == "return" else "throw" if w == "throw" else "simple"
    return Stmt(kind, text), nxt


def _parse_if(cur: _Cursor, i: int, end: int):
    s, code = cur.s, cur.code
    start = i
    j = cur.skip_ws(i + 2)
    if j >= end or code[j] != "(":
        return Stmt("simple", s[i:end].strip()), end
    close_p = javasrc.match_paren(code, j, end)
    if close_p == -1:
        return Stmt("simple", s[i:end].strip()), end
    header = s[j + 1:close_p].strip()
    then_body, then_children, nxt = _block_or_single(cur, close_p + 1, end)
    blocks = [("then", then_body, then_children)]
    k = cur.skip_ws(nxt)
    if k < end and cur.word_at(k) == "else":
        else_body, else_children, nxt = _block_or_single(cur, k + 4, end)
        blocks.append(("else", else_body, else_children))
    return Stmt("if", s[start:nxt].strip(), header=header, blocks=tuple(blocks)), nxt


def _parse_try(cur: _Cursor, i: int, end: int):
    s, code = cur.s, cur.code
    start = i
    j = cur.skip_ws(i + 3)
    resource = ""
    if j < end and code[j] == "(":  # try-with-resources
        close_p = javasrc.match_paren(code, j, end)
        if close_p != -1:
            resource = s[j + 1:close_p].strip()
            j = cur.skip_ws(close_p + 1)
    blocks = []
    body, children, nxt = _block_or_single(cur, j, end)
    blocks.append(("try" + (f"({resource})" if resource else ""), body, children))
    while True:
        k = cur.skip_ws(nxt)
        w = cur.word_at(k)
        if w == "catch":
            p = cur.skip_ws(k + 5)
            param = ""
            if p < end and code[p] == "(":
                close_p = javasrc.match_paren(code, p, end)
                if close_p != -1:
                    param = s[p + 1:close_p].strip()
                    p = close_p + 1
            body, children, nxt = _block_or_single(cur, p, end)
            blocks.append((f"catch({param})", body, children))
        elif w == "finally":
            body, children, nxt = _block_or_single(cur, k + 7, end)
            blocks.append(("finally", body, children))
        else:
            break
    return Stmt("try", s[start:nxt].strip(), blocks=tuple(blocks)), nxt


# ---------------------------------------------------------------------------
# Facet extraction
# ---------------------------------------------------------------------------

_CALL_RE = re.compile(r"((?:[A-Za-z_$][\w$]*(?:\(\))?\.)*)([A-Za-z_$][\w$]*)\s*\(")
_NON_CALL_WORDS = frozenset((
    "if", "for", "while", "switch", "catch", "return", "throw", "new",
    "synchronized", "do", "else", "try", "assert", "this", "super",
))


@dataclass
class BodyFacets:
    returns: Counter = field(default_factory=Counter)
    throws: Counter = field(default_factory=Counter)
    try_clauses: Counter = field(default_factory=Counter)
    catch_type_lists: Counter = field(default_factory=Counter)
    control_headers: Counter = field(default_factory=Counter)
    control_bodies: Counter = field(default_factory=Counter)
    calls: Counter = field(default_factory=Counter)
    simple_stmts: Counter = field(default_factory=Counter)      # (text, kind)
    stmt_flags: dict = field(default_factory=dict)  # (text, kind) -> [under_control, under_try]


def catch_types(param: str) -> tuple[str, ...]:
    """Exception types of a catch parameter, multi-catch split on '|'."""
    decl = param.rsplit(None, 1)[0] if " " in param.strip() else param
    return tuple(t.strip() for t in decl.split("|") if t.strip())


def body_facets(normalized_body: str) -> BodyFacets:
    facets = BodyFacets()
    _collect(parse_statements(normalized_body), False, False, facets)
    code = javasrc.build_views(normalized_body).code
    for m in _CALL_RE.finditer(code):
        name = m.group(2)
        if name in _NON_CALL_WORDS:
            continue
        receiver = m.group(1).rstrip(".")
        close = javasrc.match_paren(code, m.end() - 1)
        argc = 0
        if close != -1:
            inner = code[m.end():close]
            if inner.strip():
                argc = len(_split_args(inner))
        facets.calls[(receiver, name, argc)] += 1
    return facets


def _split_args(s: str) -> list[str]:
    parts = []
    depth = 0
    buf = []
    for ch in s:
        if ch in "([{<":
            depth += 1
        elif ch in ")]}>":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    parts.append("".join(buf))
    return parts


def _collect(stmts: list[Stmt], under_control: bool, under_try: bool,
             facets: BodyFacets) -> None:
    for st in stmts:
        if st.kind in _SIMPLE_KINDS:
            key = (st.text, st.kind)
            facets.simple_stmts[key] += 1
            flags = facets.stmt_flags.setdefault(key, [False, False])
            flags[0] = flags[0] or under_control
            flags[1] = flags[1] or under_try
            if st.kind == "return":
                facets.returns[st.text] += 1
            elif st.kind == "throw":
                facets.throws[st.text] += 1
        elif st.kind in CONTROL_KINDS:
            facets.control_headers[(st.kind, st.header)] += 1
            for name, body_text, children in st.blocks:
                facets.control_bodies[(st.kind, st.header, name, body_text)] += 1
                _collect(children, True, under_try, facets)
        elif st.kind == "try":
            for name, body_text, children in st.blocks:
                facets.try_clauses[(name, body_text)] += 1
                if name.startswith("catch("):
                    facets.catch_type_lists[catch_types(name[6:-1])] += 1
                _collect(children, under_control, True, facets)
        else:  # plain or synchronized block
            for _, _, children in st.blocks:
                _collect(children, under_control, under_try, facets)


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------

def _diff_sides(a: Counter, b: Counter) -> tuple[list, list]:
    only_a = sorted((a - b).elements(), key=repr)
    only_b = sorted((b - a).elements(), key=repr)
    return only_a, only_b


def _snippet(elems: list) -> str:
    return "; ".join(e if isinstance(e, str) else " | ".join(map(str, e)) for e in elems)


def classify_change(old: ApiRecord, new: ApiRecord,
                    corpus_changed_keys: set | None = None) -> ChangeReport:
    """Compute the multi-label change-type set for a same-identity pair.

    corpus_changed_keys optionally enables the corpus-assisted dependent-API
    mode: a callee whose own record changed at this boundary also counts.
    """
    if old.signature.key != new.signature.key:
        raise InputError(
            f"identity mismatch: {old.signature.key} vs {new.signature.key}")
    boundary = (old.level, new.level)
    old_n, new_n = normalize_body(old.body), normalize_body(new.body)
    rt_changed = old.signature.return_type != new.signature.return_type
    throws_changed = sorted(old.throws_types) != sorted(new.throws_types)

    if old_n == new_n and not rt_changed and not throws_changed:
        return ChangeReport(old.signature, boundary,
                            frozenset((ChangeType.NO_CHANGE,)))

    f_old, f_new = body_facets(old_n), body_facets(new_n)
    types: set[ChangeType] = set()
    evidence: list[tuple[ChangeType, str, str]] = []

    body_fired = False

    ret_old, ret_new = _diff_sides(f_old.returns, f_new.returns)
    if ret_old or ret_new:
        types.add(ChangeType.RETURN)
        body_fired = True
        evidence.append((ChangeType.RETURN, _snippet(ret_old), _snippet(ret_new)))
    if rt_changed:
        types.add(ChangeType.RETURN)
        evidence.append((ChangeType.RETURN,
                         f"return type {old.signature.return_type}",
                         f"return type {new.signature.return_type}"))

    exc_pairs = [
        _diff_sides(f_old.throws, f_new.throws),
        _diff_sides(f_old.try_clauses, f_new.try_clauses),
        _diff_sides(f_old.catch_type_lists, f_new.catch_type_lists),
    ]
    for o, n in exc_pairs:
        if o or n:
            types.add(ChangeType.EXCEPTION)
            body_fired = True
            evidence.append((ChangeType.EXCEPTION, _snippet(o), _snippet(n)))
    if throws_changed:
        types.add(ChangeType.EXCEPTION)
        evidence.append((ChangeType.EXCEPTION,
                         f"throws {', '.join(old.throws_types)}",
                         f"throws {', '.join(new.throws_types)}"))

    hdr_old, hdr_new = _diff_sides(f_old.control_headers, f_new.control_headers)
    bod_old, bod_new = _diff_sides(f_old.control_bodies, f_new.control_bodies)
    if hdr_old or hdr_new or bod_old or bod_new:
        types.add(ChangeType.CONTROL)
        body_fired = True
        evidence.append((ChangeType.CONTROL,
                         _snippet(hdr_old) or _snippet(bod_old),
                         _snippet(hdr_new) or _snippet(bod_new)))

    removed_calls, added_calls = _diff_sides(f_old.calls, f_new.calls)
    dep_pairs = _dependent_pairs(removed_calls, added_calls)
    if corpus_changed_keys:
        # Corpus-assisted mode: a callee whose own record changed at this
        # boundary marks the caller as dependent on a changed API.
        own_key = old.signature.key
        for recv, name, argc in sorted(set(f_old.calls) | set(f_new.calls)):
            hits = any(k[1] == name and len(k[2]) == argc and k != own_key
                       for k in corpus_changed_keys)
            if hits:
                dep_pairs.append(((recv, name, argc),
                                  ("changed-at-boundary", name, argc)))
    if dep_pairs:
        types.add(ChangeType.DEPENDENT)
        body_fired = True
        evidence.append((ChangeType.DEPENDENT,
                         _snippet([p[0] for p in dep_pairs]),
                         _snippet([p[1] for p in dep_pairs])))

    dep_names = {c[1] for pair in dep_pairs for c in pair}
    stmts_old, stmts_new = _diff_sides(f_old.simple_stmts, f_new.simple_stmts)
    unattributed_old = [t for t in stmts_old
                        if not _attributed(t, f_old.stmt_flags, types, dep_names)]
    unattributed_new = [t for t in stmts_new
                        if not _attributed(t, f_new.stmt_flags, types, dep_names)]
    bodies_differ = old_n != new_n
    if bodies_differ and (unattributed_old or unattributed_new or not body_fired):
        types.add(ChangeType.OTHER)
        evidence.append((ChangeType.OTHER,
                         _snippet([t[0] for t in unattributed_old]) or old_n,
                         _snippet([t[0] for t in unattributed_new]) or new_n))

    return ChangeReport(old.signature, boundary, frozenset(types), tuple(evidence))


def _attributed(stmt_item: tuple[str, str], flags: dict, types: set[ChangeType],
                dep_names: set[str]) -> bool:
    text, kind = stmt_item
    under_control, under_try = flags.get(stmt_item, (False, False))
    if kind == "return" and ChangeType.RETURN in types:
        return True
    if kind == "throw" and ChangeType.EXCEPTION in types:
        return True
    if under_control and ChangeType.CONTROL in types:
        return True
    if under_try and ChangeType.EXCEPTION in types:
        return True
    if ChangeType.DEPENDENT in types and any(
            re.search(rf"\b{re.escape(n)}\s*\(", text) for n in dep_names):
        return True
    return False


def _dependent_pairs(removed: list, added: list) -> list:
    """Removed/added call pairs sharing a name at different arity, or the
    same non-empty receiver with a different method name."""
    pairs = []
    for rc in removed:
        for ac in added:
            same_name_diff_argc = rc[1] == ac[1] and rc[2] != ac[2]
            same_recv_diff_name = rc[0] == ac[0] and rc[0] != "" and rc[1] != ac[1]
            if same_name_diff_argc or same_recv_diff_name:
                pairs.append((rc, ac))
    return pairs


# ---------------------------------------------------------------------------
# AST text rendering
# ---------------------------------------------------------------------------

_ASSIGN_RE = re.compile(r"(?<![=!<>+\-*/%&|^])=(?!=)")


@dataclass
class _Node:
    kind: str
    payload: str
    children: tuple


def _render(node: _Node) -> str:
    inner = ", ".join(_render(c) for c in node.children)
    return f"{node.kind}({node.payload}, [{inner}])"


def _stmt_node(st: Stmt) -> _Node:
    if st.kind in _SIMPLE_KINDS:
        split = _top_level_assign(st.text)
        if split is not None:
            left, right = split
            return _Node("AssignmentExpression", "=", (
                _Node("VariableReference", left, ()),
                _Node("Expression", right, ()),
            ))
        return _Node("Statement", st.text, ())
    return _Node("Statement", st.text, ())


def _top_level_assign(text: str) -> tuple[str, str] | None:
    code = javasrc.build_views(text).code
    for m in _ASSIGN_RE.finditer(code):
        i = m.start()
        if code.count("(", 0, i) - code.count(")", 0, i) == 0 \
                and code.count("[", 0, i) - code.count("]", 0, i) == 0 \
                and code.count("{", 0, i) - code.count("}", 0, i) == 0:
            left = text[:i].strip()
            right = text[i + 1:].strip()
            if left and right:
                return left, right
            return None
    return None


def to_ast_text(body: str) -> str:
    """Serialize a method body in the ``NodeKind(payload, [children])`` text
    grammar: first the single-line tree, then one indented line per node."""
    stmts = parse_statements(normalize_body(body))
    children = [_Node("Statement", "{", ())]
    children.extend(_stmt_node(st) for st in stmts)
    children.append(_Node("Statement", "}", ()))
    root = _Node("MethodDeclaration", "method_body", tuple(children))
    lines = [_render(root)]

    def expand(node: _Node, depth: int) -> None:
        lines.append("  " * depth + _render(node))
        for c in node.children:
            expand(c, depth + 1)

    for c in root.children:
        expand(c, 1)
    return "\n".join(lines)
