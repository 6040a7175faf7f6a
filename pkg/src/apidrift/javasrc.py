"""Comment- and string-aware scanning helpers for Java-like source text.

Everything downstream (method extraction, body normalization, guard detection)
relies on these views instead of parsing Java properly: a brace or semicolon
only counts when it appears in actual code, never inside a literal or comment.
"""

from __future__ import annotations

from dataclasses import dataclass

CODE = "code"
LINE_COMMENT = "line_comment"
BLOCK_COMMENT = "block_comment"
STRING = "string"
CHAR = "char"

COMMENT_KINDS = (LINE_COMMENT, BLOCK_COMMENT)
LITERAL_KINDS = (STRING, CHAR)


@dataclass(frozen=True)
class Region:
    kind: str
    start: int
    end: int  # exclusive


def scan_regions(text: str) -> list[Region]:
    """Split text into code / comment / literal regions, in source order."""
    regions: list[Region] = []
    n = len(text)
    i = 0
    seg_start = 0

    def flush_code(upto: int) -> None:
        if upto > seg_start:
            regions.append(Region(CODE, seg_start, upto))

    while i < n:
        c = text[i]
        nxt = text[i + 1] if i + 1 < n else ""
        if c == "/" and nxt == "/":
            flush_code(i)
            j = text.find("\n", i)
            j = n if j == -1 else j
            regions.append(Region(LINE_COMMENT, i, j))
            i = seg_start = j
        elif c == "/" and nxt == "*":
            flush_code(i)
            j = text.find("*/", i + 2)
            j = n if j == -1 else j + 2
            regions.append(Region(BLOCK_COMMENT, i, j))
            i = seg_start = j
        elif c == '"' or c == "'":
            flush_code(i)
            quote = c
            j = i + 1
            while j < n:
                if text[j] == "\\":
                    j += 2
                    continue
                if text[j] == quote:
                    j += 1
                    break
                j += 1
            j = min(j, n)
            regions.append(Region(STRING if quote == '"' else CHAR, i, j))
            i = seg_start = j
        else:
            i += 1
    flush_code(n)
    return regions


@dataclass
class SourceViews:
    """The original text plus two masked renderings of it.

    code:      comments and literal interiors blanked (newlines kept), so
               structural characters can be matched positionally.
    nocomment: only comments blanked; literals intact.
    """

    text: str
    code: str
    nocomment: str
    comments: list[Region]


def build_views(text: str) -> SourceViews:
    code = list(text)
    nocomment = list(text)
    comments: list[Region] = []
    for r in scan_regions(text):
        if r.kind in COMMENT_KINDS:
            comments.append(r)
            for k in range(r.start, r.end):
                if text[k] != "\n":
                    code[k] = " "
                    nocomment[k] = " "
        elif r.kind in LITERAL_KINDS:
            # Keep the delimiters so tokens stay separated; blank the interior.
            last = r.end - 1 if r.end > r.start and text[r.end - 1] in "\"'" else r.end
            for k in range(r.start + 1, last):
                if text[k] != "\n":
                    code[k] = " "
    return SourceViews(text, "".join(code), "".join(nocomment), comments)


def match_brace(code: str, open_idx: int, end: int | None = None) -> int:
    """Index of the '}' matching code[open_idx]; -1 when unbalanced."""
    return _match(code, open_idx, "{", "}", end)


def match_paren(code: str, open_idx: int, end: int | None = None) -> int:
    """Index of the ')' matching code[open_idx]; -1 when unbalanced."""
    return _match(code, open_idx, "(", ")", end)


def _match(code: str, open_idx: int, opener: str, closer: str, end: int | None) -> int:
    limit = len(code) if end is None else end
    depth = 0
    for i in range(open_idx, limit):
        c = code[i]
        if c == opener:
            depth += 1
        elif c == closer:
            depth -= 1
            if depth == 0:
                return i
    return -1


def skip_to_semicolon(code: str, start: int, end: int) -> int:
    """Index of the next ';' at bracket depth zero, or end.

    Used to jump over field initializers, which may contain array
    initializers and anonymous classes with whole method bodies.
    """
    depth = 0
    i = start
    while i < end:
        c = code[i]
        if c in "({[":
            depth += 1
        elif c in ")}]":
            depth -= 1
        elif c == ";" and depth <= 0:
            return i
        i += 1
    return end


def line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, offset) + 1
