"""Statement-level tokenizer for DSS circuit description files.

Turns raw text into a list of :class:`DssStatement`. Handles ``!`` and ``//``
comments, ``~`` line continuations, quoted strings, and bracketed or
parenthesized composite values that contain whitespace.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class DssParseError(ValueError):
    """Raised for malformed DSS input text."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


KNOWN_VERBS = ("new", "edit", "set", "redirect", "compile")


@dataclass
class DssStatement:
    """One logical statement after comment stripping and continuation joining.

    ``properties`` preserves source order; keys are lowercased identifiers or
    integer positional indices (0-based, resolved against the per-class
    property order later). ``raw`` keeps the joined source text.
    """

    verb: str
    object_class: str = ""
    object_name: str = ""
    properties: list[tuple[str | int, str]] = field(default_factory=list)
    raw: str = ""
    line: int = 0


def _strip_comment(line: str, lineno: int) -> str:
    """Remove ! and // comments, respecting quoted strings."""
    out = []
    quote: str | None = None
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if quote is not None:
            out.append(ch)
            if ch == quote:
                quote = None
            i += 1
            continue
        if ch in ('"', "'"):
            quote = ch
            out.append(ch)
            i += 1
            continue
        if ch == "!":
            break
        if ch == "/" and i + 1 < n and line[i + 1] == "/":
            break
        out.append(ch)
        i += 1
    if quote is not None:
        raise DssParseError(f"unterminated quote: {line.strip()!r}", lineno)
    return "".join(out)


def _split_fields(text: str, lineno: int) -> list[str]:
    """Split a statement body into fields.

    Whitespace and top-level commas separate fields. Quotes, square brackets
    and parentheses group characters (including spaces) into one field, so
    ``rmatrix=[1 | 2 3]`` and ``kvs=(12.47, 4.16)`` stay intact.
    """
    fields: list[str] = []
    buf: list[str] = []
    depth = 0
    quote: str | None = None
    for ch in text:
        if quote is not None:
            buf.append(ch)
            if ch == quote:
                quote = None
            continue
        if ch in ('"', "'"):
            quote = ch
            buf.append(ch)
            continue
        if ch in "([":
            depth += 1
            buf.append(ch)
            continue
        if ch in ")]":
            depth -= 1
            if depth < 0:
                raise DssParseError(f"unbalanced bracket in {text.strip()!r}", lineno)
            buf.append(ch)
            continue
        if (ch.isspace() or ch == ",") and depth == 0:
            if buf:
                fields.append("".join(buf))
                buf = []
            continue
        buf.append(ch)
    if depth != 0:
        raise DssParseError(f"unbalanced bracket in {text.strip()!r}", lineno)
    if quote is not None:
        raise DssParseError(f"unterminated quote in {text.strip()!r}", lineno)
    if buf:
        fields.append("".join(buf))
    return _merge_assignment_fields(fields)


def _merge_assignment_fields(fields: list[str]) -> list[str]:
    # tolerate whitespace around '=': rejoin "key", "=", "value" and
    # "key=", "value" and "key", "=value" into single key=value fields
    merged: list[str] = []
    i = 0
    while i < len(fields):
        f = fields[i]
        if f == "=" and merged and i + 1 < len(fields):
            merged[-1] = merged[-1] + "=" + fields[i + 1]
            i += 2
            continue
        if f.endswith("=") and len(f) > 1 and i + 1 < len(fields):
            merged.append(f + fields[i + 1])
            i += 2
            continue
        if f.startswith("=") and len(f) > 1 and merged and "=" not in merged[-1]:
            merged[-1] = merged[-1] + f
            i += 1
            continue
        merged.append(f)
        i += 1
    return merged


def _unquote(text: str) -> str:
    t = text.strip()
    for q in ('"', "'"):
        if len(t) >= 2 and t.startswith(q) and t.endswith(q):
            return t[1:-1]
    return t


def _parse_statement(body: str, lineno: int) -> DssStatement:
    fields = _split_fields(body, lineno)
    if not fields:
        raise DssParseError("empty statement", lineno)
    head = fields[0].lower()

    if head in ("redirect", "compile"):
        if len(fields) != 2:
            raise DssParseError(f"{head} expects exactly one file path", lineno)
        return DssStatement(
            verb="redirect",
            properties=[("file", _unquote(fields[1]))],
            raw=body.strip(),
            line=lineno,
        )

    if head == "set":
        stmt = DssStatement(verb="set", raw=body.strip(), line=lineno)
        for f in fields[1:]:
            if "=" not in f:
                raise DssParseError(f"set option must be key=value, got {f!r}", lineno)
            k, v = f.split("=", 1)
            stmt.properties.append((k.strip().lower(), _unquote(v)))
        return stmt

    if head in ("new", "edit"):
        if len(fields) < 2 or "=" in fields[1]:
            raise DssParseError(f"{head} requires a Class.Name target", lineno)
        target = _unquote(fields[1])
        if "." not in target:
            raise DssParseError(f"object reference must be Class.Name, got {target!r}", lineno)
        cls, name = target.split(".", 1)
        stmt = DssStatement(
            verb=head,
            object_class=cls.lower(),
            object_name=name,
            raw=body.strip(),
            line=lineno,
        )
        positional = 0
        for f in fields[2:]:
            if "=" in f:
                k, v = f.split("=", 1)
                key = k.strip().lower()
                if not key:
                    raise DssParseError(f"empty property name in {f!r}", lineno)
                stmt.properties.append((key, _unquote(v)))
            else:
                stmt.properties.append((positional, _unquote(f)))
                positional += 1
        return stmt

    return DssStatement(verb="other", raw=body.strip(), line=lineno)


def tokenize(text: str) -> list[DssStatement]:
    """Tokenize DSS source text into statements.

    A leading ``~`` continues the previous statement with more properties.
    Raises :class:`DssParseError` for a dangling ``~`` with no statement to
    continue, or for unterminated quotes.
    """
    # First pass: strip comments, join continuations into logical statements.
    logical: list[tuple[str, int]] = []
    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        stripped = _strip_comment(raw_line, lineno)
        body = stripped.strip()
        if not body:
            continue
        if body.startswith("~"):
            if not logical:
                raise DssParseError("continuation '~' with no preceding statement", lineno)
            prev_body, prev_line = logical[-1]
            logical[-1] = (prev_body + " " + body[1:].strip(), prev_line)
        else:
            logical.append((body, lineno))

    statements = []
    for body, lineno in logical:
        stmt = _parse_statement(body, lineno)
        if stmt.verb in ("new", "edit"):
            # Continuation properties belong to the object, so re-split the
            # joined body; nothing extra to do because joining happened on
            # text before field splitting.
            pass
        statements.append(stmt)
    return statements
