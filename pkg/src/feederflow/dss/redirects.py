"""Recursive expansion of Redirect/Compile statements into a flat statement list."""
from __future__ import annotations

import posixpath
from pathlib import Path
from typing import Callable

from .lexer import DssParseError, DssStatement, tokenize


class RedirectCycleError(DssParseError):
    """A Redirect/Compile chain that revisits a file already being expanded."""

    def __init__(self, cycle: list[str]):
        self.cycle = list(cycle)
        super().__init__("redirect cycle: " + " -> ".join(cycle))


def _default_reader(path: str) -> str:
    return Path(path).read_text()


def resolve_redirects(
    entry_path: str,
    file_reader: Callable[[str], str] | None = None,
) -> list[DssStatement]:
    """Tokenize ``entry_path`` and splice in redirected files recursively.

    Relative paths resolve against the directory of the redirecting file.
    ``file_reader`` abstracts file access for tests; it maps a path string to
    file contents. Cycles raise :class:`RedirectCycleError` naming the chain.
    """
    reader = file_reader or _default_reader
    out: list[DssStatement] = []
    _expand(str(entry_path), reader, [], out)
    return out


def _normalize(base_dir: str, target: str) -> str:
    target = target.replace("\\", "/")
    if posixpath.isabs(target) or (len(target) > 1 and target[1] == ":"):
        return posixpath.normpath(target)
    return posixpath.normpath(posixpath.join(base_dir, target))


def _expand(
    path: str,
    reader: Callable[[str], str],
    stack: list[str],
    out: list[DssStatement],
) -> None:
    norm = posixpath.normpath(path.replace("\\", "/"))
    if norm in stack:
        raise RedirectCycleError(stack + [norm])
    try:
        text = reader(norm)
    except FileNotFoundError as exc:
        raise DssParseError(f"cannot read redirected file {norm!r}: {exc}") from exc
    stack.append(norm)
    base_dir = posixpath.dirname(norm)
    try:
        for stmt in tokenize(text):
            if stmt.verb == "redirect":
                target = dict(stmt.properties)["file"]
                _expand(_normalize(base_dir, target), reader, stack, out)
            else:
                out.append(stmt)
    finally:
        stack.pop()
