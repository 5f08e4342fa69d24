"""OSC address pattern matching.

Supported tokens: ``?`` any one character, ``*`` any run of characters,
``[abc]`` / ``[a-z]`` / ``[!...]`` character classes and ``{foo,bar}``
alternation. No wildcard ever matches ``/``; only a literal ``/`` (which may
sit inside an alternative) does.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from .codec import OscError


class MalformedPattern(OscError):
    pass


@dataclass(frozen=True)
class _Class:
    items: tuple[tuple[str, str], ...]
    negate: bool

    def matches(self, c: str) -> bool:
        if c == "/":
            return False
        hit = any(lo <= c <= hi for lo, hi in self.items)
        return hit != self.negate


_ANY = "?"
_STAR = "*"


def _parse_class(pattern: str, i: int) -> tuple[_Class, int]:
    close = pattern.find("]", i + 1)
    if close < 0:
        raise MalformedPattern(f"unterminated '[' at {i} in {pattern!r}")
    body = pattern[i + 1:close]
    negate = body.startswith("!")
    if negate:
        body = body[1:]
    items = []
    j = 0
    while j < len(body):
        if j + 2 < len(body) and body[j + 1] == "-":
            items.append((body[j], body[j + 2]))
            j += 3
        else:
            items.append((body[j], body[j]))
            j += 1
    return _Class(tuple(items), negate), close + 1


@lru_cache(maxsize=1024)
def compile_pattern(pattern: str) -> tuple:
    """Tokenize a pattern into literals, ``?``, ``*``, classes and alternations."""
    tokens: list = []
    i = 0
    while i < len(pattern):
        c = pattern[i]
        if c == "?":
            tokens.append(_ANY)
            i += 1
        elif c == "*":
            if not tokens or tokens[-1] is not _STAR:
                tokens.append(_STAR)
            i += 1
        elif c == "[":
            cls, i = _parse_class(pattern, i)
            tokens.append(cls)
        elif c == "{":
            close = pattern.find("}", i + 1)
            if close < 0:
                raise MalformedPattern(f"unterminated '{{' at {i} in {pattern!r}")
            tokens.append(tuple(pattern[i + 1:close].split(",")))
            i = close + 1
        else:
            tokens.append(c)
            i += 1
    return tuple(tokens)


def match_address(pattern: str, address: str) -> bool:
    """True if the OSC ``address`` is matched by ``pattern``."""
    if not pattern.startswith("/") or not address.startswith("/"):
        raise MalformedPattern("pattern and address must start with '/'")
    tokens = compile_pattern(pattern)
    n = len(address)

    @lru_cache(maxsize=None)
    def go(t: int, p: int) -> bool:
        if t == len(tokens):
            return p == n
        tok = tokens[t]
        if tok is _STAR:
            q = p
            while True:
                if go(t + 1, q):
                    return True
                if q == n or address[q] == "/":
                    return False
                q += 1
        if isinstance(tok, tuple):
            return any(address.startswith(alt, p) and go(t + 1, p + len(alt)) for alt in tok)
        if p == n:
            return False
        c = address[p]
        if tok is _ANY:
            ok = c != "/"
        elif isinstance(tok, _Class):
            ok = tok.matches(c)
        else:
            ok = c == tok
        return ok and go(t + 1, p + 1)

    return go(0, 0)
