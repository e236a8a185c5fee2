"""Tokenizer for the supported Solidity subset."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from ..errors import LexError

KEYWORDS = frozenset(
    """
    pragma import contract interface library abstract is function constructor modifier
    fallback receive event emit returns return if else for while do break continue
    public external internal private pure view payable constant immutable virtual override
    memory storage calldata indexed anonymous mapping struct enum error using new delete
    assembly unchecked try catch revert true false
    """.split()
)

ELEMENTARY_TYPES = frozenset(
    ["address", "bool", "string", "bytes", "byte", "int", "uint", "fixed", "ufixed"]
    + [f"uint{n}" for n in range(8, 257, 8)]
    + [f"int{n}" for n in range(8, 257, 8)]
    + [f"bytes{n}" for n in range(1, 33)]
)

UNITS = frozenset(
    ["wei", "gwei", "szabo", "finney", "ether", "seconds", "minutes", "hours", "days", "weeks", "years"]
)

_PUNCT = sorted(
    """
    >>>= >>= <<= ** == != <= >= && || ++ -- += -= *= /= %= |= &= ^= => -> << >>
    + - * / % < > = ! ~ & | ^ ? : ; , . ( ) [ ] { }
    """.split(),
    key=len,
    reverse=True,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>(?:hex|unicode)?"(?:[^"\\\n]|\\.)*"|(?:hex|unicode)?'(?:[^'\\\n]|\\.)*')
  | (?P<number>0[xX][0-9a-fA-F_]+|(?:\d[\d_]*)?\.?\d[\d_]*(?:[eE]-?\d+)?)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<punct>"""
    + "|".join(re.escape(p) for p in _PUNCT)
    + r""")
  | (?P<unknown>.)
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, number, string, punct, unknown, eof
    text: str
    start: int
    end: int

    def is_(self, *texts: str) -> bool:
        return self.text in texts and self.kind in ("ident", "punct")


def decode(text: Union[str, bytes]) -> str:
    if isinstance(text, bytes):
        try:
            return text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise LexError(f"source is not valid UTF-8: {exc}") from exc
    return text


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        if m is None:  # unterminated block comment
            break
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), m.start(), m.end()))
        pos = m.end()
    tokens.append(Token("eof", "", n, n))
    return tokens
