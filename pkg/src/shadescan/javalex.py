"""A small Java lexer.

Produces every token including whitespace and comments, with offsets, so
callers can either drop trivia (clone detection) or splice text back in
place (POV import rewriting).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from shadescan.errors import LexError

KEYWORDS = frozenset(
    """abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized this
    throw throws transient try void volatile while true false null""".split()
)

WS = "ws"
COMMENT = "comment"
KEYWORD = "keyword"
IDENT = "ident"
LITERAL = "literal"
PUNCT = "punct"

_OPERATORS = sorted(
    """>>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= &= |= ^= %=
    << >> ( ) { } [ ] ; , . @ = > < ! ~ ? : + - * / & | ^ %""".split(),
    key=len,
    reverse=True,
)

_MASTER = re.compile(
    r"""
    (?P<ws>[ \t\f\r\n]+)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<open_comment>/\*)
  | (?P<text_block>\"\"\"[ \t\f]*\r?\n(?:[^\\]|\\.)*?\"\"\")
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<char>'(?:[^'\\\n]|\\.)+')
  | (?P<number>
        0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?[0-9_]+)?[lLfFdD]?
      | 0[bB][01_]+[lL]?
      | (?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9][0-9_]*)(?:[eE][+-]?[0-9_]+)?[lLfFdD]?
    )
  | (?P<ident>(?:[^\W\d]|\$)(?:\w|\$)*)
  | (?P<op>"""
    + "|".join(re.escape(op) for op in _OPERATORS)
    + ")",
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    start: int

    @property
    def end(self) -> int:
        return self.start + len(self.text)


def tokenize(source: str) -> list[Token]:
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        m = _MASTER.match(source, pos)
        if m is None:
            raise LexError(f"unexpected character {source[pos]!r}", pos)
        group = m.lastgroup
        text = m.group()
        if group == "open_comment":
            raise LexError("unterminated comment", pos)
        if group == "ws":
            kind = WS
        elif group in ("line_comment", "block_comment"):
            kind = COMMENT
        elif group in ("text_block", "string", "char", "number"):
            kind = LITERAL
        elif group == "ident":
            kind = KEYWORD if text in KEYWORDS else IDENT
        else:
            kind = PUNCT
        tokens.append(Token(kind, text, pos))
        pos = m.end()
    return tokens


def significant(tokens: list[Token]) -> list[Token]:
    return [t for t in tokens if t.kind not in (WS, COMMENT)]


def qualified_chains(tokens: list[Token]) -> list[tuple[int, int]]:
    """Index ranges ``[i, j)`` into ``tokens`` of maximal ``a.b.C`` identifier chains.

    ``tokens`` must already be free of whitespace and comments. A chain is
    an identifier not preceded by ``.``, followed by ``.identifier`` pairs.
    """
    chains = []
    i = 0
    n = len(tokens)
    while i < n:
        tok = tokens[i]
        if tok.kind == IDENT and not (i > 0 and tokens[i - 1].text == "."):
            j = i + 1
            while j + 1 < n and tokens[j].text == "." and tokens[j + 1].kind == IDENT:
                j += 2
            if j > i + 1:
                chains.append((i, j))
            i = j
        else:
            i += 1
    return chains
