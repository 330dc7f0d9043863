"""A small s-expression reader that keeps source positions.

Supports lists, symbols, integers, floats, double-quoted strings, ``'x``
quoting (read as ``(quote x)``) and ``;`` line comments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

from planx.errors import ParseError

LIST = "list"
SYMBOL = "symbol"
NUMBER = "number"
STRING = "string"

_DELIMS = "()'\";"


@dataclass
class Form:
    kind: str
    value: Union[str, int, float, list["Form"]]
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    @property
    def is_list(self) -> bool:
        return self.kind == LIST

    def is_symbol(self, name: str | None = None) -> bool:
        if self.kind != SYMBOL:
            return False
        return name is None or self.value == name

    def __repr__(self):
        if self.kind == LIST:
            return "(" + " ".join(map(repr, self.value)) + ")"
        if self.kind == STRING:
            return '"' + str(self.value) + '"'
        return str(self.value)


class _Reader:
    def __init__(self, text: str, fold_case: bool):
        self.text = text
        self.fold_case = fold_case
        self.i = 0
        self.line = 1
        self.col = 1

    def error(self, reason, line=None, col=None):
        raise ParseError(reason, self.line if line is None else line, self.col if col is None else col)

    def advance(self, n=1):
        for _ in range(n):
            if self.text[self.i] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.i += 1

    def skip_ws(self):
        text = self.text
        while self.i < len(text):
            c = text[self.i]
            if c == ";":
                while self.i < len(text) and text[self.i] != "\n":
                    self.advance()
            elif c.isspace():
                self.advance()
            else:
                break

    def at_end(self) -> bool:
        self.skip_ws()
        return self.i >= len(self.text)

    def read(self) -> Form:
        self.skip_ws()
        if self.i >= len(self.text):
            self.error("unexpected end of input")
        line, col = self.line, self.col
        c = self.text[self.i]
        if c == "(":
            self.advance()
            items = []
            while True:
                self.skip_ws()
                if self.i >= len(self.text):
                    self.error("unbalanced parenthesis", line, col)
                if self.text[self.i] == ")":
                    self.advance()
                    return Form(LIST, items, line, col)
                items.append(self.read())
        if c == ")":
            self.error("unbalanced parenthesis")
        if c == "'":
            self.advance()
            quoted = self.read()
            return Form(LIST, [Form(SYMBOL, "quote", line, col), quoted], line, col)
        if c == '"':
            return self.read_string(line, col)
        return self.read_atom(line, col)

    def read_string(self, line, col) -> Form:
        self.advance()
        out = []
        while True:
            if self.i >= len(self.text):
                self.error("unterminated string", line, col)
            c = self.text[self.i]
            if c == '"':
                self.advance()
                return Form(STRING, "".join(out), line, col)
            if c == "\\" and self.i + 1 < len(self.text):
                self.advance()
                c = self.text[self.i]
            out.append(c)
            self.advance()

    def read_atom(self, line, col) -> Form:
        start = self.i
        while self.i < len(self.text) and not self.text[self.i].isspace() and self.text[self.i] not in _DELIMS:
            self.advance()
        tok = self.text[start:self.i]
        # "inf" and "nan" stay symbols
        if any(ch.isdigit() for ch in tok):
            for conv in (int, float):
                try:
                    return Form(NUMBER, conv(tok), line, col)
                except ValueError:
                    pass
        return Form(SYMBOL, tok.lower() if self.fold_case else tok, line, col)


def read_all(text: str, fold_case: bool = True) -> list[Form]:
    """Read every top-level form in ``text``."""
    reader = _Reader(text, fold_case)
    forms = []
    while not reader.at_end():
        forms.append(reader.read())
    return forms


def read_one(text: str, fold_case: bool = True) -> Form:
    forms = read_all(text, fold_case)
    if len(forms) != 1:
        raise ParseError(f"expected exactly one form, found {len(forms)}", 1, 1)
    return forms[0]
