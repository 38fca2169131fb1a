"""Tiny arithmetic expression grammar for scenario coefficients.

Operators + - * / ^ (right-associative power), unary minus, parentheses, the
functions exp, sin, cos, tanh, the constants pi and e, and a caller-supplied
set of variables (t and x1..xd for coefficients, t and u for reaction terms).
Unknown identifiers are rejected at parse time with position info.  Compiled
closures evaluate vectorized over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from .errors import ParseError

__all__ = ["compile_expression", "Expression"]

_FUNCTIONS = {"exp": np.exp, "sin": np.sin, "cos": np.cos, "tanh": np.tanh}
_CONSTANTS = {"pi": np.pi, "e": np.e}


@dataclass(frozen=True)
class _Token:
    kind: str  # num | ident | op | lparen | rparen | end
    text: str
    pos: int


def _tokenize(src: str):
    out = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c.isspace():
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            seen_e = False
            while j < n and (src[j].isdigit() or src[j] == "."
                             or (src[j] in "eE" and not seen_e)
                             or (src[j] in "+-" and j > i and src[j - 1] in "eE")):
                if src[j] in "eE":
                    seen_e = True
                j += 1
            out.append(_Token("num", src[i:j], i))
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            out.append(_Token("ident", src[i:j], i))
            i = j
            continue
        if c in "+-*/^":
            out.append(_Token("op", c, i))
            i += 1
            continue
        if c == "(":
            out.append(_Token("lparen", c, i))
            i += 1
            continue
        if c == ")":
            out.append(_Token("rparen", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", line=1, col=i + 1)
    out.append(_Token("end", "", n))
    return out


class _Parser:
    def __init__(self, src: str, variables: Tuple[str, ...]):
        self.src = src
        self.tokens = _tokenize(src)
        self.k = 0
        self.variables = set(variables)

    def peek(self) -> _Token:
        return self.tokens[self.k]

    def next(self) -> _Token:
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind: str, text=None) -> _Token:
        tok = self.next()
        if tok.kind != kind or (text is not None and tok.text != text):
            raise ParseError(
                f"expected {text or kind}, found {tok.text or 'end of input'}",
                line=1, col=tok.pos + 1)
        return tok

    # expr := term (('+'|'-') term)*
    def expr(self):
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            op = self.next().text
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in "*/":
            op = self.next().text
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        if self.peek().kind == "op" and self.peek().text == "-":
            self.next()
            return ("neg", self.unary())
        if self.peek().kind == "op" and self.peek().text == "+":
            self.next()
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek().kind == "op" and self.peek().text == "^":
            self.next()
            return ("pow", base, self.unary())  # right associative
        return base

    def atom(self):
        tok = self.next()
        if tok.kind == "num":
            try:
                return ("const", float(tok.text))
            except ValueError:
                raise ParseError(f"bad number {tok.text!r}", line=1, col=tok.pos + 1)
        if tok.kind == "ident":
            name = tok.text
            if self.peek().kind == "lparen":
                if name not in _FUNCTIONS:
                    raise ParseError(f"unknown function {name!r}", line=1, col=tok.pos + 1)
                self.next()
                arg = self.expr()
                self.expect("rparen")
                return ("call", name, arg)
            if name in _CONSTANTS:
                return ("const", _CONSTANTS[name])
            if name in self.variables:
                return ("var", name)
            raise ParseError(
                f"unknown identifier {name!r} (variables here: "
                f"{sorted(self.variables)})", line=1, col=tok.pos + 1)
        if tok.kind == "lparen":
            node = self.expr()
            self.expect("rparen")
            return node
        raise ParseError(f"unexpected {tok.text or 'end of input'}", line=1, col=tok.pos + 1)

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"trailing input {tok.text!r}", line=1, col=tok.pos + 1)
        return node


def _evaluate(node, env: Dict[str, np.ndarray]):
    op = node[0]
    if op == "const":
        return node[1]
    if op == "var":
        return env[node[1]]
    if op == "neg":
        return -_evaluate(node[1], env)
    if op == "call":
        return _FUNCTIONS[node[1]](_evaluate(node[2], env))
    a = _evaluate(node[1], env)
    b = _evaluate(node[2], env)
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    if op == "div":
        return a / b
    return np.power(a, b)


@dataclass(frozen=True)
class Expression:
    """Parsed expression: callable with keyword variables, plus its source."""

    source: str
    variables: Tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "_ast", _Parser(self.source, self.variables).parse())

    def __call__(self, **env):
        missing = [v for v in self.variables if v not in env]
        if missing:
            raise ParseError(f"missing variables {missing} when evaluating {self.source!r}")
        return _evaluate(self._ast, env)


def compile_expression(source: str, variables) -> Expression:
    """Parse once, reuse many times; raises ParseError with position info."""
    return Expression(str(source), tuple(variables))
