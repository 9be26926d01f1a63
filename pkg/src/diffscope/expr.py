"""A small arithmetic expression language in one variable ``x``, compiled to
numpy-vectorized callables.

Grammar (``^`` is right-associative and binds tighter than unary minus, so
``-x^2`` is ``-(x^2)`` and ``2^-x`` is ``2^(-x)``)::

    expr  := term (("+" | "-") term)*
    term  := unary (("*" | "/") unary)*
    unary := ("-" | "+") unary | power
    power := atom (("^" | "**") unary)?
    atom  := number | "x" | "pi" | "e" | name "(" expr ("," expr)* ")" | "(" expr ")"

Functions: exp, log, sqrt, abs, sign, pow(a, b).
"""

from __future__ import annotations

import math
import re

import numpy as np

__all__ = ["ExpressionParseError", "Expression", "compile_expression"]


class ExpressionParseError(ValueError):
    pointer = None  # JSON pointer of the offending field, when known

    def __init__(self, message, text, position):
        self.text = text
        self.position = position
        super().__init__(f"{message} at position {position} in {text!r}")


_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>\*\*|[-+*/^(),]))"
)

_FUNCS = {
    "exp": (1, np.exp),
    "log": (1, np.log),
    "sqrt": (1, np.sqrt),
    "abs": (1, np.abs),
    "sign": (1, np.sign),
    "pow": (2, np.power),
}
_CONSTS = {"pi": math.pi, "e": math.e}


def _tokenize(text):
    pos, out = 0, []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            raise ExpressionParseError(f"unexpected character {text[pos:].lstrip()[0]!r}", text, pos + len(text[pos:]) - len(text[pos:].lstrip()))
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, value):
        kind, v, pos = self.take()
        if v != value:
            what = "end of input" if kind == "end" else repr(v)
            raise ExpressionParseError(f"expected {value!r}, found {what}", self.text, pos)

    def parse(self):
        node = self.expr()
        kind, v, pos = self.peek()
        if kind != "end":
            raise ExpressionParseError(f"unexpected {v!r}", self.text, pos)
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = ("add" if op == "+" else "sub", node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = ("mul" if op == "*" else "div", node, rhs)
        return node

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "op" and v in ("-", "+"):
            self.take()
            inner = self.unary()
            return ("neg", inner) if v == "-" else inner
        return self.power()

    def power(self):
        base = self.atom()
        kind, v, _ = self.peek()
        if kind == "op" and v in ("^", "**"):
            self.take()
            return ("pow", base, self.unary())
        return base

    def atom(self):
        kind, v, pos = self.take()
        if kind == "num":
            return ("const", float(v))
        if kind == "name":
            if v == "x":
                return ("x",)
            if v in _CONSTS:
                return ("const", _CONSTS[v])
            if v in _FUNCS:
                arity = _FUNCS[v][0]
                self.expect("(")
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                if len(args) != arity:
                    raise ExpressionParseError(f"{v} takes {arity} argument(s), got {len(args)}", self.text, pos)
                self.expect(")")
                return ("call", v, *args)
            raise ExpressionParseError(f"unknown identifier {v!r}", self.text, pos)
        if kind == "op" and v == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "end" else repr(v)
        raise ExpressionParseError(f"unexpected {what}", self.text, pos)


_BINARY = {"add": np.add, "sub": np.subtract, "mul": np.multiply, "div": np.divide, "pow": np.power}


def _build(node):
    tag = node[0]
    if tag == "x":
        return lambda x: x
    if tag == "const":
        c = node[1]
        return lambda x: np.full_like(x, c)
    if tag == "neg":
        f = _build(node[1])
        return lambda x: -f(x)
    if tag == "call":
        fn = _FUNCS[node[1]][1]
        args = [_build(n) for n in node[2:]]
        return lambda x: fn(*(a(x) for a in args))
    f, g = _build(node[1]), _build(node[2])
    op = _BINARY[tag]
    return lambda x: op(f(x), g(x))


def _uses_x(node):
    return node[0] == "x" or any(isinstance(n, tuple) and _uses_x(n) for n in node[1:])


class Expression:
    """Compiled expression; call with a scalar or array ``x``."""

    def __init__(self, text):
        self.text = text
        self.tree = _Parser(text).parse()
        self.depends_on_x = _uses_x(self.tree)
        self._fn = _build(self.tree)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return self._fn(x)

    def __repr__(self):
        return f"Expression({self.text!r})"


def compile_expression(text) -> Expression:
    if not isinstance(text, str):
        raise ExpressionParseError("expression must be a string", str(text), 0)
    if not text.strip():
        raise ExpressionParseError("empty expression", text, 0)
    return Expression(text)
