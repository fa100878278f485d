"""Recursive-descent parser for the expression grammar.

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := number | name | name '(' expr (',' expr)* ')' | '(' expr ')'

``i`` is the imaginary unit and ``pi`` is pi. Integers parse to exact
rationals, decimals to floats.
"""

from __future__ import annotations

import re
from fractions import Fraction

from . import core
from .core import PI, Const, I, Symbol

DEFAULT_PARAMS = frozenset({"k", "w", "A", "delta", "alpha", "beta", "gamma", "E"})
FUNCTION_ARITY = {"sin": 1, "cos": 1, "exp": 1, "ln": 1, "sqrt": 1, "pow": 2}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+|\d+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


class ExprSyntaxError(ValueError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownFunctionError(ExprSyntaxError):
    def __init__(self, name: str, offset: int):
        super().__init__(f"unknown function {name!r}", offset)
        self.name = name


def _tokenize(text: str):
    pos = 0
    out = []
    while True:
        while pos < len(text) and text[pos].isspace():
            pos += 1
        if pos >= len(text):
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        out.append((kind, m.group(kind), start))
        pos = m.end()
    out.append(("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str, params):
        self.tokens = _tokenize(text)
        self.i = 0
        self.params = params

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, op):
        kind, val, pos = self.take()
        if val != op or kind != "op":
            raise ExprSyntaxError(f"expected {op!r}", pos)

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {val!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self):
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self):
        kind, val, _ = self.peek()
        if kind == "op" and val in ("+", "-"):
            self.take()
            e = self.unary()
            return -e if val == "-" else e
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.take()
            return core.power(base, self.unary())
        return base

    def atom(self):
        kind, val, pos = self.take()
        if kind == "num":
            if re.fullmatch(r"\d+", val):
                return Const(Fraction(int(val)))
            return Const(float(val))
        if kind == "name":
            if self.peek()[0] == "op" and self.peek()[1] == "(":
                return self.call(val, pos)
            if val == "i":
                return I
            if val == "pi":
                return PI
            return Symbol(val, is_param=val in self.params)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        if kind == "end":
            raise ExprSyntaxError("unexpected end of input", pos)
        raise ExprSyntaxError(f"unexpected {val!r}", pos)

    def call(self, name, pos):
        if name not in FUNCTION_ARITY:
            raise UnknownFunctionError(name, pos)
        self.expect("(")
        args = [self.expr()]
        while self.peek()[0] == "op" and self.peek()[1] == ",":
            self.take()
            args.append(self.expr())
        self.expect(")")
        if len(args) != FUNCTION_ARITY[name]:
            raise ExprSyntaxError(f"{name} takes {FUNCTION_ARITY[name]} argument(s)", pos)
        if name == "pow":
            return core.power(*args)
        return core.func(name, args[0])


def parse(text: str, params=DEFAULT_PARAMS) -> core.Expr:
    """Parse ``text`` into a normalized expression.

    Names listed in ``params`` are marked as parameters; every other name
    becomes a variable.
    """
    return _Parser(text, frozenset(params)).parse()
