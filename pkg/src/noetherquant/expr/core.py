"""Expression tree nodes and the normal form maintained by the smart constructors.

Every node is immutable and hash-consed by structure. The constructors
``add``, ``mul``, ``power`` and ``func`` keep trees in a canonical shape:

* sums are flat, like monomials are collected and constants are folded;
* products are flat, powers of a common base are merged by adding
  exponents, all ``exp`` factors are merged into one, and products are
  distributed over sums;
* only branch-safe power rules are applied: ``(z^a)^n -> z^(a n)`` and
  ``(a b)^n -> a^n b^n`` for integer ``n`` only.

Constants are ``Fraction`` when exact, otherwise ``float`` or ``complex``.
"""

from __future__ import annotations

import cmath
import math
from fractions import Fraction
from numbers import Number

# sums of float coefficients smaller than this (relative) are treated as zero
CANCEL_RTOL = 1e-13
# largest positive integer power of a sum that is expanded
MAX_EXPAND_POWER = 8

FUNCTIONS = ("sin", "cos", "exp", "ln")


class PoleError(ArithmeticError):
    """Raised when a constant folds to a division by zero or a log of zero."""


def _num(v):
    """Normalize a Python number to Fraction, float or complex."""
    if isinstance(v, bool):
        return Fraction(int(v))
    if isinstance(v, Fraction):
        return v
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, float):
        return v
    if isinstance(v, complex):
        if v.imag == 0:
            return _num(v.real)
        return v
    if isinstance(v, Number):
        return _num(complex(v))
    raise TypeError(f"not a number: {v!r}")


def _is_int(v) -> bool:
    return isinstance(v, Fraction) and v.denominator == 1


def _const_pow(b, e):
    if _is_int(e):
        n = int(e)
        if b == 0 and n < 0:
            raise PoleError("0 raised to a negative power")
        if isinstance(b, Fraction):
            return b ** n
        return _num(complex(b) ** n)
    if b == 0:
        if isinstance(e, (Fraction, float)) and e > 0:
            return Fraction(0)
        raise PoleError("0 raised to a non-positive power")
    if isinstance(b, Fraction) and isinstance(e, Fraction) and b > 0:
        # exact rational root when one exists
        q = e.denominator
        num = round(b.numerator ** (1.0 / q))
        den = round(b.denominator ** (1.0 / q))
        if num ** q == b.numerator and den ** q == b.denominator:
            return Fraction(num, den) ** e.numerator
    if isinstance(b, Fraction) and isinstance(e, Fraction) and b < 0 and (2 * e).denominator == 1:
        # principal branch: (-r)^(m/2) = r^(m/2) * i^m
        return _num(_const_pow(-b, e) * (1j ** int(2 * e)))
    return _num(cmath.exp(complex(e) * cmath.log(complex(b))))


class Expr:
    """Base class. Use the module-level constructors rather than the node classes."""

    __slots__ = ("_free", "_hash", "_key")

    # children in canonical order, overridden by subclasses
    @property
    def args(self) -> tuple:
        return ()

    def __hash__(self):
        return self._hash

    def sort_key(self) -> str:
        if self._key is None:
            from .printing import render

            self._key = render(self)
        return self._key

    @property
    def free_symbols(self) -> frozenset:
        if self._free is None:
            out = set()
            for a in self.args:
                out |= a.free_symbols
            self._free = frozenset(out)
        return self._free

    def has(self, name: str) -> bool:
        return name in self.free_symbols

    def __str__(self):
        return self.sort_key()

    def __repr__(self):
        return f"Expr({self.sort_key()!r})"

    # arithmetic sugar
    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return add(self, mul(-1, o))

    def __rsub__(self, o):
        return add(o, mul(-1, self))

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return mul(self, power(o, -1))

    def __rtruediv__(self, o):
        return mul(o, power(self, -1))

    def __pow__(self, o):
        return power(self, o)

    def __rpow__(self, o):
        return power(o, self)

    def __neg__(self):
        return mul(-1, self)

    def __pos__(self):
        return self


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = _num(value)
        self._hash = hash(("C", self.value))
        self._key = None
        self._free = frozenset()

    __hash__ = Expr.__hash__

    def __eq__(self, o):
        return isinstance(o, Const) and self.value == o.value


class Symbol(Expr):
    """A named variable or parameter. Equality is by name only."""

    __slots__ = ("is_param", "name")

    def __init__(self, name: str, is_param: bool = False):
        self.name = name
        self.is_param = is_param
        self._hash = hash(("S", name))
        self._key = None
        self._free = frozenset((name,))

    __hash__ = Expr.__hash__

    def __eq__(self, o):
        return isinstance(o, Symbol) and self.name == o.name


class Add(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple):
        self.terms = terms
        self._hash = hash(("+",) + terms)
        self._key = None
        self._free = None

    @property
    def args(self):
        return self.terms

    __hash__ = Expr.__hash__

    def __eq__(self, o):
        return isinstance(o, Add) and self._hash == o._hash and self.terms == o.terms


class Mul(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple):
        self.factors = factors
        self._hash = hash(("*",) + factors)
        self._key = None
        self._free = None

    @property
    def args(self):
        return self.factors

    __hash__ = Expr.__hash__

    def __eq__(self, o):
        return isinstance(o, Mul) and self._hash == o._hash and self.factors == o.factors


class Pow(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: Expr):
        self.base = base
        self.exp = exp
        self._hash = hash(("^", base, exp))
        self._key = None
        self._free = None

    @property
    def args(self):
        return (self.base, self.exp)

    __hash__ = Expr.__hash__

    def __eq__(self, o):
        return (
            isinstance(o, Pow)
            and self._hash == o._hash
            and self.base == o.base
            and self.exp == o.exp
        )


class Func(Expr):
    __slots__ = ("arg", "name")

    def __init__(self, name: str, arg: Expr):
        self.name = name
        self.arg = arg
        self._hash = hash(("f", name, arg))
        self._key = None
        self._free = None

    @property
    def args(self):
        return (self.arg,)

    __hash__ = Expr.__hash__

    def __eq__(self, o):
        return (
            isinstance(o, Func)
            and self._hash == o._hash
            and self.name == o.name
            and self.arg == o.arg
        )


ZERO = Const(0)
ONE = Const(1)
I = Const(1j)
PI = Const(math.pi)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        from .parse import parse

        return parse(x)
    return Const(x)


def sym(name: str) -> Symbol:
    return Symbol(name)


def param(name: str) -> Symbol:
    return Symbol(name, is_param=True)


def is_const(e: Expr) -> bool:
    return isinstance(e, Const)


def is_zero_const(e: Expr) -> bool:
    return isinstance(e, Const) and e.value == 0


# ---------------------------------------------------------------------------
# decomposition helpers


def split_coeff(e: Expr):
    """Return (number, monomial) with ``e == number * monomial``."""
    if isinstance(e, Const):
        return e.value, ONE
    if isinstance(e, Mul) and isinstance(e.factors[0], Const):
        rest = e.factors[1:]
        return e.factors[0].value, rest[0] if len(rest) == 1 else Mul(rest)
    return Fraction(1), e


def base_exp(e: Expr):
    if isinstance(e, Pow):
        return e.base, e.exp
    return e, ONE


def _make_mul(coeff, factors: list) -> Expr:
    factors.sort(key=Expr.sort_key)
    if coeff == 0:
        return ZERO
    if not factors:
        return Const(coeff)
    if coeff == 1:
        return factors[0] if len(factors) == 1 else Mul(tuple(factors))
    return Mul((Const(coeff),) + tuple(factors))


# ---------------------------------------------------------------------------
# smart constructors


def add(*args) -> Expr:
    const = Fraction(0)
    groups: dict[Expr, list] = {}
    order: list[Expr] = []
    stack = [as_expr(a) for a in args]
    while stack:
        a = stack.pop()
        if isinstance(a, Add):
            stack.extend(a.terms)
            continue
        c, m = split_coeff(a)
        if m is ONE or m == ONE:
            const = const + c
            continue
        if m not in groups:
            groups[m] = []
            order.append(m)
        groups[m].append(c)
    terms = []
    for m in order:
        cs = groups[m]
        total = sum(cs[1:], cs[0])
        total = _num(total)
        if total == 0:
            continue
        if not all(isinstance(c, Fraction) for c in cs):
            scale = max(abs(c) for c in cs)
            if abs(total) <= CANCEL_RTOL * scale:
                continue
        if total == 1:
            terms.append(m)
        elif isinstance(m, Mul):
            terms.append(Mul((Const(total),) + m.factors))
        else:
            terms.append(Mul((Const(total), m)))
    const = _num(const)
    terms.sort(key=Expr.sort_key)
    if const != 0:
        terms.insert(0, Const(const))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Add(tuple(terms))


def mul(*args) -> Expr:
    coeff = Fraction(1)
    powers: dict[Expr, list] = {}
    order: list[Expr] = []
    exp_args: list[Expr] = []
    stack = [as_expr(a) for a in args]
    while stack:
        a = stack.pop()
        if isinstance(a, Const):
            coeff = coeff * a.value
            continue
        if isinstance(a, Mul):
            stack.extend(a.factors)
            continue
        if isinstance(a, Func) and a.name == "exp":
            exp_args.append(a.arg)
            continue
        b, e = base_exp(a)
        if b not in powers:
            powers[b] = []
            order.append(b)
        powers[b].append(e)
    coeff = _num(coeff)
    if coeff == 0:
        return ZERO
    factors: list[Expr] = []
    sums: list[Expr] = []
    split: list[Expr] = []
    for b in order:
        es = powers[b]
        e = es[0] if len(es) == 1 else add(*es)
        if is_zero_const(e):
            continue
        if (
            isinstance(b, Add)
            and isinstance(e, Const)
            and _is_int(e.value)
            and 0 < e.value <= MAX_EXPAND_POWER
        ):
            sums.extend([b] * int(e.value))
            continue
        p = power(b, e) if len(es) > 1 else (b if e == ONE else Pow(b, e))
        if isinstance(p, Const):
            coeff = _num(coeff * p.value)
        elif isinstance(p, Add):
            sums.append(p)
        elif isinstance(p, Mul):
            # an integer power of a merged base can split into factors that
            # must merge with the rest again
            split.append(p)
        else:
            factors.append(p)
    if exp_args:
        ex = func("exp", add(*exp_args))
        if isinstance(ex, Const):
            coeff = _num(coeff * ex.value)
        else:
            factors.append(ex)
    if coeff == 0:
        return ZERO
    if split:
        return mul(Const(coeff), *factors, *split, *sums)
    if sums:
        return _distribute(coeff, factors, sums)
    return _make_mul(coeff, factors)


def _distribute(coeff, factors, sums) -> Expr:
    terms = [_make_mul(coeff, list(factors))]
    for s in sums:
        terms = [mul(t, u) for t in terms for u in s.terms]
    return add(*terms)


def power(base, exp) -> Expr:
    b = as_expr(base)
    e = as_expr(exp)
    if isinstance(e, Const):
        ev = e.value
        if ev == 0:
            return ONE
        if ev == 1:
            return b
        if isinstance(b, Const):
            return Const(_const_pow(b.value, ev))
        if _is_int(ev):
            n = int(ev)
            if isinstance(b, Pow):
                return power(b.base, mul(b.exp, n))
            if isinstance(b, Mul):
                return mul(*[power(f, n) for f in b.factors])
            if isinstance(b, Func) and b.name == "exp":
                return func("exp", mul(n, b.arg))
            if isinstance(b, Add) and 1 < n <= MAX_EXPAND_POWER:
                return _distribute(Fraction(1), [], [b] * n)
    if isinstance(b, Const) and b.value == 1:
        return ONE
    if isinstance(b, Const) and b.value == 0 and isinstance(e, Const):
        return Const(_const_pow(0, e.value))
    return Pow(b, e)


def _const_func(name: str, v):
    if name == "exp":
        if v == 0:
            return Fraction(1)
        return _num(cmath.exp(complex(v)))
    if name == "ln":
        if v == 1:
            return Fraction(0)
        if v == 0:
            raise PoleError("log of zero")
        z = complex(v)
        if z.imag == 0:
            z = complex(z.real, 0.0)
        return _num(cmath.log(z))
    if name == "sin":
        if v == 0:
            return Fraction(0)
        return _num(cmath.sin(complex(v)))
    if name == "cos":
        if v == 0:
            return Fraction(1)
        return _num(cmath.cos(complex(v)))
    raise ValueError(f"unknown function {name!r}")


def func(name: str, arg) -> Expr:
    a = as_expr(arg)
    if name == "sqrt":
        return power(a, Fraction(1, 2))
    if name not in FUNCTIONS:
        raise ValueError(f"unknown function {name!r}")
    if isinstance(a, Const):
        return Const(_const_func(name, a.value))
    if name == "exp" and isinstance(a, Func) and a.name == "ln":
        return a.arg
    if name == "exp":
        # exp(c ln z) == z^c holds on the principal branch for any c
        c, m = split_coeff(a)
        if isinstance(m, Func) and m.name == "ln":
            return power(m.arg, c)
    return Func(name, a)


def sin(a):
    return func("sin", a)


def cos(a):
    return func("cos", a)


def exp(a):
    return func("exp", a)


def ln(a):
    return func("ln", a)


def sqrt(a):
    return power(a, Fraction(1, 2))


def rebuild(e: Expr, args) -> Expr:
    """Reconstruct a node of the same kind from new children."""
    if isinstance(e, Add):
        return add(*args)
    if isinstance(e, Mul):
        return mul(*args)
    if isinstance(e, Pow):
        return power(*args)
    if isinstance(e, Func):
        return func(e.name, args[0])
    return e
