"""Differentiation, substitution and a few structural queries."""

from __future__ import annotations

from fractions import Fraction

from .core import (
    ONE,
    ZERO,
    Add,
    Const,
    Expr,
    Func,
    Mul,
    Pow,
    Symbol,
    add,
    as_expr,
    cos,
    ln,
    mul,
    power,
    rebuild,
    sin,
)


def diff(e: Expr, var: str, n: int = 1) -> Expr:
    """n-th partial derivative of ``e`` with respect to the symbol named ``var``."""
    if isinstance(var, Symbol):
        var = var.name
    for _ in range(n):
        e = _diff(as_expr(e), var, {})
    return e


def _diff(e: Expr, var: str, memo: dict) -> Expr:
    if var not in e.free_symbols:
        return ZERO
    hit = memo.get(e)
    if hit is not None:
        return hit
    if isinstance(e, Symbol):
        out = ONE
    elif isinstance(e, Add):
        out = add(*[_diff(t, var, memo) for t in e.terms])
    elif isinstance(e, Mul):
        parts = []
        fs = e.factors
        for k, f in enumerate(fs):
            df = _diff(f, var, memo)
            if df is ZERO or df == ZERO:
                continue
            parts.append(mul(df, *fs[:k], *fs[k + 1 :]))
        out = add(*parts)
    elif isinstance(e, Pow):
        b, x = e.base, e.exp
        db = _diff(b, var, memo)
        if var not in x.free_symbols:
            out = mul(x, power(b, add(x, -1)), db)
        else:
            dx = _diff(x, var, memo)
            out = mul(e, add(mul(dx, ln(b)), mul(x, db, power(b, -1))))
    elif isinstance(e, Func):
        a = e.arg
        da = _diff(a, var, memo)
        if e.name == "sin":
            out = mul(cos(a), da)
        elif e.name == "cos":
            out = mul(-1, sin(a), da)
        elif e.name == "exp":
            out = mul(e, da)
        elif e.name == "ln":
            out = mul(da, power(a, -1))
        else:
            raise ValueError(e.name)
    else:
        raise TypeError(type(e))
    memo[e] = out
    return out


def subs(e: Expr, mapping: dict) -> Expr:
    """Replace symbols by expressions. Keys are names or Symbols."""
    m = {}
    for k, v in mapping.items():
        m[k.name if isinstance(k, Symbol) else k] = as_expr(v)
    return _subs(as_expr(e), m, {})


def _subs(e: Expr, m: dict, memo: dict) -> Expr:
    if not (e.free_symbols & m.keys()):
        return e
    hit = memo.get(e)
    if hit is not None:
        return hit
    if isinstance(e, Symbol):
        out = m[e.name]
    else:
        out = rebuild(e, [_subs(a, m, memo) for a in e.args])
    memo[e] = out
    return out


def replace(e: Expr, fn) -> Expr:
    """Bottom-up rewrite: ``fn(node)`` returns a replacement or None."""
    memo: dict = {}

    def go(x):
        hit = memo.get(x)
        if hit is not None:
            return hit
        y = rebuild(x, [go(a) for a in x.args]) if x.args else x
        r = fn(y)
        out = y if r is None else r
        memo[x] = out
        return out

    return go(as_expr(e))


def terms(e: Expr) -> tuple:
    return e.terms if isinstance(e, Add) else (e,)


def polynomial_coeffs(e: Expr, var: str) -> dict:
    """Coefficients of ``e`` as a polynomial in ``var`` (non-negative integer powers).

    Raises ValueError if ``var`` appears any other way.
    """
    out: dict[int, list] = {}
    for t in terms(as_expr(e)):
        deg = 0
        rest = []
        fs = t.factors if isinstance(t, Mul) else (t,)
        for f in fs:
            if isinstance(f, Symbol) and f.name == var:
                deg += 1
            elif (
                isinstance(f, Pow)
                and isinstance(f.base, Symbol)
                and f.base.name == var
                and isinstance(f.exp, Const)
                and isinstance(f.exp.value, Fraction)
                and f.exp.value.denominator == 1
                and f.exp.value > 0
            ):
                deg += int(f.exp.value)
            elif var in f.free_symbols:
                raise ValueError(f"not polynomial in {var}: {f}")
            else:
                rest.append(f)
        out.setdefault(deg, []).append(mul(*rest))
    return {d: add(*v) for d, v in sorted(out.items())}


def count_nodes(e: Expr) -> int:
    seen = set()
    stack = [e]
    while stack:
        x = stack.pop()
        if x in seen:
            continue
        seen.add(x)
        stack.extend(x.args)
    return len(seen)
