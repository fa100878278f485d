"""Antiderivatives for the handful of term shapes met in gauge reconstruction."""

from __future__ import annotations

from fractions import Fraction
from math import comb

from .calculus import diff, subs, terms
from .core import ONE, ZERO, Const, Expr, Func, Mul, Pow, Symbol, add, as_expr, cos, ln, mul, power, sin


class NotIntegrableError(ValueError):
    pass



def _linear_in(e: Expr, var: str):
    d = diff(e, var)
    if var in d.free_symbols or d == ZERO:
        return None
    return subs(e, {var: 0}), d


def integrate(e, var: str) -> Expr:
    """Antiderivative in ``var`` for sums of simple terms.

    Supported factors (times anything free of ``var``): ``var^n``,
    ``(a + b var)^r``, ``var^n (a + b var)^r`` with integer ``n >= 0``, and
    ``sin``/``cos``/``exp`` of an affine argument.
    """
    out = []
    for tm in terms(as_expr(e)):
        out.append(_integrate_term(tm, var))
    return add(*out)


def _integrate_term(tm: Expr, var: str) -> Expr:
    fs = tm.factors if isinstance(tm, Mul) else (tm,)
    const = [f for f in fs if var not in f.free_symbols]
    moving = [f for f in fs if var in f.free_symbols]
    c = mul(*const)
    X = Symbol(var)
    if not moving:
        return mul(c, X)
    n = 0
    other = []
    for f in moving:
        if f == X:
            n += 1
        elif isinstance(f, Pow) and f.base == X and isinstance(f.exp, Const):
            ev = f.exp.value
            if isinstance(ev, Fraction) and ev.denominator == 1 and ev > 0:
                n += int(ev)
            else:
                other.append(f)
        else:
            other.append(f)
    if not other:
        return mul(c, _int_power(X, X, Fraction(n), ONE))
    if len(other) > 1:
        c, other = _merge_affine_powers(c, other, var)
    if len(other) != 1:
        raise NotIntegrableError(f"cannot integrate {tm} in {var}")
    f = other[0]
    if isinstance(f, Pow) and f.base == X:
        if n:
            raise NotIntegrableError(f"cannot integrate {tm} in {var}")
        return mul(c, _int_power(X, X, f.exp, ONE))
    if isinstance(f, Pow):
        lin = _linear_in(f.base, var)
        if lin is None or var in f.exp.free_symbols:
            raise NotIntegrableError(f"cannot integrate {tm} in {var}")
        a, b = lin
        # x^n (a + b x)^r with x = (w - a)/b
        parts = []
        for j in range(n + 1):
            coef = mul(comb(n, j), power(mul(-1, a), n - j), power(b, -n))
            parts.append(mul(coef, _int_power(f.base, X, add(f.exp, j), b)))
        return mul(c, add(*parts))
    if isinstance(f, Func) and n == 0:
        lin = _linear_in(f.arg, var)
        if lin is None:
            raise NotIntegrableError(f"cannot integrate {tm} in {var}")
        _, b = lin
        if f.name == "sin":
            return mul(-1, c, cos(f.arg), power(b, -1))
        if f.name == "cos":
            return mul(c, sin(f.arg), power(b, -1))
        if f.name == "exp":
            return mul(c, f, power(b, -1))
    if isinstance(f, Func) and f.name in ("sin", "cos", "exp") and n > 0:
        # integrate by parts: x^n g = x^n G - n x^(n-1) G
        G = _integrate_term(f, var)
        return mul(c, add(mul(power(X, n), G), mul(-n, integrate(mul(power(X, n - 1), G), var))))
    raise NotIntegrableError(f"cannot integrate {tm} in {var}")


def _merge_affine_powers(c, factors, var):
    """Rewrite powers of proportional affine bases onto one base.

    ``(rho B)^r`` becomes ``rho^r B^r``, which holds for the positive ratios
    met on real sampling domains; callers verify the final antiderivative.
    """
    ref = None
    out = []
    acc = []
    for f in factors:
        if not isinstance(f, Pow):
            out.append(f)
            continue
        lin = _linear_in(f.base, var)
        if lin is None:
            out.append(f)
            continue
        if ref is None:
            ref = (f.base, lin)
            acc.append(f.exp)
            continue
        a1, b1 = ref[1]
        a2, b2 = lin
        rho = mul(b2, power(b1, -1))
        if add(a2, mul(-1, rho, a1)) != ZERO:
            out.append(f)
            continue
        c = mul(c, power(rho, f.exp))
        acc.append(f.exp)
    if ref is not None:
        merged = power(ref[0], add(*acc))
        if merged != ONE:
            out.append(merged)
    return c, out


def _int_power(base: Expr, X: Expr, r, slope) -> Expr:
    """Antiderivative of base^r where base is affine in X with the given slope."""
    r = as_expr(r)
    if r == Const(-1):
        return mul(ln(base), power(slope, -1))
    r1 = add(r, 1)
    return mul(power(base, r1), power(mul(r1, slope), -1))
