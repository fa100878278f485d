"""Render expressions back into the input grammar.

The output parses to a structurally identical tree, so it doubles as the
canonical sort key for terms and factors.
"""

from __future__ import annotations

from fractions import Fraction

from .core import MAX_EXPAND_POWER, Add, Const, Func, Mul, Pow, Symbol

_ADD, _MUL, _POW, _ATOM = 1, 2, 3, 4


def _real_str(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        return f"{v.numerator}/{v.denominator}"
    return repr(float(v))


def _const(v):
    """Return (text, precedence) for a number."""
    if isinstance(v, complex):
        re, im = v.real, v.imag
        im_txt = "i" if im == 1 else f"{abs(im)!r}*i"
        if re == 0:
            if im == 1:
                return "i", _ATOM
            if im == -1:
                return "-i", _MUL
            return (f"{im!r}*i", _MUL)
        sign = "-" if im < 0 else "+"
        if abs(im) == 1:
            im_txt = "i"
        return f"({re!r} {sign} {im_txt})", _ATOM
    txt = _real_str(v)
    if v < 0:
        return txt, _MUL
    if isinstance(v, Fraction) and v.denominator != 1:
        return txt, _MUL
    return txt, _ATOM


def _negative(v) -> bool:
    return not isinstance(v, complex) and v < 0


def _wrap(txt: str, prec: int, need: int) -> str:
    return f"({txt})" if prec < need else txt


def _render(e):
    if isinstance(e, Const):
        return _const(e.value)
    if isinstance(e, Symbol):
        return e.name, _ATOM
    if isinstance(e, Func):
        return f"{e.name}({_render(e.arg)[0]})", _ATOM
    if isinstance(e, Pow):
        return _render_pow(e.base, e.exp), _POW
    if isinstance(e, Mul):
        return _render_mul(e)
    if isinstance(e, Add):
        parts = []
        for k, t in enumerate(e.terms):
            if k > 0 and isinstance(t, Mul) and isinstance(t.factors[0], Const):
                c = t.factors[0].value
                if _negative(c):
                    parts.append(" - " + _wrap(*_render(_negated(t)), _MUL))
                    continue
            if k > 0 and isinstance(t, Const) and _negative(t.value):
                parts.append(" - " + _const(-t.value)[0])
                continue
            txt, prec = _render(t)
            if k > 0:
                parts.append(" + " + _wrap(txt, prec, _MUL if not txt.startswith("-") else _ATOM))
            else:
                parts.append(txt)
        return "".join(parts), _ADD
    raise TypeError(type(e))


def _negated(t: Mul):
    c = -t.factors[0].value
    rest = t.factors[1:]
    if c == 1:
        return rest[0] if len(rest) == 1 else Mul(rest)
    return Mul((Const(c),) + rest)


def _render_pow(base, exp) -> str:
    btxt, bprec = _render(base)
    if isinstance(exp, Const) and isinstance(exp.value, Fraction) and exp.value.denominator == 1 and exp.value > 0:
        etxt = str(exp.value.numerator)
    else:
        etxt = f"({_render(exp)[0]})"
    if bprec < _ATOM:
        btxt = f"({btxt})"
    return f"{btxt}^{etxt}"


def _expands_when_inverted(f) -> bool:
    """``(a + b)^-n`` must not print as ``/(a + b)^n``: parsing would expand the sum."""
    if not (isinstance(f, Pow) and isinstance(f.base, Add) and isinstance(f.exp, Const)):
        return False
    v = f.exp.value
    return isinstance(v, Fraction) and v.denominator == 1 and -MAX_EXPAND_POWER <= v < -1


def _render_mul(e: Mul):
    factors = list(e.factors)
    coeff = None
    if isinstance(factors[0], Const):
        coeff = factors.pop(0).value
    num, den = [], []
    for f in factors:
        if _expands_when_inverted(f):
            num.append(_wrap(*_render(f), _POW))
        elif isinstance(f, Pow) and isinstance(f.exp, Const) and _negative(f.exp.value):
            den.append(_render_pow(f.base, Const(-f.exp.value)) if f.exp.value != -1 else _wrap(*_render(f.base), _POW))
        else:
            num.append(_wrap(*_render(f), _POW))
    prefix = ""
    if coeff is not None:
        if coeff == -1:
            prefix = "-"
        else:
            ctxt, cprec = _const(coeff)
            if cprec < _MUL or (isinstance(coeff, Fraction) and coeff.denominator != 1):
                ctxt = f"({ctxt})"
            num.insert(0, ctxt)
    txt = "*".join(num) if num else "1"
    if den:
        txt += "/" + ("/".join(den))
    return prefix + txt, _MUL


def render(e) -> str:
    return _render(e)[0]
