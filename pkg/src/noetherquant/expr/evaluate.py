"""Compile expressions to vectorized numpy closures over complex arrays.

Powers and logs use principal branches. A real negative number whose
imaginary part is ``-0.0`` is nudged to ``+0.0`` first so that branch cuts
are approached from above, consistently across numpy versions.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .core import Add, Const, Expr, Func, Mul, PoleError, Pow, Symbol, as_expr

__all__ = ["PoleError", "UnboundNameError", "compile_expr", "eval_numeric", "evaluate"]


class UnboundNameError(KeyError):
    pass


def _clean(z):
    z = np.asarray(z, dtype=complex)
    return np.where(z.imag == 0, z.real + 0j, z)


def _clog(z):
    return np.log(_clean(z))


def _cpow(b, e):
    b = _clean(b)
    return np.exp(e * np.log(b))


_NAMESPACE = {"np": np, "_clog": _clog, "_cpow": _cpow}


def _ipow(txt: str, n: int) -> str:
    if n > 0:
        return f"({txt})**{n}"
    return f"1.0/(({txt})**{-n})"


class _Emitter:
    def __init__(self, names):
        self.names = {n: f"a{k}" for k, n in enumerate(names)}
        self.lines = []
        self.memo = {}
        self.consts = {}

    def const(self, v) -> str:
        c = complex(v)
        key = (c.real, c.imag)
        if key not in self.consts:
            self.consts[key] = f"c{len(self.consts)}"
        return self.consts[key]

    def emit(self, e: Expr) -> str:
        hit = self.memo.get(e)
        if hit is not None:
            return hit
        if isinstance(e, Const):
            return self.const(e.value)
        if isinstance(e, Symbol):
            if e.name not in self.names:
                raise UnboundNameError(e.name)
            return self.names[e.name]
        if isinstance(e, Add):
            txt = " + ".join(self.emit(t) for t in e.terms)
        elif isinstance(e, Mul):
            txt = " * ".join(self.emit(f) for f in e.factors)
        elif isinstance(e, Pow):
            b = self.emit(e.base)
            x = e.exp
            if isinstance(x, Const) and isinstance(x.value, Fraction) and x.value.denominator == 1:
                txt = _ipow(b, int(x.value))
            else:
                txt = f"_cpow({b}, {self.emit(x)})"
        elif isinstance(e, Func):
            a = self.emit(e.arg)
            txt = {
                "sin": f"np.sin({a})",
                "cos": f"np.cos({a})",
                "exp": f"np.exp({a})",
                "ln": f"_clog({a})",
            }[e.name]
        else:
            raise TypeError(type(e))
        var = f"t{len(self.lines)}"
        self.lines.append(f"    {var} = {txt}")
        self.memo[e] = var
        return var


_CACHE: dict = {}


def compile_expr(e, names):
    """Return ``f(*arrays)`` evaluating ``e`` with symbols bound positionally to ``names``."""
    e = as_expr(e)
    names = tuple(names)
    key = (e, names)
    fn = _CACHE.get(key)
    if fn is not None:
        return fn
    em = _Emitter(names)
    out = em.emit(e)
    args = ", ".join(em.names[n] for n in names)
    body = "\n".join(em.lines) if em.lines else "    pass"
    src = f"def _f({args}):\n{body}\n    return {out}\n"
    ns = dict(_NAMESPACE)
    for (re_, im_), cname in em.consts.items():
        ns[cname] = complex(re_, im_)
    exec(src, ns)  # noqa: S102 - source is generated from a trusted tree
    raw = ns["_f"]

    def fn(*arrays):
        with np.errstate(all="ignore"):
            res = raw(*arrays)
        shape = np.broadcast(*arrays).shape if arrays else ()
        return np.broadcast_to(np.asarray(res, dtype=complex), shape).copy() if shape else complex(res)

    if len(_CACHE) > 4096:
        _CACHE.clear()
    _CACHE[key] = fn
    return fn


def evaluate(e, bindings: dict):
    """Vectorized evaluation; ``bindings`` maps names to arrays or scalars."""
    e = as_expr(e)
    missing = e.free_symbols - bindings.keys()
    if missing:
        raise UnboundNameError(", ".join(sorted(missing)))
    names = sorted(e.free_symbols)
    arrays = [np.asarray(bindings[n], dtype=complex) for n in names]
    return compile_expr(e, names)(*arrays)


def eval_numeric(e, point: dict) -> complex:
    """Evaluate at one point. Raises PoleError on a non-finite result."""
    v = complex(evaluate(e, {k: complex(v) for k, v in point.items()}))
    if not (math.isfinite(v.real) and math.isfinite(v.imag)):
        raise PoleError(f"non-finite value at {point}")
    return v
