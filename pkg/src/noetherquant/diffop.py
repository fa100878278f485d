"""Linear differential operators in two variables ``(t, X)``.

An operator is a table ``{(a, b): coefficient}`` meaning
``sum coefficient * d^a/dt^a d^b/dX^b``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from math import comb

import numpy as np

from .expr import (
    ONE,
    ZERO,
    Domain,
    Expr,
    I,
    add,
    as_expr,
    diff,
    evaluate,
    exp,
    max_mismatch,
    mul,
    power,
    sample_values,
    subs,
    zero_mismatch,
)
from .expr.integrate import integrate
from .expr.sampling import _rng

log = logging.getLogger(__name__)

MAX_ORDER = 2


class OrderOverflowError(ArithmeticError):
    """A commutator produced a term above the admissible order."""


@dataclass(frozen=True)
class DiffOp:
    coeffs: dict = field(default_factory=dict)
    t: str = "t"
    x: str = "X"

    @classmethod
    def of(cls, table: dict, t: str = "t", x: str = "X") -> DiffOp:
        clean = {}
        for k, v in table.items():
            v = as_expr(v)
            if v != ZERO:
                clean[tuple(k)] = v
        return cls(clean, t, x)

    @classmethod
    def multiplication(cls, f, t: str = "t", x: str = "X") -> DiffOp:
        return cls.of({(0, 0): f}, t, x)

    def __getitem__(self, idx) -> Expr:
        return self.coeffs.get(tuple(idx), ZERO)

    def order(self) -> int:
        return max((a + b for a, b in self.coeffs), default=0)

    def _like(self, table) -> DiffOp:
        return DiffOp.of(table, self.t, self.x)

    def apply(self, phi) -> Expr:
        phi = as_expr(phi)
        out = []
        for (a, b), c in self.coeffs.items():
            d = phi
            if a:
                d = diff(d, self.t, a)
            if b:
                d = diff(d, self.x, b)
            out.append(mul(c, d))
        return add(*out)

    __call__ = apply

    def __add__(self, o: DiffOp) -> DiffOp:
        table = dict(self.coeffs)
        for k, v in o.coeffs.items():
            table[k] = add(table.get(k, ZERO), v)
        return self._like(table)

    def __neg__(self) -> DiffOp:
        return self.scale(-1)

    def __sub__(self, o: DiffOp) -> DiffOp:
        return self + (-o)

    def scale(self, c) -> DiffOp:
        return self._like({k: mul(c, v) for k, v in self.coeffs.items()})

    def map_coeffs(self, fn) -> DiffOp:
        return self._like({k: fn(v) for k, v in self.coeffs.items()})

    def substitute(self, values: dict) -> DiffOp:
        return self.map_coeffs(lambda c: subs(c, values))

    def __matmul__(self, o: DiffOp) -> DiffOp:
        return compose(self, o)

    def to_table(self) -> dict:
        """Stable serialization: ``{"a,b": "coefficient"}``."""
        return {f"{a},{b}": str(c) for (a, b), c in sorted(self.coeffs.items())}


def compose(A: DiffOp, B: DiffOp) -> DiffOp:
    """``A o B`` by the Leibniz rule."""
    table: dict = {}
    for (a1, a2), ca in A.coeffs.items():
        for (b1, b2), cb in B.coeffs.items():
            for m1 in range(a1 + 1):
                for m2 in range(a2 + 1):
                    d = cb
                    if m1:
                        d = diff(d, A.t, m1)
                    if m2:
                        d = diff(d, A.x, m2)
                    if d == ZERO:
                        continue
                    key = (a1 - m1 + b1, a2 - m2 + b2)
                    term = mul(comb(a1, m1) * comb(a2, m2), ca, d)
                    table.setdefault(key, []).append(term)
    return A._like({k: add(*v) for k, v in table.items()})


def prune(op: DiffOp, dom: Domain | None, rng=None) -> DiffOp:
    """Drop coefficients that vanish on ``dom``."""
    if dom is None:
        return op
    keep = {}
    for k, c in op.coeffs.items():
        if zero_mismatch(c, dom, rng=rng) > 1.0:
            keep[k] = c
    return op._like(keep)


def op_commutator(A: DiffOp, B: DiffOp, dom: Domain | None = None, max_order: int = MAX_ORDER, rng=None) -> DiffOp:
    """``[A, B] = A B - B A`` with numerically vanishing coefficients removed."""
    C = prune(compose(A, B) - compose(B, A), dom, rng)
    if C.order() > max_order:
        raise OrderOverflowError(f"commutator has order {C.order()} > {max_order}")
    return C


# ---------------------------------------------------------------------------
# symmetry generators


@dataclass(frozen=True)
class Generator:
    """Point symmetry ``T d/dt + xi d/dX + f Phi d/dPhi`` of a linear equation."""

    T: Expr
    xi: Expr
    f: Expr
    t: str = "t"
    x: str = "X"

    @classmethod
    def of(cls, T, xi, f, t: str = "t", x: str = "X") -> Generator:
        return cls(as_expr(T), as_expr(xi), as_expr(f), t, x)

    def operator(self) -> DiffOp:
        """Characteristic operator ``f - T d/dt - xi d/dX``."""
        return DiffOp.of({(0, 0): self.f, (1, 0): mul(-1, self.T), (0, 1): mul(-1, self.xi)}, self.t, self.x)

    @classmethod
    def from_operator(cls, op: DiffOp) -> Generator:
        if op.order() > 1:
            raise ValueError("not a first-order operator")
        return cls(mul(-1, op[1, 0]), mul(-1, op[0, 1]), op[0, 0], op.t, op.x)

    def on_solution(self, chi) -> Expr:
        """Coefficient of ``d/dPhi`` in ``[self, chi d/dPhi]``."""
        chi = as_expr(chi)
        return add(mul(self.T, diff(chi, self.t)), mul(self.xi, diff(chi, self.x)), mul(-1, self.f, chi))

    def scale(self, c) -> Generator:
        return Generator(mul(c, self.T), mul(c, self.xi), mul(c, self.f), self.t, self.x)

    def __add__(self, o: Generator) -> Generator:
        return Generator(add(self.T, o.T), add(self.xi, o.xi), add(self.f, o.f), self.t, self.x)

    def substitute(self, values: dict) -> Generator:
        return Generator(subs(self.T, values), subs(self.xi, values), subs(self.f, values), self.t, self.x)


def generator_commutator(a: Generator, b: Generator, dom: Domain | None = None, rng=None) -> Generator:
    """Vector-field bracket, computed as minus the operator commutator."""
    C = op_commutator(a.operator(), b.operator(), dom, max_order=1, rng=rng)
    return Generator.from_operator(-C)


@dataclass
class PdeSymmetry:
    multiplier: Expr | None
    residuals: dict

    @property
    def ok(self) -> bool:
        return self.multiplier is not None


def pde_symmetry(gen: Generator | DiffOp, l: DiffOp, dom: Domain, rng=None) -> PdeSymmetry:
    """Test ``[l, Q] = lambda l`` for the characteristic operator ``Q``.

    ``lambda`` is read off the highest X-derivative slot and then checked on
    every other coefficient.
    """
    rng = _rng(rng)
    Q = gen.operator() if isinstance(gen, Generator) else gen
    C = compose(l, Q) - compose(Q, l)
    lead = (0, max(b for a, b in l.coeffs if a == 0))
    lam = mul(C[lead], power(l[lead], -1))
    residuals = {}
    for key in sorted(set(C.coeffs) | set(l.coeffs)):
        lhs, rhs = C[key], mul(lam, l[key])
        if rhs == ZERO:
            residuals[key] = zero_mismatch(lhs, dom, rng=rng)
        else:
            residuals[key] = max_mismatch(lhs, rhs, dom, rng=rng)
    ok = all(r <= 1.0 for r in residuals.values())
    if ok and lam != ZERO and zero_mismatch(lam, dom, rng=rng) <= 1.0:
        lam = ZERO
    return PdeSymmetry(lam if ok else None, residuals)


def is_pde_symmetry(gen, l: DiffOp, dom: Domain, rng=None) -> Expr | None:
    return pde_symmetry(gen, l, dom, rng).multiplier


# ---------------------------------------------------------------------------
# changes of variables


@dataclass(frozen=True)
class VarChange:
    """Spatial relabeling ``new = forward(old)`` with time untouched."""

    forward: Expr
    old: str
    new: str
    inverse: Expr | None = None

    @classmethod
    def of(cls, forward, old: str, new: str, inverse=None) -> VarChange:
        return cls(as_expr(forward), old, new, None if inverse is None else as_expr(inverse))

    @cached_property
    def jacobian(self) -> Expr:
        return diff(self.forward, self.old)

    def validate(self, dom: Domain, m: int = 40, rng=None) -> None:
        """Raise ``ValueError`` unless the map is strictly monotone and the inverse round-trips."""
        _, (jac,) = sample_values([self.jacobian], dom, m, rng)
        if np.any(np.abs(jac) < 1e-300) or np.any(np.abs(jac.imag) > 1e-9 * np.abs(jac)):
            raise ValueError("jacobian vanishes or is complex on the domain")
        if not (np.all(jac.real > 0) or np.all(jac.real < 0)):
            raise ValueError("change of variables is not monotone on the domain")
        if self.inverse is not None:
            back = subs(self.inverse, {self.new: self.forward})
            if max_mismatch(back, self.old, dom, rng=rng) > 1.0:
                raise ValueError("inverse does not undo the forward map")


def change_vars_pde(l: DiffOp, ch: VarChange, dom: Domain | None = None, rng=None) -> DiffOp:
    """Operator in ``ch.old`` equivalent to ``l`` written in ``ch.new``.

    With ``dom`` (over ``t`` and ``ch.old``) the map is validated and the result
    is checked on test functions: ``(l psi)`` at ``new(old)`` must equal the
    changed operator applied to ``psi(new(old))``.
    """
    if l.x != ch.new:
        raise ValueError(f"operator acts on {l.x!r}, change of variables produces {ch.new!r}")
    out = change_vars(l, ch.forward, ch.old)
    if dom is not None:
        ch.validate(dom, rng=rng)
        for test in (f"exp(i*{l.t})*sin({ch.new})", f"cos(2*{l.t})*exp(-{ch.new}^2/4)"):
            psi = as_expr(test)
            lhs = subs(l.apply(psi), {ch.new: ch.forward})
            rhs = out.apply(subs(psi, {ch.new: ch.forward}))
            if zero_mismatch(add(lhs, mul(-1, rhs)), dom, rng=rng) > 1.0:
                raise ArithmeticError("changed operator disagrees with the chain rule on a test function")
    return out


def change_vars(l: DiffOp, new_of_old, old: str) -> DiffOp:
    """Rewrite ``l`` (in ``l.t`` and ``l.x``) in terms of ``old`` where ``l.x = new_of_old(old)``.

    Time is unchanged, so ``d/dnew = (1/new') d/dold``.
    """
    eta = as_expr(new_of_old)
    d_new = DiffOp.of({(0, 1): power(diff(eta, old), -1)}, l.t, old)
    out = DiffOp({}, l.t, old)
    for (a, b), c in l.coeffs.items():
        term = DiffOp.multiplication(subs(c, {l.x: eta}), l.t, old)
        if a:
            term = compose(term, DiffOp.of({(a, 0): ONE}, l.t, old))
        for _ in range(b):
            term = compose(term, d_new)
        out = out + term
    return out


def gauge_transform(l: DiffOp, factor, dom: Domain | None = None, rng=None) -> DiffOp:
    """``factor^-1 o l o factor``: the operator acting on ``Phi`` where the old unknown is ``factor * Phi``.

    With ``dom`` given, coefficients that cancel numerically are dropped.
    """
    factor = as_expr(factor)
    inner = compose(l, DiffOp.multiplication(factor, l.t, l.x))
    return prune(inner.scale(power(factor, -1)), dom, rng)


def first_derivative_gauge(l: DiffOp) -> Expr:
    """Factor ``exp(-int b/(2a) dX)`` that removes the first X-derivative of ``a d_XX + b d_X + ...``."""
    a, b = l[0, 2], l[0, 1]
    return exp(mul(-1, integrate(mul(b, power(mul(2, a), -1)), l.x)))


@dataclass(frozen=True)
class Factored:
    """``phi = P(s) * base`` with ``P`` a polynomial in a symbol ``var`` and ``s = s(X)``.

    Keeping ``P`` unexpanded avoids the cancellation that a fully multiplied-out
    high-degree expression suffers in floating point.
    """

    poly: Expr
    var: str
    s: Expr
    base: Expr
    t: str = "t"
    x: str = "X"

    def expand(self) -> Expr:
        return mul(subs(self.poly, {self.var: self.s}), self.base)

    @cached_property
    def _parts(self) -> dict:
        if self.s.has(self.t) or self.poly.has(self.t):
            raise ValueError("the polynomial part must not depend on time")
        P = self.poly
        return {
            "P": P, "Ps": diff(P, self.var), "Pss": diff(P, self.var, 2),
            "G": self.base, "Gt": diff(self.base, self.t), "Gx": diff(self.base, self.x),
            "Gxx": diff(self.base, self.x, 2), "sx": diff(self.s, self.x), "sxx": diff(self.s, self.x, 2),
        }

    def derivatives(self, pts: dict) -> dict:
        """Values of ``phi`` and its derivatives up to second order in X, first in t."""
        parts = self._parts
        n = len(next(iter(pts.values())))
        bind = dict(pts)
        bind[self.var] = evaluate(self.s, {k: bind[k] for k in self.s.free_symbols}) if self.s.free_symbols else np.full(n, complex(evaluate(self.s, {})))

        def ev(e):
            if not e.free_symbols:
                return np.full(n, complex(evaluate(e, {})))
            return evaluate(e, {k: bind[k] for k in e.free_symbols})

        v = {k: ev(e) for k, e in parts.items()}
        d_x = v["Ps"] * v["sx"]
        d_xx = v["Pss"] * v["sx"] ** 2 + v["Ps"] * v["sxx"]
        return {
            (0, 0): v["P"] * v["G"],
            (1, 0): v["P"] * v["Gt"],
            (0, 1): d_x * v["G"] + v["P"] * v["Gx"],
            (0, 2): d_xx * v["G"] + 2 * d_x * v["Gx"] + v["P"] * v["Gxx"],
        }

    def __call__(self, pts: dict):
        return self.derivatives(pts)[(0, 0)]


def residual(l: DiffOp, phi, dom: Domain, m: int = 50, rng=None) -> float:
    """``max |l phi| / max |phi|`` over sampled points.

    ``phi`` is an expression or a :class:`Factored` function.
    """
    rng = _rng(rng)
    if isinstance(phi, Factored):
        if l.order() > 2 or any(a > 1 or (a and b) for a, b in l.coeffs):
            raise ValueError("factored residual supports d/dt and up to d^2/dX^2")
        coeffs = list(l.coeffs.values())
        pts, cv = sample_values(coeffs + [phi.base], dom, m, rng)
        d = phi.derivatives(pts)
        lv = sum(c * d[key] for key, c in zip(l.coeffs, cv))
        pv = d[(0, 0)]
    else:
        phi = as_expr(phi)
        _, (lv, pv) = sample_values([l.apply(phi), phi], dom, m, rng)
    if not (np.all(np.isfinite(lv)) and np.all(np.isfinite(pv))):
        raise ArithmeticError("non-finite values while evaluating the residual")
    return float(np.max(np.abs(lv)) / max(np.max(np.abs(pv)), 1e-300))


def operators_match(A: DiffOp, B: DiffOp, dom: Domain, rng=None) -> dict:
    """Per-coefficient mismatch between two operators (<= 1 means equal)."""
    out = {}
    for key in sorted(set(A.coeffs) | set(B.coeffs)):
        a, b = A[key], B[key]
        if b == ZERO:
            out[key] = zero_mismatch(a, dom, rng=rng)
        elif a == ZERO:
            out[key] = zero_mismatch(b, dom, rng=rng)
        else:
            out[key] = max_mismatch(a, b, dom, rng=rng)
    return out


def same_operator(A: DiffOp, B: DiffOp, dom: Domain, rng=None) -> bool:
    return all(v <= 1.0 for v in operators_match(A, B, dom, rng).values())


# ---------------------------------------------------------------------------
# position-dependent mass ordering


class ConstraintError(ValueError):
    pass


def build_vonroos(alpha, beta, gamma, d=None, t: str = "t", p: str = "p") -> DiffOp:
    """Von Roos ordering with explicit ``gamma``; requires ``alpha + beta + gamma = -1``."""
    total = as_expr(alpha) + as_expr(beta) + as_expr(gamma)
    if total.free_symbols or abs(complex(evaluate(total, {})) + 1) > 1e-12:
        raise ConstraintError(f"ordering constants must sum to -1, got {total}")
    return vonroos_operator(alpha, beta, d, t, p)


def vonroos_operator(alpha, beta, d=None, t: str = "t", p: str = "p") -> DiffOp:
    """Ordered quantization of ``H = x^2/(2 m(p)) + U(p)`` in the momentum representation.

    Kinetic ordering constants enter only through ``s = 4 alpha (alpha + beta + 1)``;
    ``gamma = -1 - alpha - beta`` is implied. With ``d`` given, the result is
    conjugated by ``m^d`` (up to a constant), which removes the first
    derivative when ``d = -1/2``.
    """
    alpha, beta = as_expr(alpha), as_expr(beta)
    s = mul(4, alpha, add(alpha, beta, 1))
    w2 = power("w", 2)
    u2 = as_expr(f"1 - 2*k*{p}/(3*w^2)")
    u = power(u2, as_expr("1/2"))
    pot = add(
        mul("k^2", s, power(mul(9, w2, u2), -1)),
        mul(-9, power("w", 4), power("k", -2), power(add(u, -1), 2)),
    )
    op = DiffOp.of(
        {(1, 0): mul(2, I), (0, 2): mul(w2, u2), (0, 1): as_expr("-2*k/3"), (0, 0): pot},
        t,
        p,
    )
    if d is None:
        return op
    # m(p) = 1/(w^2 u^2); use (3 w^2 u^2)^d, which differs by a constant
    return gauge_transform(op, power(mul(3, w2, u2), as_expr(d)))
