"""Lagrangian and Hamiltonian mechanics for one degree of freedom.

Lagrangians are expressions in ``t, x, x_t``; Hamiltonians in ``t, x, p``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .expr import (
    ONE,
    ZERO,
    Const,
    Domain,
    Expr,
    Mul,
    Pow,
    Symbol,
    add,
    as_expr,
    diff,
    is_zero,
    max_mismatch,
    mul,
    power,
    sample_values,
    subs,
    terms,
    zero_mismatch,
)
from .expr.integrate import NotIntegrableError, integrate
from .expr.sampling import _rng
from .vectorfield import Ode2, VectorField, total_derivative

log = logging.getLogger(__name__)

# placeholder symbol for the right-hand side when inverting a relation
_TARGET = "__target__"


class NotInvertibleError(ValueError):
    pass


class SingularLagrangianError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Euler-Lagrange and Legendre


def euler_lagrange(L, t: str = "t", x: str = "x", dom: Domain | None = None) -> Ode2:
    """Solve the Euler-Lagrange equation for ``x_tt``."""
    L = as_expr(L)
    v = f"{x}_t"
    Lv = diff(L, v)
    Lvv = diff(Lv, v)
    if Lvv == ZERO or (dom is not None and is_zero(Lvv, dom)):
        raise SingularLagrangianError("d^2 L / d x_t^2 vanishes identically")
    num = add(diff(L, x), mul(-1, v, diff(Lv, x)), mul(-1, diff(Lv, t)))
    return Ode2(mul(num, power(Lvv, -1)), t, x)


def _linear_part(e: Expr, var: str):
    """Split ``e = c0 + c1 * var`` if that holds symbolically, else None."""
    c1 = diff(e, var)
    if var in c1.free_symbols:
        return None
    return subs(e, {var: 0}), c1


def _power_form(e: Expr, var: str):
    """Match ``e = c0 + c1 * (a + b var)^r``; returns (c0, c1, base, r) or None."""
    fixed, moving = [], []
    for tm in terms(e):
        (moving if var in tm.free_symbols else fixed).append(tm)
    if len(moving) != 1:
        return None
    tm = moving[0]
    fs = tm.factors if isinstance(tm, Mul) else (tm,)
    coef, base, r = [], None, None
    for f in fs:
        if var not in f.free_symbols:
            coef.append(f)
            continue
        if base is not None:
            return None
        if isinstance(f, Pow) and isinstance(f.exp, Const):
            base, r = f.base, f.exp.value
        elif isinstance(f, Symbol):
            base, r = f, Fraction(1)
        else:
            return None
    lin = _linear_part(base, var)
    if lin is None:
        return None
    return add(*fixed), mul(*coef), base, r


def solve_for(e, var: str, target) -> list:
    """Candidate expressions ``var = g(target)`` solving ``e(var) == target``.

    Handles ``e`` affine in ``var`` or ``c0 + c1 (a + b var)^r``. For even
    inverse roots both signs are returned; callers pick a branch.
    """
    e, target = as_expr(e), as_expr(target)
    lin = _linear_part(e, var)
    if lin is not None:
        c0, c1 = lin
        if c1 == ZERO:
            raise NotInvertibleError(f"expression does not depend on {var}")
        return [mul(add(target, mul(-1, c0)), power(c1, -1))]
    form = _power_form(e, var)
    if form is None:
        raise NotInvertibleError(f"cannot solve for {var} in {e}")
    c0, c1, base, r = form
    a0, b1 = _linear_part(base, var)
    y = mul(add(target, mul(-1, c0)), power(c1, -1))
    inv = Fraction(1) / Fraction(r) if not isinstance(r, complex) else None
    if inv is None:
        raise NotInvertibleError("complex exponent")
    root = power(y, Const(inv))
    roots = [root]
    if inv.denominator == 2:
        roots.append(mul(-1, root))
    elif inv.denominator != 1:
        log.info("using the principal root only for exponent %s", r)
    return [mul(add(rt, mul(-1, a0)), power(b1, -1)) for rt in roots]


def _pick_branch(cands, var: str, forward: Expr, dom: Domain, rng):
    """Choose the inverse candidate with ``cand(forward(var)) == var`` on ``dom``."""
    best, best_mm = None, np.inf
    for k, c in enumerate(cands):
        try:
            mm = max_mismatch(subs(c, {_TARGET: forward}), Symbol(var), dom, rng=rng)
        except (ArithmeticError, ValueError, RuntimeError) as exc:  # pole-ridden branch
            log.debug("branch %d rejected: %s", k, exc)
            continue
        if mm < best_mm:
            best, best_mm = k, mm
    if best is None or best_mm > 1.0:
        raise NotInvertibleError("no inverse branch reproduces the forward map on the domain")
    return best




@dataclass
class Legendre:
    """Result of a Legendre transform with the chosen inverse branch recorded."""

    result: Expr
    inverse: Expr  # velocity in terms of momentum, or momentum in terms of velocity
    branch: int
    n_branches: int


def momentum(L, x: str = "x") -> Expr:
    return diff(L, f"{x}_t")


def legendre_to_hamiltonian(L, dom: Domain, t: str = "t", x: str = "x", p: str = "p", rng=None) -> Legendre:
    """``H(t, x, p) = p x_t - L`` with ``x_t`` eliminated.

    ``dom`` covers ``t, x, x_t`` and parameters; the inverse branch is the
    one that round-trips on it.
    """
    rng = _rng(rng)
    L = as_expr(L)
    v = f"{x}_t"
    pe = diff(L, v)
    _check_monotone(diff(pe, v), dom, rng)
    cands = solve_for(pe, v, Symbol(_TARGET))
    k = _pick_branch(cands, v, pe, dom, rng)
    vel = subs(cands[k], {_TARGET: Symbol(p)})
    H = add(mul(p, vel), mul(-1, subs(L, {v: vel})))
    return Legendre(H, vel, k, len(cands))


def hamiltonian_to_lagrangian(H, dom: Domain, t: str = "t", x: str = "x", p: str = "p", rng=None) -> Legendre:
    """``L(t, x, x_t) = p x_t - H`` with ``p`` eliminated. ``dom`` covers ``t, x, p``."""
    rng = _rng(rng)
    H = as_expr(H)
    v = f"{x}_t"
    ve = diff(H, p)
    _check_monotone(diff(ve, p), dom, rng)
    cands = solve_for(ve, p, Symbol(_TARGET))
    k = _pick_branch(cands, p, ve, dom, rng)
    mom = subs(cands[k], {_TARGET: Symbol(v)})
    L = add(mul(mom, v), mul(-1, subs(H, {p: mom})))
    return Legendre(L, mom, k, len(cands))


def _check_monotone(second, dom, rng):
    _, (vals,) = sample_values([second], dom, 24, rng)
    re = vals.real
    if np.any(np.abs(vals) < 1e-12) or not (np.all(re > 0) or np.all(re < 0)):
        raise NotInvertibleError("Legendre map is not monotone on the sampling domain")


# ---------------------------------------------------------------------------
# Noether


@dataclass
class TotalDerivative:
    is_total: bool
    gauge: Expr | None
    reason: str = ""


def is_total_derivative(R, dom: Domain, t: str = "t", x: str = "x", base_x=0, rng=None) -> TotalDerivative:
    """Decide whether ``R(t, x, x_t)`` equals ``D_t G(t, x)`` and reconstruct ``G``.

    ``R`` must be affine in ``x_t`` with an exact pair of coefficients. The
    gauge is built from antiderivatives, anchored at ``x = base_x``.
    """
    rng = _rng(rng)
    R = as_expr(R)
    v = f"{x}_t"
    b = diff(R, v)
    if v in b.free_symbols and not is_zero(diff(b, v), dom, rng=rng):
        return TotalDerivative(False, None, "not affine in the velocity")
    b = subs(b, {v: 0})
    a = subs(R, {v: 0})
    if max_mismatch(diff(a, x), diff(b, t), dom, rng=rng) > 1.0:
        return TotalDerivative(False, None, "closedness condition fails")
    try:
        G1 = integrate(b, x)
        rest = subs(add(a, mul(-1, diff(G1, t))), {x: base_x})
        G = add(G1, integrate(rest, t))
    except NotIntegrableError as exc:
        return TotalDerivative(True, None, f"exact, but gauge not reconstructed: {exc}")
    if zero_mismatch(add(total_derivative(G, t, x), mul(-1, R)), dom, rng=rng) > 1.0:
        return TotalDerivative(True, None, "gauge reconstruction failed verification")
    return TotalDerivative(True, G)


def noether_residual(vf: VectorField, L) -> Expr:
    """``pr(vf) L + L D_t xi`` for a point field acting on a first-order Lagrangian."""
    L = as_expr(L)
    t, x = vf.t, vf.x
    v = f"{x}_t"
    dxi = total_derivative(vf.xi, t, x)
    eta1 = add(total_derivative(vf.eta, t, x), mul(-1, v, dxi))
    return add(
        mul(vf.xi, diff(L, t)),
        mul(vf.eta, diff(L, x)),
        mul(eta1, diff(L, v)),
        mul(L, dxi),
    )


def first_integral(vf: VectorField, L, gauge) -> Expr:
    L = as_expr(L)
    v = f"{vf.x}_t"
    Lv = diff(L, v)
    return add(mul(vf.xi, add(mul(v, Lv), mul(-1, L))), mul(-1, vf.eta, Lv), gauge)


@dataclass
class NoetherCheck:
    is_noether: bool
    gauge: Expr | None = None
    integral: Expr | None = None
    conserved: bool | None = None
    reason: str = ""


def check_noether(vf: VectorField, L, dom: Domain, rng=None) -> NoetherCheck:
    """Noether test with gauge reconstruction and an on-shell conservation check."""
    rng = _rng(rng)
    R = noether_residual(vf, L)
    td = is_total_derivative(R, dom, vf.t, vf.x, rng=rng)
    if not td.is_total:
        return NoetherCheck(False, reason=td.reason)
    if td.gauge is None:
        return NoetherCheck(True, reason=td.reason)
    integral = first_integral(vf, L, td.gauge)
    ode = euler_lagrange(L, vf.t, vf.x)
    dI = subs(total_derivative(integral, vf.t, vf.x), {ode.a: ode.rhs})
    conserved = zero_mismatch(dI, dom, rng=rng) <= 1.0
    return NoetherCheck(True, td.gauge, integral, conserved)


def noether_count_expected(n_dof: int) -> int:
    """Noether point symmetries of a linearizable system of ``n_dof`` equations."""
    return (n_dof * n_dof + 3 * n_dof + 6) // 2


def lie_count_expected(n_dof: int) -> int:
    return n_dof * n_dof + 4 * n_dof + 3


# ---------------------------------------------------------------------------
# Lagrangians of Lienard-type equations via a last multiplier


@dataclass
class MultiplierCondition:
    holds: bool
    ratio: Expr
    roots: tuple = ()


def jlm_condition(f, g, dom: Domain, x: str = "x", rng=None) -> MultiplierCondition:
    """Test whether ``(g/f)' = c f`` for a constant ``c`` and return the roots of ``a(1-a) = c``."""
    rng = _rng(rng)
    f, g = as_expr(f), as_expr(g)
    ratio = mul(diff(mul(g, power(f, -1)), x), power(f, -1))
    _, (vals,) = sample_values([ratio], dom, 24, rng)
    c = complex(np.mean(vals))
    if np.max(np.abs(vals - c)) > 1e-9 * max(1.0, abs(c)):
        return MultiplierCondition(False, ratio)
    disc = np.sqrt(complex(1 - 4 * c))
    roots = tuple(sorted(((1 + disc) / 2, (1 - disc) / 2), key=lambda z: (z.real, z.imag)))
    return MultiplierCondition(True, ratio, roots)


def jlm_lagrangian(f, g, alpha, dom: Domain, x: str = "x", rng=None) -> Expr | None:
    """``(x_t + g/(alpha f))^(2 - 1/alpha)`` when ``(g/f)' = alpha(1-alpha) f``, else None."""
    rng = _rng(rng)
    f, g, alpha = as_expr(f), as_expr(g), as_expr(alpha)
    lhs = diff(mul(g, power(f, -1)), x)
    rhs = mul(alpha, add(1, mul(-1, alpha)), f)
    if max_mismatch(lhs, rhs, dom, rng=rng) > 1.0:
        return None
    v = Symbol(f"{x}_t")
    return power(add(v, mul(g, power(mul(alpha, f), -1))), add(2, mul(-1, power(alpha, -1))))


@dataclass
class LagrangianMatch:
    equivalent: bool
    factor: complex | None = None
    gauge: Expr | None = None


def lagrangians_equivalent(L1, L2, dom: Domain, t: str = "t", x: str = "x", rng=None) -> LagrangianMatch:
    """Whether ``L1 == c L2 + D_t G`` for a fitted constant ``c``."""
    rng = _rng(rng)
    L1, L2 = as_expr(L1), as_expr(L2)
    v = f"{x}_t"
    h1, h2 = diff(L1, v, 2), diff(L2, v, 2)
    _, (a, b) = sample_values([h1, h2], dom, 24, rng)
    c = complex(np.mean(a / b))
    if np.max(np.abs(a / b - c)) > 1e-8 * max(1.0, abs(c)):
        return LagrangianMatch(False)
    c_expr = Const(c.real if abs(c.imag) < 1e-14 * abs(c) else c)
    td = is_total_derivative(add(L1, mul(-1, c_expr, L2)), dom, t, x, rng=rng)
    return LagrangianMatch(td.is_total, c_expr.value, td.gauge)


# ---------------------------------------------------------------------------
# canonical maps


def poisson_bracket(A, B, pairs) -> Expr:
    """``{A, B}`` over ``pairs`` of (coordinate, momentum) names."""
    A, B = as_expr(A), as_expr(B)
    out = []
    for q, p in pairs:
        out.append(mul(diff(A, q), diff(B, p)))
        out.append(mul(-1, diff(A, p), diff(B, q)))
    return add(*out)


@dataclass
class CanonicalMap:
    """Old variables ``(x, p)`` as functions of new ones ``(q, s)``."""

    old_q: Expr
    old_p: Expr
    q: str
    s: str
    x: str = "x"
    p: str = "p"

    def bracket(self) -> Expr:
        return poisson_bracket(self.old_q, self.old_p, [(self.q, self.s)])

    def is_canonical(self, dom: Domain, rng=None) -> bool:
        return max_mismatch(self.bracket(), ONE, dom, rng=rng) <= 1.0

    def pullback(self, H) -> Expr:
        return subs(H, {self.x: self.old_q, self.p: self.old_p})


def map_from_f3(f3, dom: Domain, q: str = "q", s: str = "s", x: str = "x", p: str = "p", rng=None) -> CanonicalMap:
    """Canonical map generated by ``f3(q, p)`` with ``x = df3/dp`` and ``s = df3/dq``.

    ``dom`` covers ``q, p`` and parameters; it selects the inverse branch.
    """
    rng = _rng(rng)
    f3 = as_expr(f3)
    s_of_qp = diff(f3, q)
    cands = solve_for(s_of_qp, p, Symbol(_TARGET))
    k = _pick_branch(cands, p, s_of_qp, dom, rng)
    p_of = subs(cands[k], {_TARGET: Symbol(s)})
    x_of = subs(diff(f3, p), {p: p_of})
    return CanonicalMap(x_of, p_of, q, s, x, p)


def contact_oscillator_mismatch(q_expr, ode: Ode2, omega, dom: Domain, rng=None) -> float:
    """Mismatch of ``D_t^2 q == -omega^2 q`` along solutions of ``ode``."""
    q_expr = as_expr(q_expr)
    on_shell = {ode.a: ode.rhs}
    dq = subs(total_derivative(q_expr, ode.t, ode.x), on_shell)
    ddq = subs(total_derivative(dq, ode.t, ode.x), on_shell)
    return max_mismatch(ddq, mul(-1, power(omega, 2), q_expr), dom, rng=rng)
