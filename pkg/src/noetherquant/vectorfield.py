"""Point symmetries of scalar second-order ODEs ``x'' = f(t, x, x')``.

Jet coordinates are plain symbols named ``<x>_t`` and ``<x>_tt``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .expr import (
    ZERO,
    Const,
    Domain,
    Expr,
    add,
    as_expr,
    diff,
    evaluate,
    is_zero,
    max_mismatch,
    mul,
    sample_values,
    subs,
    zero_mismatch,
)
from .expr.sampling import _rng

log = logging.getLogger(__name__)

NULLSPACE_RTOL = 1e-7
CLOSURE_TOL = 1e-8


@dataclass(frozen=True)
class Ode2:
    rhs: Expr
    t: str = "t"
    x: str = "x"

    @property
    def v(self) -> str:
        return f"{self.x}_t"

    @property
    def a(self) -> str:
        return f"{self.x}_tt"

    def with_params(self, values: dict) -> Ode2:
        return Ode2(subs(self.rhs, values), self.t, self.x)


@dataclass(frozen=True)
class VectorField:
    """``xi d/dt + eta d/dx``."""

    xi: Expr
    eta: Expr
    t: str = "t"
    x: str = "x"

    @classmethod
    def of(cls, xi, eta, t="t", x="x") -> VectorField:
        return cls(as_expr(xi), as_expr(eta), t, x)

    def __call__(self, F) -> Expr:
        F = as_expr(F)
        return add(mul(self.xi, diff(F, self.t)), mul(self.eta, diff(F, self.x)))

    def scale(self, c) -> VectorField:
        return VectorField(mul(c, self.xi), mul(c, self.eta), self.t, self.x)

    def __add__(self, o: VectorField) -> VectorField:
        return VectorField(add(self.xi, o.xi), add(self.eta, o.eta), self.t, self.x)

    def substitute(self, values: dict) -> VectorField:
        return VectorField(subs(self.xi, values), subs(self.eta, values), self.t, self.x)


def total_derivative(F, t: str = "t", x: str = "x") -> Expr:
    """D_t on functions of (t, x, x_t, x_tt)."""
    F = as_expr(F)
    v, a = f"{x}_t", f"{x}_tt"
    return add(
        diff(F, t),
        mul(v, diff(F, x)),
        mul(a, diff(F, v)),
        mul(f"{x}_ttt", diff(F, a)),
    )


def prolong(vf: VectorField, order: int = 2) -> list:
    """Coefficients [eta, eta1, ..., eta_order] of the prolonged field."""
    dxi = total_derivative(vf.xi, vf.t, vf.x)
    out = [vf.eta]
    names = [f"{vf.x}_t", f"{vf.x}_tt", f"{vf.x}_ttt"]
    for k in range(order):
        prev = out[-1]
        out.append(add(total_derivative(prev, vf.t, vf.x), mul(-1, names[k], dxi)))
    return out


def determining_sides(vf: VectorField, ode: Ode2):
    """Both sides of the linearized symmetry condition, with x_tt replaced by f.

    The field is a symmetry iff ``lhs == rhs`` identically.
    """
    f = ode.rhs
    _, eta1, eta2 = prolong(VectorField(vf.xi, vf.eta, ode.t, ode.x), 2)
    lhs = subs(eta2, {ode.a: f})
    rhs = add(
        mul(vf.xi, diff(f, ode.t)),
        mul(vf.eta, diff(f, ode.x)),
        mul(eta1, diff(f, ode.v)),
    )
    return lhs, rhs


def symmetry_mismatch(vf: VectorField, ode: Ode2, dom: Domain, rng=None) -> float:
    lhs, rhs = determining_sides(vf, ode)
    return zero_mismatch(add(lhs, mul(-1, rhs)), dom, rng=rng)


def is_ode_symmetry(vf: VectorField, ode: Ode2, dom: Domain, rng=None) -> bool:
    return symmetry_mismatch(vf, ode, dom, rng) <= 1.0


def commutator(a: VectorField, b: VectorField) -> VectorField:
    return VectorField(
        add(a(b.xi), mul(-1, b(a.xi))),
        add(a(b.eta), mul(-1, b(a.eta))),
        a.t,
        a.x,
    )


def _field_values(vf: VectorField, pts: dict) -> np.ndarray:
    n = len(next(iter(pts.values())))

    def ev(e):
        return evaluate(e, pts) if e.free_symbols else np.full(n, complex(evaluate(e, {})))

    return np.concatenate([ev(vf.xi), ev(vf.eta)])


def _common_points(fields, dom: Domain, m: int, rng):
    exprs = [c for f in fields for c in (f.xi, f.eta)]
    pts, _ = sample_values(exprs, dom, m, rng)
    return pts


@dataclass
class StructureConstants:
    """``[e_i, e_j] = sum_k c[i, j, k] e_k`` at fixed parameter values."""

    c: np.ndarray
    residual: float
    closed: bool
    rank: int

    def killing_form(self) -> np.ndarray:
        # (ad_i)_{lk} = c[i, k, l]
        return np.einsum("ilk,jkl->ij", self.c, self.c)

    def killing_rank(self, rtol: float = 1e-8) -> int:
        s = np.linalg.svd(self.killing_form(), compute_uv=False)
        if s.size == 0 or s[0] == 0:
            return 0
        return int(np.sum(s > rtol * s[0]))


def structure_constants(basis, dom: Domain, m: int = 48, rng=None) -> StructureConstants:
    """Fit structure constants by least squares over sampled points.

    Parameters must be pinned in ``dom.fixed`` so the constants are numbers.
    """
    rng = _rng(rng)
    basis = list(basis)
    n = len(basis)
    comms = {(i, j): commutator(basis[i], basis[j]) for i in range(n) for j in range(i + 1, n)}
    pts = _common_points(basis + list(comms.values()), dom, max(m, 40), rng)
    B = np.stack([_field_values(f, pts) for f in basis], axis=1)
    rank = np.linalg.matrix_rank(B)
    if rank < n:
        log.warning("basis is linearly dependent at the sample points (rank %d < %d)", rank, n)
    c = np.zeros((n, n, n), dtype=complex)
    worst = 0.0
    for (i, j), f in comms.items():
        target = _field_values(f, pts)
        sol, *_ = np.linalg.lstsq(B, target, rcond=None)
        res = np.linalg.norm(B @ sol - target) / max(1.0, np.linalg.norm(target))
        worst = max(worst, float(res))
        c[i, j] = sol
        c[j, i] = -sol
    if np.max(np.abs(c.imag), initial=0.0) < 1e-10:
        c = c.real
    c = np.where(np.abs(c) < 1e-10, 0.0, c)
    return StructureConstants(c, worst, worst <= CLOSURE_TOL, int(rank))


def is_abelian_intransitive_pair(a: VectorField, b: VectorField, dom: Domain, rng=None) -> bool:
    """Commuting, independent over constants, and with parallel directions everywhere."""
    rng = _rng(rng)
    comm = commutator(a, b)
    if not (is_zero(comm.xi, dom, rng=rng) and is_zero(comm.eta, dom, rng=rng)):
        return False
    pts = _common_points([a, b], dom, 24, rng)
    M = np.stack([_field_values(a, pts), _field_values(b, pts)], axis=1)
    if np.linalg.matrix_rank(M, tol=1e-9 * np.abs(M).max()) < 2:
        return False
    wedge = add(mul(a.xi, b.eta), mul(-1, b.xi, a.eta))
    return is_zero(wedge, dom, rng=rng)


@dataclass
class TransformCheck:
    maps_equation: bool
    nonsingular: bool
    time_preserving: bool
    mismatch: float

    @property
    def ok(self) -> bool:
        return self.maps_equation and self.nonsingular


def verify_point_transform(new_t, new_x, src: Ode2, dst: Ode2, dom: Domain, rng=None) -> TransformCheck:
    """Check that ``(t, x) -> (new_t, new_x)`` sends solutions of ``src`` to solutions of ``dst``.

    ``dom`` covers the source variables ``t, x, x_t`` and parameters.
    """
    rng = _rng(rng)
    T, Y = as_expr(new_t), as_expr(new_x)
    on_shell = {src.a: src.rhs}
    Tdot = total_derivative(T, src.t, src.x)
    Ydot = total_derivative(Y, src.t, src.x)
    yp = mul(Ydot, Tdot ** -1)
    ypp = mul(subs(total_derivative(yp, src.t, src.x), on_shell), Tdot ** -1)
    target = subs(dst.rhs, {dst.t: T, dst.x: Y, dst.v: yp})
    mm = max_mismatch(ypp, target, dom, rng=rng)
    jac = add(mul(diff(T, src.t), diff(Y, src.x)), mul(-1, diff(T, src.x), diff(Y, src.t)))
    _, (jv,) = sample_values([jac], dom, 24, rng)
    nonsingular = bool(np.all(np.abs(jv) > 1e-10))
    time_preserving = T == as_expr(src.t)
    return TransformCheck(mm <= 1.0, nonsingular, time_preserving, mm)


@dataclass
class AnsatzResult:
    fields: list
    singular_values: np.ndarray
    condition: float


def find_symmetries_ansatz(ode: Ode2, basis, dom: Domain, m: int | None = None, rng=None) -> AnsatzResult:
    """Solve the determining equation over ``xi, eta`` in the span of ``basis``.

    Parameters must be pinned in ``dom.fixed``. Each returned field has been
    re-verified with ``is_ode_symmetry``.
    """
    rng = _rng(rng)
    basis = [as_expr(b) for b in basis]
    cols = []
    for b in basis:
        cols.append(VectorField(b, ZERO, ode.t, ode.x))
    for b in basis:
        cols.append(VectorField(ZERO, b, ode.t, ode.x))
    exprs = []
    for vf in cols:
        lhs, rhs = determining_sides(vf, ode)
        exprs.append(add(lhs, mul(-1, rhs)))
    n = len(cols)
    m = m or max(3 * n, 60)
    _, vals = sample_values(exprs, dom, m, rng)
    A = np.stack(vals, axis=1)
    norms = np.linalg.norm(A, axis=0)
    # columns that vanish identically are symmetries on their own
    norms = np.where(norms > 0, norms, 1.0)
    A = A / norms
    _, s, vh = np.linalg.svd(A)
    null = s < NULLSPACE_RTOL * s[0]
    kept = s[~null]
    cond = float(kept[0] / kept[-1]) if kept.size else float("inf")
    if cond > 1e12:
        raise np.linalg.LinAlgError(f"ill-conditioned determining system (condition {cond:.3g})")
    vecs = vh[len(kept):].conj()
    vecs = _canonical_basis(vecs)
    nb = len(basis)
    fields = []
    for vec in vecs:
        coef = vec / norms
        coef = coef / coef[np.argmax(np.abs(coef))]
        xi = add(*[mul(_clean_const(c), b) for c, b in zip(coef[:nb], basis) if abs(c) > 1e-9])
        eta = add(*[mul(_clean_const(c), b) for c, b in zip(coef[nb:], basis) if abs(c) > 1e-9])
        vf = VectorField(xi, eta, ode.t, ode.x)
        if not is_ode_symmetry(vf, ode, dom, rng):
            log.warning("ansatz solution failed re-verification: %s, %s", xi, eta)
            continue
        fields.append(vf)
    return AnsatzResult(fields, s, cond)


def _canonical_basis(vecs: np.ndarray) -> np.ndarray:
    """Row-reduce a nullspace basis so results are reproducible."""
    if len(vecs) == 0:
        return vecs
    M = vecs.copy()
    r = 0
    for col in range(M.shape[1]):
        if r == len(M):
            break
        piv = r + int(np.argmax(np.abs(M[r:, col])))
        if abs(M[piv, col]) < 1e-8:
            continue
        M[[r, piv]] = M[[piv, r]]
        M[r] = M[r] / M[r, col]
        for q in range(len(M)):
            if q != r:
                M[q] = M[q] - M[q, col] * M[r]
        r += 1
    return M


def _clean_const(c) -> Const:
    c = complex(c)
    re = 0.0 if abs(c.real) < 1e-12 else c.real
    im = 0.0 if abs(c.imag) < 1e-12 else c.imag
    # snap to nearby small rationals so printed generators stay readable
    from fractions import Fraction

    def snap(v):
        f = Fraction(v).limit_denominator(64)
        return f if abs(float(f) - v) < 1e-9 else v

    if im == 0:
        return Const(snap(re))
    return Const(complex(re, im))
