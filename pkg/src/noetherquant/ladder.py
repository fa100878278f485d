"""Eigenstates of the momentum-space Lienard Schrodinger operator built with ladder symmetries.

With ``w = 1 - 2kX/(3 omega^2)``, ``u = sqrt(w)`` and ``v = 1 - u`` every level has the shape

    P(v) * w^(1/4) * exp(+-(2 omega/k)(3 omega^2 u + k X)) * exp(-+i (n + 1/2) omega t)

with upper signs on the positive branch (``X < 3 omega^2/(2k)``) and lower
signs on the negative branch (``X > 3 omega^2/(2k)``, where ``u`` is imaginary).
``v`` is proportional to the oscillator coordinate, so ``P`` is a scaled
Hermite polynomial. Levels are stored as the coefficient list of ``P``.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cache
from math import comb

import numpy as np

from .diffop import (
    DiffOp,
    Factored,
    Generator,
    change_vars,
    first_derivative_gauge,
    gauge_transform,
    generator_commutator,
    residual,
)
from .expr import (
    ONE,
    ZERO,
    Domain,
    Expr,
    I,
    Pow,
    Symbol,
    add,
    as_expr,
    diff,
    evaluate,
    exp,
    mul,
    polynomial_coeffs,
    power,
    replace,
    sample_values,
    subs,
)
from .expr.sampling import _rng
from .numerics import limit_sample

log = logging.getLogger(__name__)

POSITIVE, NEGATIVE = "positive", "negative"
BRANCHES = (POSITIVE, NEGATIVE)
MAX_LEVEL = 12
RESIDUAL_TOL = 1e-8
EIGEN_TOL = 1e-9
RESIDUAL_SAMPLES = 50

W = as_expr("1 - 2*k*X/(3*w^2)")
U = power(W, Fraction(1, 2))
V = add(1, mul(-1, U))
ENDPOINT = as_expr("3*w^2/(2*k)")
_U = "__u"
_V = "__v"


class VerificationError(RuntimeError):
    pass


def branch_of(name: str) -> str:
    key = name.lower()
    if key in ("pos", "positive", "+"):
        return POSITIVE
    if key in ("neg", "negative", "-"):
        return NEGATIVE
    raise ValueError(f"unknown branch {name!r}")


def _sign(branch: str) -> int:
    return 1 if branch_of(branch) == POSITIVE else -1


# ---------------------------------------------------------------------------
# operators


def oscillator_operator(var: str = "eta") -> DiffOp:
    """``2i d/dt + d^2/deta^2 - omega^2 eta^2``."""
    return DiffOp.of({(1, 0): mul(2, I), (0, 2): ONE, (0, 0): as_expr(f"-w^2*{var}^2")}, "t", var)


def linearizing_map() -> Expr:
    """``eta(X)`` taking the classical equation to the harmonic oscillator without changing time."""
    return mul(as_expr("w*(6/k)^(1/2)"), V)


def derived_operator(dom: Domain | None = None) -> DiffOp:
    """Oscillator operator pulled back along the linearizing map, first derivative gauged away."""
    pulled = change_vars(oscillator_operator(), linearizing_map(), "X")
    return gauge_transform(pulled, first_derivative_gauge(pulled), dom)


def eigenvalue_generator() -> Generator:
    return Generator.of(I, 0, 0)


def ladder_generator(sign: int) -> Generator:
    """``c omega e^{+-i omega t} [u d/dX -+ 2 omega (1-u) Phi d/dPhi - k/(6 omega^2 u) Phi d/dPhi]``.

    ``c = 3`` for the upper sign and ``1`` for the lower one; with this
    normalization ``[S+, S-] = 4 k omega Phi d/dPhi``.
    """
    front = mul(3 if sign > 0 else 1, as_expr("w"), exp(mul(sign, I, as_expr("w*t"))))
    f = add(mul(-sign, 2, as_expr("w"), V), mul(as_expr("-k/(6*w^2)"), power(U, -1)))
    return Generator(ZERO, mul(front, U), mul(front, f))


def homogeneity_generator() -> Generator:
    return Generator.of(0, 0, 1)


def creation(branch: str) -> Generator:
    return ladder_generator(-_sign(branch))


def annihilation(branch: str) -> Generator:
    return ladder_generator(_sign(branch))


def lie_bracket(a: tuple, b: tuple, coords=("t", "X", "Phi")) -> tuple:
    """Bracket of vector fields given by component tuples over ``coords``."""

    def act(vec, e):
        return add(*[mul(c, diff(e, x)) for c, x in zip(vec, coords)])

    return tuple(add(act(a, bi), mul(-1, act(b, ai))) for ai, bi in zip(a, b))


def as_components(g: Generator, phi: str = "Phi") -> tuple:
    return (g.T, g.xi, mul(g.f, Symbol(phi)))


def solution_components(chi) -> tuple:
    """``chi d/dPhi``."""
    return (ZERO, ZERO, as_expr(chi))


# ---------------------------------------------------------------------------
# polynomials in v, lowest degree first


def _trim(p: tuple) -> tuple:
    p = list(p)
    while len(p) > 1 and p[-1] == ZERO:
        p.pop()
    return tuple(p) if p else (ZERO,)


def poly_add(a: tuple, b: tuple) -> tuple:
    n = max(len(a), len(b))
    return _trim(tuple(add(a[j] if j < len(a) else ZERO, b[j] if j < len(b) else ZERO) for j in range(n)))


def poly_mul(a: tuple, b: tuple) -> tuple:
    out = [[] for _ in range(len(a) + len(b) - 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j].append(mul(x, y))
    return _trim(tuple(add(*c) for c in out))


def poly_deriv(a: tuple) -> tuple:
    return _trim(tuple(mul(j, a[j]) for j in range(1, len(a)))) if len(a) > 1 else (ZERO,)


def poly_expr(a: tuple, var: str = _V) -> Expr:
    return add(*[mul(c, power(Symbol(var), j)) for j, c in enumerate(a)])


def _principal_roots(e: Expr, var: str) -> Expr:
    """``(var^a)^r -> var^(a r)``; valid because ``var`` is a principal square root."""

    def fn(x):
        if isinstance(x, Pow) and isinstance(x.base, Pow) and x.base.base == Symbol(var):
            return power(Symbol(var), mul(x.base.exp, x.exp))
        return x

    return replace(e, fn)


def as_v_polynomial(e: Expr, what: str = "expression") -> tuple:
    """Rewrite a t-free expression in ``X`` as a polynomial in ``v = 1 - u``."""
    x_of_u = mul(power(as_expr("2*k/(3*w^2)"), -1), add(1, mul(-1, power(Symbol(_U), 2))))
    q = _principal_roots(subs(e, {"X": x_of_u}), _U)
    try:
        cu = polynomial_coeffs(q, _U)
    except ValueError as exc:
        raise VerificationError(f"{what} is not a polynomial in u") from exc
    if not cu:
        return (ZERO,)
    if min(cu) < 0:
        raise VerificationError(f"{what} has negative powers of u")
    deg = max(cu)
    # u^j = (1 - v)^j
    out = [add(*[mul(cu.get(j, ZERO), comb(j, m) * (-1) ** m) for j in range(m, deg + 1)]) for m in range(deg + 1)]
    return _trim(tuple(out))


@dataclass(frozen=True)
class ReducedAction:
    """Action of a ladder symmetry on ``P``: ``P -> deriv * P' + mult * P`` and ``level -> level + shift``."""

    deriv: tuple
    mult: tuple
    shift: int

    def __call__(self, p: tuple) -> tuple:
        return poly_add(poly_mul(self.deriv, poly_deriv(p)), poly_mul(self.mult, p))


@cache
def reduced_action(sign: int, branch: str) -> ReducedAction:
    """Derive how ``ladder_generator(sign)`` acts on ``P(v) * kernel * phase``.

    For ``phi = P(v) G`` the symmetry gives ``xi phi_X - f phi =
    G [xi v_X P' + (xi G_X/G - f) P]``; both brackets must be a time factor
    ``e^{+-i omega t}`` times a polynomial in ``v``.
    """
    g = ladder_generator(sign)
    if g.T != ZERO:
        raise VerificationError("ladder symmetry must not move time")
    G = kernel(branch)
    a = mul(g.xi, diff(V, "X"))
    b = add(mul(g.xi, diff(G, "X"), power(G, -1)), mul(-1, g.f))
    tick = exp(mul(sign, I, as_expr("w*t")))
    a, b = mul(a, power(tick, -1)), mul(b, power(tick, -1))
    if a.has("t") or b.has("t"):
        raise VerificationError("time dependence of the ladder symmetry is not a pure phase")
    shift = -sign * _sign(branch)
    return ReducedAction(as_v_polynomial(a, "derivative coefficient"), as_v_polynomial(b, "multiplier"), shift)


# ---------------------------------------------------------------------------
# wavefunctions


def kernel(branch: str) -> Expr:
    s = _sign(branch)
    expo = mul(s, as_expr("2*w/k"), add(mul(as_expr("3*w^2"), U), as_expr("k*X")))
    return mul(power(W, Fraction(1, 4)), exp(expo))


def phase_exponent(branch: str, level: int) -> Expr:
    return mul(-_sign(branch), I, Fraction(2 * level + 1, 2), as_expr("w*t"))


def phase(branch: str, level: int) -> Expr:
    return exp(phase_exponent(branch, level))


@dataclass(frozen=True)
class WaveFunction:
    branch: str
    level: int
    poly: tuple  # coefficients of P(v), lowest degree first

    @property
    def polynomial(self) -> Expr:
        return subs(poly_expr(self.poly), {_V: V})

    @property
    def base(self) -> Expr:
        return mul(kernel(self.branch), phase(self.branch, self.level))

    @property
    def factored(self) -> Factored:
        return Factored(poly_expr(self.poly), _V, V, self.base)

    @property
    def expr(self) -> Expr:
        return mul(self.polynomial, self.base)

    def is_zero(self) -> bool:
        return all(c == ZERO for c in self.poly)


def ground_state(branch: str) -> WaveFunction:
    return WaveFunction(branch_of(branch), 0, (ONE,))


def _apply(sign: int, phi: WaveFunction) -> WaveFunction:
    act = reduced_action(sign, phi.branch)
    return WaveFunction(phi.branch, phi.level + act.shift, act(phi.poly))


def raise_level(phi: WaveFunction) -> WaveFunction:
    """Coefficient of ``d/dPhi`` in ``[creation, phi d/dPhi]``, computed on ``P``."""
    return _apply(-_sign(phi.branch), phi)


def lower_level(phi: WaveFunction) -> WaveFunction | None:
    """Same with the annihilation symmetry; ``None`` when the result vanishes."""
    out = _apply(_sign(phi.branch), phi)
    if out.is_zero():
        return None
    if phi.level == 0:
        raise VerificationError("annihilation does not vanish on the ground state")
    return out


def raise_by_bracket(phi: WaveFunction) -> Expr:
    """Independent route: full vector-field bracket ``[creation, phi d/dPhi]`` on the expanded expression."""
    return lie_bracket(as_components(creation(phi.branch)), solution_components(phi.expr))[2]


def lower_by_bracket(phi: WaveFunction) -> Expr:
    return lie_bracket(as_components(annihilation(phi.branch)), solution_components(phi.expr))[2]


# ---------------------------------------------------------------------------
# checks


def branch_domain(branch: str, params: dict, width: float = 3.0, gap: float = 0.05) -> Domain:
    end = float(evaluate(ENDPOINT, params).real)
    iv = (end - width, end - gap) if _sign(branch) > 0 else (end + gap, end + width)
    return Domain({"t": (0.0, 2.0), "X": iv}, fixed=dict(params))


def eigenvalue_of(phi, dom: Domain, m: int = 24, rng=None) -> float:
    """``i d/dt phi / phi`` at samples; must be a real constant."""
    rng = _rng(rng)
    if isinstance(phi, WaveFunction):
        f = phi.factored
        pts, _ = sample_values([f.base], dom, m, rng)
        d = f.derivatives(pts)
        num, den = 1j * d[(1, 0)], d[(0, 0)]
    else:
        e = as_expr(phi)
        _, (num, den) = sample_values([eigenvalue_generator().on_solution(e), e], dom, m, rng)
    keep = np.abs(den) > 1e-12 * np.max(np.abs(den))
    ratio = num[keep] / den[keep]
    center = complex(np.mean(ratio))
    spread = float(np.max(np.abs(ratio - center)))
    if spread > RESIDUAL_TOL * max(1.0, abs(center)):
        raise VerificationError(f"not an eigenfunction: ratio spread {spread:.3g}")
    if abs(center.imag) > EIGEN_TOL * max(1.0, abs(center)):
        raise VerificationError(f"complex eigenvalue {center}")
    return center.real


def eigenvalue_expr(phi: WaveFunction) -> Expr:
    """Symbolic eigenvalue: ``i d/dt`` of the phase exponent, after checking the rest is static."""
    if diff(mul(phi.polynomial, kernel(phi.branch)), "t") != ZERO:
        raise VerificationError("spatial part depends on t")
    return mul(I, diff(phase_exponent(phi.branch, phi.level), "t"))


@dataclass
class BoundaryCheck:
    far: str
    endpoint: str

    @property
    def ok(self) -> bool:
        return self.far == "zero" and self.endpoint == "zero"


def check_boundary(phi, branch: str, params: dict, t_value: float = 0.3) -> BoundaryCheck:
    """Limits of ``|phi|`` toward the branch's infinity and toward ``X = 3 omega^2/(2k)``.

    The endpoint is approached from inside the branch's half-line.
    """
    e = phi.factored if isinstance(phi, WaveFunction) else as_expr(phi)
    fixed = dict(params)
    fixed["t"] = t_value
    end = float(evaluate(ENDPOINT, params).real)
    far = "-inf" if _sign(branch) > 0 else "+inf"
    side = "left" if _sign(branch) > 0 else "right"
    a = limit_sample(e, "X", far, fixed, r0=max(1.0, 2 * abs(end)))
    b = limit_sample(e, "X", (end, side), fixed, delta0=0.25 * abs(end))
    return BoundaryCheck(a.trend, b.trend)


def proportionality(a, b, dom: Domain, m: int = 24, rng=None):
    """Fitted constant ``c`` with ``a = c b`` and the relative spread of ``a/b``.

    ``a`` and ``b`` are expressions or wavefunctions (evaluated in factored form).
    """
    rng = _rng(rng)
    exprs = [x.base if isinstance(x, WaveFunction) else as_expr(x) for x in (a, b)]
    pts, vals = sample_values(exprs, dom, m, rng)
    va, vb = [x.factored(pts) if isinstance(x, WaveFunction) else v for x, v in zip((a, b), vals)]
    keep = np.abs(vb) > 1e-12 * np.max(np.abs(vb))
    ratio = va[keep] / vb[keep]
    c = complex(np.mean(ratio))
    return c, float(np.max(np.abs(ratio - c)) / max(abs(c), 1e-300))


def harmonic_limit(ks=(1e-2, 1e-3, 1e-4, 1e-5), w: float = 1.0, etas=None) -> list:
    """Distance between the rescaled ground state and ``exp(-omega eta^2/2)`` for shrinking ``k``.

    ``X`` is eliminated through ``eta``; the profile is taken at ``t = 0``.
    """
    etas = np.linspace(-3, 3, 25) if etas is None else np.asarray(etas)
    g = mul(subs(ground_state(POSITIVE).expr, {"t": 0}), exp(as_expr("-6*w^3/k")))
    x_of_eta = as_expr("3*w^2/(2*k)*(1 - (1 - eta*(k/6)^(1/2)/w)^2)")
    profile = subs(g, {"X": x_of_eta})
    target = np.exp(-w * etas**2 / 2)
    out = []
    for k in ks:
        vals = evaluate(profile, {"eta": etas.astype(complex), "k": k, "w": w})
        out.append(float(np.max(np.abs(vals - target))))
    return out


@dataclass
class Level:
    branch: str
    n: int
    eigenvalue: float
    expected: float
    eigenvalue_expr: str
    residual: float
    far: str
    endpoint: str
    lower_spread: float  # relative spread of lower(phi_n) / phi_(n-1)
    kappa: complex | None  # lower(raise(phi_(n-1))) = kappa phi_(n-1)
    passed: bool

    def row(self) -> dict:
        d = dict(self.__dict__)
        d["bc_pass"] = self.far == "zero" and self.endpoint == "zero"
        d["kappa"] = None if self.kappa is None else [self.kappa.real, self.kappa.imag]
        return d


@dataclass
class SpectrumReport:
    branch: str
    params: dict
    levels: list = field(default_factory=list)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.levels) and all(lv.passed for lv in self.levels)

    def table(self) -> list:
        return [lv.row() for lv in self.levels]

    def text(self) -> str:
        lines = [f"{self.branch} branch  (k={self.params.get('k')}, w={self.params.get('w')})",
                 f"{'n':>3} {'E':>14} {'expected':>14} {'residual':>10}  bc      status"]
        for lv in self.levels:
            bc = "ok" if lv.far == "zero" and lv.endpoint == "zero" else f"{lv.far}/{lv.endpoint}"
            lines.append(f"{lv.n:>3} {lv.eigenvalue:>14.10f} {lv.expected:>14.10f} {lv.residual:>10.2e}  "
                         f"{bc:<7} {'pass' if lv.passed else 'FAIL'}")
        return "\n".join(lines)


def spectrum(n_max: int, branch: str, params: dict | None = None, operator: DiffOp | None = None,
             rng=None, strict: bool = True) -> SpectrumReport:
    """Build and verify levels ``0..n_max`` on one branch."""
    if not 0 <= n_max <= MAX_LEVEL:
        raise ValueError(f"n_max must be between 0 and {MAX_LEVEL}")
    branch = branch_of(branch)
    params = {"k": 1.0, "w": 1.0} if params is None else dict(params)
    start = time.perf_counter()
    rng = _rng(rng)
    dom = branch_domain(branch, params)
    op = derived_operator() if operator is None else operator
    report = SpectrumReport(branch, params)
    omega = float(params["w"])
    s = _sign(branch)
    phi = ground_state(branch)
    prev = None
    for n in range(n_max + 1):
        if n:
            prev, phi = phi, raise_level(phi)
        res = residual(op, phi.factored, dom, RESIDUAL_SAMPLES, rng)
        ev = eigenvalue_of(phi, dom, rng=rng)
        sym = eigenvalue_expr(phi)
        expected = s * omega * (n + 0.5)
        bc = check_boundary(phi, branch, params)
        down = lower_level(phi)
        kappa = None
        if n == 0:
            spread, lowered_ok = 0.0, down is None
        elif down is None:
            spread, lowered_ok = float("inf"), False
        else:
            kappa, spread = proportionality(down, prev, dom, rng=rng)
            lowered_ok = spread <= RESIDUAL_TOL and abs(kappa) > 0
        ok = (res <= RESIDUAL_TOL and abs(ev - expected) <= EIGEN_TOL and bc.ok and lowered_ok
              and not sym.has("k"))
        report.levels.append(Level(branch, n, ev, expected, str(sym), res, bc.far, bc.endpoint,
                                   float(spread), kappa, ok))
        log.debug("level %d on %s branch: E=%s residual=%.2e", n, branch, ev, res)
        if strict and not ok:
            raise VerificationError(f"{branch} level {n} failed verification")
    report.seconds = time.perf_counter() - start
    return report


def ladder_commutator(dom: Domain | None = None, rng=None) -> Generator:
    """``[S+, S-]`` through the operator commutator."""
    return generator_commutator(ladder_generator(1), ladder_generator(-1), dom, rng)
