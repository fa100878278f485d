"""Numeric cross-checks: fixed-step RK4, conserved-quantity drift, periods and limits."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, PoleError, as_expr, compile_expr, evaluate
from .vectorfield import Ode2


class BlowUpError(ArithmeticError):
    def __init__(self, time: float):
        super().__init__(f"non-finite state at t={time:.6g}")
        self.time = time


class NotOscillatoryError(ValueError):
    pass


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    v: np.ndarray

    @property
    def h(self) -> float:
        return float(self.t[1] - self.t[0])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x", "v"])
        for row in zip(self.t, self.x, self.v):
            w.writerow([f"{c:.17g}" for c in row])
        return buf.getvalue()


def _rhs_function(ode: Ode2, params: dict):
    rhs = as_expr(ode.rhs)
    names = sorted(rhs.free_symbols)
    unknown = set(names) - {ode.t, ode.x, ode.v} - set(params)
    if unknown:
        raise ValueError(f"unbound names in right-hand side: {sorted(unknown)}")
    fn = compile_expr(rhs, names)
    fixed = {n: complex(params[n]) for n in names if n in params}

    def f(t, x, v):
        bound = dict(fixed)
        bound[ode.t], bound[ode.x], bound[ode.v] = t, x, v
        return fn(*[bound[n] for n in names]).real

    return f


def integrate(ode: Ode2, ic, t_end: float, h: float, params: dict | None = None, t0: float = 0.0) -> Trajectory:
    """Classical fixed-step RK4 for ``x'' = rhs(t, x, x')``.

    The last step is shortened so the grid ends exactly at ``t_end``.
    """
    f = _rhs_function(ode, params or {})
    n = max(1, math.ceil((t_end - t0) / h - 1e-9))
    ts = np.empty(n + 1)
    xs = np.empty(n + 1)
    vs = np.empty(n + 1)
    x, v = (float(c) for c in ic)
    t = t0
    ts[0], xs[0], vs[0] = t, x, v
    for i in range(1, n + 1):
        step = min(h, t_end - t) if i == n else h
        try:
            k1x, k1v = v, f(t, x, v)
            k2x, k2v = v + 0.5 * step * k1v, f(t + 0.5 * step, x + 0.5 * step * k1x, v + 0.5 * step * k1v)
            k3x, k3v = v + 0.5 * step * k2v, f(t + 0.5 * step, x + 0.5 * step * k2x, v + 0.5 * step * k2v)
            k4x, k4v = v + step * k3v, f(t + step, x + step * k3x, v + step * k3v)
        except (OverflowError, ZeroDivisionError):
            raise BlowUpError(t) from None
        x = x + step / 6 * (k1x + 2 * k2x + 2 * k3x + k4x)
        v = v + step / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = t0 + i * h if i < n else t_end
        if not (math.isfinite(x) and math.isfinite(v)):
            raise BlowUpError(t)
        ts[i], xs[i], vs[i] = t, x, v
    return Trajectory(ts, xs, vs)


def _along(e, traj: Trajectory, ode_names: tuple, params: dict) -> np.ndarray:
    t, x, v = ode_names
    bind = {n: complex(val) for n, val in params.items()}
    bind.update({t: traj.t, x: traj.x, v: traj.v})
    e = as_expr(e)
    vals = evaluate(e, {k: bind[k] for k in e.free_symbols}) if e.free_symbols else np.full(len(traj.t), complex(evaluate(e, {})))
    vals = np.broadcast_to(vals, traj.t.shape)
    if not np.all(np.isfinite(vals)):
        raise PoleError("quantity is singular along the trajectory")
    return vals


def drift(quantity, traj: Trajectory, params: dict | None = None, t: str = "t", x: str = "x") -> float:
    """``max |Q(t) - Q(0)|`` along ``traj``."""
    vals = _along(quantity, traj, (t, x, f"{x}_t"), params or {})
    return float(np.max(np.abs(vals - vals[0])))


def closed_form_error(solution, traj: Trajectory, params: dict | None = None, t: str = "t") -> float:
    """``max |x_num - x(t)|`` for a closed-form solution ``x(t)``."""
    vals = _along(solution, traj, (t, "__x", "__x_t"), params or {})
    return float(np.max(np.abs(traj.x - vals.real)))


def convergence_ratio(ode: Ode2, ic, t_end: float, h: float, params: dict | None = None, solution=None) -> float:
    """Error ratio when halving ``h``; about 16 for a fourth-order method.

    Without a closed form, successive differences of the final state are used.
    """
    if solution is not None:
        e1 = closed_form_error(solution, integrate(ode, ic, t_end, h, params), params, ode.t)
        e2 = closed_form_error(solution, integrate(ode, ic, t_end, h / 2, params), params, ode.t)
        return e1 / e2
    finals = [integrate(ode, ic, t_end, h / 2**j, params).x[-1] for j in range(3)]
    return abs(finals[0] - finals[1]) / abs(finals[1] - finals[2])


def _cubic_root(ts, vs, lo, hi) -> float:
    """Root of the cubic through four samples, inside ``[lo, hi]``."""
    s = ts - ts[1]
    coeffs = np.polyfit(s, vs, 3)
    roots = np.roots(coeffs)
    a, b = lo - ts[1], hi - ts[1]
    real = [r.real for r in roots if abs(r.imag) < 1e-12 * max(1.0, abs(r)) and a - 1e-14 <= r.real <= b + 1e-14]
    if not real:
        # fall back to linear interpolation on the bracketing pair
        return lo + (hi - lo) * vs[1] / (vs[1] - vs[2])
    return float(ts[1] + min(real, key=lambda r: abs(r - (a + b) / 2)))


def period_of(traj: Trajectory) -> float:
    """Mean spacing of upward zero crossings of the velocity."""
    v = traj.v
    idx = np.nonzero((v[:-1] < 0) & (v[1:] >= 0))[0]
    all_cross = np.count_nonzero(np.sign(v[:-1]) != np.sign(v[1:]))
    if all_cross < 3 or len(idx) < 2:
        raise NotOscillatoryError("need at least three velocity sign changes")
    times = []
    for i in idx:
        j = min(max(i - 1, 0), len(v) - 4)
        times.append(_cubic_root(traj.t[j:j + 4], v[j:j + 4], traj.t[i], traj.t[i + 1]))
    return float(np.mean(np.diff(times)))


# ---------------------------------------------------------------------------
# limits


@dataclass
class LimitEstimate:
    trend: str  # zero | bounded | diverging | inconclusive
    points: list = field(default_factory=list)
    magnitudes: list = field(default_factory=list)
    slope: float = float("nan")

    @property
    def value(self) -> float:
        return self.magnitudes[-1] if self.magnitudes else float("nan")


SLOPE_TOL = 0.05
TINY = 1e-280


def approach_points(direction, r0: float = 1.0, delta0: float = 0.25, steps: int = 21) -> list:
    """``+inf``/``-inf`` give ``+-r0*2^j``; ``(endpoint, side)`` gives ``endpoint -+ delta0*2^-j``.

    ``side`` is ``"left"`` (approach from below) or ``"right"``.
    """
    if direction in ("+inf", "-inf"):
        sgn = 1.0 if direction == "+inf" else -1.0
        return [sgn * r0 * 2.0**j for j in range(steps)]
    end, side = direction
    sgn = -1.0 if side == "left" else 1.0
    return [end + sgn * delta0 * 2.0**-j for j in range(steps)]


def limit_sample(e, var: str, direction, fixed: dict | None = None, r0: float = 1.0, delta0: float = 0.25,
                 steps: int = 21, tail: int = 5) -> LimitEstimate:
    """Classify ``|e|`` along a geometric approach sequence.

    ``e`` is an expression or a callable taking a dict of arrays.

    The trend is the slope of ``log|e|`` against ``log`` of the approach
    scale (``|X|`` toward infinity, ``1/distance`` toward an endpoint) over
    the last ``tail`` points.
    """
    pts = approach_points(direction, r0, delta0, steps)
    bind = {n: np.full(len(pts), complex(v)) for n, v in (fixed or {}).items()}
    bind[var] = np.array(pts, dtype=complex)
    with np.errstate(all="ignore"):
        if callable(e) and not isinstance(e, Expr):
            vals = e(bind)
        else:
            e = as_expr(e)
            vals = evaluate(e, {n: bind[n] for n in e.free_symbols})
    mags = np.abs(np.broadcast_to(vals, (len(pts),))).astype(float)
    mags = np.where(np.isnan(mags), np.inf, mags)
    if direction in ("+inf", "-inf"):
        scale = np.log(np.abs(pts))
    else:
        scale = -np.log(np.abs(np.array(pts) - direction[0]))
    est = LimitEstimate("inconclusive", list(map(float, pts)), list(map(float, mags)))
    m = mags[-tail:]
    if np.all(m <= TINY) or (m[-1] <= TINY and np.all(np.diff(m) <= 0)):
        est.trend, est.slope = "zero", -math.inf
        return est
    if np.any(np.isinf(m)):
        est.trend, est.slope = "diverging", math.inf
        return est
    logs = np.log(np.maximum(m, TINY))
    slope = float(np.polyfit(scale[-tail:], logs, 1)[0])
    est.slope = slope
    steps_ = np.diff(logs)
    if slope < -SLOPE_TOL and np.all(steps_ <= 1e-12):
        est.trend = "zero"
    elif slope > SLOPE_TOL and np.all(steps_ >= -1e-12):
        est.trend = "diverging"
    elif abs(slope) <= SLOPE_TOL:
        est.trend = "bounded"
    return est
