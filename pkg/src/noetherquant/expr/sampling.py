"""Randomized identity testing over a sampling domain."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .calculus import terms
from .core import as_expr
from .evaluate import evaluate

DEFAULT_SAMPLES = 24
RTOL = 1e-9
ATOL = 1e-12


class SamplingError(RuntimeError):
    pass


@dataclass
class Domain:
    """Boxes for each name, plus strict inequalities ``g > 0`` to reject points.

    ``fixed`` pins names to a single value (usually parameters). Names in
    ``complex_names`` get an imaginary part drawn from the same interval.
    """

    intervals: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)
    fixed: dict = field(default_factory=dict)
    complex_names: frozenset = frozenset()

    def names(self):
        return set(self.intervals) | set(self.fixed)

    def with_fixed(self, **values) -> Domain:
        fixed = dict(self.fixed)
        fixed.update(values)
        return Domain(dict(self.intervals), list(self.constraints), fixed, self.complex_names)

    def with_intervals(self, **intervals) -> Domain:
        iv = dict(self.intervals)
        iv.update(intervals)
        fixed = {k: v for k, v in self.fixed.items() if k not in intervals}
        return Domain(iv, list(self.constraints), fixed, self.complex_names)

    def with_constraints(self, *extra) -> Domain:
        return Domain(
            dict(self.intervals),
            list(self.constraints) + [as_expr(c) for c in extra],
            dict(self.fixed),
            self.complex_names,
        )

    def sample(self, rng: np.random.Generator, m: int, max_tries: int = 50) -> dict:
        """Draw ``m`` points satisfying every constraint."""
        got: dict = {}
        count = 0
        for _ in range(max_tries):
            batch = {}
            n = max(2 * m, 16)
            for name, (lo, hi) in self.intervals.items():
                if name in self.fixed:
                    continue
                vals = rng.uniform(lo, hi, n).astype(complex)
                if name in self.complex_names:
                    vals = vals + 1j * rng.uniform(lo, hi, n)
                batch[name] = vals
            for name, v in self.fixed.items():
                batch[name] = np.full(n, complex(v))
            ok = np.ones(n, dtype=bool)
            for g in self.constraints:
                vals = evaluate(g, batch)
                ok &= np.isfinite(vals) & (vals.real > 0)
            for name in batch:
                got.setdefault(name, []).append(batch[name][ok])
            count += int(ok.sum())
            if count >= m:
                break
        if count < m:
            raise SamplingError("could not draw enough points satisfying the domain constraints")
        return {k: np.concatenate(v)[:m] for k, v in got.items()}


def _rng(rng):
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(0 if rng is None else rng)


def sample_values(exprs, dom: Domain, m: int = DEFAULT_SAMPLES, rng=None, max_rounds: int = 20):
    """Evaluate several expressions on ``m`` common points where all are finite.

    Points where any value is non-finite are dropped and redrawn.
    Returns (points, [values...]).
    """
    rng = _rng(rng)
    exprs = [as_expr(e) for e in exprs]
    need = set().union(*[e.free_symbols for e in exprs]) if exprs else set()
    missing = need - dom.names()
    if missing:
        raise SamplingError(f"domain does not cover {sorted(missing)}")
    kept_pts: dict = {}
    kept_vals: list = [[] for _ in exprs]
    count = 0
    for _ in range(max_rounds):
        pts = dom.sample(rng, m)
        vals = [evaluate(e, pts) if e.free_symbols else np.full(m, complex(evaluate(e, {})))
                for e in exprs]
        ok = np.ones(m, dtype=bool)
        for v in vals:
            ok &= np.isfinite(v)
        for k, v in pts.items():
            kept_pts.setdefault(k, []).append(v[ok])
        for j, v in enumerate(vals):
            kept_vals[j].append(v[ok])
        count += int(ok.sum())
        if count >= m:
            break
    if count < m:
        raise SamplingError("too many poles: could not find finite sample points")
    pts = {k: np.concatenate(v)[:m] for k, v in kept_pts.items()}
    return pts, [np.concatenate(v)[:m] for v in kept_vals]


def equivalent(a, b, dom: Domain, m: int = DEFAULT_SAMPLES, rtol: float = RTOL,
               atol: float = ATOL, rng=None) -> bool:
    """Probabilistic identity test: ``|a-b| <= atol + rtol*max(|a|,|b|)`` at every sample."""
    return max_mismatch(a, b, dom, m, rtol, atol, rng) <= 1.0


def max_mismatch(a, b, dom: Domain, m: int = DEFAULT_SAMPLES, rtol: float = RTOL,
                 atol: float = ATOL, rng=None) -> float:
    """Largest ratio of ``|a-b|`` to the allowed tolerance; <= 1 means equivalent."""
    _, (va, vb) = sample_values([a, b], dom, m, rng)
    tol = atol + rtol * np.maximum(np.abs(va), np.abs(vb))
    return float(np.max(np.abs(va - vb) / tol))


def zero_mismatch(e, dom: Domain, m: int = DEFAULT_SAMPLES, rtol: float = RTOL,
                  atol: float = ATOL, rng=None) -> float:
    """Like ``max_mismatch(e, 0)`` but scaled by the sizes of the summands of ``e``.

    A sum that cancels to roundoff is accepted relative to its largest terms.
    """
    e = as_expr(e)
    ts = terms(e)
    _, vals = sample_values(list(ts), dom, m, rng)
    total = sum(vals)
    scale = sum(np.abs(v) for v in vals)
    return float(np.max(np.abs(total) / (atol + rtol * scale)))


def is_zero(e, dom: Domain, m: int = DEFAULT_SAMPLES, rtol: float = RTOL,
            atol: float = ATOL, rng=None) -> bool:
    return zero_mismatch(e, dom, m, rtol, atol, rng) <= 1.0
