"""Command-line driver: verification suites over case files.

Every subcommand builds a report dict, prints a short text summary and can
write the report as JSON with sorted keys. The exit status is 1 when any
verification failed and 2 for unusable input.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import ladder, numerics
from .cases import SLOTS, CaseConfig, CaseError, load_case
from .diffop import (
    ConstraintError,
    DiffOp,
    VarChange,
    build_vonroos,
    change_vars_pde,
    first_derivative_gauge,
    gauge_transform,
    operators_match,
    pde_symmetry,
    residual,
    same_operator,
)
from .expr import (
    ZERO,
    Domain,
    Expr,
    add,
    as_expr,
    diff,
    evaluate,
    max_mismatch,
    mul,
    power,
    render,
    sample_values,
    subs,
    zero_mismatch,
)
from .mechanics import (
    check_noether,
    contact_oscillator_mismatch,
    euler_lagrange,
    hamiltonian_to_lagrangian,
    jlm_condition,
    jlm_lagrangian,
    lagrangians_equivalent,
    legendre_to_hamiltonian,
    map_from_f3,
    momentum,
    noether_count_expected,
    poisson_bracket,
)
from .vectorfield import (
    Ode2,
    VectorField,
    is_abelian_intransitive_pair,
    structure_constants,
    symmetry_mismatch,
    total_derivative,
    verify_point_transform,
)

log = logging.getLogger(__name__)

N_DOF = 1
PERIOD_TOL = 1e-5
CLOSED_FORM_TOL = 1e-6
DRIFT_TOL = 1e-6
RATIO_RANGE = (14.0, 18.0)
SPAN_TOL = 1e-8
ROUNDOFF = 1e-12
ORDERING_CONDITION = Fraction(-1, 4)
# parameter sets for checks that must hold for every (k, w)
OFF_PARAMS = ({"k": 0.8, "w": 1.3}, {"k": 1.4, "w": 0.7})


class StepFailed(RuntimeError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"step {step}: {reason}")
        self.step = step


@dataclass
class Report:
    command: str
    case: str
    seed: int
    checks: list = field(default_factory=list)
    discrepancies: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def check(self, name: str, passed: bool, **info) -> bool:
        entry = {"name": name, "passed": bool(passed)}
        entry.update({k: _plain(v) for k, v in info.items()})
        self.checks.append(entry)
        return bool(passed)

    def discrepancy(self, item: str, printed, derived, **info):
        entry = {"item": item, "printed": _text(printed), "derived": _text(derived)}
        entry.update({k: _plain(v) for k, v in info.items()})
        self.discrepancies.append(entry)

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks) and bool(self.checks)

    def as_dict(self) -> dict:
        out = {"command": self.command, "case": self.case, "seed": self.seed, "passed": self.passed,
               "checks": self.checks, "discrepancy_ledger": self.discrepancies}
        out.update({k: _plain(v) for k, v in self.data.items()})
        return out

    def text(self) -> str:
        lines = [f"{self.command} [{self.case}] seed={self.seed}"]
        for c in self.checks:
            extra = ", ".join(f"{k}={_short(v)}" for k, v in c.items() if k not in ("name", "passed"))
            lines.append(f"  {'PASS' if c['passed'] else 'FAIL'}  {c['name']}" + (f"  ({extra})" if extra else ""))
        if self.discrepancies:
            lines.append(f"  discrepancy ledger ({len(self.discrepancies)}):")
            for d in self.discrepancies:
                lines.append(f"    - {d['item']}: printed {d['printed']}")
                lines.append(f"      derived {d['derived']}")
        lines.append("RESULT: " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines)


def _text(v) -> str:
    if v is None:
        return ""
    if isinstance(v, Expr):
        return render(v)
    if isinstance(v, DiffOp):
        return json.dumps(v.to_table(), sort_keys=True)
    return str(v)


def _plain(v):
    """JSON-safe copy with floats kept as floats and complex numbers as pairs."""
    if isinstance(v, (bool, str, int)) or v is None:
        return v
    if isinstance(v, float):
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.floating,)):
        return _plain(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (complex, np.complexfloating)):
        v = complex(v)
        return _plain(v.real) if v.imag == 0 else [_plain(v.real), _plain(v.imag)]
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, Expr):
        return render(v)
    if isinstance(v, DiffOp):
        return v.to_table()
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    return str(v)


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.3g}"
    s = json.dumps(v, sort_keys=True) if not isinstance(v, str) else v
    return s if len(s) <= 60 else s[:57] + "..."


def _pinned(cfg: CaseConfig, which: str = "domain") -> Domain:
    dom = cfg.domain(which)
    return dom.with_fixed(**{k: float(v) for k, v in cfg.params.items()})


def _combination(e: Expr, basis: dict, t: str, x: str) -> VectorField:
    """Vector field from an expression linear in generator labels, e.g. ``k*g2 - 3*w*g6``."""
    unknown = e.free_symbols & set(basis)
    if not unknown:
        raise CaseError(f"{render(e)} names no generator")
    xi, eta = [], []
    for label in sorted(unknown):
        c = diff(e, label)
        if c.free_symbols & set(basis):
            raise CaseError(f"{render(e)} is not linear in the generators")
        xi.append(mul(c, basis[label].xi))
        eta.append(mul(c, basis[label].eta))
    return VectorField(add(*xi), add(*eta), t, x)


def _solve_momentum_free(expr: Expr, mom: Expr, p: str) -> Expr:
    return subs(expr, {p: mom})


# ---------------------------------------------------------------------------
# verify-symmetries


def cmd_verify_symmetries(cfg: CaseConfig, rng) -> Report:
    rep = Report("verify-symmetries", cfg.name, 0)
    if not cfg.generators or not cfg.has("ode", "rhs"):
        raise CaseError(f"case {cfg.name!r} has no [ode] and [generators]")
    dom, ode = cfg.domain(), cfg.ode
    passed = []
    for label, vf in cfg.generators.items():
        try:
            mm = symmetry_mismatch(vf, ode, dom, rng)
        except (ArithmeticError, ValueError, RuntimeError) as exc:
            rep.check(f"symmetry {label}", False, error=f"{type(exc).__name__}: {exc}")
            continue
        if rep.check(f"symmetry {label}", mm <= 1.0, mismatch=mm):
            passed.append(label)
    rep.data["symmetries_passed"] = f"{len(passed)}/{len(cfg.generators)}"
    failed = [lab for lab in cfg.generators if lab not in passed]
    rep.data["symmetry_failures"] = failed

    for label in cfg.generators:
        printed = cfg.printed_generator(label)
        if printed is None:
            continue
        mm = symmetry_mismatch(printed, ode, dom, rng)
        if mm > 1.0:
            main = cfg.generators[label]
            rep.discrepancy(f"generator {label}", f"xi = {render(printed.xi)}; eta = {render(printed.eta)}",
                            f"xi = {render(main.xi)}; eta = {render(main.eta)}", mismatch=mm)

    pinned = _pinned(cfg)
    labels = list(cfg.generators)
    sc = structure_constants(list(cfg.generators.values()), pinned, rng=rng)
    table = {}
    for i, a in enumerate(labels):
        for j in range(i + 1, len(labels)):
            row = {labels[k]: float(np.real(sc.c[i, j, k])) for k in range(len(labels)) if abs(sc.c[i, j, k]) > 0}
            if row:
                table[f"[{a},{labels[j]}]"] = row
    rep.data["commutator_table"] = table
    rep.check("closure under commutation", sc.closed, residual=sc.residual, rank=sc.rank)
    rep.data["killing_rank"] = sc.killing_rank()

    pairs = []
    for i, a in enumerate(labels):
        for b in labels[i + 1:]:
            if is_abelian_intransitive_pair(cfg.generators[a], cfg.generators[b], pinned, rng):
                pairs.append([a, b])
    listed = [s.strip() for s in cfg.text("transforms", "abelian_pair", "").split(",") if s.strip()]
    if listed:
        if len(listed) != 2:
            raise CaseError("[transforms] abelian_pair needs exactly two entries")
        fa, fb = (_combination(as_expr(s), cfg.generators, cfg.t, cfg.x) for s in listed)
        ok = is_abelian_intransitive_pair(fa, fb, pinned, rng)
        rep.check("listed abelian intransitive pair", ok, pair=listed)
        if ok and listed not in pairs:
            pairs.append(listed)
    rep.data["abelian_intransitive_pairs"] = pairs

    if cfg.has("noether", "lagrangian"):
        found = _noether(cfg, rep, rng)
        expected = cfg.labels("noether", "expected")
        if expected:
            rep.check("noether subset", found == expected, found=found, expected=expected)
            rep.check("noether count", len(found) == noether_count_expected(N_DOF),
                      count=len(found), formula=noether_count_expected(N_DOF))
    return rep


def _noether(cfg: CaseConfig, rep: Report | None, rng) -> list:
    L = cfg.expr("noether", "lagrangian")
    found = []
    details = {}
    for label, vf in cfg.generators.items():
        res = check_noether(vf, L, cfg.domain(), rng)
        details[label] = {"noether": res.is_noether, "conserved": res.conserved,
                          "gauge": render(res.gauge) if res.gauge is not None else None}
        if res.is_noether:
            found.append(label)
    if rep is not None:
        rep.data["noether"] = details
    return found


# ---------------------------------------------------------------------------
# classical


def cmd_classical(cfg: CaseConfig, rng) -> Report:
    rep = Report("classical", cfg.name, 0)
    dom = cfg.domain()
    has_L = cfg.has("noether", "lagrangian")
    L = cfg.expr("noether", "lagrangian") if has_L else None
    ode = cfg.ode if cfg.has("ode", "rhs") else None

    if has_L and ode is not None:
        el = euler_lagrange(L, cfg.t, cfg.x)
        rep.check("euler-lagrange equation", max_mismatch(el.rhs, ode.rhs, dom, rng=rng) <= 1.0)
    if cfg.has("mechanics", "hamiltonian") and has_L and cfg.has("mechanics", "momentum"):
        _legendre_checks(cfg, rep, L, rng)
    if cfg.has("mechanics", "multiplier_f"):
        _multiplier_checks(cfg, rep, L, rng)
    if cfg.has("mechanics", "contact") and ode is not None:
        mm = contact_oscillator_mismatch(cfg.expr("mechanics", "contact"), ode, "w", dom, rng)
        rep.check("contact function obeys the linear oscillator", mm <= 1.0, mismatch=mm)
    if cfg.has("mechanics", "generating_function"):
        _generating_function_checks(cfg, rep, rng)
    if cfg.has("mechanics", "swap_x"):
        _swap_checks(cfg, rep, L, rng)
    if cfg.has("transforms", "free_t") and ode is not None:
        chk = verify_point_transform(cfg.expr("transforms", "free_t"), cfg.expr("transforms", "free_x"),
                                     ode, Ode2(ZERO, cfg.t, cfg.x), dom, rng)
        rep.check("point map to the free particle", chk.ok, time_preserving=chk.time_preserving,
                  mismatch=chk.mismatch)
    if cfg.has("quantum", "map") and ode is not None:
        chk = _linearization(cfg, rng)
        rep.check("time-preserving linearizing map", chk.ok and chk.time_preserving, mismatch=chk.mismatch)
    if cfg.has("numerics", "solution") and ode is not None:
        _numeric_checks(cfg, rep, rng)
    if not rep.checks:
        raise CaseError(f"case {cfg.name!r} has nothing to check classically")
    return rep


def _legendre_checks(cfg, rep, L, rng):
    H, mom = cfg.expr("mechanics", "hamiltonian"), cfg.expr("mechanics", "momentum")
    pdom = cfg.domain("phase_domain")
    leg = legendre_to_hamiltonian(L, cfg.domain(), cfg.t, cfg.x, cfg.p, rng)
    mm = max_mismatch(leg.result, H, pdom, rng=rng)
    rep.check("legendre transform gives the hamiltonian", mm <= 1.0, mismatch=mm,
              branch=f"{leg.branch + 1}/{leg.n_branches}")
    mm = max_mismatch(momentum(L, cfg.x), mom, cfg.domain(), rng=rng)
    rep.check("momentum", mm <= 1.0, mismatch=mm)
    back = hamiltonian_to_lagrangian(H, pdom, cfg.t, cfg.x, cfg.p, rng)
    mm = max_mismatch(back.result, L, cfg.domain(), rng=rng)
    rep.check("inverse legendre transform gives the lagrangian", mm <= 1.0, mismatch=mm)
    if "lagrangian" in cfg.printed:
        printed = cfg.printed["lagrangian"]
        mm = max_mismatch(legendre_to_hamiltonian(printed, cfg.domain(), cfg.t, cfg.x, cfg.p, rng).result,
                          H, pdom, rng=rng)
        if mm > 1.0:
            rep.discrepancy("lagrangian (constant term)", printed, L,
                            note="printed form does not Legendre-transform to the hamiltonian", mismatch=mm)


def _multiplier_checks(cfg, rep, L, rng):
    f, g = cfg.expr("mechanics", "multiplier_f"), cfg.expr("mechanics", "multiplier_g")
    dom = cfg.domain()
    cond = jlm_condition(f, g, dom, cfg.x, rng)
    roots = [complex(r) for r in cond.roots]
    rep.check("last-multiplier condition", cond.holds, roots=roots)
    if not (cond.holds and L is not None):
        return
    pinned = _pinned(cfg)
    matched = None
    for r in roots:
        alpha = Fraction(r.real).limit_denominator(1000)
        Lj = jlm_lagrangian(f, g, alpha, dom, cfg.x, rng)
        if Lj is None:
            continue
        m = lagrangians_equivalent(L, Lj, pinned, cfg.t, cfg.x, rng)
        if m.equivalent:
            matched = (alpha, m.factor, Lj)
            break
    rep.check("lagrangian equals a multiplier lagrangian plus a total derivative", matched is not None,
              alpha=str(matched[0]) if matched else None, factor=matched[1] if matched else None)
    if matched and cfg.has("mechanics", "gauge"):
        _, c, Lj = matched
        rest = add(L, mul(-1, as_expr(c), Lj))
        d_given = total_derivative(cfg.expr("mechanics", "gauge"), cfg.t, cfg.x)
        mm = max_mismatch(rest, d_given, pinned, rng=rng)
        rep.check("gauge function", mm <= 1.0, mismatch=mm)


def _generating_function_checks(cfg, rep, rng):
    pdom, cdom = cfg.domain("phase_domain"), cfg.domain("canonical_domain")
    H = cfg.expr("mechanics", "hamiltonian")
    f3 = cfg.expr("mechanics", "generating_function")
    cm = map_from_f3(f3, pdom, "q", "s", cfg.x, cfg.p, rng)
    rep.check("generated map is canonical", cm.is_canonical(cdom, rng))
    K = cfg.expr("mechanics", "new_hamiltonian")
    mm = max_mismatch(cm.pullback(H), K, cdom, rng=rng)
    rep.check("pullback of the hamiltonian", mm <= 1.0, mismatch=mm)
    consistent = None
    if cfg.has("mechanics", "contact") and cfg.has("noether", "lagrangian"):
        # q recovered from the contact function at the mapped point
        leg = legendre_to_hamiltonian(cfg.expr("noether", "lagrangian"), cfg.domain(), cfg.t, cfg.x, cfg.p, rng)
        q_of = subs(cfg.expr("mechanics", "contact"), {f"{cfg.x}_t": leg.inverse})
        back = subs(q_of, {cfg.x: cm.old_q, cfg.p: cm.old_p})
        mm = max_mismatch(back, "q", cdom, rng=rng)
        consistent = rep.check("generated map reproduces the contact function", mm <= 1.0, mismatch=mm)
    if "contact_x" in cfg.printed:
        derived_x = diff(f3, cfg.p)
        if max_mismatch(cfg.printed["contact_x"], derived_x, pdom, rng=rng) > 1.0:
            rep.discrepancy("position in terms of (q, p)", cfg.printed["contact_x"], derived_x)
    if "generating_function" in cfg.printed:
        pf = cfg.printed["generating_function"]
        if max_mismatch(diff(pf, cfg.p), diff(f3, cfg.p), pdom, rng=rng) > 1.0:
            rep.discrepancy("type-3 generating function", pf, f3)
    if "new_hamiltonian" in cfg.printed:
        pk = cfg.printed["new_hamiltonian"]
        if max_mismatch(pk, cm.pullback(H), cdom, rng=rng) > 1.0:
            rep.discrepancy("transformed hamiltonian", pk, K)
    if cfg.has("mechanics", "linear_q"):
        lq, ls = cfg.expr("mechanics", "linear_q"), cfg.expr("mechanics", "linear_s")
        ok = _linear_map_ok(lq, ls, K, cdom, rng)
        rep.check("linear map to the oscillator", ok)
        if "linear_q" in cfg.printed and not _linear_map_ok(cfg.printed["linear_q"], cfg.printed["linear_s"],
                                                             K, cdom, rng):
            rep.discrepancy("linear canonical map",
                            f"q~ = {render(cfg.printed['linear_q'])}; s~ = {render(cfg.printed['linear_s'])}",
                            f"q~ = {render(lq)}; s~ = {render(ls)}")
    return consistent


def _linear_map_ok(lq, ls, K, dom, rng) -> bool:
    br = poisson_bracket(lq, ls, [("q", "s")])
    osc = mul(Fraction(1, 2), add(power(ls, 2), mul(power("w", 2), power(lq, 2))))
    return max_mismatch(br, 1, dom, rng=rng) <= 1.0 and max_mismatch(osc, K, dom, rng=rng) <= 1.0


def _swap_checks(cfg, rep, L, rng):
    pdom = cfg.domain("phase_domain")
    sx, sp = cfg.expr("mechanics", "swap_x"), cfg.expr("mechanics", "swap_p")
    br = poisson_bracket(sx, sp, [("x", "p")])
    rep.check("swap map is canonical", max_mismatch(br, 1, pdom, rng=rng) <= 1.0)
    Ht = cfg.expr("mechanics", "swapped_hamiltonian")
    H = cfg.expr("mechanics", "hamiltonian")
    mm = max_mismatch(subs(Ht, {cfg.x: sx, "P": sp}), H, pdom, rng=rng)
    rep.check("swapped hamiltonian pulls back to the original", mm <= 1.0, mismatch=mm)
    if L is not None:
        back = hamiltonian_to_lagrangian(Ht, pdom, cfg.t, cfg.x, "P", rng)
        mm = max_mismatch(back.result, L, cfg.domain(), rng=rng)
        rep.check("legendre transform of the swapped hamiltonian", mm <= 1.0, mismatch=mm)


def _linearization(cfg, rng):
    ode = cfg.ode
    wave_rhs = mul(Fraction(1, 2), diff(cfg.expr("quantum", "potential"), cfg.wave))
    target = Ode2(subs(wave_rhs, {cfg.wave: cfg.x}), cfg.t, cfg.x)
    new_t = cfg.expr("quantum", "map_time") if cfg.has("quantum", "map_time") else as_expr(cfg.t)
    return verify_point_transform(new_t, cfg.expr("quantum", "map"), ode, target, cfg.domain(), rng)


def _numeric_checks(cfg, rep, rng):
    params = {k: float(v) for k, v in cfg.params.items()}
    sol = cfg.expr("numerics", "solution")
    ode = cfg.ode
    amps = [float(Fraction(a)) for a in cfg.labels("numerics", "amplitudes")]
    delta = cfg.number("numerics", "phase", 0.0)
    h = cfg.number("numerics", "step", 1e-3)
    n_periods = int(cfg.number("numerics", "periods", 0))
    omega = params.get("w")
    oscillating = n_periods > 0 and omega is not None

    # the closed form against the equation itself
    sol_t = diff(sol, cfg.t)
    on_sol = subs(ode.rhs, {cfg.x: sol, ode.v: sol_t})
    res = add(diff(sol_t, cfg.t), mul(-1, on_sol))
    lo, hi = min(amps), max(amps)
    sdom = Domain({cfg.t: (-3.0, 3.0), "A": (lo, hi), "delta": (-1.0, 1.0)}, fixed=params)
    rep.check("closed form solves the equation", zero_mismatch(res, sdom, rng=rng) <= 1.0)

    span = 2 * math.pi / omega if oscillating else 1.0
    bound = dict(params, delta=delta)
    periods, errors = [], []
    conserved = cfg.labels("numerics", "conserved")
    quantities = _conserved_quantities(cfg, conserved, rng)
    drifts = {}
    for A in amps:
        bound["A"] = A
        x0 = complex(evaluate(sol, dict(bound, **{cfg.t: 0.0}))).real
        v0 = complex(evaluate(sol_t, dict(bound, **{cfg.t: 0.0}))).real
        traj = numerics.integrate(ode, (x0, v0), span, h, params)
        errors.append(numerics.closed_form_error(subs(sol, {"A": A, "delta": delta}), traj, params, cfg.t))
        for name, q in quantities.items():
            drifts[f"{name} A={A}"] = numerics.drift(q, traj, params, cfg.t, cfg.x)
        if oscillating:
            long = numerics.integrate(ode, (x0, v0), n_periods * span, h, params)
            periods.append(numerics.period_of(long))
    rep.check("RK4 against the closed form", max(errors) <= CLOSED_FORM_TOL, max_error=max(errors), step=h)
    if oscillating:
        spread = max(periods) - min(periods)
        rep.check("period independent of amplitude", spread <= PERIOD_TOL, periods=periods,
                  expected=span, spread=spread)
    if drifts:
        rep.check("conserved quantities", max(drifts.values()) <= DRIFT_TOL, drift=drifts)
    mid = amps[len(amps) // 2]
    bound["A"] = mid
    x0 = complex(evaluate(sol, dict(bound, **{cfg.t: 0.0}))).real
    v0 = complex(evaluate(sol_t, dict(bound, **{cfg.t: 0.0}))).real
    coarse = span / 120 if oscillating else 0.05
    exact = subs(sol, {"A": mid, "delta": delta})
    coarse_err = numerics.closed_form_error(exact, numerics.integrate(ode, (x0, v0), span, coarse, params), params, cfg.t)
    if coarse_err < ROUNDOFF:
        # low-degree polynomial solutions are integrated exactly; no order to measure
        rep.check("RK4 convergence order", True, error=coarse_err, note="integrator exact to roundoff")
    else:
        ratio = numerics.convergence_ratio(ode, (x0, v0), span, coarse, params, exact)
        rep.check("RK4 convergence order", RATIO_RANGE[0] <= ratio <= RATIO_RANGE[1], ratio=ratio, step=coarse)


def _conserved_quantities(cfg, names, rng) -> dict:
    out = {}
    v = f"{cfg.x}_t"
    for name in names:
        if name == "hamiltonian":
            mom = cfg.expr("mechanics", "momentum") if cfg.has("mechanics", "momentum") \
                else momentum(cfg.expr("noether", "lagrangian"), cfg.x)
            out["hamiltonian"] = subs(cfg.expr("mechanics", "hamiltonian"), {cfg.p: mom})
        elif name == "noether":
            L = cfg.expr("noether", "lagrangian")
            for label in cfg.labels("noether", "expected"):
                res = check_noether(cfg.generators[label], L, cfg.domain(), rng)
                if res.integral is not None:
                    out[f"integral {label}"] = res.integral
        else:
            raise CaseError(f"unknown conserved quantity {name!r} (use hamiltonian or noether)")
    del v
    return out


# ---------------------------------------------------------------------------
# quantize


def _target_operator(cfg) -> DiffOp:
    from .expr import ONE, I

    return DiffOp.of({(1, 0): mul(2, I), (0, 2): ONE, (0, 0): cfg.expr("quantum", "potential")}, cfg.t, cfg.wave)


def derive_operator(cfg: CaseConfig, rng=None, check: bool = True) -> dict:
    """Steps 3 of the pipeline: pull back, then remove the first derivative."""
    qdom = cfg.domain()
    inverse = cfg.expr("quantum", "inverse_map") if cfg.has("quantum", "inverse_map") else None
    ch = VarChange.of(cfg.expr("quantum", "map"), cfg.x, cfg.wave, inverse)
    pulled = change_vars_pde(_target_operator(cfg), ch, qdom if check else None, rng)
    factor = first_derivative_gauge(pulled)
    final = gauge_transform(pulled, factor, qdom, rng)
    return {"pulled": pulled, "factor": factor, "final": final}


def cmd_quantize(cfg: CaseConfig, rng) -> Report:
    rep = Report("quantize", cfg.name, 0)
    try:
        _quantize_steps(cfg, rep, rng)
    except StepFailed as exc:
        rep.check(f"step {exc.step}", False, reason=str(exc))
        rep.data["failed_step"] = exc.step
    return rep


def _quantize_steps(cfg, rep, rng):
    if not cfg.has("quantum", "map"):
        raise CaseError(f"case {cfg.name!r} has no [quantum] map")
    # step 1
    chk = _linearization(cfg, rng)
    if not chk.time_preserving:
        raise StepFailed(1, "the linearizing map changes time")
    if not rep.check("step 1: linearizing map", chk.ok, mismatch=chk.mismatch):
        raise StepFailed(1, "map does not take the equation to the linear oscillator")
    # step 2
    found = _noether(cfg, rep, rng)
    want = noether_count_expected(N_DOF)
    if not rep.check("step 2: noether symmetries", len(found) == want, found=found, count=len(found),
                     formula=want):
        raise StepFailed(2, f"found {len(found)} noether symmetries, expected {want}")
    # step 3
    ops = derive_operator(cfg, rng)
    final, dom = ops["final"], cfg.domain()
    rep.data["operator"] = final
    rep.data["gauge_factor"] = ops["factor"]
    no_dx = zero_mismatch(final[0, 1], dom, rng=rng) <= 1.0 if final[0, 1] != ZERO else True
    if not rep.check("step 3: first derivative removed", no_dx):
        raise StepFailed(3, "gauge left a first derivative")
    _operator_ledger(cfg, rep, ops, rng)
    _ground_state_checks(cfg, rep, final, rng)
    # step 4
    gens = {lab: cfg.generators[lab] for lab in found}
    bad = []
    projections = {}
    for label, g in cfg.symmetries.items():
        res = pde_symmetry(g, final, dom, rng)
        proj = _projection(g, gens, _pinned(cfg), rng)
        projections[label] = proj
        if not (res.ok and proj["in_span"]):
            bad.append(label)
        printed = cfg.printed_generator(label, ("T", "xi", "f"))
        if printed is not None and not pde_symmetry(printed, final, dom, rng).ok:
            rep.discrepancy(f"operator symmetry {label}",
                            f"T = {render(printed.T)}; xi = {render(printed.xi)}; f = {render(printed.f)}",
                            f"T = {render(g.T)}; xi = {render(g.xi)}; f = {render(g.f)}",
                            note="printed form is not a symmetry of the derived operator")
    rep.data["projections"] = projections
    if not rep.check("step 4: symmetries of the derived operator project onto noether symmetries", not bad,
                     checked=len(cfg.symmetries), failed=bad):
        raise StepFailed(4, f"failed: {', '.join(bad)}")


def _projection(g, gens: dict, dom: Domain, rng) -> dict:
    """Whether ``(T, xi)`` lies in the span of the noether fields, and which single field it matches."""
    if g.T == ZERO and g.xi == ZERO:
        return {"in_span": True, "matches": None, "residual": 0.0}
    labels = list(gens)
    exprs = [g.T, g.xi] + [e for lab in labels for e in (gens[lab].xi, gens[lab].eta)]
    _, vals = sample_values(exprs, dom, 40, rng)
    target = np.concatenate(vals[:2])
    cols = [np.concatenate(vals[2 + 2 * i: 4 + 2 * i]) for i in range(len(labels))]
    M = np.stack(cols, axis=1)
    coef, *_ = np.linalg.lstsq(M, target, rcond=None)
    res = float(np.linalg.norm(M @ coef - target) / max(np.linalg.norm(target), 1e-300))
    nz = [labels[i] for i in range(len(labels)) if abs(coef[i]) > 1e-8 * np.max(np.abs(coef))]
    return {"in_span": res <= SPAN_TOL, "matches": nz[0] if len(nz) == 1 else nz, "residual": res}


def _operator_ledger(cfg, rep, ops, rng):
    dom = cfg.domain()
    for label, key in (("pulled", "operator after the change of variables"), ("final", "operator after the gauge")):
        printed = cfg.printed_operator(label)
        if printed is None:
            continue
        diffs = operators_match(ops[label], printed, dom, rng)
        bad = {name: diffs[slot] for name, slot in SLOTS.items() if slot in diffs and diffs[slot] > 1.0}
        if bad:
            rep.discrepancy(key, printed, ops[label], mismatched_slots=sorted(bad))
    if "gauge_factor" in cfg.printed:
        # printed factor f means old unknown = f * new unknown, up to a constant
        c_ratio = mul(cfg.printed["gauge_factor"], power(ops["factor"], -1))
        _, (vals,) = sample_values([c_ratio], dom.with_fixed(**{k: float(v) for k, v in cfg.params.items()}),
                                   24, rng)
        constant = float(np.max(np.abs(vals - vals.mean())) / np.max(np.abs(vals))) < 1e-9
        if not constant:
            rep.discrepancy("gauge factor", cfg.printed["gauge_factor"], ops["factor"],
                            note="the unknown is multiplied by this factor, up to a constant")


def _ground_state_checks(cfg, rep, final, rng):
    params = {k: float(v) for k, v in cfg.params.items()}
    for key, branch in (("ground_state", ladder.POSITIVE), ("ground_state_negative", ladder.NEGATIVE)):
        if key not in cfg.printed:
            continue
        printed = cfg.printed[key]
        bdom = ladder.branch_domain(branch, params)
        r = residual(final, printed, bdom, ladder.RESIDUAL_SAMPLES, rng)
        derived = ladder.ground_state(branch)
        rd = residual(final, derived.factored, bdom, ladder.RESIDUAL_SAMPLES, rng)
        rep.check(f"{branch} ground state residual", max(r, rd) <= ladder.RESIDUAL_TOL, printed=r, derived=rd)
        # away from the case parameters
        worst = 0.0
        for other in OFF_PARAMS:
            odom = ladder.branch_domain(branch, other)
            worst = max(worst, residual(final.substitute(other), subs(printed, other), odom,
                                        ladder.RESIDUAL_SAMPLES, rng))
        if worst > ladder.RESIDUAL_TOL:
            rep.discrepancy(f"{branch} ground state", printed, derived.expr,
                            note="fails away from the case parameters", residual=worst)


# ---------------------------------------------------------------------------
# spectrum


def cmd_spectrum(cfg: CaseConfig, rng, n_max: int = 10, branch: str = "pos") -> Report:
    if cfg.text("quantum", "spectrum", "") != "ladder":
        raise CaseError(f"case {cfg.name!r} has no ladder spectrum")
    branch = ladder.branch_of(branch)
    rep = Report("spectrum", cfg.name, 0)
    params = {k: float(v) for k, v in cfg.params.items()}
    final = derive_operator(cfg, rng, check=False)["final"]
    spec = ladder.spectrum(n_max, branch, params, final, rng, strict=False)
    rep.data["branch"] = branch
    rep.data["table"] = spec.table()
    rep.data["text_table"] = spec.text()
    for lv in spec.levels:
        rep.check(f"level {lv.n}", lv.passed, E=lv.eigenvalue, expected=lv.expected, residual=lv.residual,
                  bc=f"{lv.far}/{lv.endpoint}")
    bdom = ladder.branch_domain(branch, params)
    g0 = ladder.ground_state(branch)
    rep.check("lowering the ground state gives zero", ladder.lower_level(g0) is None
              and zero_mismatch(ladder.lower_by_bracket(g0), bdom, rng=rng) <= 1.0)
    if n_max >= 1:
        g1 = ladder.raise_level(g0)
        c, spread = ladder.proportionality(ladder.lower_level(g1), g0, bdom, rng=rng)
        rep.check("lowering the first level gives the ground state", spread <= ladder.RESIDUAL_TOL,
                  constant=c, spread=spread)
        _spectrum_ledger(cfg, rep, branch, params, g0, g1, c, bdom, rng)
        for n, phi in enumerate((g0, g1, ladder.raise_level(g1))[:min(n_max, 2) + 1]):
            via = ladder.raise_by_bracket(phi)
            _, spread = ladder.proportionality(via, ladder.raise_level(phi), bdom, rng=rng)
            rep.check(f"bracket route agrees at level {n}", spread <= ladder.RESIDUAL_TOL, spread=spread)
    comm = ladder.ladder_commutator(cfg.domain(), rng)
    expected = cfg.printed.get("ladder_commutator", as_expr("4*k*w"))
    ok = comm.T == ZERO and comm.xi == ZERO and max_mismatch(comm.f, expected, cfg.domain(), rng=rng) <= 1.0
    rep.check("ladder commutator is a multiple of the homogeneity symmetry", ok, value=render(comm.f))
    ev = [ladder.eigenvalue_expr(ladder.ground_state(branch))]
    rep.check("eigenvalues do not depend on k", not any(e.has("k") for e in ev))
    if branch == ladder.POSITIVE:
        rep.data["harmonic_limit"] = ladder.harmonic_limit(w=params.get("w", 1.0))
    return rep


def _spectrum_ledger(cfg, rep, branch, params, g0, g1, lower_c, bdom, rng):
    key = "first_excited" if branch == ladder.POSITIVE else "first_excited_negative"
    if key in cfg.printed:
        c, spread = ladder.proportionality(cfg.printed[key], g1, bdom, rng=rng)
        rep.check(f"printed first {branch} excited state is proportional", spread <= ladder.RESIDUAL_TOL,
                  constant=c, spread=spread)
    if "lowering_constant" in cfg.printed and branch == ladder.POSITIVE:
        want = complex(evaluate(cfg.printed["lowering_constant"], params))
        if abs(want - lower_c) > 1e-8 * abs(want):
            rep.discrepancy("lowering constant", cfg.printed["lowering_constant"], f"{lower_c.real:.12g}",
                            note="with the ladder normalization used here")
    if cfg.printed_operator("raising") is not None and branch == ladder.POSITIVE:
        op = cfg.printed_operator("raising")
        applied = mul(as_expr(f"exp(-i*w*{cfg.t})"), op.apply(g0.expr))
        _, spread = ladder.proportionality(applied, g1, bdom, rng=rng)
        rep.check("printed raising operator reproduces the first level", spread <= ladder.RESIDUAL_TOL,
                  spread=spread)


# ---------------------------------------------------------------------------
# vonroos


def cmd_vonroos(cfg: CaseConfig, rng, alpha=None, beta=None, d=None) -> Report:
    rep = Report("vonroos", cfg.name, 0)
    dom = cfg.domain()
    a0, b0 = cfg.expr("ordering", "alpha"), cfg.expr("ordering", "beta")
    alpha = a0 if alpha is None else as_expr(alpha)
    beta = b0 if beta is None else as_expr(beta)
    if alpha is a0 and beta is b0 and cfg.has("ordering", "gamma"):
        gamma = cfg.expr("ordering", "gamma")
    else:
        gamma = as_expr(-1) - alpha - beta
    d = cfg.expr("ordering", "d") if d is None else as_expr(d)
    op = build_vonroos(alpha, beta, gamma, None, cfg.t, cfg.x)
    s = _constant(mul(4, alpha, add(alpha, beta, 1)))
    rep.data["ordering"] = {"alpha": alpha, "beta": beta, "gamma": gamma, "d": d, "s": s}

    printed = cfg.printed_operator("ordered")
    if printed is not None:
        printed = printed.substitute({"alpha": alpha, "beta": beta})
        rep.check("ordered operator matches the printed form", same_operator(op, printed, dom, rng))

    def count(a, b):
        o = build_vonroos(a, b, as_expr(-1) - a - b, None, cfg.t, cfg.x)
        return [lab for lab, g in cfg.symmetries.items() if pde_symmetry(g, o, dom, rng).ok]

    chosen = count(alpha, beta)
    want = len(cfg.symmetries) if abs(s - float(ORDERING_CONDITION)) < 1e-12 else 2
    rep.check("symmetry count for the chosen ordering", len(chosen) == want, accepted=chosen, s=s,
              expected=want, plus="linearity")
    counts = {}
    ok = True
    pairs = [(a0, b0)] + [tuple(as_expr(v) for v in pair.split(","))
                          for pair in cfg.text("ordering", "generic", "").split(";") if pair.strip()]
    for a, b in pairs:
        sv = _constant(mul(4, a, add(a, b, 1)))
        got = count(a, b)
        counts[f"alpha={render(a)}, beta={render(b)}"] = {"s": sv, "count": len(got), "accepted": got}
        at_condition = abs(sv - float(ORDERING_CONDITION)) < 1e-12
        ok &= (len(got) == len(cfg.symmetries)) == at_condition and (at_condition or len(got) == 2)
    rep.check("six symmetries exactly at the ordering condition", ok, counts=counts)

    target = DiffOp.of({(1, 0): as_expr("2*i"), (0, 2): cfg.expr("ordering", "target_dxx"),
                        (0, 0): cfg.expr("ordering", "target_mult")}, cfg.t, cfg.x)
    at_cond = build_vonroos(a0, b0, as_expr(-1) - a0 - b0, None, cfg.t, cfg.x)
    conj = gauge_transform(at_cond, cfg.expr("ordering", "gauge_factor"), dom, rng)
    rep.check("point transformation relates the two ordered equations", same_operator(conj, target, dom, rng))
    modified = build_vonroos(alpha, beta, gamma, d, cfg.t, cfg.x)
    same = same_operator(modified, target, dom, rng)
    rep.data["modified_equals_target"] = same
    if abs(_constant(d) + 0.5) < 1e-12 and abs(s - float(ORDERING_CONDITION)) < 1e-12:
        rep.check("d = -1/2 gives the first-derivative-free equation", same)

    if cfg.has("quantum", "map"):
        cmp = _compare_noether_operator(cfg, target, rng)
        rep.data["noether_operator"] = cmp
        if not cmp["agrees"]:
            rep.discrepancy("operator from the linearizing map", "equal to the first-derivative-free ordered operator",
                            "equal only after rescaling the map by (3/(2k))^(1/2)",
                            mismatched_slots=sorted(k for k, v in cmp["mismatch"].items() if v > 1.0))
        rep.check("linearizing-map operator agrees with the ordered operator up to the map's scale",
                  cmp["rescaled_agrees"])
    return rep


def _constant(e) -> float:
    e = as_expr(e)
    return complex(evaluate(e, {})).real


def _compare_noether_operator(cfg, target: DiffOp, rng) -> dict:
    """Noether-route operator against the target, with the case map and with the map rescaled.

    The rescaling constant makes the second-derivative coefficients agree; it is
    fitted per parameter set, so the rescaled comparison runs with parameters pinned.
    """
    dom = cfg.domain()
    final = derive_operator(cfg, rng, check=False)["final"]
    diffs = operators_match(final, target, dom, rng)
    out = {"agrees": all(v <= 1.0 for v in diffs.values()),
           "mismatch": {name: float(diffs.get(slot, 0.0)) for name, slot in SLOTS.items()}}
    ratio = mul(final[0, 2], power(target[0, 2], -1))
    rescaled = []
    for params in [{k: float(v) for k, v in cfg.params.items()}, *OFF_PARAMS]:
        pinned = dom.with_fixed(**params)
        _, (vals,) = sample_values([ratio], pinned, 24, rng)
        c2 = complex(np.mean(vals))
        if np.max(np.abs(vals - c2)) > 1e-9 * abs(c2) or abs(c2.imag) > 1e-12 * abs(c2):
            rescaled.append({"params": params, "constant_ratio": False})
            continue
        scale = math.sqrt(c2.real)
        moved = CaseConfig(**{**cfg.__dict__, "exprs": dict(cfg.exprs)})
        moved.exprs[("quantum", "map")] = mul(scale, subs(cfg.expr("quantum", "map"), params))
        moved.exprs[("quantum", "potential")] = subs(cfg.expr("quantum", "potential"), params)
        moved.exprs.pop(("quantum", "inverse_map"), None)
        other = derive_operator(moved, rng, check=False)["final"]
        agrees = same_operator(other, target.substitute(params), pinned, rng)
        rescaled.append({"params": params, "scale": scale, "scale_squared_times_k": c2.real * params["k"],
                         "agrees": agrees})
    out["rescaled"] = rescaled
    out["rescaled_agrees"] = bool(rescaled) and all(r.get("agrees", False) for r in rescaled)
    return out


# ---------------------------------------------------------------------------
# entry point


COMMANDS = ("verify-symmetries", "classical", "quantize", "spectrum", "vonroos")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noetherquant", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--case", required=True, help="case file path or built-in name")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", metavar="OUT", help="write the report as JSON ('-' for stdout)")
        if name == "spectrum":
            p.add_argument("--n-max", type=int, default=10)
            p.add_argument("--branch", choices=("pos", "neg"), default="pos")
        if name == "vonroos":
            p.add_argument("--alpha", type=Fraction)
            p.add_argument("--beta", type=Fraction)
            p.add_argument("--d", type=Fraction)
    return ap


def run(args) -> Report:
    cfg = load_case(args.case)
    rng = np.random.default_rng(args.seed)
    if args.command == "verify-symmetries":
        rep = cmd_verify_symmetries(cfg, rng)
    elif args.command == "classical":
        rep = cmd_classical(cfg, rng)
    elif args.command == "quantize":
        rep = cmd_quantize(cfg, rng)
    elif args.command == "spectrum":
        rep = cmd_spectrum(cfg, rng, args.n_max, args.branch)
    else:
        rep = cmd_vonroos(cfg, rng, args.alpha, args.beta, args.d)
    rep.seed = args.seed
    return rep


def dumps(rep: Report) -> str:
    return json.dumps(rep.as_dict(), sort_keys=True, indent=2) + "\n"


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        rep = run(args)
    except (CaseError, ConstraintError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.json == "-":
        sys.stdout.write(dumps(rep))
    else:
        print(rep.text())
        if "text_table" in rep.data:
            print(rep.data["text_table"])
        if args.json:
            with open(args.json, "w") as fh:
                fh.write(dumps(rep))
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
