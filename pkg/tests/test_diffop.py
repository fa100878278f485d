import itertools
from fractions import Fraction

import pytest
import sympy as sp
from conftest import case
from hypothesis import given, settings
from hypothesis import strategies as st
from oracle import S, numeric_max, pde_symmetry_residual, pulled_back_oscillator, remove_first_derivative

from noetherquant import ladder
from noetherquant.diffop import (
    ConstraintError,
    DiffOp,
    Generator,
    VarChange,
    build_vonroos,
    change_vars_pde,
    compose,
    first_derivative_gauge,
    gauge_transform,
    op_commutator,
    operators_match,
    pde_symmetry,
    residual,
    same_operator,
)
from noetherquant.expr import ZERO, Domain, as_expr, render, zero_mismatch

INV = case("inverted")
BOX = {"t": (0, 1), "X": (-1, 0.1), "k": (0.5, 2), "w": (0.5, 2)}
POINTS = [{"k": 1.3, "w": 0.7, "X": -0.4, "t": 0.37}, {"k": 1.0, "w": 1.0, "X": 0.1, "t": 0.2}]


def _derived():
    from noetherquant.cli import derive_operator

    return derive_operator(INV)


def _oracle_chain():
    dxx, dx, mult = pulled_back_oscillator(render(INV.expr("quantum", "map")), "-w^2*eta^2")
    g, new_mult = remove_first_derivative(dxx, dx, mult)
    return dxx, dx, mult, g, new_mult


def test_apply_and_compose_match_sympy():
    A = DiffOp.of({(1, 0): as_expr("2*i"), (0, 2): as_expr("X^2"), (0, 1): as_expr("t"), (0, 0): as_expr("sin(X)")})
    B = DiffOp.of({(0, 1): as_expr("exp(t)"), (0, 0): as_expr("X")})
    psi = "exp(i*t)*cos(X)*X^2"
    t, X = sp.symbols("t X")
    P = S(psi)
    a_sym = lambda f: 2 * sp.I * sp.diff(f, t) + X**2 * sp.diff(f, X, 2) + t * sp.diff(f, X) + sp.sin(X) * f
    b_sym = lambda f: sp.exp(t) * sp.diff(f, X) + X * f
    box = {"t": (0, 1), "X": (0.2, 1.5)}
    assert numeric_max(S(render(A.apply(as_expr(psi)))) - a_sym(P), box, scale=a_sym(P)) < 1e-10
    AB = compose(A, B)
    assert numeric_max(S(render(AB.apply(as_expr(psi)))) - a_sym(b_sym(P)), box, scale=a_sym(b_sym(P))) < 1e-10


def test_pullback_matches_chain_rule_oracle():
    ours = _derived()["pulled"]
    dxx, dx, mult, _, _ = _oracle_chain()
    for slot, ref in (((0, 2), dxx), ((0, 1), dx), ((0, 0), mult)):
        assert numeric_max(S(render(ours[slot])) - ref, BOX, scale=ref) < 1e-9
    printed = INV.printed_operator("pulled")
    assert same_operator(ours, printed, INV.domain())


def test_gauged_operator_matches_oracle():
    ops = _derived()
    final = ops["final"]
    dxx, _, _, g, new_mult = _oracle_chain()
    assert final[0, 1] == ZERO or zero_mismatch(final[0, 1], INV.domain()) <= 1.0
    assert numeric_max(S(render(final[0, 2])) - dxx, BOX, scale=dxx) < 1e-9
    assert numeric_max(S(render(final[0, 0])) - new_mult, BOX, scale=new_mult) < 1e-9
    # same gauge factor up to a constant
    ratio = S(render(ops["factor"])) / g
    vals = [complex(sp.N(ratio.subs({sp.Symbol(k): v for k, v in p.items()}))) for p in
            ({"k": 1.0, "w": 1.0, "X": x} for x in (-0.9, -0.3, 0.05))]
    assert max(abs(v / vals[0] - 1) for v in vals) < 1e-10


def test_printed_final_operator_differs():
    final = _derived()["final"]
    diffs = operators_match(final, INV.printed_operator("final"), INV.domain())
    assert diffs[(0, 2)] > 1.0 and diffs[(0, 0)] > 1.0


@pytest.mark.parametrize("key,branch", [("ground_state", "positive"), ("ground_state_negative", "negative")])
def test_printed_ground_states_solve_derived_operator(key, branch):
    final = _derived()["final"]
    dom = ladder.branch_domain(branch, {"k": 1.0, "w": 1.0})
    assert residual(final, INV.printed[key], dom) <= 1e-8
    # sympy route on the positive branch
    if branch == "positive":
        dxx, _, _, _, new_mult = _oracle_chain()
        t, X = sp.symbols("t X")
        phi = S(render(INV.printed[key]))
        r = 2 * sp.I * sp.diff(phi, t) + dxx * sp.diff(phi, X, 2) + new_mult * phi
        sub = {"k": (1.0, 1.0), "w": (1.0, 1.0), "t": (0, 1), "X": (-2.5, 1.4)}
        assert numeric_max(r, sub, scale=phi) < 1e-8


@pytest.mark.parametrize("label", list(INV.symmetries))
def test_symmetries_of_derived_operator(label):
    final = _derived()["final"]
    assert pde_symmetry(INV.symmetries[label], final, INV.domain()).ok


@pytest.mark.parametrize("label", ["q2", "c2p", "c3m"])
def test_symmetries_against_sympy(label):
    dxx, _, _, _, new_mult = _oracle_chain()
    X, t = sp.symbols("X t")
    op = lambda f: 2 * sp.I * sp.diff(f, t) + dxx * sp.diff(f, X, 2) + new_mult * f
    g = INV.symmetries[label]
    assert pde_symmetry_residual(op, render(g.T), render(g.xi), render(g.f), samples=POINTS) < 1e-9


@pytest.mark.parametrize("label", ["q2", "q3", "c2p", "c2m", "c3p", "c3m"])
def test_printed_symmetry_forms_fail(label):
    final = _derived()["final"]
    printed = INV.printed_generator(label, ("T", "xi", "f"))
    assert not pde_symmetry(printed, final, INV.domain()).ok


def test_oscillator_unchanged_by_identity_map():
    from noetherquant.cli import derive_operator

    ho = case("harmonic-oscillator")
    final = derive_operator(ho)["final"]
    target = DiffOp.of({(1, 0): as_expr("2*i"), (0, 2): as_expr("1"), (0, 0): as_expr("-w^2*x^2")}, "t", "x")
    assert same_operator(final, target, ho.domain())


def test_var_change_validation():
    dom = Domain({"t": (0, 1), "y": (-1, 1)})
    with pytest.raises(ValueError):
        VarChange.of("y^2", "y", "eta").validate(dom)
    with pytest.raises(ValueError):
        VarChange.of("2*y", "y", "eta", inverse="eta").validate(dom)
    VarChange.of("2*y", "y", "eta", inverse="eta/2").validate(dom)
    osc = ladder.oscillator_operator()
    with pytest.raises(ValueError):
        change_vars_pde(osc, VarChange.of("2*y", "y", "zeta"))


def test_gauge_transform_inverse():
    dom = Domain({"t": (0, 1), "X": (0.1, 1)})
    L = DiffOp.of({(1, 0): as_expr("2*i"), (0, 2): as_expr("X"), (0, 1): as_expr("1"), (0, 0): as_expr("X^2")})
    g = first_derivative_gauge(L)
    M = gauge_transform(L, g, dom)
    assert M[0, 1] == ZERO or zero_mismatch(M[0, 1], dom) <= 1.0
    assert same_operator(gauge_transform(M, 1 / g, dom), L, dom)


# ---------------------------------------------------------------------------
# commutator identities on operator bases built from the golden symmetry lists


BASES = {name: [g.operator() for g in case(name).symmetries.values()]
         for name in ("inverted", "harmonic-oscillator", "free-particle", "vonroos")}
TRIPLES = [(name, *t) for name, ops in BASES.items() for t in itertools.combinations(range(len(ops)), 3)]


def _vanishes(op: DiffOp, dom) -> bool:
    return all(c == ZERO or zero_mismatch(c, dom) <= 1.0 for c in op.coeffs.values())


@given(st.sampled_from(TRIPLES))
@settings(max_examples=40, deadline=None)
def test_operator_antisymmetry_and_jacobi(triple):
    name, i, j, k = triple
    A, B, C = (BASES[name][n] for n in (i, j, k))
    dom = case(name).domain()
    assert _vanishes(op_commutator(A, B) + op_commutator(B, A), dom)
    jac = (op_commutator(A, op_commutator(B, C)) + op_commutator(B, op_commutator(C, A))
           + op_commutator(C, op_commutator(A, B)))
    assert _vanishes(jac, dom)


def test_generator_roundtrip():
    g = INV.symmetries["c3p"]
    back = Generator.from_operator(g.operator())
    dom = INV.domain()
    for a, b in ((g.T, back.T), (g.xi, back.xi), (g.f, back.f)):
        assert a == b or zero_mismatch(a - b, dom) <= 1.0


# ---------------------------------------------------------------------------
# position-dependent mass ordering


VR = case("vonroos")
VR_POINTS = [{"k": 1.3, "w": 0.7, "p": -0.4, "t": 0.37}, {"k": 1.0, "w": 1.0, "p": 0.1, "t": 0.2}]


def _vr_oracle(s_value):
    p = sp.Symbol("p")
    k, w, t = sp.symbols("k w t")
    u2 = 1 - 2 * k * p / (3 * w**2)
    mult = 4 * k**2 * (s_value / 4) / (9 * w**2 * u2) - 9 * w**4 / k**2 * (sp.sqrt(u2) - 1) ** 2
    return lambda f: 2 * sp.I * sp.diff(f, t) + w**2 * u2 * sp.diff(f, p, 2) - 2 * k / 3 * sp.diff(f, p) + mult * f


@pytest.mark.parametrize("alpha,beta", [(Fraction(-1, 4), Fraction(-1, 2)), (Fraction(0), Fraction(0)),
                                        (Fraction(1, 3), Fraction(0)), (Fraction(-7, 5), Fraction(1, 2))])
def test_ordering_dichotomy(alpha, beta):
    s = 4 * alpha * (alpha + beta + 1)
    op = build_vonroos(alpha, beta, -1 - alpha - beta, None, "t", "p")
    ours = [lab for lab, g in VR.symmetries.items() if pde_symmetry(g, op, VR.domain()).ok]
    oracle = _vr_oracle(sp.Rational(s.numerator, s.denominator))
    ref = [lab for lab, g in VR.symmetries.items()
           if pde_symmetry_residual(oracle, render(g.T), render(g.xi), render(g.f), "t", "p", VR_POINTS) < 1e-9]
    assert ours == ref
    assert len(ours) == (6 if s == Fraction(-1, 4) else 2)


def test_ordering_constraint():
    with pytest.raises(ConstraintError):
        build_vonroos(0, 0, 0)


def test_ordering_gauge_equivalence():
    dom = VR.domain()
    op = build_vonroos(Fraction(-1, 4), Fraction(-1, 2), Fraction(-1, 4), None, "t", "p")
    target = DiffOp.of({(1, 0): as_expr("2*i"), (0, 2): VR.expr("ordering", "target_dxx"),
                        (0, 0): VR.expr("ordering", "target_mult")}, "t", "p")
    assert same_operator(gauge_transform(op, VR.expr("ordering", "gauge_factor"), dom), target, dom)
    assert same_operator(build_vonroos(Fraction(-1, 4), Fraction(-1, 2), Fraction(-1, 4), Fraction(-1, 2), "t", "p"),
                         target, dom)
