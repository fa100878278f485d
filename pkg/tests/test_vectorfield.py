import itertools

import pytest
from conftest import ODE_CASES, case
from hypothesis import given, settings
from hypothesis import strategies as st
from oracle import S, numeric_max, ode_symmetry_residual, vector_bracket

from noetherquant.expr import ZERO, as_expr, render, zero_mismatch
from noetherquant.mechanics import lie_count_expected
from noetherquant.vectorfield import (
    Ode2,
    VectorField,
    commutator,
    is_abelian_intransitive_pair,
    is_ode_symmetry,
    structure_constants,
    symmetry_mismatch,
    verify_point_transform,
)

GOLDEN = [(name, label) for name in ODE_CASES for label in case(name).generators]


def _ranges(cfg):
    dom = cfg.domain()
    return {k: v for k, v in dom.intervals.items()}


@pytest.mark.parametrize("name,label", GOLDEN)
def test_generator_against_sympy_prolongation(name, label):
    cfg = case(name)
    vf = cfg.generators[label]
    res = ode_symmetry_residual(render(vf.xi), render(vf.eta), render(cfg.ode.rhs), cfg.t, cfg.x)
    ranges = _ranges(cfg)
    pinned = {k: (float(v), float(v)) for k, v in cfg.params.items()}
    # the determining expression vanishes identically, so an absolute bound is enough
    assert numeric_max(res, {**ranges, **pinned}, n=20) < 1e-8
    assert numeric_max(res, ranges, n=20) < 1e-8


@pytest.mark.parametrize("name,label", GOLDEN)
def test_generator_passes_sampled_check(name, label):
    cfg = case(name)
    assert symmetry_mismatch(cfg.generators[label], cfg.ode, cfg.domain()) <= 1.0


def test_corrupted_generator_is_named():
    cfg = case("lienard")
    bad = cfg.printed_generator("g5")
    failures = [lab for lab, vf in {**cfg.generators, "g5": bad}.items()
                if not is_ode_symmetry(vf, cfg.ode, cfg.domain())]
    assert failures == ["g5"]


def test_counts_match_formula():
    assert lie_count_expected(1) == 8
    for name in ODE_CASES:
        assert len(case(name).generators) == lie_count_expected(1)


@pytest.mark.parametrize("name", ODE_CASES)
def test_bases_close(name):
    cfg = case(name)
    dom = cfg.domain().with_fixed(**{k: float(v) for k, v in cfg.params.items()})
    sc = structure_constants(list(cfg.generators.values()), dom)
    assert sc.closed and sc.residual <= 1e-8
    assert sc.rank == 8
    # sl(3, R) is simple: nondegenerate Killing form
    assert sc.killing_rank() == 8


def test_bracket_matches_sympy():
    cfg = case("lienard")
    a, b = cfg.generators["g2"], cfg.generators["g5"]
    c = commutator(a, b)
    ref = vector_bracket((render(a.xi), render(a.eta)), (render(b.xi), render(b.eta)), ("t", "x"))
    box = {"t": (-1, 1), "x": (-0.5, 0.5), "k": (0.5, 2), "w": (0.5, 2)}
    for ours, theirs in zip((c.xi, c.eta), ref):
        assert numeric_max(S(render(ours)) - theirs, box) < 1e-9


def _field_triples():
    out = []
    for name in ODE_CASES:
        labels = list(case(name).generators)
        out += [(name, *t) for t in itertools.combinations(labels, 3)]
    return out


TRIPLES = _field_triples()


def _zero_field(f: VectorField, dom) -> bool:
    return all(e == ZERO or zero_mismatch(e, dom) <= 1.0 for e in (f.xi, f.eta))


@given(st.sampled_from(TRIPLES))
@settings(max_examples=40, deadline=None)
def test_bracket_antisymmetry_and_jacobi(triple):
    name, la, lb, lc = triple
    cfg = case(name)
    g = cfg.generators
    a, b, c = g[la], g[lb], g[lc]
    dom = cfg.domain()
    assert _zero_field(commutator(a, b) + commutator(b, a), dom)
    jac = commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b))
    assert _zero_field(jac, dom)


def test_abelian_intransitive_pairs():
    lien = case("lienard")
    dom = lien.domain().with_fixed(k=1.0, w=1.0)
    g = lien.generators
    k, w = as_expr("k"), as_expr("w")
    a = g["g2"].scale(k) + g["g6"].scale(-3 * w)
    b = g["g3"].scale(k) + g["g7"].scale(-3 * w)
    assert is_abelian_intransitive_pair(a, b, dom)
    inv = case("inverted")
    assert is_abelian_intransitive_pair(inv.generators["s4"], inv.generators["s5"], inv.domain())
    # the time translation and a time-dependent scaling do not commute
    assert not is_abelian_intransitive_pair(g["g1"], g["g8"], dom)


def test_point_transform_to_free_particle():
    cfg = case("lienard")
    chk = verify_point_transform(cfg.expr("transforms", "free_t"), cfg.expr("transforms", "free_x"),
                                 cfg.ode, Ode2(ZERO, "t", "x"), cfg.domain())
    assert chk.ok and not chk.time_preserving


def test_point_transform_rejects_wrong_target():
    cfg = case("harmonic-oscillator")
    chk = verify_point_transform("t", "x", cfg.ode, Ode2(ZERO, "t", "x"), cfg.domain())
    assert not chk.maps_equation
