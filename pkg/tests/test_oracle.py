"""Independent least-squares ground truth over ambient monomial spans."""

import numpy as np
import pytest

from emergekit.background import make_grid
from emergekit.emergence import (
    InfeasibleMap,
    NonAffineStructure,
    emerge_monomial,
    map_agreement,
    oracle_solve,
    sample_param,
)
from emergekit.operators import (
    dense_operator,
    diff_operator,
    identity_operator,
    stencil,
)
from emergekit.parameters import ParamSpace, make_param
from emergekit.theories import (
    CoeffFn,
    Poly,
    PolyTerm,
    compose_theories,
    identity_coeff,
    monomial_theory,
    polynomial_theory,
    scale_theory,
    scaling_theory,
    sum_theories,
    with_homomorphy,
)

SP = ParamSpace("nonzero-complex", 1)
GRID = make_grid(1, (64,), (0.1,))
IDENT = identity_operator(GRID)
LAP = diff_operator(GRID, stencil(((2,), 1.0)))
TWO_MINUS_LAP = diff_operator(GRID, stencil(((0,), 2.0), ((2,), -1.0)))


def _span_i_lap(name="span"):
    poly = Poly(
        (LAP,),
        (PolyTerm((0,), identity_coeff, 0), PolyTerm((1,), identity_coeff, 1)),
        SP,
    )
    return polynomial_theory(poly, name=name)


def test_exact_projection_onto_independent_span():
    """eps*(2I - Lap) against {I, Lap}: the solution is (2 eps, -eps)."""
    target = scaling_theory(SP, TWO_MINUS_LAP, name="t")
    rep = oracle_solve(target, _span_i_lap(), samples=20, seed=0)
    assert rep.verdict == "verified"
    assert rep.full_rank and rep.rank == 2 and rep.n_slots == 2
    assert rep.max_residual < 1e-12
    for row in rep.rows:
        eps = row.eps[0]
        assert row.solution[0] == pytest.approx(2 * eps, rel=1e-12)
        assert row.solution[1] == pytest.approx(-eps, rel=1e-12)


def test_oracle_map_resolves_fresh_parameters():
    target = scaling_theory(SP, TWO_MINUS_LAP, name="t")
    rep = oracle_solve(target, _span_i_lap(), samples=10, seed=0)
    img = rep.map.evaluate(make_param(SP, (3.0 - 1.0j,)))
    assert img.components[0] == pytest.approx(6.0 - 2.0j)
    assert img.components[1] == pytest.approx(-3.0 + 1.0j)


def test_vanishing_slot_is_only_emergent_in_closure():
    """The identity needs nothing from Lap, so that slot pins to ~0 and the
    constrained parameter set (which excludes 0) only contains the limit."""
    target = scaling_theory(SP, IDENT, name="ti")
    rep = oracle_solve(target, _span_i_lap(), samples=10, seed=0)
    assert rep.verdict == "emergent_only_in_closure"
    assert rep.flagged == (1,)
    assert all(row.below_tau == (1,) for row in rep.rows)


def test_antisymmetric_target_is_refuted_at_full_residual():
    """A central first difference is orthogonal to every symmetric symbol;
    the projection residual saturates at 1."""
    d = diff_operator(GRID, stencil(((1,), 1.0)))
    target = scaling_theory(SP, d, name="td")
    rep = oracle_solve(target, _span_i_lap(), samples=10, seed=0)
    assert rep.verdict == "refuted"
    assert rep.max_residual == pytest.approx(1.0)


def test_refuted_oracle_map_refuses_to_evaluate():
    d = diff_operator(GRID, stencil(((1,), 1.0)))
    target = scaling_theory(SP, d, name="td")
    rep = oracle_solve(target, _span_i_lap(), samples=5, seed=0)
    with pytest.raises(InfeasibleMap):
        rep.map.evaluate(make_param(SP, (1.0,)))


def test_oracle_is_seed_deterministic():
    target = scaling_theory(SP, TWO_MINUS_LAP, name="t")
    a = oracle_solve(target, _span_i_lap(), samples=8, seed=5)
    b = oracle_solve(target, _span_i_lap(), samples=8, seed=5)
    assert [r.eps for r in a.rows] == [r.eps for r in b.rows]
    assert a.max_residual == b.max_residual


def test_oracle_accepts_explicit_sample_points():
    target = scaling_theory(SP, TWO_MINUS_LAP, name="t")
    pts = [make_param(SP, (v,)) for v in (1.0, 2.0, -3.0j)]
    rep = oracle_solve(target, _span_i_lap(), eps_samples=pts, seed=0)
    assert len(rep.rows) == 3
    assert [r.eps for r in rep.rows] == [p.components for p in pts]


def test_rank_deficient_span_is_reported():
    # two slots driving the same operator: rank 1 of 2
    poly = Poly(
        (IDENT,),
        (PolyTerm((0,), identity_coeff, 0), PolyTerm((1,), identity_coeff, 1)),
        SP,
    )
    span = polynomial_theory(poly, name="dup")
    target = scaling_theory(SP, IDENT, name="ti")
    rep = oracle_solve(target, span, samples=8, seed=0)
    assert not rep.full_rank
    assert rep.rank == 1 and rep.n_slots == 2
    assert rep.max_residual < 1e-12


def test_sum_ambient_concatenates_bases():
    a = scaling_theory(SP, IDENT, name="a")
    b = scaling_theory(SP, LAP, name="b")
    target = scaling_theory(SP, TWO_MINUS_LAP, name="t")
    rep = oracle_solve(target, sum_theories(a, b), samples=8, seed=0)
    assert rep.verdict == "verified"
    for row in rep.rows:
        eps = row.eps[0]
        assert row.solution[0] == pytest.approx(2 * eps, rel=1e-12)
        assert row.solution[1] == pytest.approx(-eps, rel=1e-12)


def test_scaled_ambient_rescales_the_solution():
    base = scaling_theory(SP, TWO_MINUS_LAP, name="b")
    ambient = scale_theory(base, 2.0)
    target = scaling_theory(SP, TWO_MINUS_LAP, name="t")
    rep = oracle_solve(target, ambient, samples=8, seed=0)
    assert rep.verdict == "verified"
    for row in rep.rows:
        assert row.solution[0] == pytest.approx(row.eps[0] / 2, rel=1e-12)


def test_monomial_ambient_with_linear_coefficient():
    ambient = monomial_theory(CoeffFn.linear(2.0), TWO_MINUS_LAP, 1, SP, name="m")
    target = scaling_theory(SP, TWO_MINUS_LAP, name="t")
    rep = oracle_solve(target, ambient, samples=8, seed=0)
    assert rep.verdict == "verified"
    for row in rep.rows:
        assert row.solution[0] == pytest.approx(row.eps[0] / 2, rel=1e-12)


def test_composition_ambient_is_not_affine():
    t = scaling_theory(SP, IDENT, name="ti")
    ambient = compose_theories(t, t)
    with pytest.raises(NonAffineStructure):
        oracle_solve(t, ambient, samples=5, seed=0)


def test_nonlinear_slot_coefficient_is_not_affine():
    from emergekit.parameters import reduce_param

    sq = CoeffFn.from_callable("square", lambda d: reduce_param(d) ** 2)
    poly = Poly((LAP,), (PolyTerm((1,), sq, 0),), SP)
    span = polynomial_theory(poly, name="nl")
    target = scaling_theory(SP, LAP, name="t")
    with pytest.raises(NonAffineStructure):
        oracle_solve(target, span, samples=5, seed=0)


def test_dense_targets_use_the_dense_path():
    g = make_grid(1, (12,), (1.0,))
    rng = np.random.default_rng(8)
    m = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    herm = dense_operator(g, (m + m.conj().T) / 2)
    target = scaling_theory(SP, herm, name="td")
    ambient = scaling_theory(SP, herm, name="ad")
    rep = oracle_solve(target, ambient, samples=6, seed=0)
    assert rep.verdict == "verified"
    for row in rep.rows:
        assert row.solution[0] == pytest.approx(row.eps[0], rel=1e-10)


def test_combinator_and_oracle_agree_on_the_halving_demo():
    elliptic = diff_operator(GRID, stencil(((0,), 1.0), ((2,), -1.0)))
    target = with_homomorphy(scaling_theory(SP, elliptic, name="t"))
    w = emerge_monomial(target, CoeffFn.linear(2.0), elliptic, 1, SP, samples=15)
    ambient = monomial_theory(CoeffFn.linear(2.0), elliptic, 1, SP, name="amb")
    rep = oracle_solve(target, ambient, samples=15, seed=0)
    assert rep.verdict == "verified" and rep.full_rank
    assert map_agreement(w.map, rep.map, samples=20, seed=3) < 1e-6
