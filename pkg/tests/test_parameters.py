"""Nowhere-vanishing parameter tuples: constraints, algebra, square roots."""

import numpy as np
import pytest

from emergekit.parameters import (
    KINDS,
    ConstraintViolation,
    NoSquareRoot,
    Param,
    ParamSpace,
    SpaceMismatchError,
    VanishingResult,
    concat_params,
    embed_params,
    factored_param,
    make_param,
    nv_combine,
    nv_mul,
    nv_sqrt,
    reduce_param,
    split_param,
    unit_param,
)

CPLX = ParamSpace("nonzero-complex", 2)


def test_kind_registry():
    assert KINDS == ("nonzero-complex", "positive-real", "nonzero-real")


@pytest.mark.parametrize("kind", KINDS)
def test_zero_component_rejected(kind):
    sp = ParamSpace(kind, 2)
    with pytest.raises(VanishingResult):
        make_param(sp, (1.0, 0.0))


def test_positive_real_rejects_sign_and_phase():
    sp = ParamSpace("positive-real", 1)
    with pytest.raises(VanishingResult):
        make_param(sp, (-2.0,))
    with pytest.raises(ConstraintViolation):
        make_param(sp, (1.0 + 0.5j,))
    # a complex-typed value whose imaginary part is exactly zero is fine
    assert make_param(sp, (2.0 + 0j,)).components == (2.0 + 0j,)


def test_nonzero_real_rejects_phase_but_not_sign():
    sp = ParamSpace("nonzero-real", 1)
    assert make_param(sp, (-3.0,)).components == (-3.0 + 0j,)
    with pytest.raises(ConstraintViolation):
        make_param(sp, (1j,))


def test_component_count_mismatch():
    with pytest.raises(ValueError):
        make_param(CPLX, (1.0,))


def test_unit_and_factored_reduce():
    sp = ParamSpace("nonzero-complex", 3)
    assert unit_param(sp).components == (1 + 0j, 1 + 0j, 1 + 0j)
    v = 2.5 - 1.25j
    f = factored_param(sp, v)
    assert f.components == (v, 1 + 0j, 1 + 0j)
    assert reduce_param(f) == pytest.approx(v)


def test_reduce_is_the_component_product():
    p = make_param(CPLX, (2.0 + 1j, -0.5j))
    assert reduce_param(p) == pytest.approx((2.0 + 1j) * (-0.5j))


def test_nv_mul_componentwise():
    a = make_param(CPLX, (2.0, 3.0j))
    b = make_param(CPLX, (0.5, 2.0))
    assert nv_mul(a, b).components == (1.0 + 0j, 6.0j)


def test_nv_combine_detects_vanishing():
    a = make_param(CPLX, (2.0, 3.0))
    assert nv_combine(1.0, a, 1.0, a).components == (4 + 0j, 6 + 0j)
    with pytest.raises(VanishingResult):
        nv_combine(1.0, a, -1.0, a)


def test_nv_combine_space_mismatch():
    a = make_param(CPLX, (2.0, 3.0))
    b = make_param(ParamSpace("nonzero-complex", 3), (1.0, 1.0, 1.0))
    with pytest.raises(SpaceMismatchError):
        nv_combine(1.0, a, 1.0, b)


def test_sqrt_squares_back_over_random_draws():
    rng = np.random.default_rng(1234)
    sp = ParamSpace("nonzero-complex", 4)
    for _ in range(200):
        comps = tuple(
            rng.standard_normal() + 1j * rng.standard_normal() for _ in range(4)
        )
        p = make_param(sp, comps)
        r = nv_sqrt(p)
        back = nv_mul(r, r)
        err = max(
            abs(x - y) / abs(y) for x, y in zip(back.components, p.components)
        )
        assert err < 1e-14


def test_sqrt_positive_real_stays_positive():
    sp = ParamSpace("positive-real", 2)
    r = nv_sqrt(make_param(sp, (4.0, 9.0)))
    assert r.space == sp
    assert r.components == (2.0 + 0j, 3.0 + 0j)


def test_sqrt_of_negative_real_has_no_home():
    sp = ParamSpace("nonzero-real", 1)
    with pytest.raises(NoSquareRoot):
        nv_sqrt(make_param(sp, (-4.0,)))


def test_embed_prepends_ones():
    p = make_param(CPLX, (2.0, 3.0 + 1j))
    e = embed_params(p, 4)
    assert e.space.degree == 4
    assert e.components == (1 + 0j, 1 + 0j, 2 + 0j, 3 + 1j)
    assert reduce_param(e) == pytest.approx(reduce_param(p))


def test_concat_split_roundtrip():
    a = make_param(ParamSpace("nonzero-complex", 1), (5.0j,))
    b = make_param(CPLX, (1.0, 2.0))
    c = concat_params(a, b)
    assert c.space.degree == 3
    back_a, back_b = split_param(c, (1, 2))
    assert back_a.components == a.components
    assert back_b.components == b.components


def test_concat_requires_matching_kinds():
    a = make_param(ParamSpace("positive-real", 1), (1.0,))
    b = make_param(ParamSpace("nonzero-real", 1), (1.0,))
    with pytest.raises(SpaceMismatchError):
        concat_params(a, b)


def test_params_are_value_objects():
    p = make_param(CPLX, (2.0, 3.0))
    q = make_param(CPLX, (2.0, 3.0))
    assert p == q
    assert isinstance(p, Param)
