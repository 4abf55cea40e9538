"""Polarization reconstruction and the quadratic-form zero test."""

import numpy as np
import pytest

from emergekit.background import make_grid
from emergekit.emergence import polarization_reconstruct, qform_zero_test
from emergekit.operators import dense_operator, frobenius_norm, scale, identity_operator


GRID16 = make_grid(1, (16,), (0.5,))


def _random_self_adjoint(seed, scale_factor=1.0):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
    return dense_operator(GRID16, scale_factor * (m + m.conj().T) / 2)


class TestPolarization:
    """The complex polarization identity recovers the matrix entries of a
    self-adjoint operator from action values alone."""

    def test_reconstruction_error_over_random_draws(self):
        for seed in range(50):
            op = _random_self_adjoint(seed)
            recon = polarization_reconstruct(op)
            err = np.linalg.norm(recon - op.data) / np.linalg.norm(op.data)
            assert err < 1e-10, seed

    def test_reconstruction_works_without_self_adjointness(self):
        # over complex scalars the quadratic form determines the whole
        # operator, so the reconstruction is exact for arbitrary matrices too
        rng = np.random.default_rng(3)
        m = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        op = dense_operator(GRID16, m)
        recon = polarization_reconstruct(op)
        assert np.linalg.norm(recon - m) / np.linalg.norm(m) < 1e-10


class TestZeroTest:
    def test_zero_operator_passes(self):
        z = dense_operator(GRID16, np.zeros((16, 16)))
        rep = qform_zero_test(z, tol=1e-10)
        assert rep.passed
        assert rep.max_abs_q == 0.0
        assert rep.frobenius == 0.0

    def test_random_self_adjoint_operators_fail(self):
        for seed in range(20):
            rep = qform_zero_test(_random_self_adjoint(seed), tol=1e-10)
            assert not rep.passed, seed
            assert rep.max_abs_q > 1e-3

    def test_tiny_operator_passes_below_the_scaled_threshold(self):
        op = _random_self_adjoint(7, scale_factor=1e-14)
        # the upper bound caps max|q| by 2 vol ||T||_F, so a tiny operator
        # must pass a tolerance sized to its own scale
        tol = 2 * op.grid.cell_volume * frobenius_norm(op) * 1.01
        rep = qform_zero_test(op, tol=tol)
        assert rep.passed

    def test_probe_bounds_bracket_the_observed_maximum(self):
        for seed in range(10):
            op = _random_self_adjoint(seed)
            rep = qform_zero_test(op, tol=1e-10)
            assert rep.lower_bound <= rep.max_abs_q * (1 + 1e-12)
            assert rep.max_abs_q <= rep.upper_bound * (1 + 1e-12)

    def test_passing_forces_a_small_frobenius_norm(self):
        """If every probe is below tol, the lower bound caps ||T||_F at
        n tol / vol; together with the converse direction this is the
        'q vanishes iff the operator does' content of the check."""
        n = GRID16.npoints
        vol = GRID16.cell_volume
        for seed in range(10):
            op = _random_self_adjoint(seed, scale_factor=1e-13)
            rep = qform_zero_test(op, tol=1e-10)
            if rep.passed:
                assert rep.frobenius <= n * 1e-10 / vol
            if rep.frobenius <= 1e-10 / (2 * vol):
                assert rep.passed

    def test_non_self_adjoint_input_is_rejected_without_coercivity(self):
        rng = np.random.default_rng(11)
        m = rng.standard_normal((16, 16)) + 1j * rng.standard_normal((16, 16))
        op = dense_operator(GRID16, m)
        with pytest.raises(ValueError):
            qform_zero_test(op, tol=1e-10)

    def test_coercivity_flag_licenses_the_check(self):
        # a coercive operator need not be checked for self-adjointness first
        op = scale(2.0, identity_operator(GRID16))
        rep = qform_zero_test(op, tol=1e-10, coercive=True)
        assert not rep.passed
        assert rep.sa_defect < 1e-14
