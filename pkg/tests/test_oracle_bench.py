"""
Unit tests for the oracle bench (direct energies, finite differences, slopes)
"""

import pytest
import sys
import os
import numpy as np
sys.path.append(os.path.dirname(os.path.dirname(__file__)))

from rsperturb.errors import ConstructionError, NoisyDerivative, StateCrossing
from rsperturb.operator_model import (
    BandMatrix,
    BasisSpec,
    HamiltonianSplit,
    PotentialSpec,
    build_oscillator_split,
    toy_split,
)
from rsperturb.oracle_bench import (
    DirectEnergy,
    OracleReport,
    build_oracle_report,
    convergence_slope,
    direct_energy,
    energy_curve,
    expected_slope,
    fd_coefficients,
    leading_error_order,
    sum_over_states,
    taylor_weights,
)
from rsperturb.rs_hierarchy import rs_series
from rsperturb.zero_order import SolverSettings

QUARTIC_COEFFICIENTS = (1.0, 0.75, -21.0 / 16.0, 333.0 / 64.0, -30885.0 / 1024.0)


def small_split(rng, dim, bandwidth):
    """Gap-guarded random split with a weak perturbation"""
    while True:
        h0 = np.diag(np.arange(dim, dtype=float) + rng.uniform(-0.2, 0.2, dim))
        h1 = np.zeros((dim, dim))
        for d in range(bandwidth + 1):
            off = rng.uniform(-0.1, 0.1, dim - d)
            pert = rng.uniform(-0.25, 0.25, dim - d)
            if d:
                h0 += np.diag(off, d) + np.diag(off, -d)
                h1 += np.diag(pert, d) + np.diag(pert, -d)
            else:
                h1 += np.diag(pert)
        if np.min(np.diff(np.linalg.eigvalsh(h0))) >= 0.3:
            return HamiltonianSplit(BandMatrix.from_dense(h0, bandwidth),
                                    BandMatrix.from_dense(h1, bandwidth))


class TestDirectEnergies:
    """Test suite for direct eigensolves of H(lambda)"""

    @pytest.fixture
    def settings(self):
        return SolverSettings()

    def test_toy_direct_energy(self, settings):
        """Test the toy ground state at lambda = 1"""
        assert direct_energy(toy_split(), 1.0, 0, settings) == pytest.approx(1.0 - np.sqrt(2.0),
                                                                              abs=1e-12)

    def test_reference_point_is_zero_order(self, settings):
        """Test E(lambda_ref) equals the h0 eigenvalue"""
        split = build_oscillator_split(BasisSpec(32), PotentialSpec.quartic())
        assert direct_energy(split, 0.0, 0, settings) == pytest.approx(1.0, abs=1e-12)
        assert direct_energy(split, 0.0, 2, settings) == pytest.approx(5.0, abs=1e-12)

    def test_quartic_basis_converged(self, settings):
        """Test N = 64 and N = 128 agree at lambda = 0.1"""
        small = build_oscillator_split(BasisSpec(64), PotentialSpec.quartic())
        large = build_oscillator_split(BasisSpec(128), PotentialSpec.quartic())
        assert direct_energy(small, 0.1, 0, settings) == pytest.approx(
            direct_energy(large, 0.1, 0, settings), abs=1e-9)

    def test_energy_curve_tracks_state(self, settings):
        """Test a smooth curve is returned in grid order with gaps"""
        curve = energy_curve(toy_split(), [0.0, 0.1, 0.2], 0, settings)
        assert [p.lam for p in curve] == [0.0, 0.1, 0.2]
        assert all(isinstance(p, DirectEnergy) for p in curve)
        assert curve[2].energy == pytest.approx(1.0 - np.sqrt(1.04), abs=1e-12)
        assert curve[0].gap == pytest.approx(2.0)

    def test_avoided_crossing_flagged(self, settings):
        """Test a jump larger than half the local gap raises StateCrossing"""
        eps = 1e-6
        split = HamiltonianSplit(BandMatrix.from_dense(np.array([[0.0, eps], [eps, 0.0]])),
                                 BandMatrix.diagonal([1.0, -1.0]))
        with pytest.raises(StateCrossing) as info:
            energy_curve(split, [-0.5, -0.3, 0.0, 0.3], 0, settings)
        assert info.value.lam == 0.0

    def test_grid_must_increase(self, settings):
        """Test empty or non-increasing grids are rejected"""
        with pytest.raises(ConstructionError):
            energy_curve(toy_split(), [0.1, 0.1], 0, settings)
        with pytest.raises(ConstructionError):
            energy_curve(toy_split(), [], 0, settings)


class TestFiniteDifferences:
    """Test suite for Richardson-extrapolated Taylor coefficients"""

    @pytest.fixture
    def settings(self):
        return SolverSettings()

    @pytest.fixture
    def quartic(self):
        return build_oscillator_split(BasisSpec(64), PotentialSpec.quartic())

    def test_taylor_weights_three_point(self):
        """Test the familiar three-point stencils"""
        np.testing.assert_allclose(taylor_weights(1, 1), [-0.5, 0.0, 0.5], atol=1e-15)
        np.testing.assert_allclose(taylor_weights(1, 2), [0.5, -1.0, 0.5], atol=1e-15)
        np.testing.assert_allclose(taylor_weights(3, 0), [0, 0, 0, 1, 0, 0, 0], atol=1e-15)

    def test_taylor_weights_exact_on_polynomials(self):
        """Test a width-9 stencil recovers the coefficients of a degree-8 polynomial"""
        coefficients = np.array([0.3, -1.0, 2.0, 0.5, -0.25, 0.1, 0.0, 0.02, -0.01])
        h = 0.1
        values = np.polynomial.polynomial.polyval(h * np.arange(-4, 5), coefficients)
        for k in range(1, 5):
            estimate = taylor_weights(4, k) @ values / h ** k
            assert estimate == pytest.approx(coefficients[k], abs=1e-9)

    def test_leading_error_order(self):
        """Test the truncation power of the central stencils"""
        assert leading_error_order(1, 1) == 2
        assert leading_error_order(1, 2) == 2
        assert leading_error_order(4, 4) == 6
        assert leading_error_order(4, 1) == 8

    def test_toy_coefficients(self, settings):
        """Test FD reproduces 1 - sqrt(1 + lambda^2) through fourth order"""
        coefficients = fd_coefficients(toy_split(), 0, 4, 1e-2, settings)
        assert [c.order for c in coefficients] == [0, 1, 2, 3, 4]
        np.testing.assert_allclose([c.estimate for c in coefficients],
                                   [0.0, 0.0, -0.5, 0.0, 0.125], atol=1e-7)

    def test_linear_perturbation(self, settings):
        """Test h1 = c I gives E1 = c and E2 = 0"""
        split = HamiltonianSplit(BandMatrix.diagonal([0.0, 1.0, 3.0]), BandMatrix.identity(3, 0.7))
        coefficients = fd_coefficients(split, 0, 2, 1e-2, settings)
        assert coefficients[1].estimate == pytest.approx(0.7, abs=1e-9)
        assert coefficients[2].estimate == pytest.approx(0.0, abs=1e-7)

    def test_quartic_first_order(self, quartic, settings):
        """Test E1 = 3/4 for the anharmonic ground state"""
        coefficients = fd_coefficients(quartic, 0, 2, 1e-3, settings)
        assert coefficients[1].estimate == pytest.approx(0.75, abs=1e-7)
        assert coefficients[2].estimate == pytest.approx(QUARTIC_COEFFICIENTS[2], abs=1e-5)

    def test_quartic_fourth_order_within_error(self, quartic, settings):
        """Test every coefficient up to fourth order lies inside its error estimate"""
        coefficients = fd_coefficients(quartic, 0, 4, 2e-3, settings, tolerance=1e-4)
        for c, exact in zip(coefficients, QUARTIC_COEFFICIENTS):
            assert abs(c.estimate - exact) <= max(1e-6, 10.0 * c.error)
            assert c.noise_floor >= 0.0

    def test_random_splits_match_hierarchy(self, settings):
        """Test FD estimates agree with the dense recursion within their error"""
        rng = np.random.default_rng(17)
        for _ in range(25):
            dim = int(rng.integers(3, 9))
            split = small_split(rng, dim, int(rng.integers(0, 3)))
            reference = sum_over_states(split, 0, 3)
            coefficients = fd_coefficients(split, 0, 3, 1e-2, settings, tolerance=1e-4)
            for c, exact in zip(coefficients, reference):
                assert abs(c.estimate - exact) <= 10.0 * c.error + 1e-6

    def test_tiny_step_is_noisy(self, quartic, settings):
        """Test a step at the rounding level raises NoisyDerivative"""
        with pytest.raises(NoisyDerivative) as info:
            fd_coefficients(quartic, 0, 2, 1e-12, settings)
        assert info.value.order >= 1

    def test_order_and_step_validation(self, settings):
        """Test K outside 0..6 and non-positive steps are rejected"""
        with pytest.raises(ConstructionError):
            fd_coefficients(toy_split(), 0, 7, 1e-2, settings)
        with pytest.raises(ConstructionError):
            fd_coefficients(toy_split(), 0, 2, 0.0, settings)

    def test_order_zero(self, settings):
        """Test K = 0 returns the reference energy only"""
        coefficients = fd_coefficients(toy_split(), 0, 0, 1e-2, settings)
        assert len(coefficients) == 1
        assert coefficients[0].estimate == pytest.approx(0.0, abs=1e-15)


class TestSlopesAndReports:
    """Test suite for error slopes, the dense recursion and OracleReport"""

    @pytest.fixture
    def settings(self):
        return SolverSettings()

    @pytest.fixture
    def toy_series(self, settings):
        return rs_series(toy_split(), 0, 4, settings)

    def test_expected_slope_skips_vanishing_orders(self, toy_series):
        """Test odd toy coefficients do not count as the leading error"""
        assert [expected_slope(toy_series, K) for K in range(4)] == [2, 2, 4, 4]
        assert expected_slope(toy_series, 4) == 5

    def test_toy_slopes(self, toy_series, settings):
        """Test measured slopes match the leading omitted order"""
        checks = convergence_slope(toy_series, toy_split(), 0, [0.0125, 0.025, 0.05, 0.1],
                                   settings)
        assert len(checks) == 5
        for check in checks[:4]:
            assert check.points == 4
            assert check.deviation < 0.25

    def test_quartic_slopes(self, settings):
        """Test the anharmonic partial sums converge as mu^(K+1)"""
        split = build_oscillator_split(BasisSpec(64), PotentialSpec.quartic())
        series = rs_series(split, 0, 4, settings)
        checks = convergence_slope(series, split, 0, [0.001, 0.002, 0.004, 0.008], settings)
        for check in checks[:3]:
            assert check.expected == check.order + 1
            assert check.deviation < 0.25

    def test_slope_grid_limit(self, toy_series, settings):
        """Test couplings with |mu| above 0.1 are rejected"""
        with pytest.raises(ConstructionError):
            convergence_slope(toy_series, toy_split(), 0, [0.05, 0.2], settings)
        with pytest.raises(ConstructionError):
            convergence_slope(toy_series, toy_split(), 0, [0.0, 0.05], settings)

    def test_sum_over_states_toy(self):
        """Test the dense recursion on the 2x2 toy"""
        np.testing.assert_allclose(sum_over_states(toy_split(), 0, 4),
                                   [0.0, 0.0, -0.5, 0.0, 0.125], atol=1e-14)

    def test_sum_over_states_needs_plain_split(self):
        """Test a constant term is refused"""
        split = HamiltonianSplit(BandMatrix.diagonal([0.0, 1.0]), BandMatrix.identity(2), 0.0,
                                 None, BandMatrix.identity(2, 0.1))
        with pytest.raises(ConstructionError):
            sum_over_states(split, 0, 2)

    def test_oracle_report(self, toy_series, settings):
        """Test the assembled report and its tabular view"""
        report = build_oracle_report(toy_split(), 0, [0.0, 0.1, 0.2], 2, 1e-2, settings,
                                     series=toy_series, slope_grid=[0.025, 0.05, 0.1],
                                     with_sum_over_states=True)
        assert report.lambdas == [0.0, 0.1, 0.2]
        assert len(report.fd_coefficients) == 3
        assert len(report.slope_checks) == 5
        assert report.sum_over_states[2] == pytest.approx(-0.5)
        frame = report.energies_frame()
        assert list(frame.columns) == ["lambda", "state", "energy", "residual"]
        assert len(frame) == 3
        data = report.to_dict()
        assert data["fd_step"] == 1e-2
        assert data["fd_coefficients"][2]["order"] == 2

    def test_report_grid_order(self):
        """Test a report with a non-increasing grid cannot be built"""
        points = [DirectEnergy(0.2, 0.0, 0.0), DirectEnergy(0.1, 0.0, 0.0)]
        with pytest.raises(ConstructionError):
            OracleReport(0, 0.0, points, [], 1e-2, [])
