"""Tests for the decay, bound and limit checks."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from desitter_kg.src.core.exceptions.exceptions import FitException, HypothesisException
from desitter_kg.src.core.field import PeriodicGrid, Trajectory, constant
from desitter_kg.src.core.kernels import ModelParams
from desitter_kg.src.core.verify import (
    BoundCheckSpec,
    check_appendix_lemma,
    check_decay_theorem,
    check_kernel_integral_bound,
    check_source_estimate,
    decay_theory_rate,
    fit_decay_rate,
    source_estimate_admissible,
    weighted_integral,
)


def synthetic_trajectory(rate: float, times: np.ndarray) -> Trajectory:
    grid = PeriodicGrid(d=1, npts=16)
    fields = [constant(grid, math.exp(-rate * t)) for t in times]
    return Trajectory(params=ModelParams.from_M(3, 0.25), times=times, fields=fields)


class TestDecayFit:
    """Test cases for the decay-rate fit."""

    def test_exact_exponential(self):
        """Test norms e^{-1.3 t} give gamma_fit = 1.3."""
        traj = synthetic_trajectory(1.3, np.linspace(2.0, 8.0, 25))
        fit = fit_decay_rate(traj, (2.0, 8.0), theory_rate=1.3)
        assert fit.gamma_fit == pytest.approx(1.3, rel=1e-12)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.rel_dev < 1e-12
        assert fit.bound_satisfied
        assert fit.n_samples == 25

    def test_too_few_samples(self):
        """Test fewer than eight samples in the window are refused."""
        traj = synthetic_trajectory(1.0, np.linspace(0.0, 8.0, 9))
        with pytest.raises(FitException):
            fit_decay_rate(traj, (6.0, 8.0))

    def test_theory_rates(self):
        """Test both regimes of the homogeneous decay rate."""
        assert decay_theory_rate(ModelParams.from_M(3, 0.25)) == pytest.approx(1.0)
        assert decay_theory_rate(ModelParams.from_M(3, 1.2)) == pytest.approx(0.3)


class TestDecayTheorem:
    """Test cases for check_decay_theorem."""

    def test_case_i(self):
        """Test Re M < 1/2 decays at least at rate (n-1)/2."""
        fit = check_decay_theorem(ModelParams.from_M(3, 0.25), "homogeneous_i")
        assert fit.bound_satisfied

    def test_case_ii(self):
        """Test 1/2 <= Re M < n/2 decays at rate n/2 - Re M."""
        fit = check_decay_theorem(ModelParams.from_M(3, 1.2), "homogeneous_ii", tolerance=0.15)
        assert fit.rel_dev <= 0.15

    def test_inadmissible_case(self):
        """Test case i refuses Re M >= 1/2."""
        with pytest.raises(HypothesisException):
            check_decay_theorem(ModelParams.from_M(3, 1.2), "homogeneous_i")


class TestKernelBounds:
    """Test cases for the kernel-integral bound checks."""

    def test_weighted_integral(self):
        """Test the Gauss-Jacobi rule integrates r^a exactly."""
        value = weighted_integral(lambda r: np.ones_like(r), 2.0, 0.5, 8)
        assert value.real == pytest.approx(2.0**1.5 / 1.5, rel=1e-13)

    @pytest.mark.parametrize("check", ["k1_integral", "k0_integral"])
    def test_time_bounds(self, check):
        """Test the K1 and K0 integral ratios are finite and stable under refinement."""
        spec = BoundCheckSpec(check=check, M_grid=[0.3, 1.2], t_grid=[0.5, 1.0, 2.0, 4.0], n_nodes=32)
        report = check_kernel_integral_bound(spec)
        assert report.finite
        assert report.stable
        assert len(report.rows) == 8
        assert {"M_re", "M_im", "t", "ratio", "ratio_refined"} <= set(report.rows[0])

    def test_dt_bound(self):
        """Test the dE/dt integral ratio over (t, b)."""
        spec = BoundCheckSpec(check="dt_kernel_integral", M_grid=[0.3, 2.0], delta_grid=[0.5, 1.0, 2.0], n_nodes=32)
        report = check_kernel_integral_bound(spec)
        assert report.finite
        assert report.stable

    def test_k0_excludes_half(self):
        """Test Re M = 1/2 is outside the K0 estimate."""
        with pytest.raises(HypothesisException):
            check_kernel_integral_bound(BoundCheckSpec(check="k0_integral", M_grid=[0.5]))

    def test_dt_excludes_middle_band(self):
        """Test 1/2 <= Re M <= 3/2 is outside the dE/dt estimate."""
        with pytest.raises(HypothesisException):
            check_kernel_integral_bound(BoundCheckSpec(check="dt_kernel_integral", M_grid=[1.0]))

    def test_appendix_id_refused(self):
        """Test appendix identifiers are not kernel checks."""
        with pytest.raises(HypothesisException):
            check_kernel_integral_bound(BoundCheckSpec(check="three_halves_power"))

    def test_z_grid_validation(self):
        """Test z arguments must exceed 1."""
        with pytest.raises(ValidationError):
            BoundCheckSpec(check="k0_zone_split", z_grid=[0.5, 2.0])

    def test_masses_from_text(self):
        """Test masses parse from their text form."""
        spec = BoundCheckSpec(check="k1_integral", M_grid=["0.3+0.5j", 1.2])
        assert spec.M_grid == [0.3 + 0.5j, 1.2 + 0j]


class TestAppendix:
    """Test cases for the appendix checks."""

    def test_limits(self):
        """Test the regular, power and log limits at M = 3/2, 1/4 and 1/2."""
        report = check_appendix_lemma(BoundCheckSpec(check="hypergeometric_limits", M_grid=[1.5, 0.25, 0.5]))
        kinds = [item.kind for item in report.limits]
        assert kinds == ["regular", "power", "log"]
        assert report.passed
        for item in report.limits:
            assert item.decreasing

    def test_regular_limit_value(self):
        """Test a = 0, M = 3/2 has limit 1 reached within 1e-3 at z = 1e4."""
        report = check_appendix_lemma(BoundCheckSpec(check="hypergeometric_limits", M_grid=[1.5]))
        item = report.limits[0]
        assert item.limit == pytest.approx(1.0)
        assert item.deviations[-1] <= 1e-3

    def test_three_halves_bound(self):
        """Test the M-independent power integral bound."""
        spec = BoundCheckSpec(check="three_halves_power", delta_grid=[0.5, 1.0, 2.0], n_nodes=32)
        report = check_appendix_lemma(spec)
        assert report.bound is not None
        assert report.bound.finite
        assert report.passed

    def test_shifted_power_hypothesis(self):
        """Test the shifted power integral needs Re M >= 1/2."""
        with pytest.raises(HypothesisException):
            check_appendix_lemma(BoundCheckSpec(check="shifted_power", M_grid=[0.25]))

    def test_kernel_id_refused(self):
        """Test kernel identifiers are not appendix checks."""
        with pytest.raises(HypothesisException):
            check_appendix_lemma(BoundCheckSpec(check="k1_integral"))


class TestSourceEstimate:
    """Test cases for check_source_estimate."""

    def test_stable_ratio(self):
        """Test the inhomogeneous ratio is finite and stable."""
        report = check_source_estimate(ModelParams.from_M(3, 0.3), t_grid=(0.5, 1.0, 2.0))
        assert not report.derivative
        assert report.stable
        assert all(np.isfinite(row["ratio"]) for row in report.rows)

    def test_accepts_exact_half(self):
        """Test M = 1/2 is covered by the large-root bound."""
        report = check_source_estimate(ModelParams.from_M(3, 0.5), t_grid=(0.5, 1.0, 2.0))
        assert report.stable
        assert all(np.isfinite(row["ratio"]) and row["ratio"] > 0.0 for row in report.rows)

    def test_excludes_complex_half(self):
        """Test Re M = 1/2 with a nonzero imaginary part is refused."""
        with pytest.raises(HypothesisException):
            check_source_estimate(ModelParams.from_M(3, 0.5 + 0.3j))

    @pytest.mark.parametrize("M", [0.3, 1.5, 1.8])
    def test_derivative_ratio(self, M):
        """Test the derivative ratio is finite and stable where it is stated."""
        report = check_source_estimate(ModelParams.from_M(3, M), t_grid=(0.5, 1.0, 2.0), derivative=True)
        assert report.derivative
        assert report.stable
        assert all(np.isfinite(row["ratio"]) and row["ratio"] > 0.0 for row in report.rows)

    @pytest.mark.parametrize("M", [0.5, 1.0, 1.2 + 0.4j])
    def test_derivative_excluded_band(self, M):
        """Test the derivative estimate is refused for 1/2 <= Re M <= 3/2 other than 3/2."""
        params = ModelParams.from_M(3, M)
        assert not source_estimate_admissible(params, derivative=True)
        with pytest.raises(HypothesisException):
            check_source_estimate(params, derivative=True)

    def test_admissibility(self):
        """Test which roots the solution estimate covers."""
        assert source_estimate_admissible(ModelParams.from_M(3, 0.5))
        assert source_estimate_admissible(ModelParams.from_M(3, 1.0))
        assert not source_estimate_admissible(ModelParams.from_M(3, 0.5 - 0.2j))
        assert source_estimate_admissible(ModelParams.from_M(3, 1.5), derivative=True)
