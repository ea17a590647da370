"""Tests for the integral-transform representation."""

import math
from unittest.mock import patch

import numpy as np
import pytest
from scipy.integrate import quad as scipy_quad

from desitter_kg.src.core.evolution import DirectSolveConfig, solve_desitter_direct
from desitter_kg.src.core.exceptions.exceptions import ConfigurationException, HypothesisException
from desitter_kg.src.core.field import PeriodicGrid, SpectralField, constant, cosine_mode, sobolev_norm
from desitter_kg.src.core.kernels import ModelParams
from desitter_kg.src.core.transform import (
    DuhamelOperator,
    LinearProblem,
    QuadratureSpec,
    apply_G,
    apply_K,
    free_trajectory,
    linear_solution,
    linear_solution_dt,
    linear_solution_M_half,
    mapped_rule,
    phi_of_t,
)
from desitter_kg.src.settings import settings

SMALL_QUAD = QuadratureSpec(nb=32, nr=32, ns=32)


@pytest.fixture
def grid():
    return PeriodicGrid(d=1, npts=16)


def free_zero_mode(n: int, M: float, t: float) -> float:
    """psi(t) of the zero mode with psi(0) = 1, psi'(0) = 0."""
    return math.exp(-0.5 * n * t) * (math.cosh(M * t) + 0.5 * n / M * math.sinh(M * t))


def rel_hs(a: SpectralField, b: SpectralField, s: float = 2.0) -> float:
    return sobolev_norm(a - b, s) / sobolev_norm(b, s)


class TestQuadrature:
    """Test cases for the quadrature helpers."""

    def test_phi(self):
        """Test phi(t) = 1 - e^{-t} in scalar and array form."""
        assert phi_of_t(0.0) == 0.0
        assert isinstance(phi_of_t(1.0), float)
        assert np.allclose(phi_of_t(np.array([1.0, 2.0])), 1 - np.exp(-np.array([1.0, 2.0])))

    def test_mapped_rule_exact_for_polynomials(self):
        """Test the mapped rule integrates x^5 on [1, 3] exactly."""
        x, w = mapped_rule(16, 1.0, 3.0)
        assert np.sum(w * x**5) == pytest.approx((3.0**6 - 1.0) / 6.0, rel=1e-14)

    def test_refined(self):
        """Test refinement doubles every node count."""
        assert SMALL_QUAD.refined() == QuadratureSpec(nb=64, nr=64, ns=64)

    def test_minimum_nodes(self):
        """Test fewer than 16 nodes are refused."""
        with pytest.raises(ValueError):
            QuadratureSpec(nb=8)


class TestApplyK:
    """Test cases for the operator K."""

    def test_m_half_constant_family(self, grid):
        """Test K of a constant family at M = 1/2 against a reference integral."""
        n, t = 3, 1.5
        g = constant(grid, 1.0)

        def v(r, b):
            return np.broadcast_to(g.coeffs, (len(r),) + grid.shape)

        value = apply_K(v, t, 0.5, n, SMALL_QUAD, grid).coeffs[0]
        integral, _ = scipy_quad(
            lambda b: math.exp(0.5 * n * b) * 0.5 * math.exp(0.5 * (b + t)) * (math.exp(-b) - math.exp(-t)),
            0.0,
            t,
            epsabs=1e-14,
            epsrel=1e-14,
        )
        assert value == pytest.approx(2 * math.exp(-0.5 * n * t) * integral, rel=1e-9)

    def test_needs_positive_time(self, grid):
        """Test K is refused at t = 0."""
        with pytest.raises(HypothesisException):
            apply_K(lambda r, b: np.zeros((len(r), 16)), 0.0, 0.5, 3, SMALL_QUAD, grid)


class TestLinearSolution:
    """Test cases for the linear solution."""

    def test_initial_value(self, grid):
        """Test t = 0 returns the initial value."""
        p = LinearProblem(params=ModelParams.from_M(3, 0.3), psi0=cosine_mode(grid), psi1=SpectralField.zeros(grid))
        assert np.array_equal(linear_solution(p, 0.0).coeffs, p.psi0.coeffs)

    def test_negative_time(self, grid):
        """Test negative times are refused."""
        p = LinearProblem(params=ModelParams.from_M(3, 0.3), psi0=cosine_mode(grid), psi1=SpectralField.zeros(grid))
        with pytest.raises(HypothesisException):
            linear_solution(p, -1.0)

    def test_grids_must_match(self, grid):
        """Test value and velocity must share a grid."""
        with pytest.raises(ConfigurationException):
            LinearProblem(
                params=ModelParams.from_M(3, 0.3),
                psi0=cosine_mode(grid),
                psi1=SpectralField.zeros(PeriodicGrid(npts=32)),
            )

    @pytest.mark.parametrize("M", [0.25, 0.5, 1.0, 1.5])
    def test_zero_mode_closed_form(self, grid, M):
        """Test constant data against the zero-mode solution of the damped equation."""
        p = LinearProblem(params=ModelParams.from_M(3, M), psi0=constant(grid, 1.0), psi1=SpectralField.zeros(grid))
        for t in (1.0, 2.0, 4.0):
            value = linear_solution(p, t).coeffs[0].real
            assert value == pytest.approx(free_zero_mode(3, M, t), rel=1e-3)

    @pytest.mark.parametrize("M", [0.25, 1.5])
    def test_matches_direct_solver(self, grid, M):
        """Test the transform and direct solvers agree in H_s for a single mode."""
        params = ModelParams.from_M(3, M)
        psi0, psi1 = cosine_mode(grid, 1), cosine_mode(grid, 1, amplitude=0.5)
        p = LinearProblem(params=params, psi0=psi0, psi1=psi1)
        times = [1.0, 2.0, 4.0]
        cfg = DirectSolveConfig(params=params, T=4.0, rtol=1e-10, atol=1e-12)
        direct = solve_desitter_direct(psi0, psi1, cfg, output_times=times)
        for t, reference in zip(direct.times[1:], direct.fields[1:]):
            assert rel_hs(linear_solution(p, float(t)), reference) <= 1e-3

    def test_m_half_paths_agree(self, grid):
        """Test the generic kernels reproduce the exponential M = 1/2 representation."""
        p = LinearProblem(
            params=ModelParams.from_M(3, 0.5),
            psi0=cosine_mode(grid, 2),
            psi1=cosine_mode(grid, 1, amplitude=0.3),
            quad=SMALL_QUAD,
        )
        for t in (0.5, 2.0):
            assert rel_hs(linear_solution(p, t), linear_solution_M_half(p, t)) <= 1e-8

    def test_m_half_requires_m_half(self, grid):
        """Test the specialized path refuses other masses."""
        p = LinearProblem(params=ModelParams.from_M(3, 0.3), psi0=constant(grid), psi1=SpectralField.zeros(grid))
        with pytest.raises(HypothesisException):
            linear_solution_M_half(p, 1.0)

    def test_linearity(self, grid):
        """Test the solution is additive in the data."""
        params = ModelParams.from_M(3, 0.3)
        zero = SpectralField.zeros(grid)
        a = LinearProblem(params=params, psi0=cosine_mode(grid, 1), psi1=zero, quad=SMALL_QUAD)
        b = LinearProblem(params=params, psi0=zero, psi1=cosine_mode(grid, 2), quad=SMALL_QUAD)
        both = LinearProblem(params=params, psi0=cosine_mode(grid, 1), psi1=cosine_mode(grid, 2), quad=SMALL_QUAD)
        total = linear_solution(a, 1.5) + linear_solution(b, 1.5)
        assert np.allclose(linear_solution(both, 1.5).coeffs, total.coeffs, atol=1e-13)


class TestSourceTerm:
    """Test cases for the source-to-solution map."""

    def test_constant_source_m_half(self, grid):
        """Test G of a constant source against the zero-mode solution (n = 3, M = 1/2, m^2 = 2)."""
        params = ModelParams.from_M(3, 0.5)
        f = constant(grid, 2.0)
        t = 1.5
        value = apply_G(lambda b: f, t, params, SMALL_QUAD).coeffs[0].real
        assert value == pytest.approx(1.0 - free_zero_mode(3, 0.5, t), rel=1e-8)

    def test_massless_source_and_derivative(self, grid):
        """Test psi'' + 3 psi' = 1 at M = 3/2 for the value and its time derivative."""
        params = ModelParams.from_M(3, 1.5)
        f = constant(grid, 1.0)
        zero = SpectralField.zeros(grid)
        p = LinearProblem(params=params, psi0=zero, psi1=zero, source=lambda b: f, quad=SMALL_QUAD)
        t = 1.0
        assert linear_solution(p, t).coeffs[0].real == pytest.approx(t / 3 - (1 - math.exp(-3 * t)) / 9, rel=1e-8)
        assert linear_solution_dt(p, t).coeffs[0].real == pytest.approx((1 - math.exp(-3 * t)) / 3, rel=1e-6)

    def test_data_derivative(self, grid):
        """Test the finite-difference derivative of the data part."""
        p = LinearProblem(
            params=ModelParams.from_M(3, 0.5), psi0=constant(grid, 1.0), psi1=SpectralField.zeros(grid), quad=SMALL_QUAD
        )
        t = 1.0
        expected = math.exp(-1.5 * t) * (
            0.5 * math.sinh(0.5 * t) + 1.5 * math.cosh(0.5 * t) - 1.5 * (math.cosh(0.5 * t) + 3 * math.sinh(0.5 * t))
        )
        assert linear_solution_dt(p, t).coeffs[0].real == pytest.approx(expected, rel=1e-6)

    def test_derivative_needs_positive_time(self, grid):
        """Test the derivative is refused at t = 0."""
        p = LinearProblem(params=ModelParams.from_M(3, 0.5), psi0=constant(grid), psi1=SpectralField.zeros(grid))
        with pytest.raises(HypothesisException):
            linear_solution_dt(p, 0.0)


class TestDuhamelOperator:
    """Test cases for the tabulated Duhamel operator."""

    def test_tabulated_matches_apply_g(self, grid):
        """Test the propagator tables reproduce apply_G at every time."""
        params = ModelParams.from_M(3, 0.3)
        times = np.array([0.0, 0.5, 1.0, 2.0])

        def source(b: float) -> SpectralField:
            return cosine_mode(grid, 1, amplitude=math.exp(-b)) + constant(grid, 0.5)

        duhamel = DuhamelOperator(grid, params, SMALL_QUAD, times)
        assert duhamel.tabulated
        out = duhamel.apply_source(source)
        assert np.allclose(out[0], 0.0)
        for m, t in enumerate(times[1:], start=1):
            expected = apply_G(source, float(t), params, SMALL_QUAD, grid).coeffs
            assert np.allclose(out[m], expected, rtol=1e-10, atol=1e-13)

    def test_falls_back_without_cache(self, grid):
        """Test a zero cache budget disables the tables."""
        with patch.object(settings, "DSKG_CACHE_MB", 0):
            duhamel = DuhamelOperator(grid, ModelParams.from_M(3, 0.3), SMALL_QUAD, [0.0, 1.0])
        assert not duhamel.tabulated
        f = constant(grid, 1.0)
        out = duhamel.apply_source(lambda b: f)
        expected = apply_G(lambda b: f, 1.0, ModelParams.from_M(3, 0.3), SMALL_QUAD, grid).coeffs
        assert np.allclose(out[1], expected)


class TestFreeTrajectory:
    """Test cases for free_trajectory."""

    def test_samples_and_derivatives(self, grid):
        """Test the trajectory starts at the data and carries derivatives."""
        psi1 = cosine_mode(grid, 1, amplitude=0.2)
        p = LinearProblem(params=ModelParams.from_M(3, 0.5), psi0=cosine_mode(grid), psi1=psi1, quad=SMALL_QUAD)
        traj = free_trajectory(p, [0.0, 0.5, 1.0], with_derivative=True)
        assert len(traj) == 3
        assert np.array_equal(traj.fields[0].coeffs, p.psi0.coeffs)
        assert np.array_equal(traj.derivatives[0].coeffs, psi1.coeffs)
        assert traj.hs_norms[2] < traj.hs_norms[0]
