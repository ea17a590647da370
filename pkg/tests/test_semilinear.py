"""Tests for nonlinearities, Picard iteration and lifespan measurement."""

import math

import numpy as np
import pytest
from pydantic import ValidationError

from desitter_kg.src.core.evolution import DirectSolveConfig, solve_desitter_direct
from desitter_kg.src.core.exceptions.exceptions import (
    FitException,
    HypothesisException,
    PicardNonConvergenceException,
)
from desitter_kg.src.core.field import PeriodicGrid, SpectralField, constant, cosine_mode, sobolev_norm
from desitter_kg.src.core.kernels import ModelParams
from desitter_kg.src.core.semilinear import (
    NonlinearSpec,
    PicardConfig,
    data_profile,
    energy_exponent_admissible,
    eval_nonlinearity,
    geometric_time_grid,
    lifespan_sweep,
    lipschitz_probe,
    ode_blowup_time,
    picard_solve,
)
from desitter_kg.src.core.transform import LinearProblem, QuadratureSpec, free_trajectory

QUAD = QuadratureSpec(nb=32, nr=32, ns=32)


@pytest.fixture
def grid():
    return PeriodicGrid(d=1, npts=16)


def small_problem(grid: PeriodicGrid, params: ModelParams, eps: float) -> LinearProblem:
    mode = cosine_mode(grid, 1)
    psi0 = mode * (0.25 * eps / sobolev_norm(mode, params.s))
    return LinearProblem(params=params, psi0=psi0, psi1=SpectralField.zeros(grid), quad=QUAD)


class TestNonlinearSpec:
    """Test cases for NonlinearSpec."""

    def test_pointwise_kinds(self):
        """Test each family on a complex sample."""
        psi = np.array([1.0 + 1.0j])
        assert NonlinearSpec(kind="power_signed", alpha=2.0).pointwise(psi)[0] == pytest.approx(2.0 * (1 + 1j))
        assert NonlinearSpec(kind="power_abs", alpha=1.0, sign=-1).pointwise(psi)[0] == pytest.approx(-2.0)
        assert NonlinearSpec(kind="cubic", lam=0.5).pointwise(psi)[0] == pytest.approx(-0.5 * (1 + 1j) ** 3)

    def test_polynomial_detection(self):
        """Test which kinds are dealiased."""
        assert NonlinearSpec(kind="cubic").is_polynomial
        assert NonlinearSpec(kind="power_signed", alpha=2.0).is_polynomial
        assert NonlinearSpec(kind="power_abs", alpha=1.0).is_polynomial
        assert not NonlinearSpec(kind="power_signed", alpha=1.5).is_polynomial

    def test_evaluate_constant(self, grid):
        """Test the cubic term of a constant field."""
        out = eval_nonlinearity(NonlinearSpec(kind="cubic"), constant(grid, 0.5))
        assert np.allclose(out.values, -0.125)

    @pytest.mark.parametrize("payload", [{"kind": "cubic", "sign": 2}, {"kind": "cubic", "alpha": 3.0}])
    def test_rejects_invalid(self, payload):
        """Test sign and cubic exponent validation."""
        with pytest.raises(ValidationError):
            NonlinearSpec(**payload)

    def test_energy_exponent(self):
        """Test the energy-solution range alpha > 2/(n-1)."""
        assert energy_exponent_admissible(2.0, 3)
        assert not energy_exponent_admissible(0.5, 3)
        assert not energy_exponent_admissible(2.0, 1)


class TestLipschitzEstimate:
    """Test cases for lipschitz_probe."""

    def test_cubic_exponent(self):
        """Test the cubic term has Lipschitz exponent close to 2."""
        constants = lipschitz_probe(NonlinearSpec(kind="cubic"), s=1.0, n_samples=4)
        assert constants.alpha_emp == pytest.approx(2.0, abs=0.1)
        assert 0.0 < constants.C_emp < np.inf

    def test_needs_algebra_index(self):
        """Test s <= d/2 is refused."""
        with pytest.raises(HypothesisException):
            lipschitz_probe(NonlinearSpec(kind="cubic"), s=0.5)


class TestPicardConfig:
    """Test cases for PicardConfig."""

    def test_default_radius(self):
        """Test R defaults to 2 eps."""
        assert PicardConfig(eps=1e-3).radius == pytest.approx(2e-3)

    def test_radius_must_exceed_eps(self):
        """Test R <= eps is refused."""
        with pytest.raises(ValidationError):
            PicardConfig(eps=1e-3, R=1e-3)

    def test_time_grid(self):
        """Test the geometric grid spans [0, T] and is dense near 0."""
        times = PicardConfig(eps=1e-3, T=4.0, n_time_samples=9).time_grid()
        assert times[0] == 0.0
        assert times[-1] == pytest.approx(4.0)
        assert np.all(np.diff(np.diff(times)) > 0.0)

    def test_time_grid_needs_two_samples(self):
        """Test a one-point grid is refused."""
        with pytest.raises(HypothesisException):
            geometric_time_grid(1.0, 1)


class TestPicardSolve:
    """Test cases for picard_solve."""

    def test_contraction(self, grid):
        """Test geometric convergence for the cubic term at M = 1/4, gamma = 1."""
        eps = 1e-3
        params = ModelParams.from_M(3, 0.25)
        cfg = PicardConfig(eps=eps, gamma=1.0, tol=1e-8 * eps, T=4.0, quad=QUAD, n_time_samples=17)
        free = free_trajectory(small_problem(grid, params, eps), cfg.time_grid())
        traj, report = picard_solve(free, NonlinearSpec(kind="cubic"), cfg, params)
        assert report.converged
        assert report.iterations <= 10
        assert report.empirical_ratio < 0.5
        assert report.weighted_norm <= 2 * eps
        assert report.within_ball
        assert report.residual <= 2 * cfg.tol
        assert report.energy_regime
        assert len(traj) == cfg.n_time_samples

    def test_matches_direct_solver(self, grid):
        """Test the converged trajectory agrees with direct integration of the same problem."""
        eps = 0.05
        params = ModelParams.from_M(3, 0.25)
        F = NonlinearSpec(kind="cubic")
        cfg = PicardConfig(eps=eps, gamma=1.0, tol=1e-10, T=2.0, quad=QUAD, n_time_samples=9)
        problem = small_problem(grid, params, eps)
        traj, _ = picard_solve(free_trajectory(problem, cfg.time_grid()), F, cfg, params)
        direct = solve_desitter_direct(
            problem.psi0,
            problem.psi1,
            DirectSolveConfig(params=params, T=2.0, rtol=1e-10, atol=1e-14, nonlinearity=F),
            output_times=traj.times,
        )
        for psi, reference in zip(traj.fields[1:], direct.fields[1:]):
            assert sobolev_norm(psi - reference, 2.0) <= 1e-2 * sobolev_norm(reference, 2.0)

    def test_non_convergence_carries_report(self, grid):
        """Test the iteration cap raises with the partial report attached."""
        eps = 1e-3
        params = ModelParams.from_M(3, 0.25)
        cfg = PicardConfig(eps=eps, tol=1e-30, max_iter=1, T=2.0, quad=QUAD, n_time_samples=5)
        free = free_trajectory(small_problem(grid, params, eps), cfg.time_grid())
        with pytest.raises(PicardNonConvergenceException) as info:
            picard_solve(free, NonlinearSpec(kind="cubic"), cfg, params)
        assert info.value.report.iterations == 1
        assert not info.value.report.converged


class TestLifespan:
    """Test cases for blow-up times and the lifespan sweep."""

    def test_data_profile(self, grid):
        """Test both profiles peak at the requested amplitude."""
        assert np.allclose(data_profile(grid, "constant", 0.3).values, 0.3)
        assert data_profile(grid, "bump", 0.3).linf() == pytest.approx(0.3)

    def test_ode_blowup(self):
        """Test the scalar equation blows up in the tachyonic regime."""
        params = ModelParams.from_M(3, 2.5)
        T = ode_blowup_time(params, NonlinearSpec(kind="power_abs", alpha=1.0), 1e-2, threshold=1e4)
        assert T is not None
        assert math.log(100.0) - 2.0 < T < math.log(100.0) + 5.0

    def test_ode_no_blowup(self):
        """Test small data of a massive field stay bounded."""
        params = ModelParams.from_M(3, 0.5)
        assert ode_blowup_time(params, NonlinearSpec(kind="power_abs", alpha=1.0), 1e-2, T_max=10.0) is None

    def test_sweep_slope(self):
        """Test T grows like ln(1/eps)/(M - n/2) for |psi|^2 with M = 5/2."""
        params = ModelParams.from_M(3, 2.5)
        result = lifespan_sweep(
            NonlinearSpec(kind="power_abs", alpha=1.0),
            params,
            [1e-2, 1e-3, 1e-4],
            threshold=1e4,
        )
        assert result.theory_slope == pytest.approx(1.0)
        assert result.slope_fit == pytest.approx(1.0, rel=0.2)
        assert result.monotone
        assert not any(result.censored)
        assert result.max_shortfall <= 0.05

    def test_sweep_needs_growth_regime(self):
        """Test Re M <= n/2 is refused."""
        with pytest.raises(HypothesisException):
            lifespan_sweep(NonlinearSpec(kind="cubic"), ModelParams.from_M(3, 1.0), [1e-2, 1e-3])

    def test_sweep_all_censored(self):
        """Test a horizon too short for any blow-up cannot be fitted."""
        with pytest.raises(FitException):
            lifespan_sweep(
                NonlinearSpec(kind="power_abs", alpha=1.0),
                ModelParams.from_M(3, 2.5),
                [1e-3, 1e-4],
                T_max=0.5,
            )
