"""Tests for the wave problem and the direct de Sitter solver."""

import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import solve_ivp

from desitter_kg.src.core.evolution import (
    DirectSolveConfig,
    Laplacian,
    VariableCoefficient1D,
    WaveProblem,
    max_stable_step,
    solve_desitter_direct,
    solve_wave,
    solve_wave_many,
    solve_wave_state,
    solve_wave_with_velocity,
    wave_energy,
)
from desitter_kg.src.core.exceptions.exceptions import (
    ConfigurationException,
    HypothesisException,
    InstabilityException,
)
from desitter_kg.src.core.field import PeriodicGrid, SpectralField, constant, cosine_mode, random_bandlimited
from desitter_kg.src.core.kernels import ModelParams
from desitter_kg.src.core.semilinear import NonlinearSpec, ode_blowup_time


@pytest.fixture
def grid():
    return PeriodicGrid(d=1, npts=32)


def mode_ode(params: ModelParams, k: int, T: float, times: np.ndarray) -> np.ndarray:
    """psi_k(t) of one Fourier mode with psi(0) = 1, psi'(0) = 0, by a tight reference integrator."""

    def rhs(t, y):
        return [y[1], -params.n * y[1] - (math.exp(-2 * t) * k * k + params.m2.real) * y[0]]

    sol = solve_ivp(rhs, (0.0, T), [1.0, 0.0], method="DOP853", t_eval=times, rtol=1e-12, atol=1e-14)
    return sol.y[0]


class TestWaveProblem:
    """Test cases for the auxiliary wave problem."""

    def test_cosine_mode(self, grid):
        """Test v = cos(kx) cos(kr) for the Laplacian."""
        v = solve_wave(WaveProblem(initial=cosine_mode(grid, 3)), 0.7)
        assert np.allclose(v.values, np.cos(3 * grid.axis()) * math.cos(2.1), atol=1e-13)

    def test_initial_velocity(self, grid):
        """Test a unit zero-mode velocity grows linearly."""
        v = solve_wave_with_velocity(SpectralField.zeros(grid), constant(grid, 1.0), 2.5)
        assert np.allclose(v.values, 2.5)

    def test_many_matches_single(self, grid):
        """Test the stacked form agrees with per-r solves."""
        p = WaveProblem(initial=random_bandlimited(grid, seed=4))
        stack = solve_wave_many(p, [0.0, 0.5, 1.5])
        assert stack.shape == (3, 32)
        assert np.allclose(stack[0], p.initial.coeffs)
        assert np.allclose(stack[2], solve_wave(p, 1.5).coeffs)

    def test_rk4_matches_exact(self, grid):
        """Test method of lines with c = 1 reproduces the exact Laplacian solution."""
        f = cosine_mode(grid, 1) + cosine_mode(grid, 2, amplitude=0.5)
        exact = solve_wave(WaveProblem(initial=f), 1.3)
        marched = solve_wave(WaveProblem(initial=f, operator=VariableCoefficient1D(np.ones(32))), 1.3)
        assert np.allclose(marched.values, exact.values, atol=1e-5)

    def test_variable_energy_conserved(self, grid):
        """Test the wave energy is conserved for c = 1 + 0.2 cos x."""
        operator = VariableCoefficient1D(1.0 + 0.2 * np.cos(grid.axis()))
        f = random_bandlimited(grid, seed=5, kmax=2)
        p = WaveProblem(initial=f, operator=operator)
        e0 = wave_energy(f, SpectralField.zeros(grid), operator)
        v, v_r = solve_wave_state(p, 2.0)
        assert wave_energy(v, v_r, operator) == pytest.approx(e0, rel=1e-3)

    def test_laplacian_energy_conserved(self, grid):
        """Test the exact solver conserves energy."""
        f = random_bandlimited(grid, seed=6)
        e0 = wave_energy(f, SpectralField.zeros(grid))
        v, v_r = solve_wave_state(WaveProblem(initial=f), 3.0)
        assert wave_energy(v, v_r) == pytest.approx(e0, rel=1e-12)

    def test_cfl_violation(self, grid):
        """Test an explicit step above the CFL limit is refused."""
        operator = VariableCoefficient1D(np.ones(32))
        p = WaveProblem(initial=cosine_mode(grid), operator=operator)
        with pytest.raises(InstabilityException):
            solve_wave(WaveProblem(initial=p.initial, operator=operator, dt=2 * max_stable_step(p)), 1.0)

    def test_negative_r(self, grid):
        """Test the wave problem is posed for r >= 0 only."""
        with pytest.raises(HypothesisException):
            solve_wave(WaveProblem(initial=cosine_mode(grid)), -0.1)

    def test_coefficient_must_be_positive(self):
        """Test c must be strictly positive."""
        with pytest.raises(HypothesisException):
            VariableCoefficient1D(np.zeros(16))

    def test_coefficient_grid_mismatch(self, grid):
        """Test the coefficient length must match the grid."""
        operator = VariableCoefficient1D(np.ones(16))
        with pytest.raises(ConfigurationException):
            operator.apply(cosine_mode(grid))

    def test_laplacian_equality(self):
        """Test Laplacians compare equal."""
        assert Laplacian() == Laplacian()


class TestDirectSolver:
    """Test cases for solve_desitter_direct."""

    def test_config_parses_nonlinearity(self):
        """Test the nonlinearity field accepts a mapping and rejects other values."""
        params = ModelParams.from_M(3, 0.5)
        cfg = DirectSolveConfig(params=params, T=1.0, nonlinearity={"kind": "cubic", "lam": 0.5})
        assert cfg.nonlinearity == NonlinearSpec(kind="cubic", lam=0.5)
        assert DirectSolveConfig(params=params, T=1.0).nonlinearity is None
        with pytest.raises(ValidationError):
            DirectSolveConfig(params=params, T=1.0, nonlinearity="cubic")

    def test_zero_mode_closed_form(self, grid):
        """Test constant data follows e^{-nt/2}(cosh Mt + n/(2M) sinh Mt)."""
        params = ModelParams.from_M(3, 0.5)
        cfg = DirectSolveConfig(params=params, T=4.0, rtol=1e-10, atol=1e-12, n_output=9)
        traj = solve_desitter_direct(constant(grid, 1.0), SpectralField.zeros(grid), cfg)
        assert traj.status == "completed"
        for t, psi in zip(traj.times, traj.fields):
            expected = math.exp(-1.5 * t) * (math.cosh(0.5 * t) + 3.0 * math.sinh(0.5 * t))
            assert psi.values[0].real == pytest.approx(expected, rel=1e-7)

    def test_single_mode_against_reference(self, grid):
        """Test a cosine mode against a tight scalar integration."""
        params = ModelParams.from_mass(3, 2.0)
        times = np.linspace(0.0, 3.0, 7)
        cfg = DirectSolveConfig(params=params, T=3.0, rtol=1e-10, atol=1e-12)
        traj = solve_desitter_direct(cosine_mode(grid, 2), SpectralField.zeros(grid), cfg, output_times=times)
        reference = mode_ode(params, 2, 3.0, times)
        computed = np.array([psi.values[0].real for psi in traj.fields])
        assert np.allclose(computed, reference, atol=1e-7)

    def test_derivative_samples(self, grid):
        """Test psi_t samples agree with the zero-mode derivative."""
        params = ModelParams.from_M(3, 0.5)
        cfg = DirectSolveConfig(params=params, T=2.0, rtol=1e-10, atol=1e-12, n_output=3)
        traj = solve_desitter_direct(constant(grid, 1.0), SpectralField.zeros(grid), cfg)
        t = traj.times[-1]
        expected = math.exp(-1.5 * t) * (
            0.5 * math.sinh(0.5 * t) + 1.5 * math.cosh(0.5 * t)
            - 1.5 * (math.cosh(0.5 * t) + 3.0 * math.sinh(0.5 * t))
        )
        assert traj.derivatives[-1].values[0].real == pytest.approx(expected, rel=1e-6)

    def test_output_times_prepend_zero(self, grid):
        """Test t = 0 is always the first sample."""
        cfg = DirectSolveConfig(params=ModelParams.from_M(3, 0.5), T=2.0)
        traj = solve_desitter_direct(constant(grid), SpectralField.zeros(grid), cfg, output_times=[1.0, 2.0])
        assert list(traj.times) == [0.0, 1.0, 2.0]

    def test_output_times_outside_horizon(self, grid):
        """Test output times beyond T are refused."""
        cfg = DirectSolveConfig(params=ModelParams.from_M(3, 0.5), T=1.0)
        with pytest.raises(ConfigurationException):
            solve_desitter_direct(constant(grid), SpectralField.zeros(grid), cfg, output_times=[0.5, 2.0])

    def test_source_term(self, grid):
        """Test a constant source drives the zero mode to f/m^2."""
        params = ModelParams.from_mass(3, 2.0)
        source_field = constant(grid, 2.0)
        cfg = DirectSolveConfig(params=params, T=20.0, rtol=1e-10, atol=1e-12, n_output=2)
        traj = solve_desitter_direct(
            SpectralField.zeros(grid), SpectralField.zeros(grid), cfg, source=lambda t: source_field
        )
        assert traj.fields[-1].values[0].real == pytest.approx(1.0, abs=1e-6)

    def test_blowup_matches_ode(self, grid):
        """Test the blow-up time of constant data matches the scalar equation."""
        params = ModelParams.from_M(1, 1.0)
        F = NonlinearSpec(kind="power_signed", alpha=2.0)
        cfg = DirectSolveConfig(
            params=params, T=30.0, rtol=1e-10, atol=1e-12, blowup_threshold=1e4, nonlinearity=F, n_output=2
        )
        traj = solve_desitter_direct(constant(grid, 0.5), SpectralField.zeros(grid), cfg)
        expected = ode_blowup_time(params, F, 0.5, threshold=1e4, T_max=30.0)
        assert traj.status == "blowup"
        assert expected is not None
        assert traj.blowup_time == pytest.approx(expected, rel=1e-4)
        assert all(t < traj.blowup_time for t in traj.times)

    def test_grids_must_match(self, grid):
        """Test value and velocity must share a grid."""
        cfg = DirectSolveConfig(params=ModelParams.from_M(3, 0.5), T=1.0)
        with pytest.raises(ConfigurationException):
            solve_desitter_direct(constant(grid), SpectralField.zeros(PeriodicGrid(npts=16)), cfg)
