"""Time stepping: the auxiliary wave problem and the direct de Sitter solver.

The wave problem v_rr = A v, v(0) = f, v_r(0) = 0 is solved exactly per
Fourier mode for the Laplacian and by RK4 method of lines for the 1-D
variable-coefficient operator A u = (c u_x)_x.

The direct solver integrates

    psi_tt + n psi_t - e^{-2t} A psi + m^2 psi = F(psi) + f

through the unknown u = e^{nt/2} psi, which removes the damping term:

    u'' = e^{-2t} A u + M^2 u + e^{nt/2} (F(psi) + f).
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np
from pydantic import BaseModel, Field
from scipy import fft
from scipy.integrate import RK45
from scipy.optimize import brentq

from desitter_kg.src.core.exceptions.exceptions import (
    ConfigurationException,
    HypothesisException,
    InstabilityException,
)
from desitter_kg.src.core.field import (
    TWO_PI,
    PeriodicGrid,
    SpectralField,
    Trajectory,
    TrajectoryStatus,
)
from desitter_kg.src.core.kernels import ModelParams
from desitter_kg.src.settings import settings
from desitter_kg.utils.parallel import thread_count
from desitter_kg.utils.pylogger import get_python_logger

if TYPE_CHECKING:
    from desitter_kg.src.core.semilinear import NonlinearSpec

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

DEFAULT_CFL = 0.5
MIN_STEP = 1e-12
DEFAULT_BLOWUP_THRESHOLD = 1e8

Source = Callable[[float], SpectralField]


class Laplacian:
    """A = Laplacian on the torus; symbol -|k|^2."""

    name = "laplacian"

    def apply(self, f: SpectralField) -> SpectralField:
        return SpectralField(f.grid, coeffs=-f.grid.k_squared() * f.coeffs)

    def apply_coeffs(self, coeffs: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
        return -grid.k_squared() * coeffs

    def max_speed(self) -> float:
        return 1.0

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Laplacian)

    def __hash__(self) -> int:
        return hash(self.name)


class VariableCoefficient1D:
    """A u = d/dx (c(x) du/dx) on the 1-D torus with c > 0."""

    name = "variable_1d"

    def __init__(self, coeff: np.ndarray) -> None:
        coeff = np.asarray(coeff, dtype=float)
        if coeff.ndim != 1:
            raise ConfigurationException("variable coefficient must be one-dimensional")
        if not np.all(coeff > 0.0):
            raise HypothesisException("variable coefficient must be strictly positive")
        self.coeff = coeff

    def _derivative_symbol(self, grid: PeriodicGrid) -> np.ndarray:
        k = grid.wavenumbers()[0].copy()
        k[grid.npts // 2] = 0.0
        return 1j * k

    def _check(self, grid: PeriodicGrid) -> None:
        if grid.d != 1 or grid.npts != self.coeff.shape[0]:
            raise ConfigurationException(
                "variable coefficient needs a 1-D grid with matching npts"
            )

    def apply_coeffs(self, coeffs: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
        self._check(grid)
        ik = self._derivative_symbol(grid)
        workers = thread_count()
        grad = fft.ifft(ik * coeffs, axis=-1, workers=workers) * grid.npts
        flux = fft.fft(self.coeff * grad, axis=-1, workers=workers) / grid.npts
        return ik * flux

    def apply(self, f: SpectralField) -> SpectralField:
        return SpectralField(f.grid, coeffs=self.apply_coeffs(f.coeffs, f.grid))

    def max_speed(self) -> float:
        return float(np.sqrt(np.max(self.coeff)))


Operator = Laplacian | VariableCoefficient1D


@dataclass
class WaveProblem:
    """Cauchy problem v_rr = A v, v(0) = initial, v_r(0) = velocity (zero by default)."""

    initial: SpectralField
    operator: Operator = field(default_factory=Laplacian)
    velocity: SpectralField | None = None
    dt: float | None = None
    cfl: float = DEFAULT_CFL

    @property
    def grid(self) -> PeriodicGrid:
        return self.initial.grid


def max_stable_step(p: WaveProblem) -> float:
    """CFL-limited RK4 step cfl * dx / sqrt(max c)."""
    return p.cfl * p.grid.spacing / p.operator.max_speed()


def _exact_stack(
    c0: np.ndarray, c1: np.ndarray | None, k_norm: np.ndarray, r: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode solution and r-derivative for the Laplacian, stacked over r."""
    rr = r.reshape((-1,) + (1,) * k_norm.ndim)
    phase = k_norm * rr
    cos, sin = np.cos(phase), np.sin(phase)
    values = c0 * cos
    rates = -c0 * k_norm * sin
    if c1 is not None:
        # sin(|k| r) / |k| with the zero-mode limit r
        values = values + c1 * rr * np.sinc(phase / np.pi)
        rates = rates + c1 * cos
    return values, rates


def _rk4_stack(p: WaveProblem, r: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """March the method-of-lines system through every requested r."""
    grid = p.grid
    limit = max_stable_step(p)
    if p.dt is not None and p.dt > limit:
        raise InstabilityException(
            f"wave step {p.dt} exceeds the CFL limit {limit:.3e}"
        )
    h_max = p.dt if p.dt is not None else limit
    order = np.argsort(r, kind="stable")
    values = np.empty((len(r),) + grid.shape, dtype=complex)
    rates = np.empty_like(values)

    def accel(v: np.ndarray) -> np.ndarray:
        return p.operator.apply_coeffs(v, grid)

    v = p.initial.coeffs.copy()
    w = np.zeros_like(v) if p.velocity is None else p.velocity.coeffs.copy()
    position = 0.0
    for idx in order:
        target = float(r[idx])
        span = target - position
        steps = int(np.ceil(span / h_max - 1e-12)) if span > 0 else 0
        h = span / steps if steps else 0.0
        for _ in range(steps):
            k1v, k1w = w, accel(v)
            k2v, k2w = w + 0.5 * h * k1w, accel(v + 0.5 * h * k1v)
            k3v, k3w = w + 0.5 * h * k2w, accel(v + 0.5 * h * k2v)
            k4v, k4w = w + h * k3w, accel(v + h * k3v)
            v = v + (h / 6.0) * (k1v + 2 * k2v + 2 * k3v + k4v)
            w = w + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
        position = target
        values[idx], rates[idx] = v, w
    return values, rates


def _wave_stacks(p: WaveProblem, r_values: Sequence[float] | np.ndarray):
    r = np.atleast_1d(np.asarray(r_values, dtype=float))
    if np.any(r < 0.0):
        raise HypothesisException("wave problem queried at negative r")
    if isinstance(p.operator, Laplacian):
        c1 = None if p.velocity is None else p.velocity.coeffs
        return _exact_stack(p.initial.coeffs, c1, p.grid.k_norm(), r)
    return _rk4_stack(p, r)


def solve_wave_many(p: WaveProblem, r_values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Coefficient stack of v(., r) for every r, shape (len(r), *grid.shape)."""
    return _wave_stacks(p, r_values)[0]


def solve_wave(p: WaveProblem, r: float) -> SpectralField:
    """Solution v(., r) of the wave problem.

    Raises:
        InstabilityException: If an explicit step violates the CFL limit.
    """
    return SpectralField(p.grid, coeffs=solve_wave_many(p, [r])[0])


def solve_wave_with_velocity(
    v0: SpectralField,
    v1: SpectralField,
    r: float,
    operator: Operator | None = None,
) -> SpectralField:
    """Solution with both initial datum and initial velocity."""
    p = WaveProblem(initial=v0, velocity=v1, operator=operator or Laplacian())
    return solve_wave(p, r)


def solve_wave_state(p: WaveProblem, r: float) -> tuple[SpectralField, SpectralField]:
    """(v, v_r) at r."""
    values, rates = _wave_stacks(p, [r])
    return SpectralField(p.grid, coeffs=values[0]), SpectralField(p.grid, coeffs=rates[0])


def wave_energy(v: SpectralField, v_t: SpectralField, operator: Operator | None = None) -> float:
    """||v_t||^2 + <c grad v, grad v> (c = 1 for the Laplacian)."""
    grid = v.grid
    scale = TWO_PI**grid.d
    kinetic = scale * np.sum(np.abs(v_t.coeffs) ** 2)
    if operator is None or isinstance(operator, Laplacian):
        potential = scale * np.sum(grid.k_squared() * np.abs(v.coeffs) ** 2)
    else:
        potential = -scale * np.real(np.sum(np.conj(v.coeffs) * operator.apply_coeffs(v.coeffs, grid)))
    return float(kinetic + potential)


class DirectSolveConfig(BaseModel):
    """Settings of the direct pseudo-spectral solver."""

    params: ModelParams = Field(description="Model parameters.")
    T: float = Field(description="Final time.", gt=0.0, examples=[8.0])
    rtol: float = Field(default=1e-8, description="Relative tolerance.", gt=0.0)
    atol: float = Field(default=1e-10, description="Absolute tolerance.", gt=0.0)
    dt_init: float | None = Field(default=None, description="First step; automatic when omitted.")
    blowup_threshold: float = Field(
        default=DEFAULT_BLOWUP_THRESHOLD,
        description="L-infinity level treated as blow-up.",
        gt=0.0,
    )
    nonlinearity: NonlinearSpec | None = Field(
        default=None, description="Nonlinearity evaluated pseudo-spectrally; none for F = 0."
    )
    n_output: int = Field(default=41, description="Number of equispaced output times.", ge=2)


@dataclass
class _DirectState:
    grid: PeriodicGrid
    params: ModelParams
    size: int

    def split(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        u = y[: self.size].reshape(self.grid.shape)
        du = y[self.size :].reshape(self.grid.shape)
        return u, du

    def psi(self, y: np.ndarray, t: float) -> SpectralField:
        u, _ = self.split(y)
        return SpectralField(self.grid, coeffs=np.exp(-0.5 * self.params.n * t) * u)

    def psi_t(self, y: np.ndarray, t: float) -> SpectralField:
        u, du = self.split(y)
        half_n = 0.5 * self.params.n
        return SpectralField(self.grid, coeffs=np.exp(-half_n * t) * (du - half_n * u))


def solve_desitter_direct(
    psi0: SpectralField,
    psi1: SpectralField,
    cfg: DirectSolveConfig,
    source: Source | None = None,
    operator: Operator | None = None,
    output_times: Sequence[float] | np.ndarray | None = None,
) -> Trajectory:
    """Integrate the de Sitter equation with an adaptive 5(4) Runge-Kutta pair.

    Args:
        psi0: Initial value.
        psi1: Initial velocity.
        cfg: Solver configuration.
        source: Optional forcing f(t).
        operator: Spatial operator; the Laplacian by default.
        output_times: Sample times in [0, T]; equispaced when omitted.

    Returns:
        Trajectory with samples of psi and psi_t. ``status`` is ``blowup``
        when the L-infinity norm crossed the threshold (``blowup_time`` holds
        the crossing) and ``step_underflow`` when the step collapsed first.
    """
    if psi1.grid != psi0.grid:
        raise ConfigurationException("initial value and velocity live on different grids")
    grid = psi0.grid
    params = cfg.params
    operator = operator or Laplacian()
    times = (
        np.linspace(0.0, cfg.T, cfg.n_output)
        if output_times is None
        else np.asarray(output_times, dtype=float)
    )
    if times[0] != 0.0:
        times = np.concatenate([[0.0], times])
    if np.any(np.diff(times) <= 0.0) or times[-1] > cfg.T + 1e-12:
        raise ConfigurationException("output times must increase within [0, T]")

    state = _DirectState(grid=grid, params=params, size=grid.size)
    half_n = 0.5 * params.n
    M2 = params.M * params.M
    nonlinearity = cfg.nonlinearity

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        u, du = state.split(y)
        forcing = np.zeros(grid.shape, dtype=complex)
        if nonlinearity is not None:
            forcing = forcing + nonlinearity.evaluate(state.psi(y, t)).coeffs
        if source is not None:
            forcing = forcing + source(t).coeffs
        ddu = (
            np.exp(-2.0 * t) * operator.apply_coeffs(u, grid)
            + M2 * u
            + np.exp(half_n * t) * forcing
        )
        return np.concatenate([du.ravel(), ddu.ravel()])

    y0 = np.concatenate([psi0.coeffs.ravel(), (psi1.coeffs + half_n * psi0.coeffs).ravel()])
    solver = RK45(
        rhs,
        0.0,
        y0.astype(complex),
        cfg.T,
        rtol=cfg.rtol,
        atol=cfg.atol,
        first_step=cfg.dt_init,
    )

    fields = [psi0.copy()]
    derivatives = [psi1.copy()]
    recorded = [0.0]
    status: TrajectoryStatus = "completed"
    blowup_time: float | None = None
    next_idx = 1
    n_steps = 0

    def linf_excess(t: float, dense: Callable[[float], np.ndarray]) -> float:
        return state.psi(dense(t), t).linf() - cfg.blowup_threshold

    while solver.status == "running":
        solver.step()
        n_steps += 1
        if solver.status == "failed":
            status = "step_underflow"
            break
        dense = solver.dense_output()
        t_old, t_new = solver.t_old, solver.t
        y_new = solver.y
        crossed = not np.all(np.isfinite(y_new)) or (
            state.psi(y_new, t_new).linf() > cfg.blowup_threshold
        )
        horizon = t_new
        if crossed:
            status = "blowup"
            if np.all(np.isfinite(y_new)):
                blowup_time = float(brentq(linf_excess, t_old, t_new, args=(dense,), xtol=1e-12))
            else:
                blowup_time = float(t_old)
            horizon = blowup_time
        while next_idx < len(times) and (
            times[next_idx] < horizon or (not crossed and times[next_idx] <= horizon)
        ):
            tau = float(times[next_idx])
            y_tau = dense(tau)
            fields.append(state.psi(y_tau, tau))
            derivatives.append(state.psi_t(y_tau, tau))
            recorded.append(tau)
            next_idx += 1
        if crossed:
            break
        if solver.step_size is not None and solver.step_size < MIN_STEP and solver.status == "running":
            status = "step_underflow"
            break

    if status == "step_underflow":
        logger.warning("direct solve step underflow", t=float(solver.t), n_steps=n_steps)
    logger.info(
        "direct solve finished",
        status=status,
        t_end=float(solver.t),
        n_steps=n_steps,
        blowup_time=blowup_time,
    )
    return Trajectory(
        params=params,
        times=np.array(recorded),
        fields=fields,
        derivatives=derivatives,
        status=status,
        blowup_time=blowup_time,
        meta={"n_steps": n_steps, "t_end": float(solver.t)},
    )
