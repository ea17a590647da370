"""Semilinear layer: nonlinearities, Picard iteration and lifespan measurement.

Picard iteration solves psi = psi_free + G[F(psi)] on a fixed geometric time
grid. Iterates are stored as coefficient stacks; F(psi) is interpolated in
time by a cubic spline so that G can sample it at its quadrature nodes.
"""

from __future__ import annotations

from collections.abc import Sequence
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.stats import linregress

from desitter_kg.src.core.evolution import (
    DEFAULT_BLOWUP_THRESHOLD,
    DirectSolveConfig,
    Operator,
    solve_desitter_direct,
)
from desitter_kg.src.core.exceptions.exceptions import (
    FitException,
    HypothesisException,
    PicardNonConvergenceException,
)
from desitter_kg.src.core.field import (
    PeriodicGrid,
    SpectralField,
    Trajectory,
    constant,
    positive_bump,
    random_bandlimited,
    sobolev_norm,
    sobolev_norm_coeffs,
    stack_fields,
)
from desitter_kg.src.core.kernels import ModelParams
from desitter_kg.src.core.transform import (
    DuhamelOperator,
    LinearProblem,
    QuadratureSpec,
    free_trajectory,
)
from desitter_kg.src.settings import settings
from desitter_kg.utils.parallel import parallel_map
from desitter_kg.utils.pylogger import get_python_logger

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

NonlinearKind = Literal["power_signed", "power_abs", "cubic"]
Profile = Literal["bump", "constant"]


class NonlinearSpec(BaseModel):
    """Nonlinearity F(psi).

    * ``power_signed``: sign * |psi|^alpha psi
    * ``power_abs``: sign * |psi|^{alpha+1}
    * ``cubic``: -sign * lam * psi^3 (Higgs term, alpha = 2)
    """

    model_config = ConfigDict(frozen=True)

    kind: NonlinearKind = Field(description="Nonlinearity family.", examples=["cubic"])
    sign: int = Field(default=1, description="Overall sign, +1 or -1.", examples=[1])
    alpha: float = Field(default=2.0, description="Lipschitz exponent.", gt=0.0, examples=[2.0])
    lam: float = Field(default=1.0, description="Cubic coupling lambda.", ge=0.0, examples=[1.0])

    @model_validator(mode="after")
    def _check(self) -> "NonlinearSpec":
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        if self.kind == "cubic" and self.alpha != 2.0:
            raise ValueError("cubic nonlinearity has alpha = 2")
        return self

    @property
    def is_polynomial(self) -> bool:
        """True when F is a polynomial in (psi, conj psi), which the 2/3 rule dealiases."""
        if self.kind == "cubic":
            return True
        degree = self.alpha if self.kind == "power_signed" else self.alpha + 1.0
        return float(degree).is_integer() and int(degree) % 2 == 0

    def pointwise(self, psi: np.ndarray) -> np.ndarray:
        """F applied to grid values."""
        psi = np.asarray(psi, dtype=complex)
        if self.kind == "power_signed":
            return self.sign * np.abs(psi) ** self.alpha * psi
        if self.kind == "power_abs":
            return self.sign * np.abs(psi) ** (self.alpha + 1.0) + 0j
        return -self.sign * self.lam * psi**3

    def evaluate(self, psi: SpectralField) -> SpectralField:
        """F(psi) in physical space, dealiased for polynomial kinds."""
        if self.is_polynomial:
            band = psi.dealias()
            return SpectralField(psi.grid, values=self.pointwise(band.values)).dealias()
        return SpectralField(psi.grid, values=self.pointwise(psi.values))


# resolves the forward reference to NonlinearSpec
DirectSolveConfig.model_rebuild()


def eval_nonlinearity(F: NonlinearSpec, psi: SpectralField) -> SpectralField:
    """F(x, psi) evaluated pseudo-spectrally."""
    return F.evaluate(psi)


def energy_exponent_admissible(alpha: float, n: int) -> bool:
    """Whether alpha lies in the energy-solution range alpha > 2/(n-1)."""
    return n > 1 and alpha > 2.0 / (n - 1)


class LipschitzProbe(BaseModel):
    """Empirical constants of the Lipschitz condition."""

    C_emp: float = Field(description="Largest observed Lipschitz ratio.")
    alpha_emp: float = Field(description="Log-log slope of difference quotients against scale.")
    n_samples: int = Field(description="Number of random pairs.")
    radius: float = Field(description="Ball radius in H_s.")


def lipschitz_probe(
    F: NonlinearSpec,
    s: float,
    n_samples: int = 16,
    radius: float = 0.1,
    grid: PeriodicGrid | None = None,
    seed: int = 0,
) -> LipschitzProbe:
    """Measure C and alpha in ||F(u)-F(v)|| <= C ||u-v|| (||u||^a + ||v||^a).

    Pairs are random real band-limited fields inside the H_s ball of the given
    radius; alpha is the mean log-log slope of ||F(u)-F(v)|| / ||u-v|| when the
    pair is rescaled over eight octaves below the radius.
    """
    grid = grid or PeriodicGrid(d=1, npts=32)
    if s <= grid.d / 2.0:
        raise HypothesisException(f"Lipschitz probe needs s > d/2, got s={s}, d={grid.d}")
    rng = np.random.default_rng(seed)
    scales = radius * 2.0 ** -np.arange(8)
    C_emp, slopes = 0.0, []
    for _ in range(n_samples):
        pair = []
        for _ in range(2):
            f = random_bandlimited(grid, rng=rng, kmax=max(1, grid.npts // 8))
            pair.append(f * (rng.uniform(0.2, 1.0) / sobolev_norm(f, s)))
        quotients = []
        for rho in scales:
            u, v = pair[0] * rho, pair[1] * rho
            du = sobolev_norm(u - v, s)
            dF = sobolev_norm(F.evaluate(u) - F.evaluate(v), s)
            quotients.append(dF / du)
            denom = sobolev_norm(u, s) ** F.alpha + sobolev_norm(v, s) ** F.alpha
            if denom > 0.0:
                C_emp = max(C_emp, dF / (du * denom))
        slope, _ = np.polyfit(np.log(scales), np.log(quotients), 1)
        slopes.append(slope)
    return LipschitzProbe(
        C_emp=float(C_emp), alpha_emp=float(np.mean(slopes)), n_samples=n_samples, radius=radius
    )


def geometric_time_grid(T: float, n: int, stretch: float = 3.0) -> np.ndarray:
    """n times on [0, T] spaced geometrically, dense near 0."""
    if n < 2:
        raise HypothesisException("a time grid needs at least two samples")
    u = np.linspace(0.0, 1.0, n)
    return T * np.expm1(stretch * u) / np.expm1(stretch)


class PicardConfig(BaseModel):
    """Settings of the Picard iteration."""

    model_config = ConfigDict(frozen=True)

    eps: float = Field(description="Data size epsilon.", gt=0.0, examples=[1e-3])
    R: float | None = Field(default=None, description="Ball radius; 2*eps when omitted.")
    gamma: float = Field(default=1.0, description="Weight exponent of the X-norm.", examples=[1.0])
    tol: float = Field(default=1e-11, description="Fixed-point tolerance in the X-norm.", gt=0.0)
    max_iter: int = Field(default=30, description="Iteration cap.", ge=1)
    T: float = Field(default=8.0, description="Time horizon.", gt=0.0)
    quad: QuadratureSpec = Field(default_factory=QuadratureSpec, description="Quadrature.")
    n_time_samples: int = Field(default=41, description="Samples on the time grid.", ge=4)
    stretch: float = Field(default=3.0, description="Geometric grid stretch.", gt=0.0)

    @model_validator(mode="after")
    def _check_radius(self) -> "PicardConfig":
        if self.R is not None and self.R <= self.eps:
            raise ValueError(f"ball radius R={self.R} must exceed eps={self.eps}")
        return self

    @property
    def radius(self) -> float:
        return self.R if self.R is not None else 2.0 * self.eps

    def time_grid(self) -> np.ndarray:
        return geometric_time_grid(self.T, self.n_time_samples, self.stretch)


class PicardReport(BaseModel):
    """Convergence history of one Picard solve."""

    distances: list[float] = Field(description="Weighted X-norm distance of successive iterates.")
    ratios: list[float] = Field(description="Successive distance ratios.")
    empirical_ratio: float = Field(description="Largest successive distance ratio.")
    iterations: int = Field(description="Iterations performed.")
    converged: bool = Field(description="Whether the distance fell below tol.")
    weighted_norm: float = Field(description="X-norm of the final iterate.")
    residual: float = Field(description="X-norm of psi - psi_free - G[F(psi)].")
    truncation_estimate: float = Field(description="Weighted norm at the horizon.")
    energy_regime: bool = Field(description="alpha > 2/(n-1).")
    within_ball: bool = Field(description="Whether the final iterate lies in the ball of radius R.")
    gamma: float = Field(description="Weight exponent used.")
    tol: float = Field(description="Tolerance used.")


def _weighted(stack: np.ndarray, times: np.ndarray, grid: PeriodicGrid, s: float, gamma: float) -> float:
    return float(np.max(np.exp(gamma * times) * sobolev_norm_coeffs(stack, grid, s)))


def _nonlinear_stack(F: NonlinearSpec, stack: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    return np.stack([F.evaluate(SpectralField(grid, coeffs=c)).coeffs for c in stack])


def picard_solve(
    psi0_free: Trajectory,
    F: NonlinearSpec,
    cfg: PicardConfig,
    params: ModelParams,
    operator: Operator | None = None,
) -> tuple[Trajectory, PicardReport]:
    """Iterate psi <- psi_free + G[F(psi)] from psi_free until the X-distance is below tol.

    Args:
        psi0_free: Free linear solution on the iteration time grid.
        F: Nonlinearity.
        cfg: Iteration settings.
        params: Model parameters.
        operator: Spatial operator; the Laplacian by default.

    Returns:
        The converged trajectory and its report.

    Raises:
        PicardNonConvergenceException: If max_iter is reached or iterates overflow.
    """
    times = psi0_free.times
    grid = psi0_free.grid
    s, gamma = params.s, cfg.gamma
    duhamel = DuhamelOperator(grid, params, cfg.quad, times, operator)
    free = psi0_free.coeff_stack()

    def step(stack: np.ndarray) -> np.ndarray:
        spline = CubicSpline(times, _nonlinear_stack(F, stack, grid), axis=0)
        return free + duhamel.apply(spline)

    current = free
    distances: list[float] = []
    ratios: list[float] = []
    converged = False
    for k in range(cfg.max_iter):
        nxt = step(current)
        distance = _weighted(nxt - current, times, grid, s, gamma)
        if distances:
            ratios.append(distance / distances[-1] if distances[-1] > 0 else 0.0)
        distances.append(distance)
        current = nxt
        logger.debug("picard iteration", iteration=k + 1, distance=distance)
        if not np.isfinite(distance):
            break
        if distance < cfg.tol:
            converged = True
            break

    finite = bool(np.all(np.isfinite(current)))
    residual = _weighted(step(current) - current, times, grid, s, gamma) if finite else float("inf")
    weighted_norm = _weighted(current, times, grid, s, gamma) if finite else float("inf")
    horizon = float(np.exp(gamma * times[-1]) * sobolev_norm_coeffs(current[-1], grid, s)) if finite else float("inf")
    report = PicardReport(
        distances=distances,
        ratios=ratios,
        empirical_ratio=max(ratios) if ratios else 0.0,
        iterations=len(distances),
        converged=converged,
        weighted_norm=weighted_norm,
        residual=residual,
        truncation_estimate=horizon,
        energy_regime=energy_exponent_admissible(F.alpha, params.n),
        within_ball=weighted_norm <= cfg.radius,
        gamma=gamma,
        tol=cfg.tol,
    )
    logger.info(
        "picard solve finished",
        converged=converged,
        iterations=report.iterations,
        empirical_ratio=report.empirical_ratio,
        weighted_norm=weighted_norm,
    )
    if not converged:
        raise PicardNonConvergenceException(
            f"Picard iteration did not reach tol={cfg.tol:g} in {report.iterations} iterations "
            f"(last ratio {ratios[-1] if ratios else float('nan'):.3g})",
            report,
        )
    trajectory = Trajectory(params=params, times=times, fields=stack_fields(grid, current))
    return trajectory, report


def data_profile(grid: PeriodicGrid, profile: Profile, amplitude: float) -> SpectralField:
    """Initial value amplitude * profile."""
    if profile == "constant":
        return constant(grid, amplitude)
    return positive_bump(grid, amplitude)


def ode_blowup_time(
    params: ModelParams,
    F: NonlinearSpec,
    amplitude: float,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    T_max: float = 40.0,
) -> float | None:
    """Blow-up time of psi'' + n psi' + m^2 psi = F(psi), psi(0) = amplitude, psi'(0) = 0.

    Solved with Radau on the real system (Re, Im of psi and psi'); returns
    the time |psi| reaches ``threshold`` or None when it does not before T_max.
    """
    n, m2 = params.n, params.m2

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        psi = y[0] + 1j * y[1]
        dpsi = y[2] + 1j * y[3]
        ddpsi = complex(F.pointwise(np.array([psi]))[0]) - n * dpsi - m2 * psi
        return np.array([dpsi.real, dpsi.imag, ddpsi.real, ddpsi.imag])

    def crossing(t: float, y: np.ndarray) -> float:
        return np.hypot(y[0], y[1]) - threshold

    crossing.terminal = True  # type: ignore[attr-defined]
    crossing.direction = 1  # type: ignore[attr-defined]

    y0 = np.array([float(np.real(amplitude)), float(np.imag(amplitude)), 0.0, 0.0])
    sol = solve_ivp(rhs, (0.0, T_max), y0, method="Radau", events=crossing, rtol=1e-10, atol=1e-12)
    if sol.t_events[0].size:
        return float(sol.t_events[0][0])
    return None


class LifespanResult(BaseModel):
    """Blow-up times across data sizes and their logarithmic fit."""

    eps_values: list[float] = Field(description="Data sizes.")
    T_blowup: list[float] = Field(description="Measured lifespans; NaN where censored.")
    censored: list[bool] = Field(description="No blow-up within the horizon.")
    slope_fit: float = Field(description="Least-squares slope of T against ln(1/eps).")
    intercept_fit: float = Field(description="Intercept of the fit.")
    theory_slope: float = Field(description="1/(Re M - n/2).")
    lower_bound_constant: float = Field(
        description="Smallest C with T >= theory_slope ln(1/eps) - C over the sweep."
    )
    max_shortfall: float = Field(description="Largest relative drop of T below the fitted line.")
    monotone: bool = Field(description="T increases as eps decreases.")
    solver: str = Field(description="Solver used per point.")


def picard_lifespan(
    F: NonlinearSpec,
    params: ModelParams,
    eps: float,
    grid: PeriodicGrid,
    quad: QuadratureSpec,
    T_max: float,
    profile: Profile = "bump",
    n_time_samples: int = 25,
    n_bisect: int = 12,
) -> float | None:
    """Largest horizon on which the unweighted Picard iteration still contracts.

    Bisects T in (0, T_max]; returns None when the iteration contracts on the
    whole interval (censored).
    """
    psi0 = data_profile(grid, profile, eps)
    psi1 = SpectralField.zeros(grid)
    problem = LinearProblem(params=params, psi0=psi0, psi1=psi1, quad=quad)

    def contracts(T: float) -> bool:
        cfg = PicardConfig(
            eps=eps,
            gamma=0.0,
            T=T,
            tol=1e-10 * eps,
            max_iter=40,
            quad=quad,
            n_time_samples=n_time_samples,
        )
        free = free_trajectory(problem, cfg.time_grid())
        try:
            _, report = picard_solve(free, F, cfg, params)
        except PicardNonConvergenceException:
            return False
        return report.empirical_ratio < 1.0 and report.weighted_norm <= 1.0

    if contracts(T_max):
        return None
    lo, hi = 0.0, T_max
    for _ in range(n_bisect):
        mid = 0.5 * (lo + hi)
        if contracts(mid):
            lo = mid
        else:
            hi = mid
    return lo


def lifespan_sweep(
    F: NonlinearSpec,
    params: ModelParams,
    eps_grid: Sequence[float],
    solver: Literal["direct", "picard"] = "direct",
    grid: PeriodicGrid | None = None,
    profile: Profile = "bump",
    T_max: float = 30.0,
    threshold: float = DEFAULT_BLOWUP_THRESHOLD,
    quad: QuadratureSpec | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    allow_hypothesis_violation: bool = False,
) -> LifespanResult:
    """Measure lifespans across data sizes and fit T against ln(1/eps).

    Raises:
        HypothesisException: If Re M <= n/2 (no blow-up regime).
        FitException: If fewer than two points blow up.
    """
    if params.re_M <= params.half_n and not allow_hypothesis_violation:
        raise HypothesisException(
            f"lifespan sweep needs Re M > n/2, got Re M={params.re_M}, n={params.n}"
        )
    grid = grid or PeriodicGrid(d=1, npts=16)
    quad = quad or QuadratureSpec(nb=16, nr=16, ns=16)
    eps_values = [float(e) for e in eps_grid]

    def measure(eps: float) -> float | None:
        if solver == "picard":
            T = picard_lifespan(F, params, eps, grid, quad, T_max, profile)
        else:
            cfg = DirectSolveConfig(
                params=params,
                T=T_max,
                rtol=rtol,
                atol=atol,
                blowup_threshold=threshold,
                nonlinearity=F,
                n_output=2,
            )
            traj = solve_desitter_direct(
                data_profile(grid, profile, eps), SpectralField.zeros(grid), cfg
            )
            T = traj.blowup_time if traj.status == "blowup" else None
        logger.info("lifespan point", eps=eps, T_blowup=T, solver=solver)
        return T

    measured = parallel_map(measure, eps_values)
    censored = [T is None for T in measured]
    T_values = np.array([np.nan if T is None else T for T in measured])
    mask = ~np.array(censored)
    if mask.sum() < 2:
        raise FitException("lifespan fit needs at least two blow-up times")

    log_inv = np.log(1.0 / np.array(eps_values))
    fit = linregress(log_inv[mask], T_values[mask])
    theory_slope = 1.0 / (params.re_M - params.half_n)
    lower_bound_constant = float(np.max(theory_slope * log_inv[mask] - T_values[mask]))
    line = fit.slope * log_inv[mask] + fit.intercept
    max_shortfall = float(max(0.0, np.max((line - T_values[mask]) / T_values[mask])))

    order = np.argsort(-np.array(eps_values)[mask])
    monotone = bool(np.all(np.diff(T_values[mask][order]) > 0.0))

    return LifespanResult(
        eps_values=eps_values,
        T_blowup=T_values.tolist(),
        censored=censored,
        slope_fit=float(fit.slope),
        intercept_fit=float(fit.intercept),
        theory_slope=theory_slope,
        lower_bound_constant=lower_bound_constant,
        max_shortfall=max_shortfall,
        monotone=monotone,
        solver=solver,
    )
