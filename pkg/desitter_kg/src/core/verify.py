"""Numerical checks of decay rates, kernel-integral bounds and hypergeometric limits.

A bound "LHS <= C * RHS" is checked by the ratio LHS/RHS over a parameter
grid: the sup must be finite (``finite``), must not move by more than 2%
when the quadrature is doubled (``stable``) and must not keep growing along
the grid's leading variable (``bounded``, log-slope <= 0.05 over the upper
half of the grid).
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from functools import lru_cache
from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.special import roots_jacobi
from scipy.stats import linregress

from desitter_kg.src.core.exceptions.exceptions import (
    FitException,
    HypothesisException,
    QuadratureException,
)
from desitter_kg.src.core.field import (
    PeriodicGrid,
    SpectralField,
    Trajectory,
    gaussian_bump,
    sobolev_norm,
)
from desitter_kg.src.core.kernels import (
    ModelParams,
    as_complex,
    kernel_dE_dt,
    kernel_K0,
    kernel_K1,
)
from desitter_kg.src.core.specfun import gauss_sum, hyp2f1_array
from desitter_kg.src.core.transform import (
    LinearProblem,
    QuadratureSpec,
    apply_G,
    free_trajectory,
    linear_solution_dt,
    mapped_rule,
    phi_of_t,
)
from desitter_kg.src.settings import settings
from desitter_kg.utils.parallel import parallel_map
from desitter_kg.utils.pylogger import get_python_logger

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

STABILITY_TOL = 0.02
GROWTH_TOL = 0.05
MIN_FIT_SAMPLES = 8
LIMIT_TOL = 1e-3
ORDER_TOL = 0.2
ROUNDOFF = 1e-12

DecayCase = Literal["homogeneous_i", "homogeneous_ii", "derivative"]
BoundId = Literal[
    "k1_integral",
    "k0_integral",
    "k0_zone_split",
    "dt_kernel_integral",
    "hypergeometric_limits",
    "three_halves_power",
    "shifted_power",
    "five_halves_power",
    "kernel_weighted_power",
]
KERNEL_BOUNDS: tuple[str, ...] = ("k1_integral", "k0_integral", "k0_zone_split", "dt_kernel_integral")
APPENDIX_BOUNDS: tuple[str, ...] = (
    "hypergeometric_limits",
    "three_halves_power",
    "shifted_power",
    "five_halves_power",
    "kernel_weighted_power",
)


# --- Decay ---


class DecayFit(BaseModel):
    """Exponential decay rate fitted to a norm history."""

    gamma_fit: float = Field(description="Negated slope of ln ||psi|| against t.")
    r_squared: float = Field(description="Coefficient of determination.", ge=0.0, le=1.0)
    window: tuple[float, float] = Field(description="Fitting window (t_min, t_max).")
    theory_rate: float = Field(description="Rate predicted by the decay estimate.")
    rel_dev: float = Field(description="|gamma_fit - theory_rate| / |theory_rate|.")
    bound_satisfied: bool = Field(description="gamma_fit >= (1 - tolerance) * theory_rate.")
    n_samples: int = Field(description="Samples inside the window.")


def fit_decay_rate(
    traj: Trajectory,
    window: tuple[float, float] = (2.0, 8.0),
    theory_rate: float | None = None,
    tolerance: float = 0.1,
) -> DecayFit:
    """Least-squares fit of ln ||psi(t)||_{H_s} on the window.

    Args:
        traj: Trajectory with cached norms.
        window: Closed fitting window.
        theory_rate: Reference rate; the homogeneous decay rate of
            ``traj.params`` when omitted.
        tolerance: Relative slack of ``bound_satisfied``.

    Raises:
        FitException: Fewer than eight samples or a non-positive norm in the window.
    """
    lo, hi = window
    mask = (traj.times >= lo - 1e-12) & (traj.times <= hi + 1e-12)
    times, norms = traj.times[mask], traj.hs_norms[mask]
    if times.size < MIN_FIT_SAMPLES:
        raise FitException(f"decay fit needs at least {MIN_FIT_SAMPLES} samples in {window}, got {times.size}")
    if np.any(norms <= 0.0) or not np.all(np.isfinite(norms)):
        raise FitException("decay fit needs positive finite norms")
    fit = linregress(times, np.log(norms))
    gamma_fit = -float(fit.slope)
    rate = decay_theory_rate(traj.params) if theory_rate is None else theory_rate
    return DecayFit(
        gamma_fit=gamma_fit,
        r_squared=float(min(1.0, max(0.0, fit.rvalue**2))),
        window=(float(lo), float(hi)),
        theory_rate=rate,
        rel_dev=abs(gamma_fit - rate) / abs(rate),
        bound_satisfied=gamma_fit >= (1.0 - tolerance) * rate,
        n_samples=int(times.size),
    )


def decay_theory_rate(params: ModelParams) -> float:
    """(n-1)/2 for Re M < 1/2, n/2 - Re M otherwise."""
    if params.re_M < 0.5:
        return 0.5 * (params.n - 1)
    return params.half_n - params.re_M


def check_decay_theorem(
    params: ModelParams,
    case: DecayCase,
    grid: PeriodicGrid | None = None,
    quad: QuadratureSpec | None = None,
    window: tuple[float, float] = (2.0, 8.0),
    n_samples: int = 25,
    tolerance: float = 0.1,
    allow_hypothesis_violation: bool = False,
) -> DecayFit:
    """Run the homogeneous linear problem with smooth data and fit its decay.

    Case ``homogeneous_i`` needs 0 < Re M < 1/2, ``homogeneous_ii`` needs
    1/2 <= Re M < n/2; ``derivative`` fits ||psi_t|| for any 0 < Re M < n/2.
    """
    re_M = params.re_M
    admissible = {
        "homogeneous_i": 0.0 < re_M < 0.5,
        "homogeneous_ii": 0.5 <= re_M < params.half_n,
        "derivative": 0.0 < re_M < params.half_n,
    }[case]
    if not admissible and not allow_hypothesis_violation:
        raise HypothesisException(f"decay case {case} does not admit Re M={re_M} with n={params.n}")
    grid = grid or PeriodicGrid(d=1, npts=32)
    quad = quad or QuadratureSpec(nb=16, nr=16, ns=32)
    problem = LinearProblem(
        params=params,
        psi0=gaussian_bump(grid),
        psi1=gaussian_bump(grid, amplitude=0.5),
        quad=quad,
    )
    times = np.linspace(window[0], window[1], n_samples)
    if case == "derivative":
        derivatives = [linear_solution_dt(problem, float(t)) for t in times]
        traj = Trajectory(params=params, times=times, fields=derivatives)
    else:
        traj = free_trajectory(problem, times)
    fit = fit_decay_rate(traj, window, decay_theory_rate(params), tolerance)
    logger.info("decay check", case=case, M=str(params.M), gamma_fit=fit.gamma_fit, theory_rate=fit.theory_rate)
    return fit


# --- Bound checks ---


class BoundCheckSpec(BaseModel):
    """Parameter grid of one bound or limit check."""

    model_config = ConfigDict(frozen=True)

    check: BoundId = Field(description="Which estimate to check.", examples=["k1_integral"])
    a: float = Field(default=0.0, description="Weight exponent r^a.", gt=-1.0, examples=[0.0])
    M_grid: list[complex] = Field(default_factory=lambda: [0.3 + 0j, 1.2 + 0j], description="Curved-mass roots.")
    t_grid: list[float] = Field(default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 6.0, 8.0], description="Times.")
    b_grid: list[float] = Field(default_factory=lambda: [0.25, 1.0], description="Source times b.")
    delta_grid: list[float] = Field(
        default_factory=lambda: [0.5, 1.0, 2.0, 4.0, 6.0, 8.0], description="Offsets t - b."
    )
    z_grid: list[float] = Field(
        default_factory=lambda: [2.0, 5.0, 10.0, 30.0, 100.0, 300.0, 1000.0], description="Arguments z > 1."
    )
    n_nodes: int = Field(default=64, description="Gauss-Jacobi nodes before refinement.", ge=8)
    zone_eps: float = Field(default=0.5, description="Zone threshold on the hypergeometric argument.", gt=0.0, lt=1.0)
    allow_hypothesis_violation: bool = Field(default=False, description="Run outside the hypotheses.")

    @field_validator("M_grid", mode="before")
    @classmethod
    def _parse_masses(cls, value: Any) -> list[complex]:
        return [as_complex(v) for v in value]

    @field_validator("z_grid")
    @classmethod
    def _check_z(cls, value: list[float]) -> list[float]:
        if any(z <= 1.0 for z in value):
            raise ValueError("z_grid entries must exceed 1")
        return value


class BoundReport(BaseModel):
    """Ratio statistics of a bound check."""

    check: str = Field(description="Check identifier.")
    max_ratio: float = Field(description="Largest LHS/RHS over the grid.")
    argmax: dict[str, float] = Field(description="Grid point of the largest ratio.")
    max_ratio_refined: float = Field(description="Largest ratio with doubled nodes.")
    rel_change: float = Field(description="Relative change of the sup under refinement.")
    finite: bool = Field(description="Every ratio finite.")
    stable: bool = Field(description="rel_change <= 2%.")
    growth_rate: float = Field(description="Largest log-slope of the ratio along the leading variable.")
    bounded: bool = Field(description="growth_rate <= 0.05.")
    rows: list[dict[str, float]] = Field(description="Per-point table.")


class LimitCheck(BaseModel):
    """Approach of a scaled hypergeometric value to its z -> infinity limit."""

    kind: Literal["regular", "log", "power"] = Field(description="Which limit applies.")
    a: float = Field(description="Weight exponent.")
    M: complex = Field(description="Curved-mass root.")
    limit: complex = Field(description="Stated limit.")
    z_values: list[float] = Field(description="Evaluation points.")
    deviations: list[float] = Field(description="Relative deviation at each z.")
    decreasing: bool = Field(description="Deviations strictly decreasing or at round-off.")
    observed_order: float | None = Field(description="-d ln(deviation)/d ln z between the last two points.")
    expected_order: float | None = Field(description="1/2 - Re M for the power limit.")
    passed: bool = Field(description="Check outcome.")


class AppendixReport(BaseModel):
    """Result of an appendix check: limit table or bound report."""

    check: str = Field(description="Check identifier.")
    limits: list[LimitCheck] = Field(default_factory=list, description="Limit checks.")
    bound: BoundReport | None = Field(default=None, description="Bound report for power-integral checks.")
    passed: bool = Field(description="All limits passed or the bound is finite and stable.")


@lru_cache(maxsize=64)
def _jacobi(n: int, a: float) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = roots_jacobi(n, 0.0, a)
    return nodes, weights


def weighted_integral(g: Callable[[np.ndarray], np.ndarray], length: float, a: float, n: int) -> complex:
    """int_0^length r^a g(r) dr by an n-point Gauss-Jacobi rule."""
    x, w = _jacobi(n, a)
    r = 0.5 * length * (1.0 + x)
    return complex((0.5 * length) ** (a + 1.0) * np.sum(w * g(r)))


def _require(condition: bool, spec: BoundCheckSpec, message: str) -> None:
    if not condition and not spec.allow_hypothesis_violation:
        raise HypothesisException(message)


def _hyp(a: complex, b: complex, c: complex, z: np.ndarray) -> np.ndarray:
    return hyp2f1_array(a, b, c, np.clip(z, 0.0, np.nextafter(1.0, 0.0))).values


# Each pointwise check returns (lhs, rhs) for one grid point and node count.
PointCheck = Callable[[dict[str, Any], int], tuple[float, float]]


def _k1_point(spec: BoundCheckSpec) -> PointCheck:
    def run(point: dict[str, Any], n: int) -> tuple[float, float]:
        t, M = point["t"], point["M"]
        phi = phi_of_t(t)
        lhs = weighted_integral(lambda r: np.abs(kernel_K1(r, t, M)), phi, spec.a, n).real
        rhs = np.exp(-spec.a * t) * np.expm1(t) ** (spec.a + 1.0) * (np.exp(t) + 1.0) ** (M.real - 1.0)
        return lhs, rhs

    return run


def _k0_point(spec: BoundCheckSpec) -> PointCheck:
    def run(point: dict[str, Any], n: int) -> tuple[float, float]:
        t, M = point["t"], point["M"]
        phi = phi_of_t(t)
        lhs = weighted_integral(lambda r: np.abs(kernel_K0(r, t, M)), phi, spec.a, n).real
        base = np.expm1(t) ** (spec.a + 1.0)
        if M.real < 0.5:
            rhs = base * np.exp(-spec.a * t) * (np.exp(t) + 1.0) ** -0.5
        else:
            rhs = base * np.exp((M.real - spec.a) * t) / (np.exp(t) + 1.0)
        return lhs, rhs

    return run


def _k0_zone_integrand(z: float, M: complex) -> Callable[[np.ndarray], np.ndarray]:
    def g(y: np.ndarray) -> np.ndarray:
        outer = (z + 1.0) ** 2 - y**2
        inner = (z - 1.0 - y) * (z - 1.0 + y)
        zeta = inner / outer
        bracket = (z - z * z + M * (1.0 - z * z - y**2)) * _hyp(0.5 - M, 0.5 - M, 1.0, zeta) + (
            z * z - 1.0 + y**2
        ) * (0.5 + M) * _hyp(-0.5 - M, 0.5 - M, 1.0, zeta)
        return outer ** (M.real - 0.5) * np.abs(bracket) / inner

    return g


def _k0_zone_point(spec: BoundCheckSpec) -> PointCheck:
    def run(point: dict[str, Any], n: int) -> tuple[float, float]:
        z, M = point["z"], point["M"]
        g = _k0_zone_integrand(z, M)
        eps = spec.zone_eps
        # zeta(y) decreases in y; zeta > eps below y_split (near zone), zeta <= eps above
        split_sq = ((z - 1.0) ** 2 - eps * (z + 1.0) ** 2) / (1.0 - eps)
        if split_sq <= 0.0:
            lhs = weighted_integral(g, z - 1.0, spec.a, n).real
        else:
            y_split = float(np.sqrt(split_sq))
            near = weighted_integral(g, y_split, spec.a, n).real
            y, w = mapped_rule(n, y_split, z - 1.0)
            far = float(np.sum(w * y**spec.a * g(y)))
            lhs = near + far
            point["far_zone_share"] = far / lhs if lhs > 0 else 0.0
        power = M.real - 0.5 if M.real < 0.5 else 2.0 * M.real - 1.0
        rhs = (z - 1.0) ** (1.0 + spec.a) * (z + 1.0) ** power
        return lhs, rhs

    return run


def _dt_point(spec: BoundCheckSpec) -> PointCheck:
    def run(point: dict[str, Any], n: int) -> tuple[float, float]:
        t, b, M = point["t"], point["b"], point["M"]
        reach = np.exp(-b) - np.exp(-t)
        lhs = weighted_integral(lambda r: np.abs(kernel_dE_dt(r, t, b, M)), reach, 0.0, n).real
        if M.real < 0.5:
            rhs = np.exp(-0.5 * t - b) + np.exp((M.real - 0.5) * t - 3.0 * b)
        else:
            rhs = np.exp(M.real * (t - b))
        return lhs, rhs

    return run


def _power_integral(t: float, b: float, exponent: complex, a: float, n: int) -> complex:
    reach = np.exp(-b) - np.exp(-t)
    top = (np.exp(-t) + np.exp(-b)) ** 2

    def g(r: np.ndarray) -> np.ndarray:
        return np.exp(exponent * np.log(top - r**2))

    return weighted_integral(g, reach, a, n)


def _log_factor(delta: float, re_M: float, anchor: float) -> float:
    # (t-b)^{1 - sgn|Re M - anchor|}: a linear factor only on the borderline
    return 1.0 + (delta if abs(re_M - anchor) < 1e-14 else 1.0)


def _three_halves_point(spec: BoundCheckSpec) -> PointCheck:
    def run(point: dict[str, Any], n: int) -> tuple[float, float]:
        t, b = point["t"], point["b"]
        lhs = np.exp(-2.0 * b) * _power_integral(t, b, -1.5, spec.a, n).real
        rhs = np.exp(-0.5 * t - (spec.a + 1.0) * b)
        return lhs, rhs

    return run


def _shifted_point(spec: BoundCheckSpec, shift: float, anchor: float, offset: float) -> PointCheck:
    def run(point: dict[str, Any], n: int) -> tuple[float, float]:
        t, b, M = point["t"], point["b"], point["M"]
        a = spec.a
        lhs = abs(_power_integral(t, b, shift + M, a, n))
        rhs = (
            _log_factor(t - b, M.real, anchor)
            * (np.exp(t) - np.exp(b)) ** (a + 1.0)
            * (np.exp(b) + np.exp(t)) ** (2.0 * M.real + 2.0 * shift)
            * np.exp(-(a + 2.0 * M.real - offset) * (b + t))
        )
        return lhs, rhs

    return run


def _kernel_weighted_point(spec: BoundCheckSpec) -> PointCheck:
    def run(point: dict[str, Any], n: int) -> tuple[float, float]:
        z, M = point["z"], point["M"]

        def g(y: np.ndarray) -> np.ndarray:
            outer = (z + 1.0) ** 2 - y**2
            zeta = (z - 1.0 - y) * (z - 1.0 + y) / outer
            return outer ** (M.real - 0.5) * np.abs(_hyp(0.5 - M, 0.5 - M, 1.0, zeta))

        lhs = weighted_integral(g, z - 1.0, spec.a, n).real
        if M.real < 0.5:
            rhs = (z - 1.0) ** (1.0 + spec.a) * z ** (M.real - 0.5)
        else:
            rhs = (z - 1.0) ** (1.0 + spec.a) * (z + 1.0) ** (2.0 * M.real - 1.0)
        return lhs, rhs

    return run


def _grid_points(spec: BoundCheckSpec, layout: Literal["t", "tb", "z"], masses: Sequence[complex]) -> list[dict[str, Any]]:
    points: list[dict[str, Any]] = []
    for M in masses:
        if layout == "t":
            points += [{"M": M, "t": t, "lead": t, "group": 0.0} for t in spec.t_grid]
        elif layout == "tb":
            points += [
                {"M": M, "t": b + d, "b": b, "lead": d, "group": b}
                for b in spec.b_grid
                for d in spec.delta_grid
            ]
        else:
            points += [{"M": M, "z": z, "lead": float(np.log(z)), "group": 0.0} for z in spec.z_grid]
    return points


def _growth_rate(rows: list[dict[str, float]]) -> float:
    groups: dict[tuple[float, float, float], list[tuple[float, float]]] = {}
    for row in rows:
        key = (row["M_re"], row["M_im"], row["group"])
        groups.setdefault(key, []).append((row["lead"], row["ratio"]))
    worst = -np.inf
    for series in groups.values():
        series.sort()
        upper = series[len(series) // 2 :] if len(series) > 3 else series
        if len(upper) < 2:
            continue
        lead = np.array([p[0] for p in upper])
        ratio = np.array([p[1] for p in upper])
        if np.any(ratio <= 0.0) or not np.all(np.isfinite(ratio)):
            return float("inf")
        worst = max(worst, float(np.polyfit(lead, np.log(ratio), 1)[0]))
    return 0.0 if worst == -np.inf else worst


def _run_bound(spec: BoundCheckSpec, point_check: PointCheck, layout: Literal["t", "tb", "z"], masses: Sequence[complex]) -> BoundReport:
    points = _grid_points(spec, layout, masses)

    def evaluate(point: dict[str, Any]) -> dict[str, float]:
        point = dict(point)
        ratios = []
        for n in (spec.n_nodes, 2 * spec.n_nodes):
            with np.errstate(all="ignore"):
                lhs, rhs = point_check(point, n)
            ratio = float(lhs / rhs) if rhs != 0.0 else float("inf")
            if not np.isfinite(ratio) and not spec.allow_hypothesis_violation:
                location = {k: (str(v) if k == "M" else v) for k, v in point.items()}
                raise QuadratureException(f"{spec.check}: non-finite ratio", location)
            ratios.append(ratio)
        M = point.pop("M")
        row = {k: float(v) for k, v in point.items()}
        row.update(M_re=float(M.real), M_im=float(M.imag), ratio=ratios[0], ratio_refined=ratios[1])
        return row

    rows = parallel_map(evaluate, points)
    ratios = np.array([row["ratio"] for row in rows])
    refined = np.array([row["ratio_refined"] for row in rows])
    finite = bool(np.all(np.isfinite(ratios)) and np.all(np.isfinite(refined)))
    if finite:
        best = int(np.argmax(ratios))
        max_ratio, max_refined = float(ratios[best]), float(np.max(refined))
        rel_change = abs(max_refined - max_ratio) / max_ratio if max_ratio > 0 else 0.0
    else:
        best = int(np.argmax(np.where(np.isfinite(ratios), ratios, np.inf)))
        max_ratio = max_refined = rel_change = float("inf")
    argmax = {k: v for k, v in rows[best].items() if k not in ("ratio", "ratio_refined", "lead", "group")}
    growth = _growth_rate(rows) if finite else float("inf")
    report = BoundReport(
        check=spec.check,
        max_ratio=max_ratio,
        argmax=argmax,
        max_ratio_refined=max_refined,
        rel_change=rel_change,
        finite=finite,
        stable=finite and rel_change <= STABILITY_TOL,
        growth_rate=growth,
        bounded=finite and growth <= GROWTH_TOL,
        rows=rows,
    )
    logger.info(
        "bound check",
        check=spec.check,
        max_ratio=report.max_ratio,
        rel_change=report.rel_change,
        growth_rate=report.growth_rate,
    )
    return report


def check_kernel_integral_bound(spec: BoundCheckSpec) -> BoundReport:
    """Ratio of a kernel integral to its stated bound over the configured grid.

    ``k1_integral`` and ``k0_integral`` run over t, ``k0_zone_split`` over z
    with the integral split at zeta = zone_eps, ``dt_kernel_integral`` over
    (t, b) = (b + delta, b).

    Raises:
        HypothesisException: For masses outside the estimate's hypotheses.
        QuadratureException: For a non-finite ratio, with the grid point.
    """
    masses = spec.M_grid
    for M in masses:
        _require(M.real > 0.0, spec, f"{spec.check} needs Re M > 0, got {M}")
    if spec.check == "k1_integral":
        return _run_bound(spec, _k1_point(spec), "t", masses)
    if spec.check == "k0_integral":
        for M in masses:
            _require(abs(M.real - 0.5) > 1e-14, spec, f"{spec.check} excludes Re M = 1/2")
        return _run_bound(spec, _k0_point(spec), "t", masses)
    if spec.check == "k0_zone_split":
        for M in masses:
            _require(abs(M.real - 0.5) > 1e-14, spec, f"{spec.check} excludes Re M = 1/2")
        return _run_bound(spec, _k0_zone_point(spec), "z", masses)
    if spec.check == "dt_kernel_integral":
        for M in masses:
            _require(M.real < 0.5 or M.real > 1.5, spec, f"{spec.check} covers Re M < 1/2 or Re M > 3/2, got {M}")
        return _run_bound(spec, _dt_point(spec), "tb", masses)
    raise HypothesisException(f"{spec.check} is not a kernel-integral check")


def _limit_check(a: float, M: complex, z_values: Sequence[float]) -> LimitCheck:
    z = np.asarray(z_values, dtype=float)
    zeta = ((z - 1.0) / (z + 1.0)) ** 2
    values = hyp2f1_array(0.5 * (a + 1.0), 1.5 - M, 0.5 * (a + 3.0), zeta).values
    expected_order = None
    if M.real > 0.5 or (M.real == 0.5 and M.imag != 0.0):
        kind = "regular"
        limit = gauss_sum(0.5 * (a + 1.0), 1.5 - M, 0.5 * (a + 3.0))
        scaled = values
    elif M == 0.5:
        kind = "log"
        limit = complex(0.5 * (1.0 + a))
        scaled = values / np.log(z)
    else:
        kind = "power"
        limit = 2.0 ** (2.0 * M - 1.0) * (1.0 + a) / (1.0 - 2.0 * M)
        scaled = z ** (M - 0.5) * values
        expected_order = 0.5 - M.real
    deviations = np.abs(scaled - limit) / abs(limit)
    decreasing = bool(np.all((np.diff(deviations) < 0.0) | (deviations[1:] <= ROUNDOFF)))
    observed = None
    if deviations[-1] > ROUNDOFF and deviations[-2] > ROUNDOFF:
        observed = float(-np.log(deviations[-1] / deviations[-2]) / np.log(z[-1] / z[-2]))
    close = bool(deviations[-1] <= LIMIT_TOL)
    if kind == "power" and not close and observed is not None:
        close = abs(observed - expected_order) <= ORDER_TOL * expected_order
    return LimitCheck(
        kind=kind,
        a=a,
        M=M,
        limit=complex(limit),
        z_values=[float(v) for v in z],
        deviations=[float(d) for d in deviations],
        decreasing=decreasing,
        observed_order=observed,
        expected_order=expected_order,
        passed=decreasing and close,
    )


def check_appendix_lemma(spec: BoundCheckSpec, z_values: Sequence[float] = (1e2, 1e3, 1e4)) -> AppendixReport:
    """Limit or bound check of an appendix estimate.

    ``hypergeometric_limits`` evaluates F((a+1)/2, 3/2-M; (a+3)/2; ((z-1)/(z+1))^2)
    for every M of the grid at z in ``z_values``; the other identifiers are
    bound checks over (t, b) or z grids.
    """
    masses = spec.M_grid
    if spec.check == "hypergeometric_limits":
        limits = [_limit_check(spec.a, M, z_values) for M in masses]
        for item in limits:
            logger.info("limit check", M=str(item.M), kind=item.kind, deviations=item.deviations, passed=item.passed)
        return AppendixReport(check=spec.check, limits=limits, passed=all(item.passed for item in limits))
    if spec.check == "three_halves_power":
        report = _run_bound(spec, _three_halves_point(spec), "tb", [0j])
    elif spec.check == "shifted_power":
        for M in masses:
            _require(M.real >= 0.5 and M != 0.5, spec, f"{spec.check} needs Re M >= 1/2 and M != 1/2, got {M}")
        report = _run_bound(spec, _shifted_point(spec, -1.5, 0.5, 2.0), "tb", masses)
    elif spec.check == "five_halves_power":
        for M in masses:
            _require(M.real >= 1.5 and M != 1.5, spec, f"{spec.check} needs Re M >= 3/2 and M != 3/2, got {M}")
        report = _run_bound(spec, _shifted_point(spec, -2.5, 1.5, 4.0), "tb", masses)
    elif spec.check == "kernel_weighted_power":
        for M in masses:
            _require(M.real > 0.0 and abs(M.real - 0.5) > 1e-14, spec, f"{spec.check} needs Re M > 0, Re M != 1/2, got {M}")
        report = _run_bound(spec, _kernel_weighted_point(spec), "z", masses)
    else:
        raise HypothesisException(f"{spec.check} is not an appendix check")
    return AppendixReport(check=spec.check, bound=report, passed=report.finite and report.stable)


# --- Source-term estimate ---


class SourceEstimateReport(BaseModel):
    """Ratio of ||G[f](t)|| (or ||d/dt G[f](t)||) to the integrated source bound."""

    derivative: bool = Field(description="Whether the time derivative was estimated.")
    max_ratio: float = Field(description="Largest ratio over the time grid.")
    max_ratio_refined: float = Field(description="Largest ratio with doubled quadrature.")
    rel_change: float = Field(description="Relative change of the sup under refinement.")
    stable: bool = Field(description="rel_change <= 2%.")
    rows: list[dict[str, float]] = Field(description="(t, lhs, rhs, ratio) table.")


def _is_mass(M: complex, value: float) -> bool:
    return abs(complex(M) - value) <= 1e-14


def source_estimate_admissible(params: ModelParams, derivative: bool = False) -> bool:
    """Whether the inhomogeneous estimate is stated for this root.

    The solution estimate needs 0 < Re M < 1/2, Re M > 1/2 or M = 1/2; the
    derivative estimate needs 0 < Re M < 1/2, Re M > 3/2 or M = 3/2.
    """
    re_M = params.re_M
    if re_M <= 0.0:
        return False
    if derivative:
        return re_M < 0.5 - 1e-14 or re_M > 1.5 + 1e-14 or _is_mass(params.M, 1.5)
    return abs(re_M - 0.5) > 1e-14 or _is_mass(params.M, 0.5)


def _integrated_bound(t: float, decay: float, growth: float, norm_at: Callable[[np.ndarray], np.ndarray]) -> float:
    """e^{-decay t} int_0^t e^{growth b} ||f(b)|| db."""
    b, w = mapped_rule(64, 0.0, t)
    return float(np.exp(-decay * t) * np.sum(w * np.exp(growth * b) * norm_at(b)))


def check_source_estimate(
    params: ModelParams,
    grid: PeriodicGrid | None = None,
    quad: QuadratureSpec | None = None,
    t_grid: Sequence[float] = (0.5, 1.0, 2.0, 4.0),
    source_decay: float = 0.5,
    derivative: bool = False,
) -> SourceEstimateReport:
    """Compare ||G[f](t)||_{H_s}, or its time derivative, with the inhomogeneous bound.

    The source is f(x, b) = e^{-source_decay b} g(x) with g a Gaussian bump.
    With mu = n/2 - Re M the solution bound is

        e^{-(n-1)t/2} int e^{(n-1)b/2} ||f(b)|| db     for 0 < Re M < 1/2,
        e^{-mu t} int e^{mu b} ||f(b)|| db            for Re M > 1/2 or M = 1/2.

    The derivative bound is e^{-(n-1)t/2} int e^{(n+1)b/2} ||f(b)|| db for
    0 < Re M < 1/2; for Re M > 3/2 or M = 3/2 the mu term is added to it.

    Raises:
        HypothesisException: For a root the estimate does not cover.
    """
    if not source_estimate_admissible(params, derivative):
        allowed = "0 < Re M < 1/2, Re M > 3/2 or M = 3/2" if derivative else "0 < Re M < 1/2, Re M > 1/2 or M = 1/2"
        raise HypothesisException(f"source estimate needs {allowed}, got M={params.M}")
    grid = grid or PeriodicGrid(d=1, npts=32)
    quad = quad or QuadratureSpec(nb=16, nr=16, ns=16)
    profile = gaussian_bump(grid)
    g_norm = sobolev_norm(profile, params.s)
    low = params.re_M < 0.5
    half_n_minus_half = 0.5 * (params.n - 1)
    mu = params.half_n - params.re_M

    def source(b: float) -> SpectralField:
        return profile * np.exp(-source_decay * b)

    def norm_at(b: np.ndarray) -> np.ndarray:
        return g_norm * np.exp(-source_decay * b)

    def bound(t: float) -> float:
        if not derivative:
            rate = half_n_minus_half if low else mu
            return _integrated_bound(t, rate, rate, norm_at)
        value = _integrated_bound(t, half_n_minus_half, 0.5 * (params.n + 1), norm_at)
        if not low:
            value += _integrated_bound(t, mu, mu, norm_at)
        return value

    def lhs(t: float, rule: QuadratureSpec) -> float:
        if not derivative:
            return sobolev_norm(apply_G(source, t, params, rule, grid), params.s)
        zero = SpectralField.zeros(grid)
        problem = LinearProblem(params=params, psi0=zero, psi1=zero, source=source, quad=rule)
        return sobolev_norm(linear_solution_dt(problem, t), params.s)

    rows = []
    for t in t_grid:
        rhs = bound(t)
        value, refined = lhs(t, quad), lhs(t, quad.refined())
        rows.append({"t": float(t), "lhs": value, "rhs": rhs, "ratio": value / rhs, "ratio_refined": refined / rhs})
    max_ratio = max(row["ratio"] for row in rows)
    max_refined = max(row["ratio_refined"] for row in rows)
    rel_change = abs(max_refined - max_ratio) / max_ratio
    logger.info("source estimate", M=str(params.M), derivative=derivative, max_ratio=max_ratio, rel_change=rel_change)
    return SourceEstimateReport(
        derivative=derivative,
        max_ratio=max_ratio,
        max_ratio_refined=max_refined,
        rel_change=rel_change,
        stable=rel_change <= STABILITY_TOL,
        rows=rows,
    )
