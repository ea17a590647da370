"""Experiment orchestration.

``run_experiment`` dispatches on the configured run kind, writes CSV tables,
an optional SVG plot and ``summary.json`` into the output directory, and
returns a ``RunOutcome`` whose exit code is 0 when every check passed.
Numerical and configuration failures propagate as ``AppException``
subclasses; the CLI maps them to exit codes.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from desitter_kg.src.core.evolution import DirectSolveConfig, solve_desitter_direct
from desitter_kg.src.core.exceptions.exceptions import (
    EXIT_CHECKS_FAILED,
    ConfigurationException,
    KernelDomainException,
    PicardNonConvergenceException,
)
from desitter_kg.src.core.field import (
    PeriodicGrid,
    SpectralField,
    Trajectory,
    constant,
    sobolev_norm,
    trajectory_frame,
)
from desitter_kg.src.core.kernels import (
    KernelArgs,
    ModelParams,
    describe_kernel,
    kernel_dE_dt_closed_form,
    kernel_E_closed_form,
    kernel_K0_closed_form,
)
from desitter_kg.src.core.semilinear import lifespan_sweep, ode_blowup_time, picard_solve
from desitter_kg.src.core.storage import LinePlot, config_hash, write_csv, write_json, write_svg
from desitter_kg.src.core.transform import LinearProblem, free_trajectory
from desitter_kg.src.core.verify import (
    check_appendix_lemma,
    check_decay_theorem,
    check_kernel_integral_bound,
    check_source_estimate,
    source_estimate_admissible,
)
from desitter_kg.src.schema import ExperimentConfig, RunKind
from desitter_kg.src.settings import settings
from desitter_kg.utils.pylogger import get_python_logger

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

CLOSED_FORM_RTOL = 1e-9


@dataclass
class RunOutcome:
    """Result of one experiment."""

    run: RunKind
    passed: bool
    summary: dict[str, Any]
    artifacts: list[Path] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 0 if self.passed else EXIT_CHECKS_FAILED


@dataclass
class _Context:
    cfg: ExperimentConfig
    out: Path
    cfg_hash: str
    tolerances: dict[str, float] = field(default_factory=dict)
    artifacts: list[Path] = field(default_factory=list)

    @property
    def params(self) -> ModelParams:
        return self.cfg.model

    @property
    def grid(self) -> PeriodicGrid:
        return self.cfg.grid.build()

    def initial_data(self, grid: PeriodicGrid, scale: float = 1.0) -> tuple[SpectralField, SpectralField]:
        data = self.cfg.data
        psi0 = data.psi0.build(grid, self.cfg.seed) * scale
        psi1 = data.psi1.build(grid, self.cfg.seed + 1) * scale
        return psi0, psi1

    def csv(self, name: str, frame: pd.DataFrame) -> None:
        self.artifacts.append(write_csv(frame, self.out / name, self.cfg_hash, self.tolerances))

    def svg(self, name: str, plot: LinePlot) -> None:
        self.artifacts.append(write_svg(plot, self.out / name))


def _relative_errors(a: list[SpectralField], b: list[SpectralField], s: float) -> np.ndarray:
    return np.array([sobolev_norm(x - y, s) / sobolev_norm(y, s) for x, y in zip(a, b, strict=True)])


# --- kernel_eval ---


def _closed_form(kind: str, args: KernelArgs, M: complex) -> complex | None:
    try:
        if kind == "E":
            return complex(kernel_E_closed_form(args.r, args.t, args.t0, M))
        if kind == "K1":
            return complex(kernel_E_closed_form(args.r, args.t, 0.0, M))
        if kind == "K0":
            return complex(kernel_K0_closed_form(args.r, args.t, M))
        return complex(kernel_dE_dt_closed_form(args.r, args.t, args.t0, M))
    except KernelDomainException:
        return None


def _run_kernel_eval(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    k = ctx.cfg.kernel
    M = ctx.params.M
    args = KernelArgs(r=k.r, t=k.t, t0=k.t0)
    ctx.tolerances["closed_form_rtol"] = CLOSED_FORM_RTOL
    report = describe_kernel(k.kind, args, M)
    row: dict[str, Any] = {
        "kind": k.kind,
        "r": k.r,
        "t": k.t,
        "t0": k.t0,
        "M_re": M.real,
        "M_im": M.imag,
        "re": report.value.real,
        "im": report.value.imag,
        "zeta": report.zeta,
        "branch": report.branch,
        "est_abs_error": report.est_abs_error,
    }
    closed = _closed_form(k.kind, args, M)
    passed = True
    if closed is not None:
        rel_err = abs(report.value - closed) / max(abs(closed), 1e-300)
        row.update(closed_re=closed.real, closed_im=closed.imag, rel_err=rel_err)
        passed = rel_err <= CLOSED_FORM_RTOL
    ctx.csv("kernel.csv", pd.DataFrame([row]))
    return passed, {"kernel": row}


# --- solve_linear / solve_direct ---


def _trajectory_plot(title: str, trajectories: dict[str, Trajectory]) -> LinePlot:
    plot = LinePlot(title=title, xlabel="t", ylabel="H_s norm", logy=True)
    for label, traj in trajectories.items():
        plot.add(label, traj.times, traj.hs_norms)
    return plot


def _run_solve_linear(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    solve = ctx.cfg.solve
    grid = ctx.grid
    operator = solve.build_operator(grid)
    psi0, psi1 = ctx.initial_data(grid)
    times = np.asarray(solve.times, dtype=float)
    ctx.tolerances.update(discrepancy_tol=solve.discrepancy_tol, rtol=solve.rtol, atol=solve.atol)
    results: dict[str, Any] = {"method": solve.method, "times": times.tolist()}
    trajectories: dict[str, Trajectory] = {}

    if solve.method in ("transform", "both"):
        problem = LinearProblem(params=ctx.params, psi0=psi0, psi1=psi1, quad=ctx.cfg.quad, operator=operator)
        trajectories["transform"] = free_trajectory(problem, times)
        ctx.csv("transform_trajectory.csv", trajectory_frame(trajectories["transform"]))
    if solve.method in ("direct", "both"):
        cfg = DirectSolveConfig(params=ctx.params, T=float(times[-1]), rtol=solve.rtol, atol=solve.atol)
        direct = solve_desitter_direct(psi0, psi1, cfg, operator=operator, output_times=times)
        trajectories["direct"] = Trajectory(
            params=ctx.params, times=direct.times[1:], fields=direct.fields[1:], status=direct.status
        )
        ctx.csv("direct_trajectory.csv", trajectory_frame(trajectories["direct"]))

    passed = True
    if solve.method == "both":
        rel = _relative_errors(trajectories["transform"].fields, trajectories["direct"].fields, ctx.params.s)
        ctx.csv("discrepancy.csv", pd.DataFrame({"t": times, "rel_err": rel}))
        results["max_rel_err"] = float(rel.max())
        passed = bool(rel.max() <= solve.discrepancy_tol)
        logger.info("linear cross-check", max_rel_err=results["max_rel_err"])
    ctx.svg("trajectory.svg", _trajectory_plot("Linear solution", trajectories))
    return passed, results


def _run_solve_direct(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    solve = ctx.cfg.solve
    grid = ctx.grid
    psi0, psi1 = ctx.initial_data(grid)
    cfg = DirectSolveConfig(
        params=ctx.params,
        T=solve.T,
        rtol=solve.rtol,
        atol=solve.atol,
        blowup_threshold=solve.blowup_threshold,
        nonlinearity=ctx.cfg.nonlinearity,
        n_output=solve.n_output,
    )
    ctx.tolerances.update(rtol=solve.rtol, atol=solve.atol, blowup_threshold=solve.blowup_threshold)
    traj = solve_desitter_direct(psi0, psi1, cfg, operator=solve.build_operator(grid))
    ctx.csv("trajectory.csv", trajectory_frame(traj))
    ctx.svg("trajectory.svg", _trajectory_plot("Direct solve", {"direct": traj}))
    results = {
        "status": traj.status,
        "blowup_time": traj.blowup_time,
        "t_end": traj.meta.get("t_end"),
        "n_steps": traj.meta.get("n_steps"),
    }
    return traj.status != "step_underflow", results


# --- solve_semilinear ---


def _run_solve_semilinear(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    picard, F = ctx.cfg.picard, ctx.cfg.nonlinearity
    if picard is None or F is None:
        raise ConfigurationException("solve_semilinear needs both the picard and nonlinearity sections")
    solve = ctx.cfg.solve
    grid = ctx.grid
    operator = solve.build_operator(grid)
    psi0, psi1 = ctx.initial_data(grid, scale=picard.eps)
    ctx.tolerances.update(picard_tol=picard.tol, rtol=solve.rtol, atol=solve.atol)
    problem = LinearProblem(params=ctx.params, psi0=psi0, psi1=psi1, quad=picard.quad, operator=operator)
    free = free_trajectory(problem, picard.time_grid())
    try:
        traj, report = picard_solve(free, F, picard, ctx.params, operator=operator)
    except PicardNonConvergenceException as e:
        if e.report is not None:
            write_json({"passed": False, "picard": e.report.model_dump(mode="json")}, ctx.out / "summary.json")
        raise
    ctx.csv("trajectory.csv", trajectory_frame(traj))
    ctx.csv(
        "picard.csv",
        pd.DataFrame(
            {
                "iteration": np.arange(1, len(report.distances) + 1),
                "distance": report.distances,
                "ratio": [np.nan, *report.ratios][: len(report.distances)],
            }
        ),
    )

    cfg = DirectSolveConfig(
        params=ctx.params, T=float(traj.times[-1]), rtol=solve.rtol, atol=solve.atol, nonlinearity=F
    )
    direct = solve_desitter_direct(psi0, psi1, cfg, operator=operator, output_times=traj.times)
    n_common = min(len(direct.fields), len(traj.fields)) - 1
    rel = _relative_errors(traj.fields[1 : n_common + 1], direct.fields[1 : n_common + 1], ctx.params.s)
    ctx.csv("discrepancy.csv", pd.DataFrame({"t": traj.times[1 : n_common + 1], "rel_err": rel}))
    ctx.svg(
        "trajectory.svg",
        _trajectory_plot("Semilinear solution", {"picard": traj, "direct": direct}),
    )
    passed = report.converged and report.within_ball and report.residual <= 2.0 * picard.tol
    return passed, {
        "picard": report.model_dump(mode="json"),
        "max_rel_err_direct": float(rel.max()) if rel.size else None,
    }


# --- lifespan_sweep ---


def _run_lifespan(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    F = ctx.cfg.nonlinearity
    if F is None:
        raise ConfigurationException("lifespan_sweep needs a nonlinearity section")
    lc = ctx.cfg.lifespan
    grid = ctx.grid
    ctx.tolerances.update(
        slope_tol=lc.slope_tol, shortfall_tol=lc.shortfall_tol, control_tol=lc.control_tol, threshold=lc.threshold
    )
    result = lifespan_sweep(
        F,
        ctx.params,
        lc.eps_grid,
        solver=lc.solver,
        grid=grid,
        profile=lc.profile,
        T_max=lc.T_max,
        threshold=lc.threshold,
        quad=ctx.cfg.quad,
        rtol=lc.rtol,
        atol=lc.atol,
        allow_hypothesis_violation=lc.allow_hypothesis_violation,
    )
    ctx.csv(
        "lifespan.csv",
        pd.DataFrame({"eps": result.eps_values, "T_blowup": result.T_blowup, "censored": result.censored}),
    )
    fit = {
        "slope": result.slope_fit,
        "intercept": result.intercept_fit,
        "theory_slope": result.theory_slope,
        "lower_bound_constant": result.lower_bound_constant,
        "max_shortfall": result.max_shortfall,
        "monotone": result.monotone,
    }
    ctx.artifacts.append(write_json(fit, ctx.out / "lifespan_fit.json"))

    log_inv = np.log(1.0 / np.asarray(result.eps_values))
    plot = LinePlot(title="Lifespan", xlabel="ln(1/eps)", ylabel="T_blowup")
    plot.add("measured", log_inv, result.T_blowup)
    plot.add("fit", log_inv, result.slope_fit * log_inv + result.intercept_fit, dashed=True)
    plot.add("lower bound", log_inv, result.theory_slope * log_inv - result.lower_bound_constant, dashed=True)
    ctx.svg("lifespan.svg", plot)

    slope_dev = abs(result.slope_fit - result.theory_slope) / abs(result.theory_slope)
    passed = slope_dev <= lc.slope_tol and result.max_shortfall <= lc.shortfall_tol
    results: dict[str, Any] = {"fit": fit, "slope_rel_dev": slope_dev}
    if lc.control:
        control = _control_case(ctx, F, lc.eps_grid[0])
        results["control"] = control
        passed = passed and control["passed"]
    return passed, results


def _control_case(ctx: _Context, F: Any, eps: float) -> dict[str, Any]:
    """Constant-in-space data against the scalar ODE oracle."""
    lc = ctx.cfg.lifespan
    grid = ctx.grid
    oracle = ode_blowup_time(ctx.params, F, eps, lc.threshold, lc.T_max)
    cfg = DirectSolveConfig(
        params=ctx.params,
        T=lc.T_max,
        rtol=lc.rtol,
        atol=lc.atol,
        blowup_threshold=lc.threshold,
        nonlinearity=F,
        n_output=2,
    )
    traj = solve_desitter_direct(constant(grid, eps), SpectralField.zeros(grid), cfg)
    measured = traj.blowup_time if traj.status == "blowup" else None
    if oracle is None or measured is None:
        return {"eps": eps, "oracle": oracle, "measured": measured, "rel_err": None, "passed": oracle is measured}
    rel_err = abs(measured - oracle) / oracle
    logger.info("lifespan control case", eps=eps, oracle=oracle, measured=measured, rel_err=rel_err)
    return {"eps": eps, "oracle": oracle, "measured": measured, "rel_err": rel_err, "passed": rel_err <= lc.control_tol}


# --- verify_* ---


def _decay_passed(case: str, rel_dev: float, bound_satisfied: bool, tolerance: float) -> bool:
    if case == "homogeneous_ii":
        return rel_dev <= tolerance
    return bound_satisfied


def _run_verify_decay(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    vc = ctx.cfg.verify
    base = ctx.params
    rows = []
    for spec in vc.decay:
        params = ModelParams.from_M(base.n, spec.M, s=base.s, alpha=base.alpha)
        fit = check_decay_theorem(params, spec.case, ctx.grid, ctx.cfg.quad, vc.window, vc.n_samples, spec.tolerance)
        rows.append(
            {
                "case": spec.case,
                "M": spec.M,
                "n": base.n,
                "gamma_fit": fit.gamma_fit,
                "theory_rate": fit.theory_rate,
                "rel_dev": fit.rel_dev,
                "r_squared": fit.r_squared,
                "bound_satisfied": fit.bound_satisfied,
                "tolerance": spec.tolerance,
                "passed": _decay_passed(spec.case, fit.rel_dev, fit.bound_satisfied, spec.tolerance),
            }
        )
    ctx.tolerances.update({f"decay_{row['case']}_M{row['M']:g}": row["tolerance"] for row in rows})
    ctx.csv("decay.csv", pd.DataFrame(rows))
    return all(row["passed"] for row in rows), {"decay": rows}


def _bound_summary(report: Any) -> dict[str, Any]:
    return report.model_dump(mode="json", exclude={"rows"})


def _bound_frame(reports: list[Any]) -> pd.DataFrame:
    frames = [pd.DataFrame(report.rows).assign(check=report.check) for report in reports]
    frame = pd.concat(frames, ignore_index=True)
    return frame[["check", *[c for c in frame.columns if c != "check"]]]


def _run_verify_bounds(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    ctx.tolerances.update(stability_tol=0.02, growth_tol=0.05)
    reports = [check_kernel_integral_bound(spec) for spec in ctx.cfg.verify.bounds]
    ctx.csv("bounds.csv", _bound_frame(reports))
    passed = all(report.finite and report.stable for report in reports)
    results: dict[str, Any] = {"bounds": [_bound_summary(report) for report in reports]}
    if ctx.cfg.verify.source_estimate:
        estimates = [check_source_estimate(ctx.params, ctx.grid, ctx.cfg.quad)]
        if source_estimate_admissible(ctx.params, derivative=True):
            estimates.append(check_source_estimate(ctx.params, ctx.grid, ctx.cfg.quad, derivative=True))
        frame = pd.concat(
            [pd.DataFrame(report.rows).assign(derivative=report.derivative) for report in estimates],
            ignore_index=True,
        )
        ctx.csv("source_estimate.csv", frame)
        results["source_estimate"] = [report.model_dump(mode="json", exclude={"rows"}) for report in estimates]
        passed = passed and all(report.stable for report in estimates)
    return passed, results


def _run_verify_appendix(ctx: _Context) -> tuple[bool, dict[str, Any]]:
    vc = ctx.cfg.verify
    ctx.tolerances.update(limit_tol=1e-3, order_tol=0.2, stability_tol=0.02)
    reports = [check_appendix_lemma(spec, vc.limit_z) for spec in vc.appendix]
    limit_rows = [
        {
            "a": item.a,
            "M_re": item.M.real,
            "M_im": item.M.imag,
            "kind": item.kind,
            "z": z,
            "deviation": dev,
            "passed": item.passed,
        }
        for report in reports
        for item in report.limits
        for z, dev in zip(item.z_values, item.deviations, strict=True)
    ]
    if limit_rows:
        ctx.csv("limits.csv", pd.DataFrame(limit_rows))
    bound_reports = [report.bound for report in reports if report.bound is not None]
    if bound_reports:
        ctx.csv("appendix_bounds.csv", _bound_frame(bound_reports))
    limits_passed = all(item.passed for report in reports for item in report.limits)
    bounds_passed = all(report.passed for report in reports if report.bound is not None)
    results = {
        "limits_passed": limits_passed,
        "bounds_passed": bounds_passed,
        "checks": [
            {
                "check": report.check,
                "passed": report.passed,
                "limits": [item.model_dump(mode="json") for item in report.limits],
                "bound": _bound_summary(report.bound) if report.bound is not None else None,
            }
            for report in reports
        ],
    }
    return limits_passed and bounds_passed, results


_RUNNERS: dict[RunKind, Callable[[_Context], tuple[bool, dict[str, Any]]]] = {
    RunKind.KERNEL_EVAL: _run_kernel_eval,
    RunKind.SOLVE_LINEAR: _run_solve_linear,
    RunKind.SOLVE_DIRECT: _run_solve_direct,
    RunKind.SOLVE_SEMILINEAR: _run_solve_semilinear,
    RunKind.LIFESPAN_SWEEP: _run_lifespan,
    RunKind.VERIFY_DECAY: _run_verify_decay,
    RunKind.VERIFY_BOUNDS: _run_verify_bounds,
    RunKind.VERIFY_APPENDIX: _run_verify_appendix,
}


def run_experiment(cfg: ExperimentConfig) -> RunOutcome:
    """Run the configured experiment and write its artifacts.

    Args:
        cfg: Validated experiment configuration.

    Returns:
        RunOutcome with the pass/fail flag, the summary written to
        ``summary.json`` and the paths of every artifact.
    """
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Context(cfg=cfg, out=out, cfg_hash=config_hash(cfg.provenance()))
    logger.info("Starting experiment", run=cfg.run.value, output_dir=str(out), seed=cfg.seed)
    passed, results = _RUNNERS[cfg.run](ctx)
    summary = {
        "run": cfg.run.value,
        "passed": bool(passed),
        "config_hash": ctx.cfg_hash,
        "seed": cfg.seed,
        "tolerances": ctx.tolerances,
        "results": results,
        "artifacts": [path.name for path in ctx.artifacts],
    }
    ctx.artifacts.append(write_json(summary, out / "summary.json"))
    logger.info("Experiment finished", run=cfg.run.value, passed=bool(passed), artifacts=len(ctx.artifacts))
    return RunOutcome(run=cfg.run, passed=bool(passed), summary=summary, artifacts=ctx.artifacts)
