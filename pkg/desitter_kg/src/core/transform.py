"""Integral-transform representation of de Sitter Klein-Gordon solutions.

The operator K maps a family v(x, r; b) of wave solutions to

    K[v](x, t) = 2 e^{-nt/2} int_0^t db int_0^{e^{-b}-e^{-t}} dr e^{nb/2} v(x, r; b) E(r, t; 0, b; M),

and G = K o EE feeds it the wave solutions with datum f(., b). The linear
solution with data (psi0, psi1) and source f is

    psi(t) = G[f](t) + e^{-(n-1)t/2} v_{psi0}(phi)
             + e^{-nt/2} int_0^1 v_{psi0}(phi s) (2 K0 + n K1)(phi s, t) phi ds
             + 2 e^{-nt/2} int_0^1 v_{psi1}(phi s) K1(phi s, t) phi ds,

with phi = 1 - e^{-t}. All integrals use Gauss-Legendre rules, so K0 is never
evaluated at its singular endpoint.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field

from desitter_kg.src.core.evolution import (
    Laplacian,
    Operator,
    Source,
    WaveProblem,
    solve_wave_many,
)
from desitter_kg.src.core.exceptions.exceptions import (
    ConfigurationException,
    HypothesisException,
)
from desitter_kg.src.core.field import PeriodicGrid, SpectralField, Trajectory
from desitter_kg.src.core.kernels import (
    ModelParams,
    kernel_dE_dt,
    kernel_E,
    kernel_K0,
    kernel_K1,
)
from desitter_kg.src.settings import settings
from desitter_kg.utils.parallel import parallel_map
from desitter_kg.utils.pylogger import get_python_logger

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

FD_STEP = 1e-4

# r-stack of wave solutions at offsets r for source time b
WaveFamily = Callable[[np.ndarray, float], np.ndarray]


class QuadratureSpec(BaseModel):
    """Gauss-Legendre node counts for the (b, r) and s integrals."""

    model_config = ConfigDict(frozen=True)

    nb: int = Field(default=64, description="Outer nodes in b over [0, t].", ge=16, examples=[64])
    nr: int = Field(
        default=64, description="Inner nodes in r over [0, e^{-b}-e^{-t}].", ge=16, examples=[64]
    )
    ns: int = Field(default=64, description="Nodes in s over [0, 1] for the data terms.", ge=16, examples=[64])

    def refined(self, factor: int = 2) -> "QuadratureSpec":
        """Every node count multiplied by ``factor``."""
        return QuadratureSpec(nb=self.nb * factor, nr=self.nr * factor, ns=self.ns * factor)


@dataclass
class LinearProblem:
    """Cauchy problem psi(0) = psi0, psi_t(0) = psi1 with optional source."""

    params: ModelParams
    psi0: SpectralField
    psi1: SpectralField
    source: Source | None = None
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    operator: Operator = field(default_factory=Laplacian)

    def __post_init__(self) -> None:
        if self.psi0.grid != self.psi1.grid:
            raise ConfigurationException("psi0 and psi1 live on different grids")

    @property
    def grid(self) -> PeriodicGrid:
        return self.psi0.grid


def phi_of_t(t: float | np.ndarray) -> float | np.ndarray:
    """phi(t) = 1 - e^{-t}."""
    value = -np.expm1(-np.asarray(t, dtype=float))
    return float(value) if np.ndim(value) == 0 else value


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    nodes, weights = leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def mapped_rule(n: int, lo: float, hi: float) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule affinely mapped to [lo, hi]."""
    nodes, weights = gauss_legendre(n)
    half = 0.5 * (hi - lo)
    return lo + half * (nodes + 1.0), half * weights


@dataclass(frozen=True)
class _SourceNodes:
    b: np.ndarray
    wb: np.ndarray
    r: np.ndarray
    wr: np.ndarray
    kernel: np.ndarray


@lru_cache(maxsize=256)
def _source_nodes(t: float, M: complex, nb: int, nr: int, derivative: bool = False) -> _SourceNodes:
    """Tensor (b, r) nodes with E (or dE/dt) evaluated in one vectorized call."""
    b, wb = mapped_rule(nb, 0.0, t)
    reach = np.exp(-b) - np.exp(-t)
    xi, wxi = gauss_legendre(nr)
    r = 0.5 * reach[:, None] * (xi[None, :] + 1.0)
    wr = 0.5 * reach[:, None] * wxi[None, :]
    evaluate = kernel_dE_dt if derivative else kernel_E
    kernel = np.asarray(evaluate(r, t, b[:, None], M))
    for array in (b, wb, r, wr, kernel):
        array.setflags(write=False)
    return _SourceNodes(b=b, wb=wb, r=r, wr=wr, kernel=kernel)


def _contract(v: WaveFamily, t: float, n: int, nodes: _SourceNodes, grid: PeriodicGrid) -> SpectralField:
    weights = nodes.wr * nodes.kernel

    def row(i: int) -> np.ndarray:
        b = float(nodes.b[i])
        stack = v(nodes.r[i], b)
        return np.exp(0.5 * n * b) * nodes.wb[i] * np.tensordot(weights[i], stack, axes=(0, 0))

    total = np.zeros(grid.shape, dtype=complex)
    for part in parallel_map(row, range(len(nodes.b))):
        total += part
    return SpectralField(grid, coeffs=2.0 * np.exp(-0.5 * n * t) * total)


def apply_K(
    v: WaveFamily,
    t: float,
    M: complex,
    n: int,
    quad: QuadratureSpec,
    grid: PeriodicGrid,
) -> SpectralField:
    """Tensor Gauss-Legendre approximation of K[v](., t).

    Args:
        v: ``v(r_nodes, b)`` returning coefficient stacks (len(r_nodes), *grid.shape).
        t: Time, positive.
        M: Curved-mass root.
        n: Damping coefficient.
        quad: Node counts.
        grid: Grid of the result.

    Raises:
        HypothesisException: If t <= 0.
        KernelDomainException: Propagated from the kernel.
    """
    if t <= 0.0:
        raise HypothesisException(f"operator K needs t > 0, got {t}")
    nodes = _source_nodes(float(t), complex(M), quad.nb, quad.nr)
    return _contract(v, float(t), n, nodes, grid)


def wave_family(source: Source, operator: Operator | None = None) -> WaveFamily:
    """Wave solutions with datum ``source(b)`` as a function of (r, b)."""
    operator = operator or Laplacian()

    def v(r: np.ndarray, b: float) -> np.ndarray:
        return solve_wave_many(WaveProblem(initial=source(b), operator=operator), r)

    return v


def apply_G(
    f: Source,
    t: float,
    params: ModelParams,
    quad: QuadratureSpec,
    grid: PeriodicGrid | None = None,
    operator: Operator | None = None,
) -> SpectralField:
    """Source-to-solution map G[f](., t) = K[EE f](., t)."""
    grid = grid or f(0.0).grid
    return apply_K(wave_family(f, operator), t, params.M, params.n, quad, grid)


def _data_terms(p: LinearProblem, t: float) -> SpectralField:
    n, M = p.params.n, p.params.M
    phi = phi_of_t(t)
    s, ws = mapped_rule(p.quad.ns, 0.0, 1.0)
    z = phi * s
    k1 = np.asarray(kernel_K1(z, t, M))
    k0 = np.asarray(kernel_K0(z, t, M))
    decay = np.exp(-0.5 * n * t)

    offsets = np.append(z, phi)
    stack0 = solve_wave_many(WaveProblem(initial=p.psi0, operator=p.operator), offsets)
    coeffs = np.exp(-0.5 * (n - 1) * t) * stack0[-1]
    coeffs = coeffs + decay * np.tensordot(ws * phi * (2.0 * k0 + n * k1), stack0[:-1], axes=(0, 0))
    if np.any(p.psi1.coeffs != 0.0):
        stack1 = solve_wave_many(WaveProblem(initial=p.psi1, operator=p.operator), z)
        coeffs = coeffs + 2.0 * decay * np.tensordot(ws * phi * k1, stack1, axes=(0, 0))
    return SpectralField(p.grid, coeffs=coeffs)


def linear_solution(p: LinearProblem, t: float) -> SpectralField:
    """Linear solution psi(., t) through the kernel representation.

    At t = 0 the initial value is returned.
    """
    if t < 0.0:
        raise HypothesisException(f"linear solution needs t >= 0, got {t}")
    if t == 0.0:
        return p.psi0.copy()
    result = _data_terms(p, t)
    if p.source is not None:
        result = result + apply_G(p.source, t, p.params, p.quad, p.grid, p.operator)
    return result


def linear_solution_M_half(p: LinearProblem, t: float) -> SpectralField:
    """Linear solution at M = 1/2, where every kernel is an exponential.

    Raises:
        HypothesisException: If M differs from 1/2.
    """
    if abs(p.params.M - 0.5) > 1e-14:
        raise HypothesisException(f"the M = 1/2 representation needs M = 1/2, got {p.params.M}")
    if t < 0.0:
        raise HypothesisException(f"linear solution needs t >= 0, got {t}")
    if t == 0.0:
        return p.psi0.copy()
    n = p.params.n
    phi = phi_of_t(t)
    lead = np.exp(-0.5 * (n - 1) * t)
    s, ws = mapped_rule(p.quad.ns, 0.0, 1.0)
    z = phi * s

    stack0 = solve_wave_many(WaveProblem(initial=p.psi0, operator=p.operator), np.append(z, phi))
    stack1 = solve_wave_many(WaveProblem(initial=p.psi1, operator=p.operator), z)
    coeffs = lead * (
        stack0[-1]
        + 0.5 * (n - 1) * np.tensordot(ws * phi, stack0[:-1], axes=(0, 0))
        + np.tensordot(ws * phi, stack1, axes=(0, 0))
    )

    if p.source is not None:
        v = wave_family(p.source, p.operator)
        b, wb = mapped_rule(p.quad.nb, 0.0, t)
        xi, wxi = gauss_legendre(p.quad.nr)
        inner = np.zeros(p.grid.shape, dtype=complex)
        for bi, wbi in zip(b, wb):
            reach = np.exp(-bi) - np.exp(-t)
            r = 0.5 * reach * (xi + 1.0)
            inner += wbi * np.exp(0.5 * (n + 1) * bi) * np.tensordot(0.5 * reach * wxi, v(r, float(bi)), axes=(0, 0))
        coeffs = coeffs + lead * inner
    return SpectralField(p.grid, coeffs=coeffs)


def _source_derivative(p: LinearProblem, t: float) -> SpectralField:
    """d/dt G[f](t): damping term, characteristic boundary term and the dE/dt integral."""
    n, M = p.params.n, p.params.M
    v = wave_family(p.source, p.operator)
    b, wb = mapped_rule(p.quad.nb, 0.0, t)
    reach = np.exp(-b) - np.exp(-t)
    # E = e^{(b+t)/2}/2 on r = e^{-b} - e^{-t}, and d/dt of that limit is e^{-t}
    boundary = np.zeros(p.grid.shape, dtype=complex)
    for bi, wbi, ri in zip(b, wb, reach):
        boundary += wbi * np.exp(0.5 * (n + 1) * bi) * v(np.array([ri]), float(bi))[0]
    boundary *= np.exp(-0.5 * (n + 1) * t)

    nodes = _source_nodes(float(t), complex(M), p.quad.nb, p.quad.nr, derivative=True)
    interior = _contract(v, t, n, nodes, p.grid)
    psi_source = apply_G(p.source, t, p.params, p.quad, p.grid, p.operator)
    return -0.5 * n * psi_source + SpectralField(p.grid, coeffs=boundary) + interior


def _data_derivative(p: LinearProblem, t: float, h: float = FD_STEP) -> SpectralField:
    data_only = replace(p, source=None)
    if t <= 2.0 * h:
        samples = [linear_solution(data_only, t + k * h).coeffs for k in range(5)]
        coeffs = (
            -25.0 * samples[0] + 48.0 * samples[1] - 36.0 * samples[2] + 16.0 * samples[3] - 3.0 * samples[4]
        ) / (12.0 * h)
    else:
        f = {k: linear_solution(data_only, t + k * h).coeffs for k in (-2, -1, 1, 2)}
        coeffs = (f[-2] - 8.0 * f[-1] + 8.0 * f[1] - f[2]) / (12.0 * h)
    return SpectralField(p.grid, coeffs=coeffs)


def linear_solution_dt(p: LinearProblem, t: float) -> SpectralField:
    """Time derivative of the linear solution.

    The source part is differentiated under the integral; the data part by
    fourth-order finite differences in t with step 1e-4.
    """
    if t <= 0.0:
        raise HypothesisException(f"time derivative needs t > 0, got {t}")
    result = SpectralField.zeros(p.grid)
    if np.any(p.psi0.coeffs != 0.0) or np.any(p.psi1.coeffs != 0.0):
        result = result + _data_derivative(p, t)
    if p.source is not None:
        result = result + _source_derivative(p, t)
    return result


def free_trajectory(
    p: LinearProblem,
    times: Sequence[float] | np.ndarray,
    with_derivative: bool = False,
) -> Trajectory:
    """Linear solution sampled on ``times`` (t = 0 allowed)."""
    times = np.asarray(times, dtype=float)
    fields = [linear_solution(p, float(t)) for t in times]
    derivatives = None
    if with_derivative:
        derivatives = [
            p.psi1.copy() if t == 0.0 else linear_solution_dt(p, float(t)) for t in times
        ]
    logger.info("free trajectory sampled", n_times=len(times), t_max=float(times[-1]))
    return Trajectory(params=p.params, times=times, fields=fields, derivatives=derivatives)


class DuhamelOperator:
    """G sampled on a fixed time grid with precomputed propagator tables.

    For the Laplacian the wave solution is f_hat(b) cos(|k| r), so for every
    output time t_m the r-integral collapses into a table

        W_m[i, k] = 2 e^{-n t_m/2} e^{n b_i/2} w_i sum_j w_ij E(r_ij, t_m; 0, b_i) cos(|k| r_ij)

    and G[f](t_m) = sum_i W_m[i] f_hat(b_i). Other operators, and tables
    larger than DSKG_CACHE_MB, fall back to ``apply_G`` per time.
    """

    def __init__(
        self,
        grid: PeriodicGrid,
        params: ModelParams,
        quad: QuadratureSpec,
        times: Sequence[float] | np.ndarray,
        operator: Operator | None = None,
    ) -> None:
        self.grid = grid
        self.params = params
        self.quad = quad
        self.times = np.asarray(times, dtype=float)
        self.operator = operator or Laplacian()
        megabytes = len(self.times) * quad.nb * grid.size * 16 / 2**20
        self.tabulated = isinstance(self.operator, Laplacian) and megabytes <= settings.DSKG_CACHE_MB
        self._nodes: list[np.ndarray] = []
        self._tables: list[np.ndarray] = []
        if self.tabulated:
            for t in self.times:
                b, table = self._build(float(t))
                self._nodes.append(b)
                self._tables.append(table)
        logger.info(
            "duhamel operator ready",
            tabulated=self.tabulated,
            megabytes=round(megabytes, 2),
            n_times=len(self.times),
        )

    def _build(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if t <= 0.0:
            return np.empty(0), np.empty((0,) + self.grid.shape, dtype=complex)
        n = self.params.n
        nodes = _source_nodes(t, complex(self.params.M), self.quad.nb, self.quad.nr)
        k_norm = self.grid.k_norm()
        weights = nodes.wr * nodes.kernel

        def row(i: int) -> np.ndarray:
            phase = np.multiply.outer(nodes.r[i], k_norm)
            contracted = np.tensordot(weights[i], np.cos(phase), axes=(0, 0))
            return np.exp(0.5 * n * nodes.b[i]) * nodes.wb[i] * contracted

        table = np.stack(parallel_map(row, range(len(nodes.b))))
        return np.asarray(nodes.b), 2.0 * np.exp(-0.5 * n * t) * table

    def apply(self, coeffs_at: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """G[f] at every time, shape (len(times), *grid.shape).

        Args:
            coeffs_at: Vectorized source, ``coeffs_at(b_array)`` returning the
                coefficient stack of f at those times.
        """
        out = np.zeros((len(self.times),) + self.grid.shape, dtype=complex)
        for m, t in enumerate(self.times):
            if t <= 0.0:
                continue
            if self.tabulated:
                b, table = self._nodes[m], self._tables[m]
                out[m] = np.sum(table * coeffs_at(b), axis=0)
            else:

                def source(b: float) -> SpectralField:
                    return SpectralField(self.grid, coeffs=coeffs_at(np.array([b]))[0])

                out[m] = apply_G(source, float(t), self.params, self.quad, self.grid, self.operator).coeffs
        return out

    def apply_source(self, source: Source) -> np.ndarray:
        """G[f] at every time for a per-time source callable."""

        def coeffs_at(b: np.ndarray) -> np.ndarray:
            return np.stack([source(float(bi)).coeffs for bi in b])

        return self.apply(coeffs_at)
