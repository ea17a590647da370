"""Periodic grids, spectral fields, Sobolev norms and trajectories.

The torus has circumference 2*pi per axis. Fourier coefficients are
Fourier-series coefficients (FFT divided by npts**d), so a constant field c
has the single zero-mode coefficient c and e^{ikx} has a unit coefficient at
k. Sobolev norms use the matching Parseval factor (2*pi)^{d/2}.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal

import numpy as np
import pandas as pd
from scipy import fft

from desitter_kg.src.core.exceptions.exceptions import ConfigurationException, FitException
from desitter_kg.src.core.kernels import ModelParams
from desitter_kg.utils.parallel import thread_count

TWO_PI = 2.0 * np.pi

TrajectoryStatus = Literal["completed", "blowup", "step_underflow"]


@lru_cache(maxsize=32)
def _spectral_tables(d: int, npts: int) -> tuple[tuple[np.ndarray, ...], np.ndarray, np.ndarray]:
    """Integer wavenumber meshes, |k|^2 and the 2/3-rule mask for a grid."""
    k1 = np.fft.fftfreq(npts, d=1.0 / npts)
    mesh = np.meshgrid(*([k1] * d), indexing="ij")
    k_squared = sum(k * k for k in mesh)
    cutoff = npts / 3.0
    mask = np.ones_like(k_squared, dtype=bool)
    for k in mesh:
        mask &= np.abs(k) <= cutoff
    for array in (*mesh, k_squared, mask):
        array.setflags(write=False)
    return tuple(mesh), k_squared, mask


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid on the torus [0, 2*pi)^d."""

    d: int = 1
    npts: int = 256

    def __post_init__(self) -> None:
        if self.d not in (1, 2):
            raise ConfigurationException(f"grid.d must be 1 or 2, got {self.d}")
        if self.npts < 16 or self.npts & (self.npts - 1):
            raise ConfigurationException(
                f"grid.npts must be a power of two >= 16, got {self.npts}"
            )

    @property
    def length(self) -> float:
        return TWO_PI

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.npts,) * self.d

    @property
    def spacing(self) -> float:
        return TWO_PI / self.npts

    @property
    def size(self) -> int:
        return self.npts**self.d

    def axis(self) -> np.ndarray:
        """Coordinates along one axis."""
        return np.arange(self.npts) * self.spacing

    def mesh(self) -> tuple[np.ndarray, ...]:
        """Coordinate meshes, ``ij`` indexing."""
        return tuple(np.meshgrid(*([self.axis()] * self.d), indexing="ij"))

    def wavenumbers(self) -> tuple[np.ndarray, ...]:
        return _spectral_tables(self.d, self.npts)[0]

    def k_squared(self) -> np.ndarray:
        return _spectral_tables(self.d, self.npts)[1]

    def k_norm(self) -> np.ndarray:
        return np.sqrt(self.k_squared())

    def dealias_mask(self) -> np.ndarray:
        return _spectral_tables(self.d, self.npts)[2]


def _forward(values: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    return fft.fftn(values, workers=thread_count()) / grid.size


def _inverse(coeffs: np.ndarray, grid: PeriodicGrid) -> np.ndarray:
    return fft.ifftn(coeffs * grid.size, workers=thread_count())


class SpectralField:
    """Complex field on a periodic grid with lazily synchronized coefficients.

    Either representation may be supplied; the other is computed on first
    access and cached. Fields are treated as values: arithmetic returns new
    instances and never mutates operands.
    """

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(
        self,
        grid: PeriodicGrid,
        values: np.ndarray | None = None,
        coeffs: np.ndarray | None = None,
    ) -> None:
        if values is None and coeffs is None:
            raise ValueError("SpectralField needs values or coeffs")
        self.grid = grid
        self._values = None if values is None else np.asarray(values, dtype=complex)
        self._coeffs = None if coeffs is None else np.asarray(coeffs, dtype=complex)
        for array in (self._values, self._coeffs):
            if array is not None and array.shape != grid.shape:
                raise ConfigurationException(
                    f"field shape {array.shape} does not match grid shape {grid.shape}"
                )

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "SpectralField":
        return cls(grid, coeffs=np.zeros(grid.shape, dtype=complex))

    @classmethod
    def from_function(
        cls, grid: PeriodicGrid, fn: Callable[..., np.ndarray]
    ) -> "SpectralField":
        """Sample ``fn(x0, ..., x_{d-1})`` on the grid mesh."""
        return cls(grid, values=np.broadcast_to(fn(*grid.mesh()), grid.shape))

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            self._values = _inverse(self._coeffs, self.grid)
        return self._values

    @property
    def coeffs(self) -> np.ndarray:
        if self._coeffs is None:
            self._coeffs = _forward(self._values, self.grid)
        return self._coeffs

    def _check_grid(self, other: "SpectralField") -> None:
        if other.grid != self.grid:
            raise ConfigurationException("fields live on different grids")

    def __add__(self, other: "SpectralField") -> "SpectralField":
        self._check_grid(other)
        return SpectralField(self.grid, coeffs=self.coeffs + other.coeffs)

    def __sub__(self, other: "SpectralField") -> "SpectralField":
        self._check_grid(other)
        return SpectralField(self.grid, coeffs=self.coeffs - other.coeffs)

    def __mul__(self, scalar: complex) -> "SpectralField":
        if isinstance(scalar, SpectralField):
            return self.multiply(scalar)
        return SpectralField(self.grid, coeffs=self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self) -> "SpectralField":
        return SpectralField(self.grid, coeffs=-self.coeffs)

    def __repr__(self) -> str:
        return f"SpectralField(d={self.grid.d}, npts={self.grid.npts})"

    def copy(self) -> "SpectralField":
        return SpectralField(self.grid, coeffs=self.coeffs.copy())

    def dealias(self) -> "SpectralField":
        """Zero every mode outside the 2/3-rule band."""
        return SpectralField(self.grid, coeffs=np.where(self.grid.dealias_mask(), self.coeffs, 0.0))

    def multiply(self, other: "SpectralField", dealias: bool = True) -> "SpectralField":
        """Pointwise product, band-limited to the 2/3 rule when ``dealias``."""
        self._check_grid(other)
        if not dealias:
            return SpectralField(self.grid, values=self.values * other.values)
        left, right = self.dealias(), other.dealias()
        return SpectralField(self.grid, values=left.values * right.values).dealias()

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))

    def l2_norm(self) -> float:
        """L2 norm computed in physical space."""
        cell = self.grid.spacing**self.grid.d
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * cell))


def to_spectral(f: SpectralField) -> SpectralField:
    """Field with Fourier coefficients synchronized."""
    return SpectralField(f.grid, coeffs=f.coeffs)


def to_physical(f: SpectralField) -> SpectralField:
    """Field with grid values synchronized."""
    return SpectralField(f.grid, values=f.values)


def sobolev_norm_coeffs(coeffs: np.ndarray, grid: PeriodicGrid, s: float) -> np.ndarray:
    """Sobolev norms of one or many coefficient arrays (leading axes are batch axes)."""
    weight = (1.0 + grid.k_squared()) ** s
    axes = tuple(range(-grid.d, 0))
    total = np.sum(weight * np.abs(coeffs) ** 2, axis=axes)
    return TWO_PI ** (grid.d / 2.0) * np.sqrt(total)


def sobolev_norm(f: SpectralField, s: float) -> float:
    """Bessel-potential norm (2*pi)^{d/2} (sum (1+|k|^2)^s |c_k|^2)^{1/2}."""
    return float(sobolev_norm_coeffs(f.coeffs, f.grid, s))


@dataclass
class Trajectory:
    """Time-indexed fields with cached Sobolev norms at ``params.s``."""

    params: ModelParams
    times: np.ndarray
    fields: list[SpectralField]
    hs_norms: np.ndarray | None = None
    derivatives: list[SpectralField] | None = None
    status: TrajectoryStatus = "completed"
    blowup_time: float | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        if self.times.ndim != 1 or len(self.times) != len(self.fields):
            raise ConfigurationException("trajectory times and fields must have equal length")
        if np.any(np.diff(self.times) <= 0.0):
            raise ConfigurationException("trajectory times must be strictly increasing")
        if self.derivatives is not None and len(self.derivatives) != len(self.fields):
            raise ConfigurationException("trajectory derivatives must match fields")
        if self.hs_norms is None:
            self.hs_norms = np.array([sobolev_norm(f, self.params.s) for f in self.fields])
        else:
            self.hs_norms = np.asarray(self.hs_norms, dtype=float)

    def __len__(self) -> int:
        return len(self.times)

    @property
    def grid(self) -> PeriodicGrid:
        return self.fields[0].grid

    def linf_norms(self) -> np.ndarray:
        return np.array([f.linf() for f in self.fields])

    def coeff_stack(self) -> np.ndarray:
        """Coefficients of every snapshot, shape (len, *grid.shape)."""
        return np.stack([f.coeffs for f in self.fields])


def weighted_sup_norm(traj: Trajectory, gamma: float) -> float:
    """sup_i e^{gamma t_i} ||psi(t_i)||_{H_s} over the samples.

    Raises:
        FitException: If the trajectory is empty.
    """
    if len(traj) == 0:
        raise FitException("weighted sup norm of an empty trajectory")
    return float(np.max(np.exp(gamma * traj.times) * traj.hs_norms))


def algebra_constant(grid: PeriodicGrid, s: float, n_samples: int = 32, seed: int = 0) -> float:
    """Largest observed ||fg||_s / (||f||_s ||g||_s) over random band-limited pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        f = random_bandlimited(grid, rng=rng, kmax=grid.npts // 6)
        g = random_bandlimited(grid, rng=rng, kmax=grid.npts // 6)
        ratio = sobolev_norm(f.multiply(g, dealias=False), s) / (
            sobolev_norm(f, s) * sobolev_norm(g, s)
        )
        worst = max(worst, ratio)
    return worst


# --- Profiles ---


def constant(grid: PeriodicGrid, value: complex = 1.0) -> SpectralField:
    return SpectralField(grid, values=np.full(grid.shape, value, dtype=complex))


def cosine_mode(grid: PeriodicGrid, k: int = 1, amplitude: float = 1.0) -> SpectralField:
    """amplitude * cos(k x_0)."""
    return SpectralField.from_function(grid, lambda *x: amplitude * np.cos(k * x[0]))


def gaussian_bump(
    grid: PeriodicGrid, width: float = 0.5, amplitude: float = 1.0
) -> SpectralField:
    """Gaussian centred at (pi, ..., pi)."""

    def bump(*x: np.ndarray) -> np.ndarray:
        r2 = sum((xi - np.pi) ** 2 for xi in x)
        return amplitude * np.exp(-r2 / (2.0 * width**2))

    return SpectralField.from_function(grid, bump)


def positive_bump(grid: PeriodicGrid, amplitude: float = 1.0) -> SpectralField:
    """amplitude * prod_i (1 + cos x_i) / 2, nonnegative with peak at the origin."""

    def bump(*x: np.ndarray) -> np.ndarray:
        out = np.ones_like(x[0])
        for xi in x:
            out = out * 0.5 * (1.0 + np.cos(xi))
        return amplitude * out

    return SpectralField.from_function(grid, bump)


def random_bandlimited(
    grid: PeriodicGrid,
    seed: int | None = None,
    kmax: int | None = None,
    amplitude: float = 1.0,
    rng: np.random.Generator | None = None,
) -> SpectralField:
    """Real random field with modes |k_i| <= kmax, normalized to unit L-infinity times amplitude."""
    rng = rng if rng is not None else np.random.default_rng(seed)
    kmax = kmax if kmax is not None else max(1, grid.npts // 8)
    coeffs = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    band = np.ones(grid.shape, dtype=bool)
    for k in grid.wavenumbers():
        band &= np.abs(k) <= kmax
    values = np.real(_inverse(np.where(band, coeffs, 0.0), grid))
    peak = np.max(np.abs(values))
    return SpectralField(grid, values=amplitude * values / (peak if peak > 0 else 1.0))


# --- Tables ---


def field_frame(f: SpectralField) -> pd.DataFrame:
    """Snapshot table with coordinate columns and the real and imaginary parts."""
    columns: dict[str, np.ndarray] = {}
    if f.grid.d == 1:
        columns["x"] = f.grid.axis()
    else:
        for i, coord in enumerate(f.grid.mesh()):
            columns[f"x{i}"] = coord.ravel()
    values = f.values.ravel()
    columns["re"] = values.real
    columns["im"] = values.imag
    return pd.DataFrame(columns)


def trajectory_frame(traj: Trajectory) -> pd.DataFrame:
    """Norm history table (t, hs_norm, linf)."""
    return pd.DataFrame(
        {"t": traj.times, "hs_norm": traj.hs_norms, "linf": traj.linf_norms()}
    )


def stack_fields(grid: PeriodicGrid, coeff_stack: Sequence[np.ndarray]) -> list[SpectralField]:
    """Wrap coefficient arrays as fields."""
    return [SpectralField(grid, coeffs=np.asarray(c)) for c in coeff_stack]
