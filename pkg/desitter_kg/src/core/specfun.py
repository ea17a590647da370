"""Complex special functions for the kernel layer.

Gamma and digamma are taken from ``scipy.special`` (complex-capable) behind a
pole check. The Gauss hypergeometric function is evaluated here because the
kernels need complex parameters a, b, c, which ``scipy.special.hyp2f1`` does
not accept. Arguments are real, z in [0, 1).

Evaluation strategy for F(a, b; c; z):

* z <= 0.5: the defining power series, compensated summation, with a
  rigorous geometric tail bound.
* z > 0.5: the connection formula that re-expands in w = 1 - z,

      F = A1 F(a, b; a+b-c+1; w) + w^(c-a-b) A2 F(c-a, c-b; c-a-b+1; w),

  with A1 = G(c)G(c-a-b)/(G(c-a)G(c-b)) and A2 = G(c)G(a+b-c)/(G(a)G(b)).
* c - a - b == 0: the logarithmic expansion (``hyp2f1_log_case``).
* c - a - b within 1e-6 of a nonzero integer: the connection formula at
  c +- h and c +- 2h (h = 1e-5), Richardson-combined.
* a or b a non-positive integer: the series terminates and is summed as a
  polynomial for every z.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy import special

from desitter_kg.src.core.exceptions.exceptions import (
    GammaPoleException,
    SeriesNonConvergenceException,
    SeriesRegionException,
)
from desitter_kg.src.settings import settings
from desitter_kg.utils.pylogger import get_python_logger

logger = get_python_logger(settings.PYTHON_LOG_LEVEL)

BRANCH_SWITCH = 0.5
NEAR_INTEGER_TOL = 1e-6
EXACT_INTEGER_TOL = 1e-14
PERTURBATION_STEP = 1e-5
SERIES_RTOL = 1e-16
_EPS = np.finfo(float).eps
_TINY = 1e-300

Method = Literal["auto", "direct_series", "connection"]


class Branch(str, Enum):
    """Formula that produced a hypergeometric value."""

    DIRECT_SERIES = "direct_series"
    CONNECTION = "connection"
    LOG_CASE = "log_case"


def is_nonpositive_integer(z: complex) -> bool:
    """Whether ``z`` is 0, -1, -2, ... exactly."""
    z = complex(z)
    return z.imag == 0.0 and z.real <= 0.0 and z.real == np.round(z.real)


class HypParams(BaseModel):
    """Parameters of one evaluation of F(a, b; c; z)."""

    model_config = ConfigDict(frozen=True)

    a: complex = Field(description="First numerator parameter.", examples=[0.25])
    b: complex = Field(description="Second numerator parameter.", examples=[0.25])
    c: complex = Field(description="Denominator parameter.", examples=[1.0])
    z: float = Field(description="Real argument in [0, 1).", examples=[0.5])

    @field_validator("z")
    @classmethod
    def _z_in_unit_interval(cls, value: float) -> float:
        if not 0.0 <= value < 1.0:
            raise ValueError(f"z must lie in [0, 1), got {value}")
        return value

    @field_validator("c")
    @classmethod
    def _c_not_pole(cls, value: complex) -> complex:
        if is_nonpositive_integer(value):
            raise ValueError(f"c must not be a non-positive integer, got {value}")
        return value


@dataclass(frozen=True)
class EvalResult:
    """A hypergeometric value with its error estimate and the branch used."""

    value: complex
    est_abs_error: float
    branch: Branch


@dataclass(frozen=True)
class HypArrayResult:
    """Element-wise values, error estimates and branches for an array of z."""

    values: np.ndarray
    errors: np.ndarray
    branches: np.ndarray


def complex_gamma(z: complex) -> complex:
    """Gamma function for complex argument.

    Args:
        z: Argument, not a non-positive integer.

    Returns:
        Gamma(z).

    Raises:
        GammaPoleException: At z = 0, -1, -2, ...
    """
    if is_nonpositive_integer(z):
        raise GammaPoleException(f"gamma has a pole at {z}")
    return complex(special.gamma(complex(z)))


def digamma(z: complex) -> complex:
    """Digamma function psi(z) = Gamma'(z)/Gamma(z) for complex argument.

    Raises:
        GammaPoleException: At z = 0, -1, -2, ...
    """
    if is_nonpositive_integer(z):
        raise GammaPoleException(f"digamma has a pole at {z}")
    return complex(special.psi(complex(z)))


def gauss_sum(a: complex, b: complex, c: complex) -> complex:
    """F(a, b; c; 1) = G(c)G(c-a-b)/(G(c-a)G(c-b)), valid for Re(c-a-b) > 0."""
    s = complex(c) - complex(a) - complex(b)
    if s.real <= 0.0:
        raise SeriesRegionException(f"Gauss summation needs Re(c-a-b) > 0, got {s}")
    return complex(
        complex_gamma(c)
        * complex_gamma(s)
        * special.rgamma(complex(c) - complex(a))
        * special.rgamma(complex(c) - complex(b))
    )


def _budget(term_budget: int | None) -> int:
    return settings.DSKG_HYP2F1_TERM_BUDGET if term_budget is None else term_budget


def _compensated_add(
    total: np.ndarray, comp: np.ndarray, term: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    # Neumaier summation, applied to real parts and imaginary parts separately
    new = total + term
    real_fix = np.where(
        np.abs(total.real) >= np.abs(term.real),
        (total.real - new.real) + term.real,
        (term.real - new.real) + total.real,
    )
    imag_fix = np.where(
        np.abs(total.imag) >= np.abs(term.imag),
        (total.imag - new.imag) + term.imag,
        (term.imag - new.imag) + total.imag,
    )
    return new, comp + real_fix + 1j * imag_fix


def _ratio_bound(a: complex, b: complex, c: complex, j: int) -> float:
    """Upper bound of |(a+i)(b+i)/((c+i)(i+1))| over all i >= j."""
    if j <= abs(c):
        return np.inf
    g = (j + abs(a)) * (j + abs(b)) / ((j - abs(c)) * (j + 1))
    return max(g, 1.0)


def _power_series(
    a: complex,
    b: complex,
    c: complex,
    z: np.ndarray,
    term_budget: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Sum the defining series at every z; returns (values, abs error bounds)."""
    budget = _budget(term_budget)
    z = np.asarray(z, dtype=float)
    term = np.ones(z.shape, dtype=complex)
    total = np.ones(z.shape, dtype=complex)
    comp = np.zeros(z.shape, dtype=complex)
    magnitude = np.ones(z.shape, dtype=float)

    for k in range(budget):
        factor = (a + k) * (b + k) / ((c + k) * (k + 1))
        term = term * factor * z
        total, comp = _compensated_add(total, comp, term)
        magnitude += np.abs(term)
        if factor == 0:
            return total + comp, 4.0 * _EPS * magnitude
        rho = _ratio_bound(a, b, c, k + 1) * z
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(rho < 1.0, np.abs(term) * rho / (1.0 - rho), np.inf)
        if np.all(tail <= SERIES_RTOL * np.abs(total + comp) + _TINY):
            return total + comp, tail + 4.0 * _EPS * magnitude

    raise SeriesNonConvergenceException(
        f"2F1 series for a={a}, b={b}, c={c} did not converge within {budget} terms "
        f"(max z={float(np.max(z)) if z.size else 0.0})"
    )


def _connection(
    a: complex,
    b: complex,
    c: complex,
    z: np.ndarray,
    term_budget: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Connection formula in w = 1 - z; needs c - a - b away from integers."""
    w = 1.0 - np.asarray(z, dtype=float)
    s = c - a - b
    gc = special.gamma(c)
    a1 = gc * special.gamma(s) * special.rgamma(c - a) * special.rgamma(c - b)
    a2 = gc * special.gamma(-s) * special.rgamma(a) * special.rgamma(b)
    f1, e1 = _power_series(a, b, 1.0 - s, w, term_budget)
    f2, e2 = _power_series(c - a, c - b, 1.0 + s, w, term_budget)
    ws = np.exp(s * np.log(w))
    first = a1 * f1
    second = ws * a2 * f2
    err = (
        np.abs(a1) * e1
        + np.abs(ws * a2) * e2
        + 8.0 * _EPS * (np.abs(first) + np.abs(second))
    )
    return first + second, err


def _perturbed_connection(
    a: complex,
    b: complex,
    c: complex,
    z: np.ndarray,
    term_budget: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Connection formula at c +- h, c +- 2h, Richardson-combined to O(h^4)."""
    h = PERTURBATION_STEP
    plus1, e_p1 = _connection(a, b, c + h, z, term_budget)
    minus1, e_m1 = _connection(a, b, c - h, z, term_budget)
    plus2, e_p2 = _connection(a, b, c + 2 * h, z, term_budget)
    minus2, e_m2 = _connection(a, b, c - 2 * h, z, term_budget)
    near = 0.5 * (plus1 + minus1)
    far = 0.5 * (plus2 + minus2)
    value = (4.0 * near - far) / 3.0
    err = np.abs(value - near) / 15.0 + (4.0 * (e_p1 + e_m1) + e_p2 + e_m2) / 6.0
    return value, err


def _log_series(
    a: complex,
    b: complex,
    z: np.ndarray,
    term_budget: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """F(a, b; a+b; z) by the psi/log(1-z) expansion, w = 1 - z <= 0.5."""
    budget = _budget(term_budget)
    w = 1.0 - np.asarray(z, dtype=float)
    log_w = np.log(w)
    prefactor = special.gamma(a + b) * special.rgamma(a) * special.rgamma(b)

    coef = 1.0 + 0j
    psi_one = complex(special.psi(1.0))
    psi_a = complex(special.psi(a))
    psi_b = complex(special.psi(b))
    w_power = np.ones(w.shape, dtype=float)
    total = np.zeros(w.shape, dtype=complex)
    comp = np.zeros(w.shape, dtype=complex)
    magnitude = np.zeros(w.shape, dtype=float)

    for n in range(budget):
        term = coef * (2.0 * psi_one - psi_a - psi_b - log_w) * w_power
        total, comp = _compensated_add(total, comp, term)
        magnitude += np.abs(term)
        step = (a + n) * (b + n) / ((n + 1.0) ** 2)
        # the bracket grows like log n, absorbed by the factor 2
        rho = _ratio_bound(a, b, 0.0, n + 1) * w
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(
                rho < 1.0, 2.0 * np.abs(term * step) * w / (1.0 - rho), np.inf
            )
        if np.all(tail <= SERIES_RTOL * np.abs(total + comp) + _TINY):
            value = prefactor * (total + comp)
            return value, np.abs(prefactor) * (tail + 4.0 * _EPS * magnitude)
        coef = coef * step
        psi_one += 1.0 / (n + 1.0)
        psi_a += 1.0 / (a + n)
        psi_b += 1.0 / (b + n)
        w_power = w_power * w

    raise SeriesNonConvergenceException(
        f"2F1 logarithmic expansion for a={a}, b={b} did not converge within {budget} terms"
    )


def hyp2f1_log_case(a: complex, b: complex, z: float) -> complex:
    """Evaluate F(a, b; a+b; z) through the logarithmic expansion about z = 1.

    Args:
        a: First parameter.
        b: Second parameter.
        z: Real argument with 1 - z < 0.5.

    Returns:
        The hypergeometric value.

    Raises:
        SeriesRegionException: If 1 - z >= 0.5.
    """
    if not (0.0 < z < 1.0) or 1.0 - z >= BRANCH_SWITCH:
        raise SeriesRegionException(
            f"logarithmic expansion needs 1 - z < {BRANCH_SWITCH}, got z={z}"
        )
    a, b = complex(a), complex(b)
    if is_nonpositive_integer(a + b):
        raise GammaPoleException(f"c = a + b = {a + b} is a pole of the series")
    if is_nonpositive_integer(a) or is_nonpositive_integer(b):
        values, _ = _power_series(a, b, a + b, np.array([z]))
    else:
        values, _ = _log_series(a, b, np.array([z]))
    return complex(values[0])


def hyp2f1_array(
    a: complex,
    b: complex,
    c: complex,
    z: np.ndarray | float,
    method: Method = "auto",
    term_budget: int | None = None,
) -> HypArrayResult:
    """Evaluate F(a, b; c; z) for fixed parameters over an array of real z.

    Args:
        a: First numerator parameter.
        b: Second numerator parameter.
        c: Denominator parameter, not a non-positive integer.
        z: Real arguments in [0, 1), any shape.
        method: ``auto`` picks the branch per element; ``direct_series`` or
            ``connection`` forces one formula everywhere.
        term_budget: Series term budget; defaults to DSKG_HYP2F1_TERM_BUDGET.

    Returns:
        Values, absolute error estimates and branch labels, shaped like ``z``.

    Raises:
        GammaPoleException: If c is a non-positive integer.
        SeriesRegionException: If some z lies outside [0, 1).
        SeriesNonConvergenceException: If a series exhausts the term budget.
    """
    a, b, c = complex(a), complex(b), complex(c)
    if is_nonpositive_integer(c):
        raise GammaPoleException(f"c = {c} is a pole of the hypergeometric series")
    z = np.asarray(z, dtype=float)
    shape = z.shape
    flat = z.ravel()
    if flat.size and (np.any(flat < 0.0) or np.any(flat >= 1.0)):
        raise SeriesRegionException("hypergeometric argument must lie in [0, 1)")

    values = np.empty(flat.shape, dtype=complex)
    errors = np.empty(flat.shape, dtype=float)
    branches = np.full(flat.shape, Branch.DIRECT_SERIES.value, dtype=object)

    terminating = is_nonpositive_integer(a) or is_nonpositive_integer(b)
    if terminating or method == "direct_series":
        values[:], errors[:] = _power_series(a, b, c, flat, term_budget)
        return HypArrayResult(
            values.reshape(shape), errors.reshape(shape), branches.reshape(shape)
        )

    high = np.ones(flat.shape, dtype=bool) if method == "connection" else flat > BRANCH_SWITCH
    low = ~high
    if np.any(low):
        values[low], errors[low] = _power_series(a, b, c, flat[low], term_budget)
    if np.any(high):
        s = c - a - b
        k = np.round(s.real)
        if abs(s) <= EXACT_INTEGER_TOL:
            values[high], errors[high] = _log_series(a, b, flat[high], term_budget)
            branches[high] = Branch.LOG_CASE.value
        elif abs(s - k) <= NEAR_INTEGER_TOL:
            logger.debug("hyp2f1 near-integer perturbation", c_minus_a_minus_b=str(s))
            values[high], errors[high] = _perturbed_connection(
                a, b, c, flat[high], term_budget
            )
            branches[high] = Branch.CONNECTION.value
        else:
            values[high], errors[high] = _connection(a, b, c, flat[high], term_budget)
            branches[high] = Branch.CONNECTION.value

    return HypArrayResult(
        values.reshape(shape), errors.reshape(shape), branches.reshape(shape)
    )


def hyp2f1(p: HypParams, method: Method = "auto") -> EvalResult:
    """Evaluate F(a, b; c; z) for one validated parameter set.

    Args:
        p: Parameters; z in [0, 1) and c not a pole by construction.
        method: Branch selection, see ``hyp2f1_array``.

    Returns:
        The value, an absolute error estimate and the branch used.
    """
    result = hyp2f1_array(p.a, p.b, p.c, np.array([p.z]), method=method)
    return EvalResult(
        value=complex(result.values[0]),
        est_abs_error=float(result.errors[0]),
        branch=Branch(result.branches[0]),
    )
