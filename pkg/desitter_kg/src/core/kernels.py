"""Hypergeometric kernels E, K0, K1 and dE/dt of the de Sitter integral transform.

For complex M and 0 <= r <= e^{-t0} - e^{-t}:

    E(r, t; 0, t0; M) = 4^{-M} e^{M(t0+t)} ((e^{-t}+e^{-t0})^2 - r^2)^{M-1/2}
                        F(1/2-M, 1/2-M; 1; zeta),
    zeta = ((e^{-t0}-e^{-t})^2 - r^2) / ((e^{-t}+e^{-t0})^2 - r^2).

K1(z, t; M) = E(z, t; 0, 0; M) and K0(z, t; M) = -dE/db at b = 0, written
with the two hypergeometric terms F(1/2-M, 1/2-M; 1; .) and
F(-1/2-M, 1/2-M; 1; .). Every kernel accepts numpy arrays in r (or z) and
broadcasts against t; scalar input returns a Python complex.
"""

from __future__ import annotations

from typing import Any, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from desitter_kg.src.core.exceptions.exceptions import (
    KernelDomainException,
    KernelSingularityException,
)
from desitter_kg.src.core.specfun import hyp2f1_array

SINGULAR_TOL = 1e-12
DOMAIN_SLACK = 1e-13
_LOG4 = np.log(4.0)

KernelKind = Literal["E", "K0", "K1", "dEdt"]


def as_complex(value: Any) -> complex:
    """Parse a complex number from a number, ``[re, im]`` pair or ``"re,im"`` text."""
    if isinstance(value, complex):
        return value
    if isinstance(value, (int, float, np.number)):
        return complex(value)
    if isinstance(value, str):
        text = value.strip()
        if "," in text:
            re_part, im_part = text.split(",", 1)
            return complex(float(re_part), float(im_part))
        return complex(text.replace(" ", ""))
    if isinstance(value, (list, tuple)) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, dict) and {"re", "im"} <= set(value):
        return complex(float(value["re"]), float(value["im"]))
    raise ValueError(f"cannot interpret {value!r} as a complex number")


def principal_root(n: int, m2: complex) -> complex:
    """Principal square root M of n^2/4 - m^2 (Re M >= 0)."""
    return complex(np.sqrt(complex(n * n / 4.0 - complex(m2))))


class ModelParams(BaseModel):
    """Physical configuration consumed by every solver.

    ``M`` is filled with the principal root of n^2/4 - m2 when omitted; when
    given, it must be consistent with ``m2`` and lie on the principal branch.
    """

    model_config = ConfigDict(frozen=True)

    n: int = Field(description="Damping coefficient, the model's spatial dimension.", gt=0, examples=[3])
    m2: complex = Field(description="Mass squared, possibly complex or negative.", examples=[2.0])
    M: complex = Field(
        default=0j,
        description="Principal square root of n^2/4 - m2.",
        examples=[0.5],
    )
    s: float = Field(default=2.0, description="Sobolev index.", examples=[2.0])
    alpha: float = Field(
        default=2.0, description="Nonlinearity exponent.", ge=0.0, examples=[2.0]
    )

    @model_validator(mode="before")
    @classmethod
    def _fill_principal_root(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        if data.get("m2") is None and data.get("M") is not None and "n" in data:
            M = as_complex(data["M"])
            data["m2"] = int(data["n"]) ** 2 / 4.0 - M * M
        if data.get("M") is None and data.get("m2") is not None and "n" in data:
            data["M"] = principal_root(int(data["n"]), as_complex(data["m2"]))
        return data

    @field_validator("m2", "M", mode="before")
    @classmethod
    def _parse_complex(cls, value: Any) -> complex:
        return as_complex(value)

    @model_validator(mode="after")
    def _check_root(self) -> "ModelParams":
        target = self.n * self.n / 4.0 - self.m2
        if abs(self.M * self.M - target) > 1e-12 * (1.0 + abs(self.m2)):
            raise ValueError(
                f"invariant M^2 = n^2/4 - m2 violated: M={self.M}, n={self.n}, m2={self.m2}"
            )
        if self.M.real < 0.0:
            raise ValueError(f"invariant Re M >= 0 violated: M={self.M}")
        return self

    @classmethod
    def from_M(cls, n: int, M: complex, s: float = 2.0, alpha: float = 2.0) -> "ModelParams":
        """Build parameters from the curved-mass root instead of m^2."""
        M = complex(M)
        return cls(n=n, m2=n * n / 4.0 - M * M, M=M, s=s, alpha=alpha)

    @classmethod
    def from_mass(
        cls, n: int, m2: complex, s: float = 2.0, alpha: float = 2.0
    ) -> "ModelParams":
        """Build parameters from m^2, taking the principal root for M."""
        return cls(n=n, m2=complex(m2), s=s, alpha=alpha)

    @classmethod
    def higgs(cls, n: int, mu: float, s: float = 2.0) -> "ModelParams":
        """Higgs configuration m^2 = -mu^2 with the cubic exponent."""
        return cls(n=n, m2=-(mu**2), s=s, alpha=2.0)

    @property
    def re_M(self) -> float:
        """Real part of M."""
        return float(self.M.real)

    @property
    def curved_mass(self) -> complex:
        """The curved mass iM."""
        return 1j * self.M

    @property
    def half_n(self) -> float:
        """n / 2."""
        return self.n / 2.0


class KernelArgs(BaseModel):
    """Evaluation point of a kernel."""

    model_config = ConfigDict(frozen=True)

    r: float = Field(description="Spatial offset magnitude (z for K0/K1).", ge=0.0, examples=[0.1])
    t: float = Field(description="Time.", gt=0.0, examples=[1.0])
    t0: float = Field(default=0.0, description="Second time (b for dEdt).", ge=0.0, examples=[0.0])


class KernelReport(BaseModel):
    """A kernel value with hypergeometric diagnostics."""

    kind: str = Field(description="Kernel name.", examples=["E"])
    value: complex = Field(description="Kernel value.")
    zeta: float = Field(description="Hypergeometric argument used.")
    branch: str = Field(description="Hypergeometric branch that produced the leading factor.")
    est_abs_error: float = Field(description="Absolute error estimate of that factor.")


def _prepare(*arrays: Any) -> tuple[bool, list[np.ndarray]]:
    scalar = all(np.ndim(a) == 0 for a in arrays)
    return scalar, list(np.broadcast_arrays(*[np.asarray(a, dtype=float) for a in arrays]))


def _finish(value: np.ndarray, scalar: bool) -> complex | np.ndarray:
    return complex(value.reshape(-1)[0]) if scalar else value


def _source_geometry(r: np.ndarray, t: np.ndarray, t0: np.ndarray):
    """Common quantities of E on its support; raises outside it."""
    et, et0 = np.exp(-t), np.exp(-t0)
    reach = et0 - et
    if np.any(reach < -DOMAIN_SLACK):
        raise KernelDomainException("kernel E needs t0 <= t")
    if np.any(r < 0.0) or np.any(r > reach + DOMAIN_SLACK * np.maximum(1.0, reach)):
        raise KernelDomainException(
            "kernel E queried outside 0 <= r <= e^{-t0} - e^{-t}"
        )
    r = np.minimum(r, np.maximum(reach, 0.0))
    base = (et + et0) ** 2 - r**2
    if not np.all(base > 0.0):
        raise KernelDomainException("kernel base (e^{-t}+e^{-t0})^2 - r^2 must be positive")
    zeta = np.clip((reach**2 - r**2) / base, 0.0, np.nextafter(1.0, 0.0))
    return et, et0, r, base, zeta


def _principal_power_prefactor(M: complex, tsum: np.ndarray, base: np.ndarray) -> np.ndarray:
    # 4^{-M} e^{M tsum} base^{M - 1/2}; base is real positive so log(base) is real
    return np.exp(M * (tsum - _LOG4) + (M - 0.5) * np.log(base))


def kernel_E(r: Any, t: Any, t0: Any, M: complex) -> complex | np.ndarray:
    """Kernel E(r, t; 0, t0; M).

    Args:
        r: Offset(s) with 0 <= r <= e^{-t0} - e^{-t}.
        t: Time(s).
        t0: Second time(s), t0 <= t.
        M: Curved-mass root.

    Returns:
        Kernel value(s), complex.

    Raises:
        KernelDomainException: Outside the support.
    """
    M = complex(M)
    scalar, (r, t, t0) = _prepare(r, t, t0)
    _, _, r, base, zeta = _source_geometry(r, t, t0)
    a = 0.5 - M
    F = hyp2f1_array(a, a, 1.0, zeta).values
    return _finish(_principal_power_prefactor(M, t0 + t, base) * F, scalar)


def kernel_K1(z: Any, t: Any, M: complex) -> complex | np.ndarray:
    """Kernel K1(z, t; M) = E(z, t; 0, 0; M) for 0 <= z <= 1 - e^{-t}."""
    return kernel_E(z, t, np.zeros_like(np.asarray(t, dtype=float)), M)


def kernel_K0(z: Any, t: Any, M: complex) -> complex | np.ndarray:
    """Kernel K0(z, t; M) for 0 <= z < 1 - e^{-t}.

    Raises:
        KernelDomainException: For negative z or z beyond the support.
        KernelSingularityException: Within 1e-12 of z = 1 - e^{-t}.
    """
    M = complex(M)
    scalar, (z, t) = _prepare(z, t)
    et = np.exp(-t)
    phi = -np.expm1(-t)
    if np.any(z < 0.0) or np.any(z > phi + DOMAIN_SLACK):
        raise KernelDomainException("kernel K0 queried outside 0 <= z <= 1 - e^{-t}")
    if np.any(phi - z < SINGULAR_TOL):
        raise KernelSingularityException(
            "kernel K0 is not evaluated within 1e-12 of z = 1 - e^{-t}"
        )
    base = (1.0 + et) ** 2 - z**2
    gap = (phi - z) * (phi + z)
    zeta = np.clip(gap / base, 0.0, np.nextafter(1.0, 0.0))
    a = 0.5 - M
    F_main = hyp2f1_array(a, a, 1.0, zeta).values
    F_lower = hyp2f1_array(-0.5 - M, a, 1.0, zeta).values
    bracket = (et - 1.0 + M * (et**2 - 1.0 - z**2)) * F_main + (
        1.0 - et**2 + z**2
    ) * (0.5 + M) * F_lower
    value = _principal_power_prefactor(M, t, base) * bracket / gap
    return _finish(value, scalar)


def kernel_dE_dt(r: Any, t: Any, b: Any, M: complex) -> complex | np.ndarray:
    """Time derivative dE/dt (r, t; 0, b; M) by the product rule.

    Uses d/dzeta F(a, a; 1; zeta) = a^2 F(a+1, a+1; 2; zeta) with a = 1/2 - M.

    Raises:
        KernelDomainException: Outside 0 <= r <= e^{-b} - e^{-t}, b < t.
    """
    M = complex(M)
    scalar, (r, t, b) = _prepare(r, t, b)
    if np.any(b >= t):
        raise KernelDomainException("dE/dt needs b < t")
    et, eb, r, base, zeta = _source_geometry(r, t, b)
    numerator = (eb - et) ** 2 - r**2
    d_base = -2.0 * et * (et + eb)
    d_numerator = 2.0 * et * (eb - et)
    d_zeta = (d_numerator * base - numerator * d_base) / base**2
    a = 0.5 - M
    F = hyp2f1_array(a, a, 1.0, zeta).values
    F_shift = hyp2f1_array(a + 1.0, a + 1.0, 2.0, zeta).values
    value = _principal_power_prefactor(M, b + t, base) * (
        (M + (M - 0.5) * d_base / base) * F + a * a * F_shift * d_zeta
    )
    return _finish(value, scalar)


def _closed_form_mass(M: complex) -> float:
    M = complex(M)
    for candidate in (0.5, 1.5):
        if abs(M - candidate) <= 1e-14:
            return candidate
    raise KernelDomainException(f"closed forms exist only for M in {{1/2, 3/2}}, got {M}")


def kernel_E_closed_form(r: Any, t: Any, b: Any, M: complex) -> complex | np.ndarray:
    """Elementary form of E(r, t; 0, b; M) at M = 1/2 and M = 3/2."""
    mass = _closed_form_mass(M)
    scalar, (r, t, b) = _prepare(r, t, b)
    if mass == 0.5:
        value = 0.5 * np.exp(0.5 * (b + t)) + 0j
    else:
        value = (
            0.25
            * np.exp(-0.5 * (b + t))
            * (np.exp(2 * b) + np.exp(2 * t) - r**2 * np.exp(2 * (b + t)))
            + 0j
        )
    return _finish(value, scalar)


def kernel_dE_dt_closed_form(r: Any, t: Any, b: Any, M: complex) -> complex | np.ndarray:
    """Elementary form of dE/dt at M = 1/2 and M = 3/2."""
    mass = _closed_form_mass(M)
    scalar, (r, t, b) = _prepare(r, t, b)
    if mass == 0.5:
        value = 0.25 * np.exp(0.5 * (b + t)) + 0j
    else:
        value = (
            0.125
            * np.exp(-0.5 * (b + t))
            * (3 * np.exp(2 * t) - 3 * r**2 * np.exp(2 * (b + t)) - np.exp(2 * b))
            + 0j
        )
    return _finish(value, scalar)


def kernel_K0_closed_form(z: Any, t: Any, M: complex) -> complex | np.ndarray:
    """Elementary form of K0 at M = 1/2 and M = 3/2."""
    mass = _closed_form_mass(M)
    scalar, (z, t) = _prepare(z, t)
    if mass == 0.5:
        value = -0.25 * np.exp(0.5 * t) + 0j
    else:
        value = 0.125 * np.exp(-0.5 * t) * (np.exp(2 * t) * (1 + 3 * z**2) - 3) + 0j
    return _finish(value, scalar)


def describe_kernel(kind: KernelKind, args: KernelArgs, M: complex) -> KernelReport:
    """Evaluate a kernel and report the hypergeometric argument and branch.

    Args:
        kind: ``E``, ``K0``, ``K1`` or ``dEdt``.
        args: Evaluation point; ``t0`` is ignored for K0/K1 and plays b for dEdt.
        M: Curved-mass root.

    Returns:
        KernelReport with the value and diagnostics of the leading factor.
    """
    M = complex(M)
    t0 = 0.0 if kind in ("K0", "K1") else args.t0
    if kind == "E":
        value = kernel_E(args.r, args.t, t0, M)
    elif kind == "K1":
        value = kernel_K1(args.r, args.t, M)
    elif kind == "K0":
        value = kernel_K0(args.r, args.t, M)
    elif kind == "dEdt":
        value = kernel_dE_dt(args.r, args.t, t0, M)
    else:
        raise KernelDomainException(f"unknown kernel kind {kind!r}")

    et, et0 = np.exp(-args.t), np.exp(-t0)
    zeta = float(((et0 - et) ** 2 - args.r**2) / ((et + et0) ** 2 - args.r**2))
    zeta = min(max(zeta, 0.0), float(np.nextafter(1.0, 0.0)))
    diag = hyp2f1_array(0.5 - M, 0.5 - M, 1.0, np.array([zeta]))
    return KernelReport(
        kind=kind,
        value=complex(value),
        zeta=zeta,
        branch=str(diag.branches[0]),
        est_abs_error=float(diag.errors[0]),
    )
