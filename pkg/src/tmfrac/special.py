"""Gamma-type special functions and the integral identities used near blow-up.

Gamma and log-Gamma come from the standard library, digamma from
scipy.special; this module adds domain checking, the angular constant
omega_theta and residual checks for the Beta/digamma integral identities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy import special as _sp

from .errors import DomainError, QuadratureError

EULER_GAMMA = float(np.euler_gamma)

OMEGA_CONVENTIONS = ("sphere", "literal")

# step used for the Gamma-ratio expansion check
LT3_STEP = 1e-3


@dataclass(frozen=True)
class SpecialConstants:
    gamma_euler: float
    psi_p: float

    @classmethod
    def for_p(cls, p: float) -> "SpecialConstants":
        return cls(gamma_euler=EULER_GAMMA, psi_p=digamma(p))

    @property
    def psi_plus_gamma(self) -> float:
        return self.psi_p + self.gamma_euler


def _check_positive(x: float, name: str = "x") -> float:
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"{name} must be a positive finite number, got {x!r}")
    return x


def gamma(x: float) -> float:
    """Gamma function for x > 0.

    Raises DomainError for x <= 0 and OverflowError once the result is not
    representable as a double (x > ~171.62).
    """
    x = _check_positive(x)
    try:
        return math.gamma(x)
    except OverflowError as exc:
        raise OverflowError(f"gamma({x}) overflows double precision") from exc


def log_gamma(x: float) -> float:
    x = _check_positive(x)
    return math.lgamma(x)


def digamma(x: float) -> float:
    """Logarithmic derivative of Gamma for x > 0."""
    x = _check_positive(x)
    return float(_sp.digamma(x))


def omega(theta: float, convention: str = "sphere") -> float:
    """Angular factor of the fractional measure.

    ``sphere``: 2 pi^{(theta+1)/2} / Gamma((theta+1)/2), the surface area of the
    unit sphere in R^{theta+1}.  ``literal``: 2 pi^{theta/2} / Gamma(theta/2).
    """
    theta = float(theta)
    if not math.isfinite(theta) or theta < 0.0:
        raise DomainError(f"theta must be >= 0, got {theta!r}")
    if convention == "sphere":
        s = 0.5 * (theta + 1.0)
    elif convention == "literal":
        if theta == 0.0:
            raise DomainError("literal convention is undefined at theta = 0")
        s = 0.5 * theta
    else:
        raise DomainError(f"unknown omega convention {convention!r}")
    return 2.0 * math.exp(s * math.log(math.pi) - math.lgamma(s))


def beta_integral(x: float, y: float) -> float:
    """Gamma(x) Gamma(y) / Gamma(x+y), i.e. int_0^inf s^{x-1} (1+s)^{-x-y} ds."""
    x = _check_positive(x, "x")
    y = _check_positive(y, "y")
    return math.exp(math.lgamma(x) + math.lgamma(y) - math.lgamma(x + y))


def _quad(f: Callable[[float], float], a: float, b: float, points=None) -> float:
    res = integrate.quad(f, a, b, epsabs=1e-15, epsrel=1e-13, limit=500,
                         points=points, full_output=1)
    if len(res) == 4:
        raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {res[3]}")
    return res[0]


def _tail_power(p: float, z: float) -> float:
    """int_z^inf s^{p-2} (1+s)^{-p} ds, integrated in log s.

    The integrand is <= s^{-2}, so truncating at S leaves at most 1/S; the
    cutoff is pushed far enough that this bound is below 1e-17.
    """
    cutoff = max(z, 1.0) * 1e17
    f = lambda u: math.exp((p - 1.0) * u - p * math.log1p(math.exp(u)))
    return _quad(f, math.log(z), math.log(cutoff))


def _harmonic_kernel(p: float, s: float) -> float:
    # (1 - s^{p-1}) / (1 - s), continuous at s = 1 with value p-1
    if abs(1.0 - s) < 1e-12:
        return p - 1.0
    return -math.expm1((p - 1.0) * math.log(s)) / (1.0 - s) if s > 0 else 1.0


def lt_identity_residuals(z: float, p: float) -> tuple[float, float, float]:
    """Residuals of the three digamma identities at (z, p).

    1. int_0^z s^{p-1}/(1+s)^p ds = ln(1+z) - [gamma+Psi(p)]
       + int_{z/(1+z)}^1 (1-s^{p-1})/(1-s) ds
    2. int_0^z s^{p-2}/(1+s)^p ds = 1/(p-1) - int_z^inf s^{p-2}/(1+s)^p ds
    3. d/dx [Gamma(p)Gamma(1+x)/Gamma(p+x)] at x=0 equals -[Psi(p)+gamma];
       measured by a Richardson-extrapolated central difference at x = 1e-3.

    Both sides of 1 and 2 are evaluated by adaptive quadrature.
    """
    z = _check_positive(z, "z")
    p = float(p)
    if not p >= 2.0:
        raise DomainError(f"p must be >= 2, got {p!r}")
    pg = digamma(p) + EULER_GAMMA

    lhs1 = _quad(lambda s: s ** (p - 1.0) / (1.0 + s) ** p, 0.0, z)
    lo = z / (1.0 + z)
    rhs1 = math.log1p(z) - pg + _quad(lambda s: _harmonic_kernel(p, s), lo, 1.0)
    r1 = abs(lhs1 - rhs1)

    lhs2 = _quad(lambda s: s ** (p - 2.0) / (1.0 + s) ** p, 0.0, z)
    rhs2 = 1.0 / (p - 1.0) - _tail_power(p, z)
    r2 = abs(lhs2 - rhs2)

    r3 = abs(gamma_ratio_slope(p) + pg)
    return r1, r2, r3


def gamma_ratio(p: float, x: float) -> float:
    """Gamma(p) Gamma(1+x) / Gamma(p+x)."""
    return math.exp(math.lgamma(p) + math.lgamma(1.0 + x) - math.lgamma(p + x))


def gamma_ratio_slope(p: float, x: float = LT3_STEP) -> float:
    d = lambda h: (gamma_ratio(p, h) - gamma_ratio(p, -h)) / (2.0 * h)
    return (4.0 * d(0.5 * x) - d(x)) / 3.0


def gamma_ratio_second_order(p: float) -> float:
    """Exact x^2 coefficient of Gamma(p)Gamma(1+x)/Gamma(p+x) at x = 0."""
    k1 = -(digamma(p) + EULER_GAMMA)
    k2 = float(_sp.polygamma(1, 1.0) - _sp.polygamma(1, p))
    return 0.5 * (k1 * k1 + k2)


def psi_plus_gamma_integral(p: float) -> float:
    """Psi(p) + gamma = int_0^1 (1 - s^{p-1})/(1 - s) ds."""
    p = _check_positive(p, "p")
    return _quad(lambda s: _harmonic_kernel(p, s), 0.0, 1.0)
