"""Radial grids and quadrature for the measures omega_s r^s dr.

A grid is a strictly increasing set of radii r_0 < ... < r_{n-1} = r_out.
Sampled functions are read as piecewise linear between nodes and constant on
the origin cell [0, r_0].  Node weights integrate that interpolant against
r^s exactly, cell by cell, from closed-form power moments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy import optimize

from .errors import DomainError, InvalidDataError
from .special import OMEGA_CONVENTIONS, omega

GRADINGS = ("uniform", "geometric", "hybrid")

# first node of graded grids, relative to r_out
R_MIN_FACTOR = 1e-8

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_T = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


@dataclass(frozen=True)
class MeasureParams:
    p: float
    theta: float
    convention: str = "sphere"
    alpha: float = field(init=False)
    omega_alpha: float = field(init=False)
    omega_theta: float = field(init=False)
    mu_crit: float = field(init=False)

    def __post_init__(self):
        p, theta = float(self.p), float(self.theta)
        if not (math.isfinite(p) and p >= 2.0):
            raise DomainError(f"p must be >= 2, got {self.p!r}")
        alpha = p - 1.0
        if not (math.isfinite(theta) and theta >= alpha):
            raise DomainError(f"theta must be >= alpha = p-1 = {alpha}, got {self.theta!r}")
        if self.convention not in OMEGA_CONVENTIONS:
            raise DomainError(f"unknown omega convention {self.convention!r}")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "alpha", alpha)
        om_a = omega(alpha, self.convention)
        object.__setattr__(self, "omega_alpha", om_a)
        object.__setattr__(self, "omega_theta", omega(theta, self.convention))
        object.__setattr__(self, "mu_crit", (theta + 1.0) * om_a ** (1.0 / alpha))

    @property
    def k0(self) -> int:
        return phi_order(self.p)

    def as_dict(self) -> dict:
        return {"p": self.p, "theta": self.theta, "alpha": self.alpha,
                "omega_convention": self.convention, "omega_alpha": self.omega_alpha,
                "omega_theta": self.omega_theta, "mu_crit": self.mu_crit}


def phi_order(p: float) -> int:
    """Smallest integer j with p - 1 <= j."""
    a = float(p) - 1.0
    j = round(a)
    if abs(a - j) <= 1e-12:
        return int(j)
    return int(math.ceil(a))


def power_moment(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """int_a^b r^s dr, elementwise, without cancellation for b/a close to 1."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    out = np.empty(np.broadcast(a, b).shape)
    with np.errstate(divide="ignore"):
        ratio = np.where(b > 0, a / b, 0.0)
        lr = np.where(ratio > 0, np.log(np.maximum(ratio, 1e-300)), -np.inf)
    pos = ratio > 0
    out[pos] = -b[pos] ** (s + 1.0) * np.expm1((s + 1.0) * lr[pos]) / (s + 1.0)
    out[~pos] = b[~pos] ** (s + 1.0) / (s + 1.0)
    return out


def _hat_parts(a: np.ndarray, b: np.ndarray, s: float) -> tuple[np.ndarray, np.ndarray]:
    """Cell integrals int (b-r)/h r^s dr and int (r-a)/h r^s dr."""
    h = b - a
    rel = h / a
    left = np.empty_like(a)
    right = np.empty_like(a)
    wide = rel > 1e-2
    if np.any(wide):
        aw, bw, hw = a[wide], b[wide], h[wide]
        m0 = power_moment(aw, bw, s)
        m1 = power_moment(aw, bw, s + 1.0)
        right[wide] = (m1 - aw * m0) / hw
        left[wide] = m0 - right[wide]
    nar = ~wide
    if np.any(nar):
        an, hn = a[nar], h[nar]
        # Gauss-Legendre in t on r = a + h t; integrand is analytic with large radius
        vals = (1.0 + np.outer(rel[nar], _GL_T)) ** s
        base = hn * an ** s
        right[nar] = base * ((vals * _GL_T) @ _GL_W)
        left[nar] = base * ((vals * (1.0 - _GL_T)) @ _GL_W)
    return left, right


class RadialGrid:
    """Immutable radial mesh with quadrature weights for dlambda_theta and dlambda_alpha."""

    def __init__(self, nodes: Iterable[float], params: MeasureParams, grading: str = "custom"):
        r = np.array(nodes, dtype=float)
        if r.ndim != 1 or r.size < 2:
            raise DomainError("a grid needs at least two nodes")
        if not np.all(np.isfinite(r)) or r[0] <= 0.0:
            raise DomainError("grid nodes must be finite and positive")
        if np.any(np.diff(r) <= 0.0):
            raise DomainError("grid nodes must be strictly increasing")
        self.params = params
        self.grading = grading
        self.nodes = r
        self.r_out = float(r[-1])
        self.widths = np.diff(r)
        self._theta = self._weights(params.theta, params.omega_theta)
        self._alpha = self._weights(params.alpha, params.omega_alpha)
        self.weights_theta = self._theta["node"]
        self.weights_alpha = self._alpha["node"]
        # omega_alpha * int_cell r^alpha dr, used for |u'|^p on each cell
        self.cell_mass_alpha = self._alpha["cell"]
        self.cell_mass_theta = self._theta["cell"]
        for arr in (self.nodes, self.widths, self.weights_theta, self.weights_alpha,
                    self.cell_mass_alpha, self.cell_mass_theta):
            arr.setflags(write=False)

    def _weights(self, s: float, om: float) -> dict:
        r = self.nodes
        a, b = r[:-1], r[1:]
        left, right = _hat_parts(a, b, s)
        node = np.zeros_like(r)
        node[:-1] += left
        node[1:] += right
        origin = r[0] ** (s + 1.0) / (s + 1.0)
        node[0] += origin
        return {"node": om * node, "left": om * left, "right": om * right,
                "cell": om * (left + right), "origin": om * origin}

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @property
    def cell_left_theta(self) -> np.ndarray:
        return self._theta["left"]

    @property
    def cell_right_theta(self) -> np.ndarray:
        return self._theta["right"]

    @property
    def origin_mass_theta(self) -> float:
        return float(self._theta["origin"])

    def scaled(self, factor: float) -> "RadialGrid":
        """Grid with every node multiplied by ``factor``."""
        if not factor > 0:
            raise DomainError("scale factor must be positive")
        return RadialGrid(self.nodes * factor, self.params, self.grading)

    def with_params(self, params: MeasureParams) -> "RadialGrid":
        return RadialGrid(self.nodes, params, self.grading)

    def moment(self, k: float, weight: str = "theta") -> float:
        """int_0^{r_out} r^k dlambda from the per-cell power moments."""
        s, om = self._exponent(weight)
        r = self.nodes
        cells = power_moment(r[:-1], r[1:], s + k).sum()
        return om * (cells + r[0] ** (s + k + 1.0) / (s + k + 1.0))

    def monomial_residual(self, k: float, weight: str = "theta") -> float:
        s, om = self._exponent(weight)
        exact = om * self.r_out ** (s + k + 1.0) / (s + k + 1.0)
        return abs(self.moment(k, weight) - exact) / exact

    def _exponent(self, weight: str) -> tuple[float, float]:
        if weight == "theta":
            return self.params.theta, self.params.omega_theta
        if weight == "alpha":
            return self.params.alpha, self.params.omega_alpha
        raise DomainError(f"unknown weight {weight!r}")

    def spec(self) -> dict:
        return {"n_nodes": int(self.n_nodes), "grading": self.grading, "r_out": self.r_out,
                "r_min": float(self.nodes[0]),
                "monomial_residual": max(self.monomial_residual(k) for k in range(4))}

    def __repr__(self) -> str:
        return (f"RadialGrid(n={self.n_nodes}, r_min={self.nodes[0]:.3g}, "
                f"r_out={self.r_out:g}, grading={self.grading!r})")


def _hybrid_nodes(r_min: float, r_out: float, n: int) -> np.ndarray:
    n_geo = n // 2
    n_uni = n - n_geo

    # switch radius where the geometric spacing equals the uniform spacing
    def mismatch(ls):
        rs = math.exp(ls)
        return rs * math.log(rs / r_min) / (n_geo - 1) - (r_out - rs) / n_uni

    lo, hi = math.log(r_min) + 1e-9, math.log(r_out) - 1e-9
    if mismatch(lo) * mismatch(hi) < 0:
        rs = math.exp(optimize.brentq(mismatch, lo, hi, xtol=1e-14))
    else:
        rs = r_out / 10.0
    geo = np.geomspace(r_min, rs, n_geo)
    uni = np.linspace(rs, r_out, n_uni + 1)[1:]
    return np.concatenate([geo, uni])


def make_grid(params: MeasureParams, r_out: float, n_nodes: int, grading: str = "geometric",
              r_min: float | None = None) -> RadialGrid:
    """Build a graded grid on (0, r_out].

    ``geometric`` and ``hybrid`` start at ``r_min`` (default r_out * 1e-8);
    ``uniform`` uses the nodes r_out * i / n, i = 1..n.
    """
    r_out = float(r_out)
    if not (math.isfinite(r_out) and r_out > 0):
        raise DomainError(f"r_out must be positive, got {r_out!r}")
    n = int(n_nodes)
    if n < 16:
        raise DomainError(f"need at least 16 nodes, got {n_nodes!r}")
    if grading not in GRADINGS:
        raise DomainError(f"unknown grading {grading!r}")
    if r_min is None:
        r_min = r_out * R_MIN_FACTOR
    if not 0 < r_min < r_out:
        raise DomainError("r_min must lie in (0, r_out)")
    if grading == "uniform":
        nodes = r_out * np.arange(1, n + 1) / n
    elif grading == "geometric":
        nodes = np.geomspace(r_min, r_out, n)
    else:
        nodes = _hybrid_nodes(r_min, r_out, n)
    nodes[-1] = r_out
    return RadialGrid(nodes, params, grading)


def _check_samples(f, grid: RadialGrid) -> np.ndarray:
    f = np.asarray(f, dtype=float)
    if f.shape != grid.nodes.shape:
        raise InvalidDataError(f"expected {grid.n_nodes} samples, got shape {f.shape}")
    if not np.all(np.isfinite(f)):
        raise InvalidDataError("samples contain NaN or inf")
    return f


def integrate_theta(f, grid: RadialGrid) -> float:
    """lambda_theta integral of the piecewise-linear interpolant of the samples ``f``."""
    return float(grid.weights_theta @ _check_samples(f, grid))


def integrate_alpha(f, grid: RadialGrid) -> float:
    return float(grid.weights_alpha @ _check_samples(f, grid))


def cumulative_theta(f, grid: RadialGrid) -> np.ndarray:
    """int_0^{r_i} f dlambda_theta at every node, for the interpolant of ``f``."""
    f = _check_samples(f, grid)
    cells = grid.cell_left_theta * f[:-1] + grid.cell_right_theta * f[1:]
    out = np.empty_like(f)
    out[0] = grid.origin_mass_theta * f[0]
    out[1:] = out[0] + np.cumsum(cells)
    return out


def integrate_callable(f: Callable[[np.ndarray], np.ndarray], grid: RadialGrid,
                       weight: str = "theta", breakpoints: Iterable[float] = ()) -> float:
    """int_0^{r_out} f dlambda by 8-point Gauss-Legendre on every cell.

    Cells containing one of ``breakpoints`` are split there, so integrands
    with kinks at known radii stay resolved.  The origin cell is integrated
    in the variable r^{s+1}, which removes the r^s weight.
    """
    s, om = grid._exponent(weight)
    r = grid.nodes
    edges = np.union1d(r, [b for b in breakpoints if r[0] < b < r[-1]])
    a, b = edges[:-1], edges[1:]
    h = b - a
    pts = a[:, None] + h[:, None] * _GL_T[None, :]
    vals = np.asarray(f(pts), dtype=float) * pts ** s
    total = float((vals @ _GL_W) @ h)
    # origin cell: r = r0 * u^{1/(s+1)}
    r0 = r[0]
    u = _GL_T
    inner = np.asarray(f(r0 * u ** (1.0 / (s + 1.0))), dtype=float)
    total += r0 ** (s + 1.0) / (s + 1.0) * float(inner @ _GL_W)
    if not math.isfinite(total):
        raise InvalidDataError("integrand produced NaN or inf")
    return om * total


def dilation_check(f: Callable[[np.ndarray], np.ndarray], tau: float, grid: RadialGrid,
                   remap: bool = True) -> float:
    """|int f(tau r) dlambda_theta - tau^{-(theta+1)} int f dlambda_theta|.

    With ``remap`` the right side is evaluated on the grid scaled by tau, so
    both sides cover (0, tau r_out) with matching sample points.  Without it
    the right side uses the grid itself, which is only meaningful when f is
    negligible outside the smaller of the two intervals.
    """
    tau = float(tau)
    if not tau > 0:
        raise DomainError("tau must be positive")
    lhs = integrate_callable(lambda r: f(tau * r), grid)
    other = grid.scaled(tau) if remap else grid
    rhs = tau ** (-(grid.params.theta + 1.0)) * integrate_callable(f, other)
    return abs(lhs - rhs)
