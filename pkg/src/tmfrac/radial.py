"""Sampled radial profiles: norms, scalings, rearrangement and decay bounds.

A profile holds non-negative node values on a RadialGrid.  Derivative
energies use the cellwise slope of the piecewise-linear interpolant, which
is exact per cell.  L^q_theta norms integrate the interpolant of |u|^q with
the grid's node weights, so every norm is a fixed weighted sum of node
values and transforms exactly under the grid remap used by ``scale``.
"""

from __future__ import annotations

import csv
import json
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import DomainError, InvalidDataError
from .measure import MeasureParams, RadialGrid, make_grid


class RadialProfile:
    def __init__(self, grid: RadialGrid, values):
        v = np.array(values, dtype=float)
        if v.shape != grid.nodes.shape:
            raise InvalidDataError(f"expected {grid.n_nodes} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidDataError("profile values must be finite")
        if np.any(v < 0):
            if v.min() < -1e-12 * max(1.0, np.abs(v).max()):
                raise InvalidDataError("profile values must be non-negative")
            v = np.maximum(v, 0.0)
        v.setflags(write=False)
        self.grid = grid
        self.values = v
        self._cache: dict = {}

    @property
    def r(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def params(self) -> MeasureParams:
        return self.grid.params

    def decays(self, rel: float = 1e-6) -> bool:
        """True if u(r_out) <= rel * max u (proxy for u vanishing at infinity)."""
        vmax = self.values.max()
        return bool(self.values[-1] <= rel * vmax) if vmax > 0 else True

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.grid.widths

    def cached(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    def with_values(self, values) -> "RadialProfile":
        return RadialProfile(self.grid, values)

    def __call__(self, r) -> np.ndarray:
        """Piecewise-linear interpolant, constant on the origin cell, zero past r_out."""
        r = np.asarray(r, dtype=float)
        out = np.interp(r, self.r, self.values)
        return np.where(r > self.grid.r_out, 0.0, out)

    # -- I/O ---------------------------------------------------------------

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["r", "value"])
            for r, v in zip(self.r, self.values):
                w.writerow([repr(float(r)), repr(float(v))])

    def to_json(self, path=None) -> str:
        text = json.dumps({"r": [float(x) for x in self.r], "v": [float(x) for x in self.values]})
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, path, params: MeasureParams) -> "RadialProfile":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        r = [float(row["r"]) for row in rows]
        v = [float(row["value"]) for row in rows]
        return cls(RadialGrid(r, params), v)

    @classmethod
    def from_json(cls, source, params: MeasureParams) -> "RadialProfile":
        text = Path(source).read_text() if not str(source).lstrip().startswith("{") else source
        data = json.loads(text)
        return cls(RadialGrid(data["r"], params), data["v"])


def profile_from_function(f, grid: RadialGrid) -> RadialProfile:
    return RadialProfile(grid, np.asarray(f(grid.nodes), dtype=float))


# -- norms -----------------------------------------------------------------

def grad_energy(u: RadialProfile, p: float | None = None) -> float:
    """||u'||_{L^p_alpha}^p."""
    p = u.params.p if p is None else float(p)
    return u.cached(("grad", p), lambda: float(
        u.grid.cell_mass_alpha @ np.abs(u.slopes()) ** p))


def lq_energy(u: RadialProfile, q: float) -> float:
    """||u||_{L^q_theta}^q."""
    q = float(q)
    if q < 1:
        raise DomainError("q must be >= 1")
    return u.cached(("lq", q), lambda: float(u.grid.weights_theta @ u.values ** q))


def norm_grad(u: RadialProfile, params: MeasureParams | None = None) -> float:
    p = (params or u.params).p
    return grad_energy(u, p) ** (1.0 / p)


def norm_lq(u: RadialProfile, q: float, params: MeasureParams | None = None) -> float:
    return lq_energy(u, q) ** (1.0 / float(q))


def full_energy(u: RadialProfile, params: MeasureParams | None = None) -> float:
    """||u||^p = ||u||_{L^p_theta}^p + ||u'||_{L^p_alpha}^p."""
    p = (params or u.params).p
    return lq_energy(u, p) + grad_energy(u, p)


def full_norm(u: RadialProfile, params: MeasureParams | None = None) -> float:
    p = (params or u.params).p
    return u.cached(("full", p), lambda: full_energy(u, params) ** (1.0 / p))


def normalize(u: RadialProfile, params: MeasureParams | None = None) -> RadialProfile:
    n = full_norm(u, params)
    if not n > 0:
        raise InvalidDataError("cannot normalize the zero profile")
    return u.with_values(u.values / n)


def scale(u: RadialProfile, zeta: float, tau: float) -> RadialProfile:
    """u_tau(r) = zeta * u(tau r), carried on the grid with nodes r_i / tau."""
    zeta, tau = float(zeta), float(tau)
    if not (zeta > 0 and tau > 0):
        raise DomainError("zeta and tau must be positive")
    return RadialProfile(u.grid.scaled(1.0 / tau), zeta * u.values)


# -- rearrangement -----------------------------------------------------------

def rearrangement_distribution(u: RadialProfile) -> tuple[np.ndarray, np.ndarray]:
    """(value, node mass) pairs sorted by decreasing value, ties in radial order."""
    order = np.argsort(-u.values, kind="stable")
    return u.values[order], u.grid.weights_theta[order]


def decreasing_rearrange(u: RadialProfile) -> RadialProfile:
    """Non-increasing rearrangement re-accumulated onto the same grid.

    Sorted (value, mass) pairs define a non-increasing function of the
    enclosed mass.  Each node takes the value of that function at the
    centre of its own mass interval, interpolated linearly between the
    centres of the sorted pairs.  Already non-increasing input is returned
    unchanged.
    """
    vals, masses = rearrangement_distribution(u)
    m = u.grid.weights_theta
    c_sorted = np.cumsum(masses) - 0.5 * masses
    c_nodes = np.cumsum(m) - 0.5 * m
    if np.array_equal(vals, u.values):
        return u
    return u.with_values(np.interp(c_nodes, c_sorted, vals))


# -- pointwise decay bound ---------------------------------------------------

def decay_exponent(params: MeasureParams) -> float:
    return (params.alpha + params.theta * (params.p - 1.0)) / params.p


def bound_ratio(u: RadialProfile, params: MeasureParams | None = None) -> float:
    """max_r u(r)^p r^e / ||u||^p, e the decay exponent."""
    params = params or u.params
    n = full_energy(u, params)
    if n == 0:
        return 0.0
    e = decay_exponent(params)
    return float(np.max(u.values ** params.p * u.r ** e) / n)


@lru_cache(maxsize=64)
def _calibrated_constant(p: float, theta: float, convention: str) -> float:
    from .asymptotics import moser_profile  # local import: asymptotics depends on radial

    params = MeasureParams(p, theta, convention)
    grid = make_grid(params, 40.0, 2048, "geometric", r_min=1e-14)
    family = []
    for R in (0.5, 1.0, 2.0, 5.0, 10.0, 20.0):
        family.append(RadialProfile(grid, np.clip(1.0 - grid.nodes / R, 0.0, None)))
    for k in (0.5, 1.0, 2.0, 4.0):
        v = np.exp(-k * grid.nodes)
        family.append(RadialProfile(grid, v - v[-1]))
    for n in range(1, 21):
        family.append(moser_profile(n, 1.0, params, grid))
    return 2.0 * max(bound_ratio(u, params) for u in family)


def calibrate_bound_constant(params: MeasureParams) -> float:
    """Twice the largest observed ratio u^p r^e / ||u||^p over a fixed family.

    The family is ramps, decaying exponentials and Moser profiles with
    n <= 20.  This is a working constant for testing the decay estimate,
    not its sharp value.
    """
    return _calibrated_constant(params.p, params.theta, params.convention)


def pointwise_bound_margin(u: RadialProfile, params: MeasureParams | None = None,
                           constant: float | None = None) -> float:
    """min over nodes of C ||u||^p r^{-e} - u(r)^p; non-negative certifies the bound."""
    params = params or u.params
    C = calibrate_bound_constant(params) if constant is None else constant
    e = decay_exponent(params)
    n = full_energy(u, params)
    return float(np.min(C * n * u.r ** (-e) - u.values ** params.p))
