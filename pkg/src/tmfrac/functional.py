"""The enhanced Trudinger-Moser functional and its constrained maximization.

    AD(u) = int phi_p( mu (1 + eta ||u||_{L^p_theta}^p)^{1/(p-1)} |u|^{p/(p-1)} ) dlambda_theta

taken over radial profiles with ||u||^p = ||u||_{L^p_theta}^p + ||u'||_{L^p_alpha}^p = 1.
Everything is discretized on the node values of a RadialGrid with the same
weights as ``radial``; gradients are exact derivatives of the discrete
functionals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg, optimize
from scipy.special import logsumexp

from ._version import version_string
from .errors import DomainError, InvalidDataError, TruncationError
from .measure import MeasureParams, RadialGrid, phi_order
from .radial import (RadialProfile, decreasing_rearrange, grad_energy, lq_energy,
                     normalize, scale)

EXP_MAX = 709.0


# -- phi_p -------------------------------------------------------------------

def _phi_order_k(t: np.ndarray, k0: int) -> np.ndarray:
    """e^t - sum_{k<k0} t^k/k! for t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("phi_p is evaluated at t >= 0 only")
    if np.any(t > EXP_MAX):
        raise OverflowError("phi_p argument beyond the exponential range")
    out = np.empty_like(t)
    small = t < 1.0
    tb = t[~small]
    head = np.zeros_like(tb)
    term = np.ones_like(tb)
    for k in range(k0):
        head += term
        term = term * tb / (k + 1)
    out[~small] = np.exp(tb) - head
    ts = t[small]
    if ts.size:
        term = ts ** k0 / math.factorial(k0)
        acc = term.copy()
        for j in range(k0 + 1, k0 + 40):
            term = term * ts / j
            acc += term
            if np.all(term <= 1e-17 * np.maximum(acc, 1e-300)):
                break
        out[small] = acc
    return out


def phi_p(t, p: float):
    """e^t - sum_{k<k0} t^k/k!, k0 = smallest integer >= p-1.

    Direct formula for t >= 1, power series for t < 1.
    """
    arr = _phi_order_k(np.atleast_1d(np.asarray(t, dtype=float)), phi_order(p))
    return float(arr[0]) if np.ndim(t) == 0 else arr


def phi_p_prime(t, p: float):
    k0 = phi_order(p)
    arr = _phi_order_k(np.atleast_1d(np.asarray(t, dtype=float)), max(k0 - 1, 0))
    return float(arr[0]) if np.ndim(t) == 0 else arr


# -- parameters and reports ----------------------------------------------------

@dataclass(frozen=True)
class FunctionalParams:
    mu: float
    eta: float
    p: float = 2.0
    k0: int = field(init=False)

    def __post_init__(self):
        if not (math.isfinite(self.mu) and self.mu > 0):
            raise DomainError(f"mu must be positive, got {self.mu!r}")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"eta must lie in [0, 1], got {self.eta!r}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "eta", float(self.eta))
        object.__setattr__(self, "p", float(self.p))
        object.__setattr__(self, "k0", phi_order(self.p))

    @classmethod
    def from_fraction(cls, mu_frac: float, eta: float, params: MeasureParams) -> "FunctionalParams":
        return cls(mu_frac * params.mu_crit, eta, params.p)

    def supercritical(self, params: MeasureParams) -> bool:
        return self.eta >= 1.0 or self.mu > params.mu_crit * (1 + 1e-12)

    def as_dict(self) -> dict:
        return {"mu": self.mu, "eta": self.eta, "p": self.p, "k0": self.k0}


@dataclass
class SolveOptions:
    tol: float = 1e-7
    max_iter: int = 50_000
    r_probe: float = 1.0
    init: RadialProfile | None = None
    init_width: float = 1.0
    allow_supercritical: bool = False
    rho: Sequence[float] = (1.0, 2.0, 4.0)
    moser_n: Sequence[int] = (10, 20, 30, 40, 50, 60)
    seed: int = 0


@dataclass
class SolveReport:
    value: float
    iterations: int
    grad_residual: float
    concentration_fraction: float
    vanishing_indicator: float
    converged: bool
    maximizer: RadialProfile | None
    blowup_detected: bool = False
    value_trace: list = field(default_factory=list)
    status: str = ""
    extra: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {
            "value": self.value,
            "iterations": self.iterations,
            "grad_residual": self.grad_residual,
            "concentration_fraction": self.concentration_fraction,
            "vanishing_indicator": self.vanishing_indicator,
            "converged": self.converged,
            "maximizer": None if self.maximizer is None else {
                "r": [float(x) for x in self.maximizer.r],
                "v": [float(x) for x in self.maximizer.values]},
            "blowup_detected": self.blowup_detected,
            "status": self.status,
            "value_trace": [float(x) for x in self.value_trace],
            "provenance": self.provenance,
        }
        d.update(self.extra)
        return d


# -- discrete functional on arrays ------------------------------------------

class _Discrete:
    """Node-value versions of the norms and of AD, with exact gradients."""

    def __init__(self, grid: RadialGrid, p: float):
        self.grid = grid
        self.p = p
        self.w = np.asarray(grid.weights_theta)
        self.cm = np.asarray(grid.cell_mass_alpha)
        self.h = np.asarray(grid.widths)

    def lp(self, u):
        return float(self.w @ u ** self.p)

    def lp_grad(self, u):
        return self.p * self.w * u ** (self.p - 1.0)

    def dp(self, u):
        return float(self.cm @ np.abs(np.diff(u) / self.h) ** self.p)

    def dp_grad(self, u):
        s = np.diff(u) / self.h
        flux = self.p * self.cm * np.abs(s) ** (self.p - 1.0) * np.sign(s) / self.h
        g = np.zeros_like(u)
        g[:-1] -= flux
        g[1:] += flux
        return g

    def norm_p(self, u):
        return self.lp(u) + self.dp(u)

    def ad(self, u, fp: FunctionalParams):
        p = self.p
        kappa = fp.mu * (1.0 + fp.eta * self.lp(u)) ** (1.0 / (p - 1.0))
        t = kappa * u ** (p / (p - 1.0))
        return float(self.w @ _phi_order_k(t, fp.k0))

    def ad_delta(self, u, v, fp: FunctionalParams):
        """AD(v) - AD(u) without subtracting the two totals.

        Each node contributes phi(t_v) - phi(t_u), with the exponential part
        written as e^{t_u} expm1(t_v - t_u) and t_v - t_u assembled from
        differences of u and v, so the result keeps its relative accuracy
        when the two values agree to many digits.
        """
        p = self.p
        q = p / (p - 1.0)
        du = v - u
        # relative form only where v/u stays away from 0
        pos = (u > 0) & (np.abs(du) < 0.5 * u)

        def power_diff(a):
            # v^a - u^a
            out = v ** a - u ** a
            out[pos] = u[pos] ** a * np.expm1(a * np.log1p(du[pos] / u[pos]))
            return out

        dA = float(self.w @ power_diff(p))
        A = self.lp(u)
        e = 1.0 / (p - 1.0)
        k_u = fp.mu * (1.0 + fp.eta * A) ** e
        k_v = k_u * math.exp(e * math.log1p(fp.eta * dA / (1.0 + fp.eta * A)))
        dk = k_u * math.expm1(e * math.log1p(fp.eta * dA / (1.0 + fp.eta * A)))
        uq = u ** q
        tu = k_u * uq
        dt = k_v * power_diff(q) + dk * uq
        tv = np.maximum(tu + dt, 0.0)
        if np.any(tv > EXP_MAX):
            raise OverflowError("phi_p argument beyond the exponential range")
        diff = np.exp(tu) * np.expm1(dt)
        term_u = np.ones_like(tu)
        term_v = np.ones_like(tv)
        for k in range(1, fp.k0):
            term_u = term_u * tu / k
            term_v = term_v * tv / k
            diff -= term_v - term_u
        small = np.maximum(tu, tv) < 1.0
        if np.any(small):
            diff[small] = _phi_order_k(tv[small], fp.k0) - _phi_order_k(tu[small], fp.k0)
        return float(self.w @ diff)

    def ad_grad(self, u, fp: FunctionalParams):
        p = self.p
        q = p / (p - 1.0)
        A = self.lp(u)
        base = 1.0 + fp.eta * A
        kappa = fp.mu * base ** (1.0 / (p - 1.0))
        uq = u ** q
        d1 = _phi_order_k(kappa * uq, max(fp.k0 - 1, 0))
        g = self.w * d1 * kappa * q * u ** (q - 1.0)
        # coupling through kappa(A)
        dkappa_dA = fp.mu * fp.eta / (p - 1.0) * base ** (1.0 / (p - 1.0) - 1.0)
        g += float(self.w @ (d1 * uq)) * dkappa_dA * self.lp_grad(u)
        return g

    def sphere_grad(self, u, fp: FunctionalParams):
        """Gradient of u -> AD(u / ||u||) at a point with ||u|| = 1."""
        gF = self.ad_grad(u, fp)
        gN = self.lp_grad(u) + self.dp_grad(u)
        # d/du ||u|| = gN / (p ||u||^{p-1}); with ||u|| = 1 this is gN / p
        return gF - (gF @ u) * gN / (self.p * self.norm_p(u))

    def normalize(self, u):
        return u / self.norm_p(u) ** (1.0 / self.p)


class _Metric:
    """Banded Cholesky of K + M with u(r_out) pinned.

    With ``u`` given and p != 2 the cells and nodes are weighted by
    |u'|^{p-2} and u^{p-2}, the second variation of the p-norm at u, so the
    step is close to a Newton step for the constraint geometry.
    """

    def __init__(self, grid: RadialGrid, u=None, p: float = 2.0):
        cm = np.asarray(grid.cell_mass_alpha)
        h = np.asarray(grid.widths)
        w = np.asarray(grid.weights_theta)
        c = cm / h ** 2
        if u is not None and p != 2.0:
            s = np.abs(np.diff(u)) / h
            c = c * (p - 1.0) * np.maximum(s, 1e-3 * s.max()) ** (p - 2.0)
            w = w * (p - 1.0) * np.maximum(u, 1e-3 * u.max()) ** (p - 2.0)
        n = grid.n_nodes - 1          # last node fixed at zero
        # free node i touches cells i-1 and i; cell n-1 ends at the pinned node
        diag = w[:n] + c[:n]
        diag[1:] += c[: n - 1]
        off = -c[: n - 1]
        ab = np.zeros((2, n))
        ab[0, 1:] = off
        ab[1] = diag
        self.n = n
        self.chol = linalg.cholesky_banded(ab, lower=False)

    def solve(self, g):
        out = np.zeros_like(g)
        out[: self.n] = linalg.cho_solve_banded((self.chol, False), g[: self.n])
        return out


# -- public evaluation ---------------------------------------------------------

@dataclass
class ADEvaluation:
    value: float
    divergent: bool
    partial: float
    tail_bound: float


def ad_evaluate(u: RadialProfile, fp: FunctionalParams, params: MeasureParams | None = None) -> ADEvaluation:
    """AD at u, with overflow handling and the contribution of (r_out/2, r_out].

    The profile vanishes beyond its last node, so the truncated integral is
    the whole integral of the sampled object; ``tail_bound`` reports how much
    of it sits in the outer half of the domain.
    """
    params = params or u.params
    d = _Discrete(u.grid, params.p)
    v = u.values
    p = params.p
    kappa = fp.mu * (1.0 + fp.eta * d.lp(v)) ** (1.0 / (p - 1.0))
    t = kappa * v ** (p / (p - 1.0))
    finite = t <= EXP_MAX
    vals = np.zeros_like(t)
    vals[finite] = _phi_order_k(t[finite], fp.k0)
    partial = float(d.w[finite] @ vals[finite])
    if not np.all(finite):
        return ADEvaluation(math.inf, True, partial, math.inf)
    outer = u.r > 0.5 * u.grid.r_out
    return ADEvaluation(partial, False, partial, float(d.w[outer] @ vals[outer]))


def ad_value(u: RadialProfile, fp: FunctionalParams, params: MeasureParams | None = None) -> float:
    return ad_evaluate(u, fp, params).value


def ad_gradient(u: RadialProfile, fp: FunctionalParams, params: MeasureParams | None = None) -> np.ndarray:
    """Derivative of ad_value with respect to each node value."""
    params = params or u.params
    return _Discrete(u.grid, params.p).ad_grad(u.values, fp)


def phi_tail(u: RadialProfile, fp: FunctionalParams, R: float) -> float:
    """int_R^{r_out} phi_p(mu (1+eta||u||_p^p)^{1/(p-1)} |u|^{p/(p-1)}) dlambda_theta over nodes r >= R."""
    d = _Discrete(u.grid, u.params.p)
    p = u.params.p
    kappa = fp.mu * (1.0 + fp.eta * d.lp(u.values)) ** (1.0 / (p - 1.0))
    sel = u.r >= R
    return float(d.w[sel] @ _phi_order_k(kappa * u.values[sel] ** (p / (p - 1.0)), fp.k0))


def concentration_diagnostics(u: RadialProfile, params: MeasureParams | None = None,
                              r_probe: float = 1.0) -> tuple[float, float]:
    """(share of ||u'||_p^p on (0, r_probe), share of ||u||_p^p on (r_probe, r_out)).

    A profile with no derivative mass reports 0 for the first entry; see
    ``gradient_mass_degenerate``.
    """
    params = params or u.params
    if not 0 < r_probe < u.grid.r_out:
        raise DomainError("r_probe must lie in (0, r_out)")
    p = params.p
    cells = u.grid.cell_mass_alpha * np.abs(u.slopes()) ** p
    mid = 0.5 * (u.r[:-1] + u.r[1:])
    total_d = cells.sum()
    conc = float(cells[mid < r_probe].sum() / total_d) if total_d > 0 else 0.0
    mass = u.grid.weights_theta * u.values ** p
    total_m = mass.sum()
    van = float(mass[u.r > r_probe].sum() / total_m) if total_m > 0 else 0.0
    return conc, van


def gradient_mass_degenerate(u: RadialProfile) -> bool:
    return not grad_energy(u) > 0


# -- maximization ----------------------------------------------------------------

def _initial_profile(grid: RadialGrid, width: float) -> np.ndarray:
    r = grid.nodes
    v = np.exp(-(r / width) ** 2)
    v = v - v[-1]
    return np.maximum(v, 0.0)


def _project(d: _Discrete, v: np.ndarray) -> np.ndarray:
    v = np.maximum(v, 0.0)
    v[-1] = 0.0
    if np.any(np.diff(v) > 0):
        v = decreasing_rearrange(RadialProfile(d.grid, v)).values.copy()
    return d.normalize(v)


def _residual(d: _Discrete, metric: _Metric, u, fp) -> tuple[float, np.ndarray]:
    g = d.sphere_grad(u, fp)
    g[-1] = 0.0
    G = metric.solve(g)
    val = d.ad(u, fp)
    return math.sqrt(max(g @ G, 0.0)) / max(abs(val), 1e-300), G


def maximize_ad(fp: FunctionalParams, params: MeasureParams, grid: RadialGrid,
                options: SolveOptions | None = None) -> SolveReport:
    """Projected gradient ascent for AD on the unit sphere of the full norm.

    Each step moves along the gradient taken in the p=2 energy metric, clips
    at zero, rearranges to a non-increasing profile and renormalizes.  The
    step starts at 1 and is halved until the functional increases.  For
    eta = 1 with mu = mu_crit (or any supercritical pair) ascent is replaced
    by the Moser-family lower bound, which grows without limit in rho.
    """
    opts = options or SolveOptions()
    if fp.supercritical(params):
        if not opts.allow_supercritical:
            raise DomainError("supercritical (mu, eta); set allow_supercritical to run the certificate")
        return _supercritical_report(fp, params, grid, opts)

    d = _Discrete(grid, params.p)
    metric = _Metric(grid)
    if opts.init is not None:
        u0 = np.interp(grid.nodes, opts.init.r, opts.init.values, right=0.0)
    else:
        u0 = _initial_profile(grid, opts.init_width)
    if not np.any(u0 > 0):
        raise InvalidDataError("the zero profile cannot be normalized")
    u = _project(d, u0.astype(float))
    if params.p != 2.0:
        metric = _Metric(grid, u, params.p)
    val = d.ad(u, fp)
    trace = [val]
    res, G = _residual(d, metric, u, fp)
    it = 0
    status = "max_iter"
    while it < opts.max_iter:
        if res <= opts.tol:
            status = "converged"
            break
        s = 1.0
        accepted = False
        while s > 1e-14:
            cand = _project(d, u + s * G)
            gain = d.ad_delta(u, cand, fp)
            if gain > 0:
                accepted = True
                break
            s *= 0.5
        it += 1
        if not accepted:
            status = "stalled"
            break
        # the trace accumulates exact gains so it is monotone by construction
        u, val = cand, val + gain
        trace.append(val)
        if params.p != 2.0:
            metric = _Metric(grid, u, params.p)
        res, G = _residual(d, metric, u, fp)
    converged = res <= opts.tol
    if converged:
        status = "converged"
    val = d.ad(u, fp)
    prof = RadialProfile(grid, u)
    conc, van = concentration_diagnostics(prof, params, min(opts.r_probe, 0.5 * grid.r_out))
    return SolveReport(value=val, iterations=it, grad_residual=res,
                       concentration_fraction=conc, vanishing_indicator=van,
                       converged=converged, maximizer=prof, value_trace=_thin(trace),
                       status=status, provenance=_provenance(fp, params, grid))


def _provenance(fp, params, grid) -> dict:
    return {"version": version_string(), "params": params.as_dict(),
            "functional": fp.as_dict(), "grid": grid.spec()}


def _thin(trace: list, keep: int = 200) -> list:
    if len(trace) <= keep:
        return list(trace)
    idx = np.unique(np.linspace(0, len(trace) - 1, keep).astype(int))
    return [trace[i] for i in idx]


def _supercritical_report(fp, params, grid, opts) -> SolveReport:
    from .asymptotics import sharpness_certificate

    trace = []
    cert_rows = []
    for rho in opts.rho:
        for n in opts.moser_n:
            c = sharpness_certificate(n, rho, params, None)
            trace.append(c)
            cert_rows.append({"n": int(n), "rho": float(rho), "certificate": c,
                              "ball_limit": params.omega_theta * rho ** (params.theta + 1) / (params.theta + 1)})
    last = [row for row in cert_rows if row["n"] == max(opts.moser_n)]
    grows = all(b["certificate"] > a["certificate"] for a, b in zip(last, last[1:]))
    exceeds = all(row["certificate"] > 0.9 * row["ball_limit"] for row in last)
    blowup = bool(grows and exceeds)
    return SolveReport(value=max(trace), iterations=0, grad_residual=math.nan,
                       concentration_fraction=1.0, vanishing_indicator=0.0, converged=False,
                       maximizer=None, blowup_detected=blowup, value_trace=trace,
                       status="blowup_detected" if blowup else "certificate_inconclusive",
                       extra={"certificate": cert_rows}, provenance=_provenance(fp, params, grid))


# -- B_{2,theta} -----------------------------------------------------------------

def b2_quotient(u: RadialProfile) -> float:
    """||u'||_{L^2_1}^2 ||u||_{L^2_theta}^2 / ||u||_{L^4_theta}^4."""
    a4 = lq_energy(u, 4.0)
    if not a4 > 0:
        raise InvalidDataError("quotient undefined for a profile with zero L^4 norm")
    return grad_energy(u, 2.0) * lq_energy(u, 2.0) / a4


@dataclass
class B2Result:
    constant: float
    quotient: float
    minimizer: RadialProfile
    iterations: int
    converged: bool
    starts: list


def _b2_descent(grid: RadialGrid, u0: np.ndarray, tol: float, max_iter: int):
    """Minimize the log quotient by L-BFGS in energy-whitened coordinates.

    The quotient is invariant under dilations, a flat direction that stalls
    plain descent.  Adding (log D - log A2)^2 pins the dilation where the
    two norms balance without moving the minimum value.  Coordinates are
    y = R u with R^T R the p = 2 energy metric.
    """
    d = _Discrete(grid, 2.0)
    metric = _Metric(grid)
    w = d.w
    R, m = metric.chol, metric.n
    RT = np.vstack([R[1], np.r_[R[0, 1:], 0.0]])       # R^T in lower banded form

    def to_u(y):
        u = np.zeros(grid.n_nodes)
        u[:m] = linalg.solve_banded((0, 1), R, y)
        return u

    def fg(y):
        u = to_u(y)
        D, A2, A4 = d.dp(u), float(w @ u ** 2), float(w @ u ** 4)
        gauge = math.log(D / A2)
        f = math.log(D) + math.log(A2) - math.log(A4) + gauge ** 2
        gD, g2 = d.dp_grad(u) / D, 2 * w * u / A2
        gu = gD + g2 - 4 * w * u ** 3 / A4 + 2 * gauge * (gD - g2)
        return f, linalg.solve_banded((1, 0), RT, gu[:m])

    u0 = np.maximum(np.asarray(u0, dtype=float), 0.0)
    u0[-1] = 0.0
    y0 = R[1] * u0[:m] + np.r_[R[0, 1:] * u0[1:m], 0.0]
    res = optimize.minimize(fg, y0, jac=True, method="L-BFGS-B",
                            options={"maxiter": max_iter, "gtol": 1e-14, "ftol": 1e-16, "maxcor": 30})
    u = np.abs(to_u(res.x))
    D, A2, A4 = d.dp(u), float(w @ u ** 2), float(w @ u ** 4)
    resid = float(np.linalg.norm(fg(R[1] * u[:m] + np.r_[R[0, 1:] * u[1:m], 0.0])[1]))
    return d.normalize(u), D * A2 / A4, int(res.nit), resid <= tol


def b2_solve(theta: float, grid: RadialGrid, tol: float = 1e-9, max_iter: int = 20_000,
             starts: Sequence[str] = ("gaussian", "ramp")) -> B2Result:
    if grid.params.p != 2.0 or grid.params.theta != float(theta):
        raise DomainError("b2 needs a grid built for p = 2 and the requested theta")
    r = grid.nodes
    inits = {"gaussian": np.exp(-r ** 2), "ramp": np.clip(1.0 - r / min(4.0, grid.r_out), 0, None),
             "exponential": np.exp(-r)}
    best, rows = None, []
    for name in starts:
        u, q, it, conv = _b2_descent(grid, inits[name], tol, max_iter)
        rows.append({"start": name, "quotient": q, "iterations": it, "converged": conv})
        if best is None or q < best[1]:
            best = (u, q, it, conv)
    u, q, it, conv = best
    return B2Result(1.0 / q, q, RadialProfile(grid, u), it, conv, rows)


def b2_constant(theta: float, grid: RadialGrid, options: dict | None = None) -> float:
    """B_{2,theta}, the reciprocal of the infimum of the scale-invariant quotient."""
    return b2_solve(theta, grid, **(options or {})).constant


def p2_attainment_threshold(eta: float, theta: float, grid: RadialGrid, b2: float | None = None) -> float:
    """2(1+2 eta) / ((1+eta)^2 B_{2,theta})."""
    if not 0.0 <= eta < 1.0:
        raise DomainError("eta must lie in [0, 1)")
    B = b2_constant(theta, grid) if b2 is None else b2
    return 2.0 * (1.0 + 2.0 * eta) / ((1.0 + eta) ** 2 * B)


# -- vanishing curve -------------------------------------------------------------

def vanishing_curve(u: RadialProfile, fp: FunctionalParams, t: float) -> tuple[float, float]:
    """(h(t), xi_t) along v_t = xi_t t^{1/p} u(t^{1/(theta+1)} r).

    For integer p, AD(v_t) >= mu^{p-1}/(p-1)! h(t) and h(0+) = 1 + eta.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    p = u.params.p
    A = lq_energy(u, p)
    Q = lq_energy(u, p * p / (p - 1.0))
    xi = (t + (1.0 - t) * A) ** (-1.0 / p)
    core = xi ** p + fp.eta * xi ** (2 * p) * A
    h = core * A + fp.mu / p * core ** (p / (p - 1.0)) * Q * t ** (1.0 / (p - 1.0))
    return h, xi


def vanishing_profile(u: RadialProfile, t: float) -> RadialProfile:
    """The normalized curve point xi_t t^{1/p} u(t^{1/(theta+1)} r)."""
    p, theta = u.params.p, u.params.theta
    return normalize(scale(u, t ** (1.0 / p), t ** (1.0 / (theta + 1.0))))


def vanishing_slope_p2(u: RadialProfile, fp: FunctionalParams) -> float:
    """Limit of h'(t) as t -> 0 for p = 2."""
    a2 = lq_energy(u, 2.0)
    return (0.5 * fp.mu * (1 + fp.eta) ** 2 * lq_energy(u, 4.0) / a2 ** 2
            - (1 + 2 * fp.eta) * grad_energy(u, 2.0) / a2)


# -- nonexistence (p = 2) ----------------------------------------------------------

@dataclass
class SeriesResult:
    value: float
    tail_bound: float
    terms: int


def _log_moments(u: RadialProfile, j_max: int) -> np.ndarray:
    """log ||u||_{2j}^{2j} for j = 1..j_max."""
    w = u.grid.weights_theta
    pos = u.values > 0
    lw = np.log(w[pos])
    lu = np.log(u.values[pos])
    j = np.arange(1, j_max + 1)
    return logsumexp(lw[None, :] + 2.0 * j[:, None] * lu[None, :], axis=1)


def _check_p2(u: RadialProfile, theta: float | None):
    if u.params.p != 2.0:
        raise DomainError("the dilation series is defined for p = 2")
    if theta is not None and float(theta) != u.params.theta:
        raise DomainError("theta does not match the profile's grid")


def ishiwata_value(u: RadialProfile, mu: float, eta: float, tau: float = 1.0,
                   j_max: int = 200) -> SeriesResult:
    """J(v_tau) from the moment series, v_tau the normalized dilation of u."""
    _check_p2(u, None)
    a, b = grad_energy(u, 2.0), lq_energy(u, 2.0)
    D = tau * a + b
    logS = _log_moments(u, j_max)
    j = np.arange(1, j_max + 1)
    base = 1.0 + eta * b / D
    logT = (j * math.log(mu) - np.array([math.lgamma(k + 1) for k in j])
            + j * math.log(base) + (j - 1) * math.log(tau) + logS - j * math.log(D))
    total = float(np.exp(logT).sum())
    umax2 = float(u.values.max() ** 2) * tau / D
    rho = mu * base * umax2 / (j_max + 1)
    tail = math.inf if rho >= 1 else float(np.exp(logT[-1])) * rho / (1 - rho)
    return SeriesResult(total, tail, j_max)


def ishiwata_derivative_series(u: RadialProfile, mu: float, eta: float,
                               j_max: int = 200) -> SeriesResult:
    _check_p2(u, None)
    a, b = grad_energy(u, 2.0), lq_energy(u, 2.0)
    if abs(a + b - 1.0) > 1e-9:
        raise DomainError("the derivative formula needs a normalized profile")
    logS = _log_moments(u, j_max)
    j = np.arange(1, j_max + 1, dtype=float)
    base = 1.0 + eta * b
    logc = (j * math.log(mu) - np.array([math.lgamma(k + 1) for k in j])
            + (j - 1) * math.log(base) + logS)
    bracket = -j * eta * a * b + base * (j - 1.0 - j * a)
    terms = np.exp(logc) * bracket
    total = float(terms.sum())
    # |term_j| <= mu^j/j! base^{j-1} b umax^{2j-2} j K; the bound's ratio is <= rho
    umax2 = float(u.values.max() ** 2)
    K = eta * a * b + base * (1.0 + a)
    rho = mu * base * umax2 / (j_max + 1)
    if rho >= 1:
        tail = math.inf
    else:
        jm = j_max + 1
        log_bound = (jm * math.log(mu) - math.lgamma(jm + 1) + (jm - 1) * math.log(base)
                     + math.log(b) + (jm - 1) * math.log(max(umax2, 1e-300)) + math.log(jm * K))
        tail = math.exp(log_bound) / (1 - rho)
    scale_ = float(np.abs(terms).sum())
    if tail > 1e-8 * max(scale_, 1e-300):
        raise TruncationError(f"series tail bound {tail:.3e} exceeds 1e-8 of {scale_:.3e}; raise j_max")
    return SeriesResult(total, tail, j_max)


def ishiwata_derivative(u: RadialProfile, mu: float, eta: float, theta: float | None = None,
                        j_max: int = 200) -> float:
    """d/dtau J(v_tau) at tau = 1 for a normalized p = 2 profile.

    v_tau = u_tau / ||u_tau|| with u_tau(r) = tau^{1/2} u(tau^{1/(theta+1)} r), and
    J(v) = int (exp(mu (1 + eta ||v||_2^2) v^2) - 1) dlambda_theta.
    """
    _check_p2(u, theta)
    return ishiwata_derivative_series(u, mu, eta, j_max).value


def dilation_family(u: RadialProfile, tau: float) -> RadialProfile:
    """v_tau for p = 2: normalize(tau^{1/2} u(tau^{1/(theta+1)} r))."""
    return normalize(scale(u, math.sqrt(tau), tau ** (1.0 / (u.params.theta + 1.0))))


def nonexistence_bound(profiles: Sequence[RadialProfile], theta: float) -> dict:
    """Estimate of min{mu_1/4, 1/C} from the family-wise supremum C_{gamma,theta}.

    C = 4/gamma^2 C_{gamma,theta} sum_j (j+2)(2/3)^j = 48 C_{gamma,theta}/gamma^2 with
    gamma = 3 mu_1/4.  The supremum is replaced by a maximum over ``profiles``,
    so the returned bound is an optimistic (upper) estimate of the true one.
    """
    params = profiles[0].params
    mu1 = params.mu_crit
    gam = 0.75 * mu1
    best = 0.0
    for u in profiles:
        a, b = grad_energy(u, 2.0), lq_energy(u, 2.0)
        fp = FunctionalParams(gam / a, 0.0, 2.0)
        # int (e^{gamma u^2/a} - 1) = AD with mu = gamma/a, eta = 0
        ev = ad_evaluate(u, fp)
        best = max(best, a / b * ev.value)
    C = 48.0 * best / gam ** 2
    return {"mu_1": mu1, "gamma_bar": gam, "C_gamma_estimate": best, "C": C,
            "bound": min(mu1 / 4.0, 1.0 / C) if C > 0 else mu1 / 4.0}


def trial_family(grid: RadialGrid, seed: int = 0) -> list:
    """Ten normalized non-increasing profiles for the p = 2 dilation scans.

    Gaussians and exponentials of several widths, two ramps, a
    polynomial-exponential and two seeded Gaussian mixtures.
    """
    if grid.params.p != 2.0:
        raise DomainError("the trial family is built for p = 2")
    r = grid.nodes
    raw = [np.exp(-(r / s) ** 2) for s in (0.5, 1.0, 2.0)]
    raw += [np.exp(-k * r) for k in (1.0, 2.0)]
    raw += [np.clip(1.0 - r / R, 0.0, None) for R in (1.0, 3.0)]
    raw.append((1.0 + r) * np.exp(-r))
    rng = np.random.default_rng(seed)
    for _ in range(2):
        amps = rng.uniform(0.2, 1.0, 3)
        widths = rng.uniform(0.3, 3.0, 3)
        raw.append(sum(a * np.exp(-(r / s) ** 2) for a, s in zip(amps, widths)))
    out = []
    for v in raw:
        v = np.maximum(v - v[-1], 0.0)
        out.append(normalize(RadialProfile(grid, v)))
    return out
