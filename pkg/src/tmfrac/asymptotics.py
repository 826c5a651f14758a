"""Explicit constructions near the critical exponent.

Moser sequences and their sharpness bound, the blow-up profile w, the
Green-type function g_eta with its constant A_eta, the threshold
(omega_theta/(theta+1)) exp(mu A_eta + gamma + Psi(p)) and the glued test
function used to beat it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy import special as _sp

from .errors import (ConvergenceError, DomainError, GlueMismatchError, GridTooCoarseError,
                     NegativeBracketError)
from .functional import FunctionalParams, ad_evaluate, phi_p
from .measure import MeasureParams, RadialGrid, make_grid, phi_order
from .radial import RadialProfile, full_energy, lq_energy
from .special import EULER_GAMMA, _quad, digamma

MIN_PLATEAU_NODES = 32


# -- Moser sequence --------------------------------------------------------------

def _check_moser(n, rho):
    if int(n) != n or n < 1:
        raise DomainError(f"n must be a positive integer, got {n!r}")
    if not rho > 0:
        raise DomainError(f"rho must be positive, got {rho!r}")


def plateau_radius(n: int, rho: float, params: MeasureParams) -> float:
    return rho * math.exp(-n / (params.theta + 1.0))


def moser_value(r, n: int, rho: float, params: MeasureParams) -> np.ndarray:
    """v_{n,rho}(r) = v_n(r/rho): plateau on [0, rho e^{-n/(theta+1)}], log ramp to 0 at rho."""
    _check_moser(n, rho)
    p, th = params.p, params.theta
    k = n / (th + 1.0)
    pre = params.omega_alpha ** (-1.0 / p)
    s = np.asarray(r, dtype=float) / rho
    out = np.zeros_like(s)
    inner = s <= math.exp(-k)
    ramp = (~inner) & (s < 1.0)
    out[inner] = pre * k ** ((p - 1.0) / p)
    out[ramp] = pre * k ** (-1.0 / p) * np.log(1.0 / s[ramp])
    return out


def moser_derivative(r, n: int, rho: float, params: MeasureParams) -> np.ndarray:
    p, th = params.p, params.theta
    k = n / (th + 1.0)
    s = np.asarray(r, dtype=float) / rho
    ramp = (s > math.exp(-k)) & (s < 1.0)
    out = np.zeros_like(s)
    out[ramp] = -params.omega_alpha ** (-1.0 / p) * k ** (-1.0 / p) / np.asarray(r, dtype=float)[ramp]
    return out


def moser_profile(n: int, rho: float, params: MeasureParams, grid: RadialGrid) -> RadialProfile:
    _check_moser(n, rho)
    r0 = plateau_radius(n, rho, params)
    if np.count_nonzero(grid.nodes < r0) < MIN_PLATEAU_NODES:
        raise GridTooCoarseError(
            f"fewer than {MIN_PLATEAU_NODES} nodes inside the plateau radius {r0:.3e}")
    return RadialProfile(grid, moser_value(grid.nodes, n, rho, params))


def moser_grad_energy_exact(n: int, rho: float, params: MeasureParams) -> float:
    """||v_{n,rho}'||^p on L^p_alpha; equal to 1 for every n and rho."""
    _check_moser(n, rho)
    return 1.0


def moser_grad_energy_quadrature(n: int, rho: float, params: MeasureParams) -> float:
    """Adaptive quadrature of |v'|^p omega_alpha r^alpha over the ramp, in the variable ln r."""
    p, a = params.p, params.alpha
    lo, hi = math.log(plateau_radius(n, rho, params)), math.log(rho)

    def f(x):
        r = math.exp(x)
        d = moser_derivative(np.array([r]), n, rho, params)[0]
        return abs(d) ** p * params.omega_alpha * r ** (a + 1.0)

    return _quad(f, lo + 1e-15 * abs(lo), hi - 1e-15 * abs(hi))


def moser_lp_energy_exact(n: int, rho: float, params: MeasureParams) -> float:
    """||v_{n,rho}||_{L^p_theta}^p in closed form.

    rho^{theta+1} omega_theta / (omega_alpha (theta+1)^p n) [gamma(p+1, n) + n^p e^{-n}],
    gamma the lower incomplete Gamma function.
    """
    _check_moser(n, rho)
    p, th = params.p, params.theta
    low = _sp.gammainc(p + 1.0, n) * math.gamma(p + 1.0)
    return (rho ** (th + 1.0) * params.omega_theta / (params.omega_alpha * (th + 1.0) ** p * n)
            * (low + n ** p * math.exp(-n)))


def moser_lp_limit(params: MeasureParams) -> float:
    """lim n ||v_n||_p^p = (omega_theta/omega_alpha) Gamma(p+1) / (theta+1)^p."""
    p = params.p
    return params.omega_theta / params.omega_alpha * math.gamma(p + 1.0) / (params.theta + 1.0) ** p


def sharpness_certificate(n: int, rho: float, params: MeasureParams, grid: RadialGrid | None = None) -> float:
    """Lower bound for AD(1, mu_crit) from the plateau of w = v_{n,rho}/||v_{n,rho}||.

    On the plateau mu_crit v^{p/(p-1)} = n, so the integrand is constant there and
    the bound is (omega_theta rho^{theta+1}/(theta+1)) e^{-n} phi_p(n (1 - R_n)),
    R_n = a^2/(1+a)^2, a = ||v_{n,rho}||_p^p.  The exact exponent is
    n (1 - R_n)^{1/(p-1)} >= n (1 - R_n), equality at p = 2.
    """
    _check_moser(n, rho)
    if grid is not None:
        moser_profile(n, rho, params, grid)      # resolution check only
    a = moser_lp_energy_exact(n, rho, params)
    R = a * a / (1.0 + a) ** 2
    ball = params.omega_theta * rho ** (params.theta + 1.0) / (params.theta + 1.0)
    return ball * _damped_phi(n * (1.0 - R), n, params.p)


def _damped_phi(t: float, n: float, p: float) -> float:
    """e^{-n} phi_p(t), without overflow for large n."""
    if t < 700.0:
        return math.exp(-n) * phi_p(t, p)
    head = sum(math.exp(k * math.log(t) - math.lgamma(k + 1.0) - n) for k in range(phi_order(p)))
    return math.exp(t - n) - head


def sharpness_exact_plateau(n: int, rho: float, params: MeasureParams) -> float:
    """The same plateau integral with the exact exponent n (1 - R_n)^{1/(p-1)}."""
    a = moser_lp_energy_exact(n, rho, params)
    R = a * a / (1.0 + a) ** 2
    ball = params.omega_theta * rho ** (params.theta + 1.0) / (params.theta + 1.0)
    return ball * _damped_phi(n * (1.0 - R) ** (1.0 / (params.p - 1.0)), n, params.p)


# -- blow-up profile ---------------------------------------------------------------

@dataclass(frozen=True)
class BlowupProfile:
    params: MeasureParams
    c_at: float = field(init=False)

    def __post_init__(self):
        p = self.params
        object.__setattr__(self, "c_at", (p.omega_theta / (p.theta + 1.0)) ** (1.0 / (p.p - 1.0)))

    @property
    def beta(self) -> float:
        return (self.params.theta + 1.0) / (self.params.p - 1.0)


def w_profile(b: BlowupProfile, r):
    """w(r) = -((p-1)/mu_crit) ln(1 + c r^{(theta+1)/(p-1)})."""
    rr = np.asarray(r, dtype=float)
    if np.any(rr < 0):
        raise DomainError("w is defined for r >= 0")
    out = -(b.params.p - 1.0) / b.params.mu_crit * np.log1p(b.c_at * rr ** b.beta)
    return float(out) if np.ndim(r) == 0 else out


def w_derivative(b: BlowupProfile, r):
    rr = np.asarray(r, dtype=float)
    cb = b.c_at * rr ** b.beta
    return -(b.params.p - 1.0) / b.params.mu_crit * b.c_at * b.beta * rr ** (b.beta - 1.0) / (1.0 + cb)


def w_normalization(b: BlowupProfile, r_out: float = 50.0) -> float:
    """int_0^inf exp((p/(p-1)) mu_crit w) dlambda_theta.

    Quadrature on (0, r_out] in ln r plus the closed-form tail
    1 - (z/(1+z))^{p-1}, z = c r_out^{(theta+1)/(p-1)}.
    """
    p, th = b.params.p, b.params.theta

    def f(x):
        r = math.exp(x)
        return b.params.omega_theta * r ** (th + 1.0) * (1.0 + b.c_at * r ** b.beta) ** (-p)

    lo = math.log(r_out) - 60.0 / (th + 1.0)
    split = -math.log(b.c_at) / b.beta
    inner = _quad(f, lo, split) + _quad(f, split, math.log(r_out))
    z = b.c_at * r_out ** b.beta
    tail = -math.expm1(-(p - 1.0) * math.log1p(1.0 / z))
    head = b.params.omega_theta * math.exp(lo * (th + 1.0)) / (th + 1.0)   # integrand ~ omega r^theta below e^lo
    return inner + tail + head


def w_ode_residual(b: BlowupProfile, grid: RadialGrid, window=(1e-3, 10.0)) -> float:
    """max |-omega_alpha (r^alpha |w'|^{p-2} w')' - omega_theta r^theta e^{(p/(p-1)) mu w}|.

    w' is evaluated analytically; the outer derivative is a three-point
    difference on the grid nodes, taken at interior nodes inside ``window``.
    """
    P = b.params
    r = grid.nodes
    d = w_derivative(b, r)
    flux = P.omega_alpha * r ** P.alpha * np.abs(d) ** (P.p - 2.0) * d
    # three-point derivative, second order on non-uniform spacing
    h0, h1 = r[1:-1] - r[:-2], r[2:] - r[1:-1]
    lhs = -((flux[2:] - flux[1:-1]) * h0 / h1 + (flux[1:-1] - flux[:-2]) * h1 / h0) / (h0 + h1)
    rm = r[1:-1]
    rhs = P.omega_theta * rm ** P.theta * (1.0 + b.c_at * rm ** b.beta) ** (-P.p)
    sel = (rm > window[0]) & (rm < window[1])
    if not np.any(sel):
        raise GridTooCoarseError("no interior nodes inside the residual window")
    return float(np.max(np.abs(lhs - rhs)[sel]))


# -- Green-type function ------------------------------------------------------------

FIT_WINDOW = (1e-6, 1e-4)


@dataclass
class GreenFunction:
    profile: RadialProfile
    eta: float
    a_eta: float
    residual: float
    fit_slope: float = 0.0
    iterations: int = 0
    method: str = "shoot"
    closure_defect: float = 0.0

    @property
    def params(self) -> MeasureParams:
        return self.profile.params

    def lq(self, q: float) -> float:
        """||g_eta||_{L^q_theta}^q."""
        return lq_energy(self.profile, q)

    def __call__(self, r) -> np.ndarray:
        """Interpolation linear in ln r; zero beyond r_out."""
        r = np.asarray(r, dtype=float)
        x = np.log(self.profile.r)
        out = np.interp(np.log(np.maximum(r, 1e-300)), x, self.profile.values)
        # below the first node continue the logarithmic singularity
        lo = r < self.profile.r[0]
        if np.any(lo):
            P = self.params
            out = np.where(lo, self.profile.values[0]
                           - (P.theta + 1.0) / P.mu_crit * np.log(r / self.profile.r[0]), out)
        return np.where(r > self.profile.grid.r_out, 0.0, out)


def green_grid(params: MeasureParams, r_out: float = 20.0, n_nodes: int = 4096,
               r_min: float = 1e-10) -> RadialGrid:
    return make_grid(params, r_out, n_nodes, "geometric", r_min=r_min)


class _GreenMap:
    """g -> T(g) = int_r^{r_out} (B(t)/omega_alpha)^{1/(p-1)} dt/t, B = 1 - (1-eta) int_0^t g^{p-1}.

    Both integrals use the trapezoid rule in ln r.
    """

    def __init__(self, eta: float, grid: RadialGrid):
        P = grid.params
        self.P = P
        self.eta = eta
        self.r = grid.nodes
        self.x = np.log(self.r)
        self.dx = np.diff(self.x)
        self.wr = P.omega_theta * self.r ** (P.theta + 1.0)     # dlambda_theta = w dx
        self.origin = P.omega_theta * self.r[0] ** (P.theta + 1.0) / (P.theta + 1.0)

    def mass(self, g):
        f = np.sign(g) * np.abs(g) ** (self.P.p - 1.0)
        cells = 0.5 * (f[1:] * self.wr[1:] + f[:-1] * self.wr[:-1]) * self.dx
        return np.concatenate([[0.0], np.cumsum(cells)]) + self.origin * f[0]

    def bracket(self, g):
        return 1.0 - (1.0 - self.eta) * self.mass(g)

    def speed(self, B):
        # B -> 0 far out; clip round-off negatives so the root stays real
        q = 1.0 / (self.P.p - 1.0)
        return (np.maximum(B, 0.0) / self.P.omega_alpha) ** q

    def apply(self, g):
        s = self.speed(self.bracket(g))
        cells = 0.5 * (s[1:] + s[:-1]) * self.dx
        out = np.zeros_like(g)
        out[:-1] = np.cumsum(cells[::-1])[::-1]
        return out

    def defect(self, g):
        """Cellwise defect of omega_alpha r^alpha |g'|^{p-1} + (1-eta) int_0^r g^{p-1} = 1.

        r|g'| is the difference quotient in ln r; the bracket is averaged over
        the cell in the same way T does.
        """
        B = self.bracket(g)
        s = self.speed(B)
        p = self.P.p
        slope = -np.diff(g) / self.dx
        avg = 0.5 * (s[1:] + s[:-1])
        lhs = self.P.omega_alpha * np.abs(slope) ** (p - 1.0)
        rhs = self.P.omega_alpha * np.abs(avg) ** (p - 1.0)
        return float(np.max(np.abs(lhs - rhs)))


def _fit_constant(g: np.ndarray, r: np.ndarray, P: MeasureParams):
    sel = (r >= FIT_WINDOW[0]) & (r <= FIT_WINDOW[1])
    if np.count_nonzero(sel) < 8:
        raise GridTooCoarseError("fewer than 8 nodes inside the A_eta fit window [1e-6, 1e-4]")
    y = g[sel] + (P.theta + 1.0) / P.mu_crit * np.log(r[sel])
    X = np.log(r[sel])
    slope, intercept = np.polyfit(X - X.mean(), y, 1)
    return float(y.mean()), float(slope)


def _march(T: _GreenMap, g0: float, out: np.ndarray) -> tuple[int, int]:
    """Step the discrete equations outward from g(r_0) = g0.

    Each step solves the implicit trapezoid update for the next node by
    fixed-point iteration.  Returns (last index reached, verdict) with verdict
    -1 when g crosses zero, +1 when the bracket B turns negative while g > 0
    (g0 too large) and 0 when r_out is reached first.
    """
    P = T.P
    p, q, om, k = P.p, 1.0 / (P.p - 1.0), P.omega_alpha, 1.0 - T.eta
    wr, dx = T.wr, T.dx
    n = wr.size
    out[0] = g0
    F = g0 ** (p - 1.0)
    m = T.origin * F
    B = 1.0 - k * m
    if B < 0:
        return 0, 1
    s = (B / om) ** q
    F *= wr[0]
    for i in range(n - 1):
        h = 0.5 * dx[i]
        base = m + h * F
        y = out[i] - 2.0 * h * s
        gi = out[i]
        for _ in range(60):
            if y < 0:
                out[i + 1:] = 0.0
                return i + 1, -1
            Fy = y ** (p - 1.0) * wr[i + 1]
            Bn = 1.0 - k * (base + h * Fy)
            if Bn < 0:
                out[i + 1:] = y
                return i + 1, 1
            sn = (Bn / om) ** q
            yn = gi - h * (s + sn)
            if abs(yn - y) <= 1e-16 * y:
                y = yn
                break
            y = yn
        if y < 0:
            out[i + 1:] = 0.0
            return i + 1, -1
        out[i + 1] = y
        m, s, F = base + h * Fy, sn, Fy
    return n - 1, 0


def _shoot(T: _GreenMap, max_iter: int = 200) -> tuple[np.ndarray, int]:
    """Bisection on g(r_0) between trajectories that cross zero and ones whose bracket goes negative."""
    P = T.P
    buf = np.empty_like(T.r)
    centre = -(P.theta + 1.0) / P.mu_crit * math.log(T.r[0] / T.r[-1])
    lo, hi = 0.0, 2.0 * centre + 10.0
    while _march(T, hi, buf)[1] <= 0:
        hi *= 2.0
        if hi > 1e6:
            raise ConvergenceError("no upper bracket for the shooting parameter")
    it = 0
    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _march(T, mid, buf)[1] > 0:
            hi = mid
        else:
            lo = mid
    g = np.empty_like(T.r)
    _march(T, lo, g)
    return g, it


def solve_green(eta: float, params: MeasureParams, grid: RadialGrid | None = None,
                tol: float = 1e-6, method: str = "shoot", max_iter: int = 5000) -> GreenFunction:
    """Solve the discretized integral equation for g_eta with the closure g(r_out) = 0.

    ``shoot`` marches the discrete equations outward from the first node and
    bisects on the starting value until it is pinned to one ulp; the
    trajectory is kept up to where it reaches zero.  ``newton`` applies
    Newton-Krylov to g - T(g) = 0 (reliable for p = 2, where T is affine).
    ``picard`` is the damped iteration g <- (g + T(g))/2, which only converges
    for small r_out; divergence raises ConvergenceError.

    The reported residual is the largest cellwise defect of the integrated
    equation; above 10 tol the solve counts as failed.  A shot trajectory
    that stays positive up to r_out keeps its tiny end value, reported as
    ``closure_defect``.
    """
    if not 0.0 <= eta < 1.0:
        raise DomainError("eta must lie in [0, 1)")
    grid = grid or green_grid(params)
    if grid.params != params:
        grid = grid.with_params(params)
    T = _GreenMap(eta, grid)
    r = grid.nodes
    g = np.maximum(0.0, -(params.theta + 1.0) / params.mu_crit * np.log(r / grid.r_out))
    iters = 0
    if method == "shoot":
        g, iters = _shoot(T)
    elif method == "newton":
        counter = {"n": 0}

        def F(v):
            counter["n"] += 1
            return v - T.apply(v)

        try:
            g = optimize.newton_krylov(F, g, f_tol=min(tol, 1e-10), method="lgmres", maxiter=200)
        except optimize.NoConvergence as exc:
            raise ConvergenceError(f"Newton-Krylov did not reach {tol:g}") from exc
        iters = counter["n"]
    elif method == "picard":
        prev = math.inf
        for iters in range(1, max_iter + 1):
            new = 0.5 * g + 0.5 * T.apply(g)
            diff = float(np.max(np.abs(new - g)))
            g = new
            if diff < tol:
                break
            if not math.isfinite(diff) or (iters > 50 and diff > 1e3 * prev):
                raise ConvergenceError("damped fixed-point iteration diverges; use method='shoot'")
            if iters == 50:
                prev = diff
        else:
            raise ConvergenceError("damped fixed-point iteration hit max_iter")
    else:
        raise DomainError(f"unknown method {method!r}")
    B = T.bracket(g)
    if np.any(B < -1e3 * tol):
        raise NegativeBracketError("1 - (1-eta) int g^{p-1} turned negative; r_out is too small")
    g = np.maximum(g, 0.0)
    res = T.defect(g)
    if res > 10.0 * tol:
        raise ConvergenceError(f"residual {res:.3e} exceeds 10 tol = {10 * tol:.1e}")
    a, slope = _fit_constant(g, r, params)
    return GreenFunction(RadialProfile(grid, g), float(eta), a, res, slope, iters, method,
                         float(g[-1]))


def green_scaling_defect(g0: GreenFunction, geta: GreenFunction, window=(1e-6, 5.0)) -> float:
    """max |g_eta(r) - g_0((1-eta)^{1/(theta+1)} r)| over nodes of g_eta in ``window``."""
    th = geta.params.theta
    r = geta.profile.r
    sel = (r >= window[0]) & (r <= window[1])
    s = (1.0 - geta.eta) ** (1.0 / (th + 1.0))
    return float(np.max(np.abs(geta.profile.values[sel] - g0(s * r[sel]))))


def cc_threshold(gf: GreenFunction, params: MeasureParams | None = None) -> float:
    """(omega_theta/(theta+1)) exp(mu_crit A_eta + gamma + Psi(p))."""
    P = params or gf.params
    return P.omega_theta / (P.theta + 1.0) * math.exp(P.mu_crit * gf.a_eta + EULER_GAMMA + digamma(P.p))


# -- critical test function -----------------------------------------------------------

@dataclass
class TestFunctionResult:
    profile: RadialProfile
    norm: float
    value: float
    c_power: float          # c^{p/(p-1)}
    b: float
    Y: float
    glue_defect: float
    norm_defect: float
    b_mode: str
    remainders: dict


def _test_constants(epsilon, gf: GreenFunction, P: MeasureParams):
    L = -math.log(epsilon)
    pg = EULER_GAMMA + digamma(P.p)
    m = P.mu_crit
    gp = gf.lq(P.p)
    C = (gf.eta * gp + math.log(P.omega_theta / (P.theta + 1.0)) / m
         - (P.theta + 1.0) / m * math.log(epsilon) + gf.a_eta - (P.p - 1.0) / m * pg)
    if not C > 0:
        raise DomainError("c^{p/(p-1)} is not positive; epsilon is too large")
    return L, pg, C, gp


def test_function_grid(epsilon: float, gf: GreenFunction, n_inner: int = 2048, n_outer: int = 2048,
                       decades_inside: float = 8.0) -> RadialGrid:
    """Geometric nodes on (0, eps L] and on [eps L, r_out], with eps L a node."""
    L = -math.log(epsilon)
    rL = epsilon * L
    inner = np.geomspace(epsilon * 10.0 ** (-decades_inside), rL, n_inner)
    outer = np.geomspace(rL, gf.profile.grid.r_out, n_outer + 1)[1:]
    return RadialGrid(np.concatenate([inner, outer]), gf.params, "custom")


def critical_test_details(epsilon: float, eta: float, gf: GreenFunction, params: MeasureParams | None = None,
                          grid: RadialGrid | None = None, b_mode: str = "glue") -> TestFunctionResult:
    """Glued test function: bubble on (0, eps L], c^{-1/(p-1)} g_eta beyond.

    c^{p/(p-1)} comes from its asymptotic formula with the O(L^{-(theta+1)/(p-1)})
    term dropped.  With b_mode='glue' b is fixed by continuity at eps L; with
    'formula' b takes its asymptotic value and the continuity defect is
    whatever it is.
    """
    P = params or gf.params
    if not 0.0 < epsilon <= 0.1:
        raise DomainError("epsilon must lie in (0, 0.1]")
    if abs(eta - gf.eta) > 1e-15:
        raise DomainError("the Green function was solved for a different eta")
    L, pg, C, gp = _test_constants(epsilon, gf, P)
    if L < 2:
        raise DomainError("need L = -ln epsilon >= 2")
    m = P.mu_crit
    p = P.p
    bp = BlowupProfile(P)
    c = C ** ((p - 1.0) / p)
    ci = c ** (-1.0 / (p - 1.0))
    rL = epsilon * L
    zL = bp.c_at * L ** bp.beta
    gL = float(gf(np.array([rL]))[0])
    b_formula = -eta * gp + (p - 1.0) / m * pg
    b_glue = gL - C + (p - 1.0) / m * math.log1p(zL)
    if b_mode == "glue":
        b = b_glue
    elif b_mode == "formula":
        b = b_formula
    else:
        raise DomainError(f"unknown b_mode {b_mode!r}")
    grid = grid or test_function_grid(epsilon, gf)
    r = grid.nodes
    inner = c + ci * (-(p - 1.0) / m * np.log1p(bp.c_at * (r / epsilon) ** bp.beta) + b)
    outer = ci * gf(r)
    v = np.where(r <= rL, inner, outer)
    inner_L = c + ci * (-(p - 1.0) / m * math.log1p(zL) + b)
    glue = abs(inner_L - ci * gL)
    if glue > 1e-3:
        raise GlueMismatchError(f"continuity defect {glue:.3e} at eps L exceeds 1e-3")
    prof = RadialProfile(grid, np.maximum(v, 0.0))
    norm = full_energy(prof) ** (1.0 / p)
    fp = FunctionalParams(m, eta, p)
    val = ad_evaluate(prof, fp, P).value
    Y = p * eta / (p - 1.0) * gp / C
    k0 = P.k0
    rem = {
        "L_remainder": L ** (-(P.theta + 1.0) / (p - 1.0)),
        "c_remainder": C ** (-1.0),
        "inner_mass": rL ** (P.theta + 1.0) * abs(math.log(rL)) ** (k0 * p / (p - 1.0)),
    }
    return TestFunctionResult(prof, norm, val, C, b, Y, glue, abs(norm - 1.0), b_mode, rem)


def critical_test_function(epsilon: float, eta: float, gf: GreenFunction, params: MeasureParams | None = None,
                           grid: RadialGrid | None = None):
    """(v_eps, ||v_eps||, AD(v_eps) at mu_crit with the eta enhancement)."""
    res = critical_test_details(epsilon, eta, gf, params, grid)
    return res.profile, res.norm, res.value


@dataclass
class HResult:
    value: float
    leading: float
    correction: float
    epsilon: float
    Y: float
    c_power: float
    remainders: dict


def h_epsilon_eta(epsilon: float | None, eta: float, gf: GreenFunction,
                  params: MeasureParams | None = None) -> HResult:
    """Computable part of H(eps, eta): leading term plus the eta correction.

    The O(.) remainders are returned as magnitudes in ``remainders`` and not
    added.  ``epsilon=None`` couples eps = eta, the choice for non-integer p.
    """
    P = params or gf.params
    p, th, m, k0 = P.p, P.theta, P.mu_crit, P.k0
    if epsilon is None:
        if not eta > 0:
            raise DomainError("epsilon = eta coupling needs eta > 0")
        epsilon = eta
    L, pg, C, gp = _test_constants(epsilon, gf, P)
    qk = k0 * p / (p - 1.0)
    leading = m ** k0 / math.factorial(k0) * gf.lq(qk) / gp
    Y = p * eta / (p - 1.0) * gp / C
    corr = (P.omega_theta * eta * m / (th + 1.0)
            * math.exp(m * gf.a_eta + pg)
            * C ** (k0 / (p - 1.0) - 1.0)
            * (pg * Y - 1.0)
            * (p * p - p + 2.0) / (2.0 * (p - 1.0) ** 2) * eta * gp)
    rL = epsilon * L
    rem = {
        "inner": (C * rL ** (th + 1.0) * abs(math.log(rL)) ** qk + 1.0) / (C * gp),
        "c_power": C ** (k0 / (p - 1.0) - 2.0),
        "L_power": C ** (k0 / (p - 1.0)) * L ** (-(th + 1.0) / (p - 1.0)),
    }
    return HResult(leading + corr, leading, corr, epsilon, Y, C, rem)
