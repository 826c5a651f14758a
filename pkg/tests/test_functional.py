import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate

from tmfrac import functional as F
from tmfrac.asymptotics import moser_profile
from tmfrac.errors import DomainError, InvalidDataError, TruncationError
from tmfrac.functional import (FunctionalParams, SolveOptions, ad_evaluate, ad_gradient, ad_value,
                               b2_quotient, b2_solve, concentration_diagnostics, dilation_family,
                               gradient_mass_degenerate, ishiwata_derivative, ishiwata_value,
                               maximize_ad, p2_attainment_threshold, phi_p, phi_p_prime,
                               trial_family, vanishing_curve, vanishing_profile, vanishing_slope_p2)
from tmfrac.measure import make_grid
from tmfrac.radial import RadialProfile, decreasing_rearrange, normalize, scale

from conftest import grid, params


def gaussian(g, width=1.0):
    v = np.exp(-(g.nodes / width) ** 2)
    return normalize(RadialProfile(g, v - v[-1]))


# -- phi -----------------------------------------------------------------------

def test_phi_values():
    assert phi_p(0.0, 2) == 0.0
    assert phi_p(1.0, 3) == pytest.approx(math.e - 2, rel=1e-15)
    assert phi_p(0.5, 2.5) == pytest.approx(math.exp(0.5) - 1.5, rel=1e-14)
    assert phi_p(0.3, 2) == pytest.approx(math.expm1(0.3), rel=1e-15)


def test_phi_small_t_keeps_relative_accuracy():
    # series oracle: t^2/2 + t^3/6 + ... for k0 = 2
    t = 1e-6
    assert phi_p(t, 3) == pytest.approx(t * t / 2 + t ** 3 / 6, rel=1e-14)


def test_phi_errors():
    with pytest.raises(DomainError):
        phi_p(-1.0, 2)
    with pytest.raises(OverflowError):
        phi_p(800.0, 2)


@given(st.floats(0, 50), st.sampled_from([2.0, 2.5, 3.0, 4.0, 5.5]))
def test_phi_lower_bound(t, p):
    k0 = math.ceil(p - 1 - 1e-12)
    lower = t ** k0 / math.factorial(k0) + t ** (k0 + 1) / math.factorial(k0 + 1)
    assert phi_p(t, p) >= lower * (1 - 1e-13)


@given(st.floats(0, 50), st.sampled_from([2.0, 2.5, 3.0, 4.0]))
def test_phi_derivative_dominates(t, p):
    assert t * phi_p_prime(t, p) >= phi_p(t, p) * (1 - 1e-13)


def test_phi_prime_is_derivative():
    for p in (2.0, 2.5, 3.0):
        for t in (0.2, 1.5, 7.0):
            fd = (phi_p(t + 1e-6, p) - phi_p(t - 1e-6, p)) / 2e-6
            assert phi_p_prime(t, p) == pytest.approx(fd, rel=1e-7)


# -- parameters ------------------------------------------------------------------

def test_functional_params():
    fp = FunctionalParams(1.0, 0.3, 2.5)
    assert fp.k0 == 2
    assert FunctionalParams(1.0, 0.0, 3.0).k0 == 2
    with pytest.raises(DomainError):
        FunctionalParams(-1.0, 0.0)
    with pytest.raises(DomainError):
        FunctionalParams(1.0, 1.5)
    P = params(2, 1)
    assert FunctionalParams.from_fraction(1.0, 1.0, P).supercritical(P)
    assert not FunctionalParams.from_fraction(1.0, 0.5, P).supercritical(P)


# -- AD value and gradient ----------------------------------------------------------

def test_ad_of_tiny_profile_is_zero():
    g = grid()
    u = RadialProfile(g, np.full(g.n_nodes, 1e-300))
    assert ad_value(u, FunctionalParams(1.0, 0.0)) == pytest.approx(0.0, abs=1e-280)


def test_ad_ramp_against_quadrature():
    P = params(2, 1)
    g = make_grid(P, 2.0, 512, "uniform")
    u = normalize(RadialProfile(g, np.clip(1 - g.nodes / 2, 0, None)))
    # exact interpolant on (r0, 2) is c (1 - r/2); origin cell is constant
    r0 = g.nodes[0]
    c = u.values[0] / (1 - r0 / 2)
    oracle = 2 * math.pi * (integrate.quad(lambda r: math.expm1(c * c * (1 - r / 2) ** 2) * r, r0, 2,
                                           epsabs=1e-14)[0]
                            + math.expm1(u.values[0] ** 2) * r0 ** 2 / 2)
    fine = make_grid(P, 2.0, 2048, "uniform")           # 4x resolution for the sampled form
    uf = RadialProfile(fine, np.interp(fine.nodes, g.nodes, u.values))
    val = ad_value(u, FunctionalParams(1.0, 0.0))
    assert val == pytest.approx(oracle, rel=5e-5)
    assert ad_value(uf, FunctionalParams(1.0, 0.0)) == pytest.approx(oracle, rel=5e-6)


def test_ad_evaluate_flags_divergence():
    g = grid()
    u = RadialProfile(g, np.r_[30.0, np.zeros(g.n_nodes - 1)])
    ev = ad_evaluate(u, FunctionalParams(1.0, 0.0))
    assert ev.divergent and ev.value == math.inf and math.isfinite(ev.partial)


def test_zero_profile_gradient():
    g = grid()
    assert np.all(ad_gradient(RadialProfile(g, np.zeros(g.n_nodes)), FunctionalParams(1.0, 0.5)) == 0)


@pytest.mark.parametrize("p, theta, eta", [(2, 1, 0.0), (2, 1, 0.7), (3, 2, 0.3), (2.5, 2, 0.5)])
def test_gradient_against_finite_differences(p, theta, eta):
    P = params(p, theta)
    g = grid(p, theta, 6.0, 200)
    rng = np.random.default_rng(7)
    u = gaussian(g, 1.3)
    fp = FunctionalParams(0.8 * P.mu_crit, eta, p)
    grad = ad_gradient(u, fp)
    for _ in range(3):
        d = rng.normal(size=g.n_nodes) * u.values
        h = 1e-6
        f = lambda s: ad_value(RadialProfile(g, u.values + s * d), fp)
        fd = (f(h) - f(-h)) / (2 * h)
        assert grad @ d == pytest.approx(fd, rel=1e-5)


def test_ad_invariant_under_rearrange_of_monotone_input():
    u = gaussian(grid())
    fp = FunctionalParams(3.0, 0.2)
    assert ad_value(decreasing_rearrange(u), fp) == pytest.approx(ad_value(u, fp), rel=1e-6)


# -- maximization -------------------------------------------------------------------

def test_maximize_p2_subcritical():
    P = params(2, 1)
    fp = FunctionalParams.from_fraction(0.5, 0.0, P)
    rep = maximize_ad(fp, P, grid())
    assert rep.converged and rep.status == "converged"
    assert rep.grad_residual <= 1e-7 and rep.value > 0
    assert all(b >= a for a, b in zip(rep.value_trace, rep.value_trace[1:]))
    assert rep.maximizer.values[-1] == 0.0


def test_maximize_p3_example():
    P = params(3, 2)
    fp = FunctionalParams.from_fraction(0.9, 0.3, P)
    rep = maximize_ad(fp, P, grid(3, 2))
    assert rep.converged and rep.concentration_fraction < 0.9
    fine = maximize_ad(fp, P, grid(3, 2, 10.0, 4096))
    assert fine.value == pytest.approx(rep.value, rel=1e-2)


def test_maximize_rejects_zero_and_supercritical():
    P = params(2, 1)
    g = grid()
    with pytest.raises(InvalidDataError):
        maximize_ad(FunctionalParams(1.0, 0.0), P, g,
                    SolveOptions(init=RadialProfile(g, np.zeros(g.n_nodes))))
    with pytest.raises(DomainError):
        maximize_ad(FunctionalParams.from_fraction(1.0, 1.0, P), P, g)


def test_supercritical_reports_blowup():
    P = params(2, 1)
    rep = maximize_ad(FunctionalParams.from_fraction(1.0, 1.0, P), P, grid(),
                      SolveOptions(allow_supercritical=True, rho=(1.0, 2.0)))
    assert rep.blowup_detected and not rep.converged
    assert max(rep.value_trace) > 0.9 * P.omega_theta * 2 ** 2 / 2


def test_report_json_fields():
    P = params(2, 1)
    rep = maximize_ad(FunctionalParams.from_fraction(0.3, 0.1, P), P, grid())
    d = json.loads(json.dumps(rep.to_dict()))
    for key in ("value", "iterations", "grad_residual", "concentration_fraction",
                "vanishing_indicator", "converged", "maximizer", "provenance"):
        assert key in d
    assert d["provenance"]["grid"]["n_nodes"] == 1024
    assert d["provenance"]["params"]["mu_crit"] == pytest.approx(4 * math.pi)
    assert d["provenance"]["version"].startswith("0.1.0")


def test_multistart_agreement():
    P = params(2, 1)
    fp = FunctionalParams.from_fraction(0.9, 0.5, P)
    a = maximize_ad(fp, P, grid(), SolveOptions(init_width=0.5))
    b = maximize_ad(fp, P, grid(), SolveOptions(init_width=2.0))
    assert a.value == pytest.approx(b.value, rel=1e-4)


# -- concentration ---------------------------------------------------------------------

def test_concentration_moser_profile():
    P = params(2, 1)
    g = make_grid(P, 4.0, 2048, "geometric", r_min=1e-9)
    conc, van = concentration_diagnostics(moser_profile(5, 1.0, P, g), P, 1.0)
    assert conc == pytest.approx(1.0, abs=1e-12)
    assert van == 0.0


def test_concentration_degenerate_and_range():
    g = grid()
    u = RadialProfile(g, (g.nodes <= 1.0).astype(float) * 0 + 1.0)
    assert concentration_diagnostics(u, r_probe=1.0)[0] == 0.0
    assert gradient_mass_degenerate(u)
    with pytest.raises(DomainError):
        concentration_diagnostics(u, r_probe=20.0)


def test_flattened_profile_vanishes():
    P = params(2, 1)
    g = grid(2, 1, 4.0, 512)
    u = gaussian(g)
    v = vanishing_profile(u, 1e-3)
    conc, van = concentration_diagnostics(v, P, 1.0)
    assert van > 0.9


# -- B2 ---------------------------------------------------------------------------------

def townes_b2() -> float:
    # ground state of Q'' + Q'/r - Q + Q^3 = 0 by shooting on Q(0); B = 2 / ||Q||_{L^2(R^2)}^2
    from scipy.integrate import solve_ivp

    def crosses(q0):
        sol = solve_ivp(lambda r, y: [y[1], -y[1] / max(r, 1e-12) + y[0] - y[0] ** 3],
                        (1e-8, 12), [q0, 0.0], rtol=1e-12, atol=1e-14,
                        events=[lambda r, y: y[0], lambda r, y: y[1]], dense_output=True)
        return len(sol.t_events[0]) > 0, sol

    lo, hi = 2.0, 2.4
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if crosses(mid)[0]:
            hi = mid
        else:
            lo = mid
    _, sol = crosses(hi)
    r_end = sol.t_events[0][0] if len(sol.t_events[0]) else 12
    rs = np.linspace(1e-8, min(r_end, 9.0), 20001)
    q = sol.sol(rs)[0]
    mass = 2 * math.pi * np.trapezoid(q * q * rs, rs)
    return 2.0 / mass


def test_b2_against_townes_profile():
    P = params(2, 1)
    g = make_grid(P, 40.0, 2048, "hybrid", r_min=1e-6)
    res = b2_solve(1.0, g)
    assert res.constant == pytest.approx(townes_b2(), rel=1e-3)
    assert res.constant == pytest.approx(0.170928, rel=1e-4)   # frozen


def test_b2_starts_and_refinement_agree():
    P = params(2, 1)
    res = b2_solve(1.0, make_grid(P, 40.0, 2048, "hybrid", r_min=1e-6))
    qs = [row["quotient"] for row in res.starts]
    assert max(qs) / min(qs) - 1 < 1e-2
    fine = b2_solve(1.0, make_grid(P, 40.0, 4096, "hybrid", r_min=1e-6))
    assert fine.constant == pytest.approx(res.constant, rel=1e-2)


def test_b2_quotient_dilation_invariant_and_bounds():
    P = params(2, 1)
    g = make_grid(P, 40.0, 2048, "hybrid", r_min=1e-6)
    res = b2_solve(1.0, g)
    u = res.minimizer
    for tau in (0.5, 2.0):
        assert b2_quotient(scale(u, 1.0, tau)) == pytest.approx(b2_quotient(u), rel=1e-8)
    ramp = RadialProfile(g, np.clip(1 - g.nodes / 3, 0, None))
    assert 1.0 / res.constant <= b2_quotient(ramp)
    with pytest.raises(InvalidDataError):
        b2_quotient(RadialProfile(g, np.zeros(g.n_nodes)))


def test_attainment_threshold():
    P = params(2, 1)
    g = make_grid(P, 40.0, 2048, "hybrid", r_min=1e-6)
    B = b2_solve(1.0, g).constant
    assert p2_attainment_threshold(0.0, 1.0, g, B) == pytest.approx(2 / B)
    assert p2_attainment_threshold(1 - 1e-12, 1.0, g, B) == pytest.approx(1.5 / B, rel=1e-9)
    assert p2_attainment_threshold(0.5, 1.0, g, B) < P.mu_crit
    with pytest.raises(DomainError):
        p2_attainment_threshold(1.0, 1.0, g, B)


# -- vanishing curve ----------------------------------------------------------------------

def test_vanishing_curve_limit():
    # the correction is O(t^{1/(p-1)}), so p = 3 needs a smaller t for the same accuracy
    for p, theta, t in ((2, 1, 1e-8), (3, 2, 1e-14)):
        P = params(p, theta)
        u = gaussian(grid(p, theta))
        fp = FunctionalParams(0.5 * P.mu_crit, 0.4, p)
        h, xi = vanishing_curve(u, fp, t)
        assert h == pytest.approx(1.4, abs=1e-6)
        with pytest.raises(DomainError):
            vanishing_curve(u, fp, 0.0)


def test_vanishing_slope_blows_up_for_p3():
    P = params(3, 2)
    u = gaussian(grid(3, 2))
    fp = FunctionalParams(0.5 * P.mu_crit, 0.2, 3)
    h0 = lambda t: vanishing_curve(u, fp, t)[0]
    slopes = [(h0(2 * t) - h0(t)) / t for t in (1e-2, 1e-4, 1e-6)]
    assert slopes[0] < slopes[1] < slopes[2]


def test_vanishing_slope_p2_formula():
    P = params(2, 1)
    u = gaussian(grid())
    fp = FunctionalParams(0.7 * P.mu_crit, 0.3)
    t = 1e-6
    fd = (vanishing_curve(u, fp, 2 * t)[0] - vanishing_curve(u, fp, t)[0]) / t
    assert fd == pytest.approx(vanishing_slope_p2(u, fp), rel=1e-3)


# -- dilation series (p = 2) -------------------------------------------------------------------

def test_series_matches_direct_functional():
    P = params(2, 1)
    u = gaussian(grid(2, 1, 20.0, 2048))
    mu, eta = 0.6 * P.mu_crit, 0.2
    for tau in (0.7, 1.0, 1.6):
        direct = ad_value(dilation_family(u, tau), FunctionalParams(mu, eta))
        assert ishiwata_value(u, mu, eta, tau).value == pytest.approx(direct, rel=1e-10)


def test_derivative_against_finite_differences():
    P = params(2, 1)
    rng = np.random.default_rng(3)
    g = grid(2, 1, 20.0, 2048)
    for _ in range(5):
        w = rng.uniform(0.3, 2.0)
        u = gaussian(g, w)
        mu = P.mu_crit / 8
        h = 1e-5
        J = lambda tau: ishiwata_value(u, mu, 0.2, tau).value
        fd = (J(1 + h) - J(1 - h)) / (2 * h)
        assert ishiwata_derivative(u, mu, 0.2, 1.0) == pytest.approx(fd, rel=1e-5)


def test_derivative_truncation_error():
    u = gaussian(grid(2, 1, 20.0, 2048), 0.3)
    with pytest.raises(TruncationError):
        ishiwata_derivative(u, 4 * math.pi, 0.5, 1.0, j_max=3)


def test_derivative_checks_inputs():
    u = gaussian(grid(3, 2))
    with pytest.raises(DomainError):
        ishiwata_derivative(u, 1.0, 0.0)
    u2 = RadialProfile(grid(), 0.5 * gaussian(grid()).values)
    with pytest.raises(DomainError):
        ishiwata_derivative(u2, 1.0, 0.0)


def test_small_mu_negative_and_sign_change():
    P = params(2, 1)
    g = grid(2, 1, 20.0, 2048)
    fam = trial_family(g, 0)
    assert len(fam) == 10
    bound = F.nonexistence_bound(fam, 1.0)
    assert 0 < bound["bound"] <= P.mu_crit / 4
    mu = 0.9 * bound["bound"]
    assert all(ishiwata_derivative(u, mu, 0.0, 1.0) < 0 for u in fam)
    u = normalize(RadialProfile(g, np.exp(-g.nodes) - math.exp(-20)))
    assert ishiwata_derivative(u, 0.999 * P.mu_crit, 0.0, 1.0) > 0
