import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from tmfrac import asymptotics as A
from tmfrac.errors import DomainError, GlueMismatchError, GridTooCoarseError
from tmfrac.measure import make_grid
from tmfrac.radial import grad_energy, lq_energy
from tmfrac.special import EULER_GAMMA

from conftest import green, params

PAIRS = [(2, 1), (2, 3), (3, 2), (2.5, 2)]


# -- Moser sequence -------------------------------------------------------------------

def test_moser_plateau_value():
    P = params(2, 1)
    assert A.moser_value(np.array([0.0]), 4, 1.0, P)[0] == pytest.approx(1 / math.sqrt(math.pi), rel=1e-14)


@pytest.mark.parametrize("p, theta", PAIRS)
def test_moser_continuity_at_plateau(p, theta):
    P = params(p, theta)
    r0 = A.plateau_radius(7, 1.3, P)
    inside = A.moser_value(np.array([r0]), 7, 1.3, P)[0]
    outside = A.moser_value(np.array([r0 * (1 + 1e-15)]), 7, 1.3, P)[0]
    assert inside == pytest.approx(outside, rel=1e-13)


@pytest.mark.parametrize("p, theta", PAIRS)
def test_moser_gradient_energy(p, theta):
    P = params(p, theta)
    assert A.moser_grad_energy_exact(10, 1.0, P) == 1.0
    assert A.moser_grad_energy_quadrature(10, 1.0, P) == pytest.approx(1.0, abs=1e-8)
    assert A.moser_grad_energy_quadrature(10, 2.5, P) == pytest.approx(1.0, abs=1e-8)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 80), st.floats(0.05, 20.0), st.sampled_from(PAIRS))
def test_moser_energy_is_scale_free(n, rho, pt):
    P = params(*pt)
    assert A.moser_grad_energy_quadrature(n, rho, P) == pytest.approx(1.0, abs=1e-8)
    # the L^p mass scales exactly like rho^{theta+1}
    ratio = A.moser_lp_energy_exact(n, rho, P) / A.moser_lp_energy_exact(n, 1.0, P)
    assert ratio == pytest.approx(rho ** (pt[1] + 1), rel=1e-12)


def test_moser_lp_closed_form_against_quadrature():
    for p, theta in PAIRS:
        P = params(p, theta)
        n, rho = 6, 1.5
        f = lambda r: A.moser_value(np.array([r]), n, rho, P)[0] ** p * P.omega_theta * r ** theta
        r0 = A.plateau_radius(n, rho, P)
        q = integrate.quad(f, 0, r0, epsabs=0, epsrel=1e-12)[0] \
            + integrate.quad(f, r0, rho, epsabs=0, epsrel=1e-12, limit=200)[0]
        assert A.moser_lp_energy_exact(n, rho, P) == pytest.approx(q, rel=1e-9)


def test_moser_lp_ratio_at_50():
    for p, theta in PAIRS:
        P = params(p, theta)
        ratio = 50 * A.moser_lp_energy_exact(50, 1.0, P) / A.moser_lp_limit(P)
        assert abs(ratio - 1) < 0.05


def test_moser_profile_sampled_norms():
    P = params(2, 1)
    g = make_grid(P, 1.0, 4096, "geometric", r_min=1e-9)
    v = A.moser_profile(10, 1.0, P, g)
    assert grad_energy(v) == pytest.approx(1.0, rel=1e-4)
    assert lq_energy(v, 2) == pytest.approx(A.moser_lp_energy_exact(10, 1.0, P), rel=1e-4)


def test_moser_errors():
    P = params(2, 1)
    with pytest.raises(GridTooCoarseError):
        A.moser_profile(60, 1.0, P, make_grid(P, 1.0, 256, "uniform"))
    with pytest.raises(DomainError):
        A.moser_value(np.array([0.1]), 0, 1.0, P)
    with pytest.raises(DomainError):
        A.moser_value(np.array([0.1]), 2, -1.0, P)


def test_sharpness_small_n_against_quadrature():
    # n = 1: integrate the plateau integrand directly
    P = params(2, 1)
    n, rho = 1, 1.0
    a = A.moser_lp_energy_exact(n, rho, P)
    r0 = A.plateau_radius(n, rho, P)
    # w = v/||v||, eta = 1: mu (1 + ||w||_2^2) w^2 on the plateau
    v0 = A.moser_value(np.array([0.0]), n, rho, P)[0]
    t = P.mu_crit * (1 + a / (1 + a)) * v0 ** 2 / (1 + a)
    q = integrate.quad(lambda r: math.expm1(t) * P.omega_theta * r, 0, r0)[0]
    assert A.sharpness_certificate(n, rho, P) == pytest.approx(q, rel=1e-6)


def test_sharpness_grows_toward_ball():
    P = params(2, 1)
    vals = [A.sharpness_certificate(n, 1.0, P) for n in (10, 30, 60, 200)]
    assert all(b > a for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(math.pi, rel=2e-3)


def test_sharpness_exact_exponent_dominates():
    P = params(3, 2)
    assert A.sharpness_exact_plateau(40, 1.0, P) >= A.sharpness_certificate(40, 1.0, P)


# -- blow-up profile ------------------------------------------------------------------------

def test_blowup_constant():
    for p, theta in PAIRS:
        P = params(p, theta)
        b = A.BlowupProfile(P)
        assert b.c_at ** (p - 1) == pytest.approx(P.omega_theta / (theta + 1), rel=1e-12)


def test_w_values():
    P = params(2, 1)
    b = A.BlowupProfile(P)
    assert A.w_profile(b, 0.0) == 0.0
    assert A.w_profile(b, 1.0) == pytest.approx(-math.log(1 + math.pi) / (4 * math.pi), rel=1e-14)
    r = np.linspace(0, 10, 101)
    assert np.all(np.diff(A.w_profile(b, r)) <= 0)
    assert A.w_derivative(b, np.array([0.0]))[0] == 0.0


@pytest.mark.parametrize("p, theta", PAIRS)
def test_w_normalization(p, theta):
    assert A.w_normalization(A.BlowupProfile(params(p, theta))) == pytest.approx(1.0, abs=1e-6)


def test_w_ode_residual_converges():
    P = params(2, 1)
    b = A.BlowupProfile(P)
    res = [A.w_ode_residual(b, make_grid(P, 10.0, n, "uniform")) for n in (1024, 2048, 4096)]
    assert res[2] <= 1e-4
    assert res[1] <= 0.5 * res[0] and res[2] <= 0.5 * res[1]


# -- Green function ---------------------------------------------------------------------------

def test_green_matches_bessel_k0():
    gf = green(0.0)
    r = gf.profile.r
    sel = (r > 1e-8) & (r < 5)
    ref = special.k0(r[sel]) / (2 * math.pi)
    assert np.max(np.abs(gf.profile.values[sel] - ref)) <= 1e-6
    assert gf.a_eta == pytest.approx((math.log(2) - EULER_GAMMA) / (2 * math.pi), abs=1e-6)


def test_green_shape_invariants():
    for eta in (0.0, 0.5):
        gf = green(eta)
        v = gf.profile.values
        assert np.all(np.diff(v) <= 1e-12) and v[0] > 0
        assert abs(v[-1]) <= 1e-6
        assert gf.residual <= 1e-5
        assert abs(gf.fit_slope) <= 1e-2


def test_green_scaling_and_shift():
    P = params(2, 1)
    for eta in (0.25, 0.5):
        g0, ge = green(0.0), green(eta)
        assert A.green_scaling_defect(g0, ge) <= 1e-5
        assert ge.a_eta - g0.a_eta == pytest.approx(-math.log(1 - eta) / P.mu_crit, abs=1e-4)


def test_green_p3():
    P = params(3, 2)
    g0, ge = green(0.0, 3, 2), green(0.5, 3, 2)
    assert g0.residual <= 1e-5 and ge.residual <= 1e-5
    assert A.green_scaling_defect(g0, ge) <= 1e-4
    assert ge.a_eta - g0.a_eta == pytest.approx(-math.log(0.5) / P.mu_crit, abs=1e-4)


def test_green_resolution_agreement():
    a1 = green(0.0, 2, 1, 2048).a_eta
    a2 = green(0.0, 2, 1, 4096).a_eta
    assert a1 == pytest.approx(a2, abs=1e-3)


def test_solve_green_rejects_eta_one():
    with pytest.raises(DomainError):
        A.solve_green(1.0, params(2, 1))


def test_green_interpolant():
    gf = green(0.0)
    r = np.array([1e-12, 20.5])
    out = gf(r)
    assert out[1] == 0.0
    # log continuation below the first node
    assert out[0] == pytest.approx(-2 / (4 * math.pi) * math.log(1e-12) + gf.a_eta, rel=1e-6)


# -- threshold and test function ----------------------------------------------------------------

def test_threshold_p2():
    gf = green(0.0)
    th = A.cc_threshold(gf)
    assert th == pytest.approx(math.pi * math.exp(4 * math.pi * gf.a_eta + 1), rel=1e-12)
    # exact value from A_0 = (ln 2 - gamma)/(2 pi)
    assert th == pytest.approx(math.pi * math.exp(2 * (math.log(2) - EULER_GAMMA) + 1), rel=1e-5)
    assert th > 0


def test_threshold_in_eta():
    t0 = A.cc_threshold(green(0.0))
    for eta in (0.25, 0.5):
        assert A.cc_threshold(green(eta)) * (1 - eta) == pytest.approx(t0, rel=1e-4)


def test_test_function_norm_and_trend():
    gf = green(0.1)
    defects = [A.critical_test_details(eps, 0.1, gf).norm_defect for eps in (1e-2, 1e-3, 1e-4)]
    assert defects[1] <= 5e-3
    assert defects[0] > defects[1] > defects[2]
    Ys = [A.critical_test_details(eps, 0.1, gf).Y for eps in (1e-2, 1e-3, 1e-4)]
    assert Ys[0] > Ys[1] > Ys[2] > 0


def test_test_function_returns_triple():
    prof, norm, value = A.critical_test_function(1e-3, 0.0, green(0.0))
    assert norm == pytest.approx(1.0, abs=5e-3)
    assert value > 0 and prof.values.min() >= 0


def test_test_function_formula_mode_glue_check():
    with pytest.raises(GlueMismatchError):
        A.critical_test_details(1e-2, 0.0, green(0.0), b_mode="formula")
    with pytest.raises(DomainError):
        A.critical_test_details(0.5, 0.0, green(0.0))
    with pytest.raises(DomainError):
        A.critical_test_details(1e-3, 0.2, green(0.0))


def test_h_partial_sums():
    hr = A.h_epsilon_eta(1e-3, 0.0, green(0.0))
    assert hr.value == pytest.approx(4 * math.pi, rel=1e-12)
    assert hr.correction == 0.0
    h5 = A.h_epsilon_eta(1e-3, 0.05, green(0.05))
    assert h5.value > 0 and h5.correction < 0


def test_h_coupled_noninteger():
    P = params(2.5, 2)
    gf = green(0.05, 2.5, 2)
    hr = A.h_epsilon_eta(None, 0.05, gf, P)
    assert hr.epsilon == 0.05 and math.isfinite(hr.value)
    with pytest.raises(DomainError):
        A.h_epsilon_eta(None, 0.0, green(0.0, 2.5, 2), P)
