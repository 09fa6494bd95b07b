"""Joint-transform expansion against independent oracles.

Oracle routes used here, none of which share code with the implementation:

* zero correlation  -- v factorizes exactly into the two closed-form
  one-leg transforms, so order-2 output is checked against that product;
* zero volatility   -- everything collapses to deterministic mean-path
  integrals with closed forms written out inline;
* kernel integrals  -- brute-force trapezoid rules on dense grids;
* sigma^2 Taylor    -- coefficient correctness shown by the error decaying
  like sigma^6 against the exact one-leg transform.
"""

from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid, quad

from conftest import INTENSITY_SETS, SET_NAMES, intensity_leg_params, make_model
from ssrd.cir import CirParams, cir_bond, cir_bond_dT
from ssrd.expansion import (
    ANCHOR_FLOOR,
    AnchorDomainError,
    ModelParams,
    _ProxyMoments,
    expansion_terms,
    h_expansion,
    kernel_integral,
    proxy_bond_expansion,
    survival_approx,
    v_expansion,
    zcb_approx,
)
from ssrd.timeint import psi, theta

MATURITIES = np.array([0.5, 1.0, 2.0, 3.0, 5.0])


# --------------------------------------------------------------------------
# Parameter container
# --------------------------------------------------------------------------


def test_params_validation():
    base = dict(alpha1=0.2, beta1=0.03, sigma1=0.05, r0=0.02,
                alpha2=0.04, beta2=0.18, sigma2=0.07, lambda0=0.011, rho=0.05)
    ModelParams(**base)  # sanity: the base set is valid
    for key, bad in [("alpha1", 0.0), ("alpha2", -0.1), ("beta2", -1e-9),
                     ("sigma1", -0.01), ("sigma2", -0.01), ("lambda0", 0.0),
                     ("rho", 1.5), ("r0", math.nan)]:
        with pytest.raises(ValueError):
            ModelParams(**{**base, key: bad})
    with pytest.raises(ValueError):
        ModelParams(**base, sigma1_hat=-0.1)
    # negative short rates are representable; only the intensity is sign-constrained
    ModelParams(**{**base, "r0": -0.005, "rho": 0.0})


def test_active_rate_volatility_substitution():
    loud = make_model("mid2", sigma1=0.4, sigma1_hat=0.05)
    quiet = make_model("mid2", sigma1=0.05)
    assert loud.sigma1_active == 0.05
    assert loud.rho_hat == quiet.rho_hat
    # every expansion moment must see the active volatility only
    np.testing.assert_array_equal(
        v_expansion(loud, MATURITIES), v_expansion(quiet, MATURITIES)
    )
    np.testing.assert_array_equal(
        h_expansion(loud, MATURITIES), h_expansion(quiet, MATURITIES)
    )


# --------------------------------------------------------------------------
# Structural identities of the expansion
# --------------------------------------------------------------------------


def test_zero_maturity_identities(set_name):
    model = make_model(set_name)
    terms = expansion_terms(model, 0.0, order=2)
    assert terms.v()[0] == 1.0
    assert terms.h()[0] == model.lambda0
    # all corrections integrate over an empty interval
    assert np.all(terms.v_terms[1:] == 0.0)
    assert np.all(terms.h_terms[1:] == 0.0)


def test_first_order_transform_term_vanishes(set_name):
    # The payoff-1 correction is linear in the centered proxy state, so its
    # first-order contribution is identically zero at every maturity.
    terms = expansion_terms(make_model(set_name), MATURITIES, order=2)
    assert np.all(terms.v_terms[1] == 0.0)
    assert np.any(terms.h_terms[1] != 0.0)


def test_orders_are_nested_partial_sums(set_name):
    model = make_model(set_name)
    full = expansion_terms(model, MATURITIES, order=2)
    for order in (0, 1, 2):
        np.testing.assert_array_equal(full.v(order), full.v_terms[: order + 1].sum(axis=0))
        part = expansion_terms(model, MATURITIES, order=order)
        np.testing.assert_array_equal(part.v_terms, full.v_terms[: order + 1])
        np.testing.assert_array_equal(part.h_terms, full.h_terms[: order + 1])
        np.testing.assert_array_equal(v_expansion(model, MATURITIES, order=order), full.v(order))
        np.testing.assert_array_equal(h_expansion(model, MATURITIES, order=order), full.h(order))


def test_expansion_input_validation():
    model = make_model("mid1")
    with pytest.raises(ValueError):
        expansion_terms(model, 1.0, order=3)
    with pytest.raises(ValueError):
        expansion_terms(model, 1.0, quad_nodes=1)
    with pytest.raises(ValueError):
        expansion_terms(model, 0.5, t=1.0)
    terms = expansion_terms(model, [[1.0, 2.0], [3.0, 4.0]], order=2)
    assert terms.v_terms.shape == (3, 2, 2)


def test_scalar_maturity_returns_float():
    model = make_model("fast")
    assert isinstance(v_expansion(model, 1.0), float)
    assert isinstance(h_expansion(model, 1.0), float)
    vec = v_expansion(model, [1.0])
    assert vec.shape == (1,)


def test_conditioning_on_later_state():
    # Anchoring at (t, state) must reproduce the t = T boundary values in the
    # rescaled convention: v = 1 and h = exp(alpha2 t) * lambda_t.
    model = make_model("slow")
    t, lam_t = 1.5, 0.019
    v = v_expansion(model, t, t=t, state=(0.03, lam_t))
    h = h_expansion(model, t, t=t, state=(0.03, lam_t))
    assert v == 1.0
    assert h == pytest.approx(math.exp(model.alpha2 * t) * lam_t, rel=1e-14)


# --------------------------------------------------------------------------
# Zero-volatility and zero-correlation oracles
# --------------------------------------------------------------------------


def _mean_integral(alpha, beta, x0, T):
    """int_0^T of the mean-reverting ODE path, closed form."""
    return beta * T + (x0 - beta) * (-np.expm1(-alpha * T)) / alpha


def test_deterministic_limit_is_exact(set_name):
    model = make_model(set_name, sigma1=0.0, sigma2=0.0)
    expected_v = np.exp(
        -_mean_integral(model.alpha1, model.beta1, model.r0, MATURITIES)
        - _mean_integral(model.alpha2, model.beta2, model.lambda0, MATURITIES)
    )
    terms = expansion_terms(model, MATURITIES, order=2)
    np.testing.assert_allclose(terms.v(), expected_v, rtol=1e-12)
    assert np.all(terms.v_terms[1:] == 0.0) and np.all(terms.h_terms[1:] == 0.0)
    lam_bar = model.lambda0 * np.exp(-model.alpha2 * MATURITIES) + model.beta2 * (
        -np.expm1(-model.alpha2 * MATURITIES)
    )
    np.testing.assert_allclose(
        terms.h() * np.exp(-model.alpha2 * MATURITIES), expected_v * lam_bar, rtol=1e-12
    )


def test_uncorrelated_transform_factorizes(set_name):
    model = make_model(set_name, rho=0.0)
    p = cir_bond(model.rate_leg(), 0.0, MATURITIES)
    q = cir_bond(model.intensity_leg(), 0.0, MATURITIES)
    v2 = v_expansion(model, MATURITIES, order=2)
    np.testing.assert_allclose(v2, p * q, rtol=1e-3)
    # h carries the exp(alpha2 T) rescaling of the terminal intensity
    h2 = h_expansion(model, MATURITIES, order=2)
    oracle = np.exp(model.alpha2 * MATURITIES) * p * (-cir_bond_dT(model.intensity_leg(), 0.0, MATURITIES))
    np.testing.assert_allclose(h2, oracle, rtol=1e-3)


def test_second_order_tightens_the_uncorrelated_fit(set_name):
    model = make_model(set_name, rho=0.0)
    T = np.array([1.0, 3.0, 5.0])
    exact = cir_bond(model.rate_leg(), 0.0, T) * cir_bond(model.intensity_leg(), 0.0, T)
    err1 = np.abs(v_expansion(model, T, order=1) - exact)
    err2 = np.abs(v_expansion(model, T, order=2) - exact)
    assert np.all(err2 <= err1)


def test_correlation_monotonicity():
    # Positive rho raises Var(int r + lam), and by convexity of exp the
    # transform v with it; the terminal-intensity payoff carries the
    # discount/terminal covariance with a minus sign, so h moves the other way.
    T = 3.0
    for name in SET_NAMES:
        vs = [v_expansion(make_model(name, rho=r), T, order=2) for r in (-0.5, 0.0, 0.5)]
        hs = [h_expansion(make_model(name, rho=r), T, order=2) for r in (-0.5, 0.0, 0.5)]
        assert vs[0] < vs[1] < vs[2], name
        assert hs[0] > hs[1] > hs[2], name


def test_quadrature_node_doubling_is_converged(set_name):
    model = make_model(set_name)
    v32 = v_expansion(model, MATURITIES, order=2, quad_nodes=32)
    v64 = v_expansion(model, MATURITIES, order=2, quad_nodes=64)
    h32 = h_expansion(model, MATURITIES, order=2, quad_nodes=32)
    h64 = h_expansion(model, MATURITIES, order=2, quad_nodes=64)
    assert np.max(np.abs(v64 - v32) / np.abs(v64)) < 1e-9
    assert np.max(np.abs(h64 - h32) / np.abs(h64)) < 1e-9


# --------------------------------------------------------------------------
# One-leg sigma^2 Taylor expansion
# --------------------------------------------------------------------------


def test_proxy_bond_coefficients_match_exact_transform_scaling():
    # If (p0, lin, quad) are the true Taylor coefficients in sigma^2, the
    # residual against the exact transform must shrink like sigma^6.
    alpha, beta, x0, T = 0.2, 0.03, 0.02, 5.0
    p0, lin, quad = proxy_bond_expansion(alpha, beta, x0, T)
    sigmas = np.array([0.05, 0.1, 0.2])
    errs = []
    for s in sigmas:
        exact = cir_bond(CirParams(alpha, beta, s, x0), 0.0, T)
        approx = p0 * (1.0 + s**2 * lin + s**4 * quad)
        errs.append(abs(exact - approx))
    # halving sigma divides the error by ~64; allow a generous band
    assert errs[2] / errs[1] == pytest.approx(64.0, rel=0.6)
    assert errs[1] / errs[0] == pytest.approx(64.0, rel=0.6)
    # the sigma^6 coefficient itself is order one for this leg
    assert all(e / s**6 < 2.5 for e, s in zip(errs, sigmas))


def test_proxy_bond_zero_vol_base_is_deterministic_bond():
    alpha, beta, x0 = 0.04117, 0.18416, 0.01103
    T = np.array([1.0, 4.0])
    p0, lin, quad = proxy_bond_expansion(alpha, beta, x0, T)
    np.testing.assert_allclose(p0, np.exp(-_mean_integral(alpha, beta, x0, T)), rtol=1e-12)
    assert np.all(lin > 0.0)  # convexity raises the transform above its mean-path value


def test_survival_orders_bracket_exact_transform(set_name):
    leg = intensity_leg_params(set_name)
    T = np.array([0.5, 2.0, 4.0, 6.0])
    exact = cir_bond(leg, 0.0, T)
    err = [np.max(np.abs(survival_approx(leg, T, order=k) - exact) / exact) for k in (0, 1, 2)]
    assert err[1] < err[0] and err[2] < err[1]
    assert err[1] < 5e-3


def test_survival_zero_vol_is_exact():
    leg = CirParams(0.04, 0.18, 0.0, 0.011)
    T = np.array([1.0, 6.0])
    for order in (0, 1, 2):
        np.testing.assert_allclose(survival_approx(leg, T, order=order),
                                   cir_bond(leg, 0.0, T), rtol=1e-12)
    with pytest.raises(ValueError):
        survival_approx(leg, T, order=3)


def test_zcb_alias_defaults_to_quadratic_order():
    leg = CirParams(0.2, 0.03, 0.05, 0.02)
    assert zcb_approx(leg, 4.0) == survival_approx(leg, 4.0, order=2)


# --------------------------------------------------------------------------
# Kernel integrals vs brute-force quadrature
# --------------------------------------------------------------------------


def test_kernel_identity_family_reduces_to_exponential_integral():
    model = make_model("mid2")
    for g in (-0.3, 0.0, 0.7):
        got = kernel_integral(model, "one", 0, 0, 0.25, 2.0, growth=g)
        assert got == pytest.approx(psi(g, 0.25, 2.0), rel=1e-13)


def test_kernel_empty_interval_is_zero():
    model = make_model("mid2")
    assert kernel_integral(model, "c12", 1, 1, 1.0, 1.0) == 0.0
    assert kernel_integral(model, "one", 2, 0, 0.5, 0.5) == 0.0


def test_kernel_mean_path_weight_matches_adaptive_quadrature():
    model = make_model("fast")
    x, y = model.r0, model.lambda0

    def xbar(u):
        return x + model.alpha1 * model.beta1 * psi(model.alpha1, 0.0, u)

    def ybar(u):
        return y + model.alpha2 * model.beta2 * psi(model.alpha2, 0.0, u)

    oracle, _ = quad(lambda u: np.exp(0.1 * u) * xbar(u) * np.sqrt(ybar(u)), 0.0, 3.0,
                     epsabs=1e-15, epsrel=1e-13)
    got = kernel_integral(model, "one", 2, 1, 0.0, 3.0, growth=0.1)
    assert got == pytest.approx(oracle, rel=1e-10)


def test_kernel_cross_covariance_family_matches_dense_trapezoid():
    # Outer integral of exp(abar u) sqrt(xbar ybar) c12(u) on [0, 1], with the
    # inner c12 built independently by cumulative trapezoid on 1e5 panels.
    model = make_model("mid2")
    n = 100_001
    u = np.linspace(0.0, 1.0, n)
    xbar = model.r0 + model.alpha1 * model.beta1 * psi(model.alpha1, 0.0, u)
    ybar = model.lambda0 + model.alpha2 * model.beta2 * psi(model.alpha2, 0.0, u)
    growth = np.exp(model.alpha_bar * u)
    root = np.sqrt(xbar * ybar)
    c12 = model.rho_hat * cumulative_trapezoid(growth * root, u, initial=0.0)
    oracle = np.trapezoid(growth * root * c12, u)
    got = kernel_integral(model, "c12", 1, 1, 0.0, 1.0)
    assert got == pytest.approx(oracle, rel=1e-8)


def test_kernel_variance_family_with_power_matches_trapezoid():
    model = make_model("fast")
    n = 200_001
    u = np.linspace(0.0, 2.0, n)
    lam_psi = psi(model.alpha2, 0.0, u)
    # c22 in closed form from public primitives
    c22 = model.sigma2**2 * (model.lambda0 * lam_psi
                             + model.alpha2 * model.beta2 * theta(model.alpha2, model.alpha2, 0.0, u))
    oracle = np.trapezoid(c22**2, u)
    got = kernel_integral(model, "c22", 0, 0, 0.0, 2.0, growth=0.0, power=2)
    assert got == pytest.approx(oracle, rel=1e-9)


def test_kernel_cross_family_vanishes_without_correlation():
    model = make_model("mid2", rho=0.0)
    assert kernel_integral(model, "c12", 1, 1, 0.0, 2.0) == 0.0
    assert kernel_integral(model, "c11*c12", 0, 0, 0.0, 2.0) == 0.0


def test_kernel_rejects_bad_requests():
    model = make_model("mid1")
    with pytest.raises(ValueError, match="moment family"):
        kernel_integral(model, "c13", 0, 0, 0.0, 1.0)
    with pytest.raises(ValueError, match="power"):
        kernel_integral(model, "c11*c22", 0, 0, 0.0, 1.0, power=2)


def test_kernel_broadcasts_interval_arrays():
    model = make_model("mid1")
    hi = np.array([1.0, 2.0])
    got = kernel_integral(model, "c22", 0, 1, 0.0, hi)
    assert got.shape == (2,)
    for k, h in enumerate(hi):
        assert got[k] == pytest.approx(kernel_integral(model, "c22", 0, 1, 0.0, float(h)), rel=1e-14)


# --------------------------------------------------------------------------
# Proxy covariance matrix properties
# --------------------------------------------------------------------------


def test_proxy_covariance_psd_at_correlation_bounds():
    # At rho = +-1 the 2x2 proxy covariance must stay positive semidefinite:
    # c12^2 <= c11 c22 pointwise (Cauchy-Schwarz along the mean path).
    for rho in (-1.0, 1.0):
        model = make_model("mid2", rho=rho)
        mom = _ProxyMoments(model, 0.0, model.r0, model.lambda0, 64)
        s = np.linspace(0.05, 5.0, 40)
        c11, c22, c12 = mom.c11(s), mom.c22(s), mom.c12(s)
        assert np.all(c11 > 0) and np.all(c22 > 0)
        assert np.all(c12**2 <= c11 * c22 * (1.0 + 1e-10))


def test_proxy_variances_match_small_time_growth():
    # Leading order c11(s) ~ sigma^2 x0 s for small s.
    model = make_model("mid1")
    mom = _ProxyMoments(model, 0.0, model.r0, model.lambda0, 32)
    s = 1e-4
    assert mom.c11(s) == pytest.approx(model.sigma1**2 * model.r0 * s, rel=1e-3)
    assert mom.c22(s) == pytest.approx(model.sigma2**2 * model.lambda0 * s, rel=1e-3)


# --------------------------------------------------------------------------
# Anchor floor and domain failures
# --------------------------------------------------------------------------


def test_tiny_anchor_warns_only_under_correlation():
    tiny = make_model("mid2", r0=ANCHOR_FLOOR / 10)
    with pytest.warns(RuntimeWarning, match="state anchor below"):
        v_expansion(tiny, 1.0, order=2)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        v_expansion(make_model("mid2", r0=ANCHOR_FLOOR / 10, rho=0.0), 1.0, order=2)


def test_negative_mean_path_anchor_raises_before_fractional_power():
    # Conditioning at t > 0 can place kernel limits before the anchor, where
    # the mean path extrapolates below zero; fractional powers must refuse.
    model = make_model("mid2", alpha2=1.0, beta2=1.0, lambda0=0.1)
    with pytest.raises(AnchorDomainError, match="intensity mean-path anchor non-positive"):
        kernel_integral(model, "c12", 1, 1, 0.0, 1.0, t=1.0, growth=0.0)


def test_negative_short_rate_prices_when_uncorrelated():
    # With rho = 0 no fractional powers of the rate path are taken, so a
    # negative observed short rate is fine.
    model = make_model("mid1", r0=-0.003, rho=0.0)
    v = v_expansion(model, MATURITIES, order=2)
    assert np.all(np.isfinite(v)) and np.all(v > 0)
    q = cir_bond(model.intensity_leg(), 0.0, MATURITIES)
    # discounting at slightly negative rates exceeds the pure survival factor
    assert np.all(v > q * np.exp(-0.01 * MATURITIES))
