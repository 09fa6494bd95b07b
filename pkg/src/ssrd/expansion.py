"""Small-noise expansion of the joint discounting transform for a pair of
correlated square-root diffusions (short rate r, default intensity lam).

In the rescaled variables x = exp(a1 t) r, y = exp(a2 t) lam the legs become
shifted martingales, and the two pricing transforms

    v(t, x, y, T) = E[ exp(-int_t^T (r_u + lam_u) du) ]
    h(t, x, y, T) = exp(a2 T) E[ exp(-int_t^T (r_u + lam_u) du) lam_T ]

are expanded by Taylor-expanding the PDE coefficients around the mean path
of (x, y).  Order zero freezes everything on the mean path and gives the
deterministic-limit transform v0 (exponential-affine in the state).  The
corrections are time-ordered iterated integrals of the first-order coefficient
operator; evaluating them at the expansion anchor collapses each one to a
scalar quadrature of the proxy covariances against accumulated discount
loadings:

    v1 = 0                       (the first-order operator is odd in the
                                  centered state, and the payoff 1 leaves
                                  nothing for it to hit)
    h1 = -int_t^T [e^{-a1 s} C12(t,s) + e^{-a2 s} C22(t,s)] ds * v0
                                 (covariance of the accumulated discount
                                  with the terminal intensity)
    v2 = int_t^T { e^{-a1 s} [C11 psi(-a1,s,T) + C12 psi(-a2,s,T)]
                 + e^{-a2 s} [C12 psi(-a1,s,T) + C22 psi(-a2,s,T)] }(t,s) ds * v0
                                 (variance of the accumulated discount; the
                                  remaining-window factors psi(-a, s, T)
                                  weight each covariance increment by the
                                  discount exposure it still faces)
    h2 = (y + a2 b2 psi(a2,t,T)) * v2

These match the exact transforms through O(sigma^2) and O(rho sigma^2)
inclusive: the zero-correlation limit reproduces the per-leg bond convexity
exactly, and the C12 terms reproduce the integrated rate/intensity covariance.
The proxy matches the exact mean and per-leg variance of (x, y); only the
cross-covariance freezes sqrt(x y) at the mean path, which is where the
anchor floor below comes in for near-zero rate states.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cir import CirParams
from .timeint import gauss_legendre, psi, theta

__all__ = [
    "AnchorDomainError",
    "ModelParams",
    "ExpansionTerms",
    "expansion_terms",
    "v_expansion",
    "h_expansion",
    "survival_approx",
    "zcb_approx",
    "proxy_bond_expansion",
    "kernel_integral",
    "ANCHOR_FLOOR",
]

# Anchor floor for fractional powers of the mean path.  Linear moment terms
# keep the raw anchor; only sqrt-type powers (which all carry a factor of
# the effective correlation) are floored, so a zero-correlation model is
# never distorted.
ANCHOR_FLOOR = 1e-10

_QUAD_BLOCK = 1 << 16


class AnchorDomainError(ValueError):
    """A mean-path anchor is non-positive where a fractional power is needed."""


# --------------------------------------------------------------------------
# Parameters
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelParams:
    """Joint short-rate / default-intensity square-root model.

        dr   = alpha1 (beta1 - r) dt + sigma1 sqrt(r) dW1
        dlam = alpha2 (beta2 - lam) dt + sigma2 sqrt(lam) dW2,  d<W1,W2> = rho dt

    ``sigma1_hat``, when set, replaces ``sigma1`` in every expansion moment
    (it is the risk-neutral rate volatility implied from the discount curve;
    the order-zero transform is volatility-free either way).
    """

    alpha1: float
    beta1: float
    sigma1: float
    r0: float
    alpha2: float
    beta2: float
    sigma2: float
    lambda0: float
    rho: float
    sigma1_hat: float | None = None

    def __post_init__(self):
        vals = [self.alpha1, self.beta1, self.sigma1, self.r0, self.alpha2,
                self.beta2, self.sigma2, self.lambda0, self.rho]
        if self.sigma1_hat is not None:
            vals.append(self.sigma1_hat)
        if not all(math.isfinite(float(v)) for v in vals):
            raise ValueError("model parameters must be finite")
        if self.alpha1 <= 0.0 or self.alpha2 <= 0.0:
            raise ValueError("mean-reversion speeds must be positive")
        if self.beta1 < 0.0 or self.beta2 < 0.0:
            raise ValueError("mean-reversion levels must be non-negative")
        if self.sigma1 < 0.0 or self.sigma2 < 0.0:
            raise ValueError("volatilities must be non-negative")
        if self.sigma1_hat is not None and self.sigma1_hat < 0.0:
            raise ValueError("sigma1_hat must be non-negative")
        if self.lambda0 <= 0.0:
            raise ValueError("initial intensity must be positive")
        if abs(self.rho) > 1.0:
            raise ValueError("correlation must lie in [-1, 1]")

    @property
    def sigma1_active(self) -> float:
        return self.sigma1 if self.sigma1_hat is None else self.sigma1_hat

    @property
    def rho_hat(self) -> float:
        """Effective cross-diffusion coefficient rho * sigma1_active * sigma2."""
        return self.rho * self.sigma1_active * self.sigma2

    @property
    def alpha_bar(self) -> float:
        return 0.5 * (self.alpha1 + self.alpha2)

    def rate_leg(self) -> CirParams:
        return CirParams(self.alpha1, self.beta1, self.sigma1, self.r0)

    def intensity_leg(self) -> CirParams:
        return CirParams(self.alpha2, self.beta2, self.sigma2, self.lambda0)


# --------------------------------------------------------------------------
# Proxy moments
# --------------------------------------------------------------------------

class _ProxyMoments:
    """Mean-path anchors and proxy (co)variances, anchored at a fixed t0.

    All second moments are exact for the per-leg rescaled processes; the
    cross term c12 freezes sqrt(xbar ybar) along the mean path and is the
    only quantity needing quadrature of its own.
    """

    def __init__(self, params: ModelParams, t0: float, x: float, y: float, n_nodes: int):
        self.p = params
        self.t0 = float(t0)
        self.x = float(x)
        self.y = float(y)
        self.n_nodes = int(n_nodes)
        self.x_frac = max(self.x, ANCHOR_FLOOR)
        self.y_frac = max(self.y, ANCHOR_FLOOR)
        if params.rho_hat != 0.0 and (self.x < ANCHOR_FLOOR or self.y < ANCHOR_FLOOR):
            warnings.warn(
                "state anchor below %.0e with non-zero correlation; fractional "
                "powers of the mean path are floored" % ANCHOR_FLOOR,
                RuntimeWarning,
                stacklevel=3,
            )

    # mean path of the rescaled state, exact
    def xbar(self, s):
        return self.x + self.p.alpha1 * self.p.beta1 * psi(self.p.alpha1, self.t0, s)

    def ybar(self, s):
        return self.y + self.p.alpha2 * self.p.beta2 * psi(self.p.alpha2, self.t0, s)

    def _frac_anchor(self, s, base, alpha, beta, label):
        vals = np.asarray(base + alpha * beta * psi(alpha, self.t0, s), dtype=float)
        if np.any(vals <= 0.0):
            s_arr = np.broadcast_to(np.asarray(s, dtype=float), vals.shape)
            bad = float(np.min(s_arr[vals <= 0.0]))
            raise AnchorDomainError(
                f"{label} mean-path anchor non-positive at s={bad:.6g}; "
                "fractional moment powers are undefined there"
            )
        return vals

    def xbar_frac(self, s):
        return self._frac_anchor(s, self.x_frac, self.p.alpha1, self.p.beta1, "rate")

    def ybar_frac(self, s):
        return self._frac_anchor(s, self.y_frac, self.p.alpha2, self.p.beta2, "intensity")

    # proxy variances, closed form
    def c11(self, s):
        p = self.p
        sig = p.sigma1_active
        return sig * sig * (self.x * psi(p.alpha1, self.t0, s)
                            + p.alpha1 * p.beta1 * theta(p.alpha1, p.alpha1, self.t0, s))

    def c22(self, s):
        p = self.p
        return p.sigma2 * p.sigma2 * (self.y * psi(p.alpha2, self.t0, s)
                                      + p.alpha2 * p.beta2 * theta(p.alpha2, p.alpha2, self.t0, s))

    def c12(self, s):
        """Proxy cross-covariance rho_hat * int_t0^s exp(abar u) sqrt(xbar ybar) du."""
        s = np.asarray(s, dtype=float)
        if self.p.rho_hat == 0.0:
            return np.zeros(s.shape)
        flat = s.reshape(-1)
        out = np.empty(flat.shape)
        block = max(1, _QUAD_BLOCK // self.n_nodes)
        for lo in range(0, flat.size, block):
            sb = flat[lo:lo + block]
            u, w = gauss_legendre(self.t0, sb, self.n_nodes)
            integrand = np.exp(self.p.alpha_bar * u) * np.sqrt(
                self.xbar_frac(u) * self.ybar_frac(u))
            out[lo:lo + block] = self.p.rho_hat * np.sum(w * integrand, axis=-1)
        return out.reshape(s.shape)


# --------------------------------------------------------------------------
# Expansion of v and h
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionTerms:
    """Per-order contributions to v and h on a maturity grid.

    ``v_terms[n]`` / ``h_terms[n]`` hold the order-n term; partial sums give
    the order-N approximations.
    """

    maturities: np.ndarray
    v_terms: np.ndarray
    h_terms: np.ndarray

    @property
    def order(self) -> int:
        return self.v_terms.shape[0] - 1

    def v(self, order: int | None = None) -> np.ndarray:
        n = self.order if order is None else order
        return self.v_terms[: n + 1].sum(axis=0)

    def h(self, order: int | None = None) -> np.ndarray:
        n = self.order if order is None else order
        return self.h_terms[: n + 1].sum(axis=0)


def _correction_integrals(mom: _ProxyMoments, T: np.ndarray, n_nodes: int, order: int):
    """Scalar correction integrals over [t0, T] (T may be any array shape).

    Returns (i_h1, i_v2):

        i_h1 = -int [e^{-a1 s} c12(t0,s) + e^{-a2 s} c22(t0,s)] ds
        i_v2 =  int { e^{-a1 s} [c11 J1 + c12 J2] + e^{-a2 s} [c12 J1 + c22 J2] } ds

    with J_i(s) = psi(-a_i, s, T) the discount loading still ahead of s.  The
    second one is the variance of the accumulated discount under the proxy,
    each covariance increment weighted by its remaining exposure window.
    """
    p = mom.p
    s, w = gauss_legendre(mom.t0, T, n_nodes)
    em1 = np.exp(-p.alpha1 * s)
    em2 = np.exp(-p.alpha2 * s)
    c22 = mom.c22(s)
    c12 = mom.c12(s)
    i_h1 = -np.sum(w * (em1 * c12 + em2 * c22), axis=-1)
    if order < 2:
        return i_h1, None
    c11 = mom.c11(s)
    t_hi = T[..., None]
    j1 = psi(-p.alpha1, s, t_hi)
    j2 = psi(-p.alpha2, s, t_hi)
    integrand = em1 * (c11 * j1 + c12 * j2) + em2 * (c12 * j1 + c22 * j2)
    i_v2 = np.sum(w * integrand, axis=-1)
    return i_h1, i_v2


def _terms_engine(params: ModelParams, T: np.ndarray, order: int, n_nodes: int,
                  t0: float, x: float, y: float):
    p = params
    psi1 = np.asarray(psi(-p.alpha1, t0, T), dtype=float)
    psi2 = np.asarray(psi(-p.alpha2, t0, T), dtype=float)
    v0 = np.exp(-x * psi1 - p.alpha1 * p.beta1 * np.asarray(theta(-p.alpha1, p.alpha1, t0, T))
                - y * psi2 - p.alpha2 * p.beta2 * np.asarray(theta(-p.alpha2, p.alpha2, t0, T)))
    mean_y = y + p.alpha2 * p.beta2 * np.asarray(psi(p.alpha2, t0, T))
    v_list = [v0]
    h_list = [v0 * mean_y]
    if order >= 1:
        mom = _ProxyMoments(p, t0, x, y, n_nodes)
        i_h1, i_v2 = _correction_integrals(mom, T, n_nodes, order)
        # The payoff-1 transform has no first-order term: the correction
        # operator is linear in the centered state, whose proxy mean is zero
        # at the anchor.  The terminal-intensity payoff leaves the
        # discount/terminal covariance behind.
        v_list.append(np.zeros_like(v0))
        h_list.append(i_h1 * v0)
    if order >= 2:
        v2 = i_v2 * v0
        v_list.append(v2)
        h_list.append(mean_y * v2)
    return np.stack(v_list), np.stack(h_list)


def expansion_terms(params: ModelParams, maturities, *, order: int = 2,
                    quad_nodes: int = 32, t: float = 0.0,
                    state: tuple[float, float] | None = None) -> ExpansionTerms:
    """Order-by-order expansion of v and h on a maturity grid.

    ``state`` is the (rate, intensity) level at time ``t``; by default the
    time-zero model state.  Maturities may be any array shape; terms come
    back as (order+1,) + shape.
    """
    if order not in (0, 1, 2):
        raise ValueError("expansion order must be 0, 1 or 2")
    if quad_nodes < 2:
        raise ValueError("need at least 2 quadrature nodes")
    T = np.atleast_1d(np.asarray(maturities, dtype=float))
    if np.any(T < t - 1e-12):
        raise ValueError("maturities must not precede the evaluation time")
    r_t, lam_t = state if state is not None else (params.r0, params.lambda0)
    x = math.exp(params.alpha1 * t) * float(r_t)
    y = math.exp(params.alpha2 * t) * float(lam_t)
    v_terms, h_terms = _terms_engine(params, T, order, quad_nodes, t, x, y)
    return ExpansionTerms(maturities=T, v_terms=v_terms, h_terms=h_terms)


def v_expansion(params: ModelParams, maturities, *, order: int = 2,
                quad_nodes: int = 32, t: float = 0.0,
                state: tuple[float, float] | None = None):
    """Order-N approximation of E[exp(-int (r+lam))] at the given maturities."""
    res = expansion_terms(params, maturities, order=order, quad_nodes=quad_nodes,
                          t=t, state=state)
    out = res.v()
    return float(out[0]) if np.isscalar(maturities) or np.ndim(maturities) == 0 else out


def h_expansion(params: ModelParams, maturities, *, order: int = 2,
                quad_nodes: int = 32, t: float = 0.0,
                state: tuple[float, float] | None = None):
    """Order-N approximation of exp(a2 T) E[exp(-int (r+lam)) lam_T]."""
    res = expansion_terms(params, maturities, order=order, quad_nodes=quad_nodes,
                          t=t, state=state)
    out = res.h()
    return float(out[0]) if np.isscalar(maturities) or np.ndim(maturities) == 0 else out


# --------------------------------------------------------------------------
# One-leg closed forms
# --------------------------------------------------------------------------

def proxy_bond_expansion(alpha: float, beta: float, state: float, maturities,
                         t: float = 0.0, *, quad_nodes: int = 32):
    """Volatility-squared Taylor coefficients of a one-leg transform.

    Returns (p0, lin, quad) such that

        E[exp(-int_t^T X_u du)] ~= p0 * (1 + lin * sigma^2 + quad * sigma^4)

    for the square-root leg dX = alpha (beta - X) dt + sigma sqrt(X) dW with
    X_t = state.  The coefficients come from perturbing the bond ODE system
    in sigma^2: with B0(w) = psi(-alpha, 0, w),

        B1(w) = -1/2 int_0^w e^{-alpha (w-u)} B0(u)^2 du
        B2(w) = -    int_0^w e^{-alpha (w-u)} B0(u) B1(u) du
        Ln    = -state * Bn(tau) - alpha beta int_0^tau Bn(w) dw

    and lin = L1, quad = L2 + L1^2/2 (the exponential re-expanded as a plain
    series).  This is the exact Taylor expansion of the closed-form bond in
    sigma^2 around zero, so it agrees with the transform expansion above
    through O(sigma^2) and sharpens the sigma^4 term.
    """
    T = np.asarray(maturities, dtype=float)
    tau = np.atleast_1d(T - t)
    if np.any(tau < -1e-12):
        raise ValueError("maturities must not precede the evaluation time")
    tau = np.maximum(tau, 0.0)
    y = float(state)
    alpha = float(alpha)
    beta = float(beta)
    n = int(quad_nodes)

    def b1(w):
        # w: any array; inner nodes add one trailing axis
        u, wu = gauss_legendre(0.0, w, n)
        vals = np.exp(-alpha * (w[..., None] - u)) * np.asarray(psi(-alpha, 0.0, u)) ** 2
        return -0.5 * np.sum(wu * vals, axis=-1)

    def b2(w):
        u, wu = gauss_legendre(0.0, w, n)
        vals = (np.exp(-alpha * (w[..., None] - u))
                * np.asarray(psi(-alpha, 0.0, u)) * b1(u))
        return -np.sum(wu * vals, axis=-1)

    p0 = np.exp(-y * np.asarray(psi(-alpha, 0.0, tau))
                - alpha * beta * np.asarray(theta(-alpha, alpha, 0.0, tau)))
    w_out, ww_out = gauss_legendre(0.0, tau, n)
    l1 = -y * b1(tau) - alpha * beta * np.sum(ww_out * b1(w_out), axis=-1)
    l2 = -y * b2(tau) - alpha * beta * np.sum(ww_out * b2(w_out), axis=-1)
    lin = l1
    quad = l2 + 0.5 * l1 * l1
    if np.ndim(T) == 0:
        return float(p0[0]), float(lin[0]), float(quad[0])
    return p0, lin, quad


def survival_approx(leg: CirParams, maturities, t: float = 0.0, *,
                    order: int = 1, quad_nodes: int = 32):
    """Low-order survival probability E[exp(-int lam)] for one leg.

    ``leg.x0`` is the intensity level at time ``t``.  ``order`` counts powers
    of sigma^2: 0 gives the deterministic-limit survival, 1 adds the exact
    O(sigma^2) convexity correction and is the form used for acceptance
    checks, 2 adds the O(sigma^4) term used when inverting for a matched
    volatility.
    """
    if order not in (0, 1, 2):
        raise ValueError("survival order must be 0, 1 or 2")
    p0, lin, quad = proxy_bond_expansion(leg.alpha, leg.beta, leg.x0, maturities,
                                         t=t, quad_nodes=quad_nodes)
    s2 = leg.sigma * leg.sigma
    corr = 0.0 if order < 1 else s2 * lin
    if order >= 2:
        corr = corr + s2 * s2 * quad
    out = p0 * (1.0 + corr)
    return float(out) if np.ndim(maturities) == 0 else out


def zcb_approx(leg: CirParams, maturities, t: float = 0.0, *,
               order: int = 2, quad_nodes: int = 32):
    """Same expansion read as a zero-coupon bond price for a rate leg.

    Defaults to order 2 (in sigma^2) because its consumer is the matched
    volatility inversion, which needs the quadratic term.
    """
    return survival_approx(leg, maturities, t=t, order=order, quad_nodes=quad_nodes)


# --------------------------------------------------------------------------
# Kernel integrals (exposed mainly for validation)
# --------------------------------------------------------------------------

_MOMENT_FAMILIES = {
    "one": (),
    "c11": ("c11",),
    "c22": ("c22",),
    "c12": ("c12",),
    "c11*c12": ("c11", "c12"),
    "c22*c12": ("c22", "c12"),
    "c11*c22": ("c11", "c22"),
}


def kernel_integral(params: ModelParams, family: str, i: int, j: int, t1, t2, *,
                    power: int = 1, growth: float | None = None,
                    quad_nodes: int = 32, t: float = 0.0,
                    state: tuple[float, float] | None = None):
    """Quadrature of exp(g u) xbar^{i/2} ybar^{j/2} <moments>^power over [t1, t2].

    ``family`` picks the proxy-moment product (e.g. "c11", "c12", "c11*c22",
    or "one" for a pure mean-path weight); ``power`` applies to single-moment
    families only.  Anchors stay at time ``t`` regardless of the limits,
    matching their use inside the expansion integrals.
    """
    if family not in _MOMENT_FAMILIES:
        raise ValueError(f"unknown moment family {family!r}")
    names = _MOMENT_FAMILIES[family]
    if power != 1 and len(names) != 1:
        raise ValueError("power only applies to single-moment families")
    r_t, lam_t = state if state is not None else (params.r0, params.lambda0)
    x = math.exp(params.alpha1 * t) * float(r_t)
    y = math.exp(params.alpha2 * t) * float(lam_t)
    mom = _ProxyMoments(params, t, x, y, quad_nodes)
    g = params.alpha_bar if growth is None else float(growth)
    lo = np.asarray(t1, dtype=float)
    hi = np.asarray(t2, dtype=float)
    u, w = gauss_legendre(lo, hi, quad_nodes)
    vals = np.exp(g * u)
    if i != 0:
        vals = vals * mom.xbar_frac(u) ** (0.5 * i)
    if j != 0:
        vals = vals * mom.ybar_frac(u) ** (0.5 * j)
    for name in names:
        m = getattr(mom, name)(u)
        vals = vals * (m ** power if len(names) == 1 else m)
    out = np.sum(w * vals, axis=-1)
    return float(out) if (np.ndim(t1) == 0 and np.ndim(t2) == 0) else out
