"""Stable exponential time integrals and Gauss-Legendre helpers.

Every affine building block in this package reduces to integrals of
``exp(a*s)`` against polynomially-growing factors over short horizons.
The closed forms all share the primitive

    E(a, d)  = int_0^d exp(a*w) dw = expm1(a*d)/a

and its first two derivatives in ``a``.  Near ``a = 0`` the naive
expressions cancel catastrophically, so each function switches to a short
Taylor series; thresholds are chosen so the worst-case relative error of
either branch stays below ~1e-12.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

__all__ = [
    "exp_integral",
    "exp_integral_da",
    "exp_integral_da2",
    "psi",
    "theta",
    "gauss_legendre",
    "panel_nodes",
]


def _as_float_arrays(*xs):
    arrs = [np.asarray(x, dtype=float) for x in xs]
    return np.broadcast_arrays(*arrs) if len(arrs) > 1 else arrs


def _maybe_scalar(out, *inputs):
    if all(np.ndim(x) == 0 for x in inputs):
        return float(out)
    return out


def exp_integral(a, d):
    """E(a, d) = int_0^d e^{a w} dw, stable for all a including a = 0."""
    a, d = _as_float_arrays(a, d)
    small = np.abs(a) < 1e-12
    a_safe = np.where(small, 1.0, a)
    ad = a * d
    direct = np.expm1(a_safe * d) / a_safe
    series = d * (1.0 + ad * (0.5 + ad / 6.0))
    out = np.where(small, series, direct)
    return _maybe_scalar(out, a, d)


def exp_integral_da(a, d):
    """dE/da = (a d e^{a d} - expm1(a d)) / a^2 with a small-|a d| series."""
    a, d = _as_float_arrays(a, d)
    ad = a * d
    small = np.abs(ad) < 1e-4
    a_safe = np.where(small, 1.0, a)
    direct = (ad * np.exp(ad) - np.expm1(ad)) / (a_safe * a_safe)
    series = d * d * (0.5 + ad * (1.0 / 3.0 + ad * (0.125 + ad * (1.0 / 30.0 + ad / 144.0))))
    out = np.where(small, series, direct)
    return _maybe_scalar(out, a, d)


def exp_integral_da2(a, d):
    """d^2 E/da^2, switching to a series for |a d| < 1e-2."""
    a, d = _as_float_arrays(a, d)
    ad = a * d
    small = np.abs(ad) < 1e-2
    a_safe = np.where(small, 1.0, a)
    ead = np.exp(ad)
    direct = (ad * ad * ead - 2.0 * ad * ead + 2.0 * np.expm1(ad)) / (a_safe**3)
    series = d**3 * (
        1.0 / 3.0 + ad * (0.25 + ad * (0.1 + ad * (1.0 / 36.0 + ad / 168.0)))
    )
    out = np.where(small, series, direct)
    return _maybe_scalar(out, a, d)


def psi(alpha, t1, t2):
    """psi(alpha, t1, t2) = int_{t1}^{t2} e^{alpha s} ds.

    Equals (e^{alpha t2} - e^{alpha t1})/alpha, with the alpha -> 0 limit
    t2 - t1 taken when |alpha| < 1e-12.
    """
    alpha, t1, t2 = _as_float_arrays(alpha, t1, t2)
    out = np.exp(alpha * t1) * exp_integral(alpha, t2 - t1)
    return _maybe_scalar(out, alpha, t1, t2)


def _g_factor(alpha, beta, d):
    """G(alpha, beta, d) = int_0^d e^{alpha w} E(beta, w) dw."""
    alpha, beta, d = _as_float_arrays(alpha, beta, d)
    small = np.abs(beta * d) < 1e-5
    beta_safe = np.where(small, 1.0, beta)
    direct = (exp_integral(alpha + beta_safe, d) - exp_integral(alpha, d)) / beta_safe
    series = exp_integral_da(alpha, d) + 0.5 * beta * exp_integral_da2(alpha, d)
    return np.where(small, series, direct)


def theta(alpha, beta, t, t2):
    """theta(alpha, beta, t, t2) = int_t^{t2} e^{alpha s} psi(beta, t, s) ds.

    The inner psi is anchored at the lower limit t.  Closed form
    [psi(alpha+beta, t, t2) - e^{beta t} psi(alpha, t, t2)]/beta, evaluated
    through the shifted primitive G so that the nested beta -> 0 and
    alpha -> 0 limits are exact:

        theta = e^{(alpha+beta) t} * G(alpha, beta, t2 - t).
    """
    alpha, beta, t, t2 = _as_float_arrays(alpha, beta, t, t2)
    out = np.exp((alpha + beta) * t) * _g_factor(alpha, beta, t2 - t)
    return _maybe_scalar(out, alpha, beta, t, t2)


@lru_cache(maxsize=32)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_legendre(a, b, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b].

    ``a`` and ``b`` may be arrays (broadcast against each other); the node
    axis is appended last, so scalars give shape (n,) and shape-(m,) limits
    give shape (m, n).
    """
    x, w = _leggauss(n)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    nodes = mid[..., None] + half[..., None] * x
    weights = half[..., None] * w
    return nodes, weights


def panel_nodes(breaks: np.ndarray, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule applied per panel of a strictly increasing grid.

    Returns nodes and weights of shape (len(breaks)-1, n); summing
    ``f(nodes) * weights`` over both axes integrates f over
    [breaks[0], breaks[-1]] with panel boundaries at every grid point.
    """
    breaks = np.asarray(breaks, dtype=float)
    if breaks.ndim != 1 or breaks.size < 2:
        raise ValueError("panel grid needs at least two points")
    if np.any(np.diff(breaks) <= 0):
        raise ValueError("panel grid must be strictly increasing")
    return gauss_legendre(breaks[:-1], breaks[1:], n)
