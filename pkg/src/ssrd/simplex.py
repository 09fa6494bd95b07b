"""Nelder-Mead simplex minimization with smooth bound transforms.

Every calibration step here is a small, deterministic least-squares
problem with a noisy gradient surface, which is exactly the regime where
a derivative-free simplex shines.  Rolling our own keeps the iteration
bit-for-bit reproducible: fixed coefficients, no randomized restarts, no
adaptive tweaks.

Bounds are handled by reparametrization rather than clipping, so the
simplex itself always works in an unconstrained space:

    positive     x = exp(z)        (mean-reversion speeds, levels, vols)
    correlation  x = tanh(z)       (rho in [-1, 1])
    free         x = z

The objective is evaluated in the constrained coordinates; results are
reported there too.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

__all__ = ["CalibrationResult", "Transform", "nelder_mead"]

_KINDS = ("free", "positive", "correlation")

# reflection / expansion / contraction / shrink
_RHO, _CHI, _GAMMA, _SIGMA = 1.0, 2.0, 0.5, 0.5

_ATANH_CLIP = 1.0 - 1e-12


@dataclass(frozen=True)
class Transform:
    """Componentwise map between unconstrained and constrained coordinates."""

    kinds: tuple[str, ...]

    def __post_init__(self):
        for k in self.kinds:
            if k not in _KINDS:
                raise ValueError(f"unknown transform kind {k!r}")

    def constrain(self, z: np.ndarray) -> np.ndarray:
        x = np.array(z, dtype=float)
        for i, k in enumerate(self.kinds):
            if k == "positive":
                x[i] = math.exp(z[i])
            elif k == "correlation":
                x[i] = math.tanh(z[i])
        return x

    def unconstrain(self, x: np.ndarray) -> np.ndarray:
        z = np.array(x, dtype=float)
        for i, k in enumerate(self.kinds):
            if k == "positive":
                if x[i] <= 0.0:
                    raise ValueError(f"component {i} must be positive, got {x[i]}")
                z[i] = math.log(x[i])
            elif k == "correlation":
                z[i] = math.atanh(min(max(x[i], -_ATANH_CLIP), _ATANH_CLIP))
        return z


@dataclass(frozen=True)
class CalibrationResult:
    """Outcome of one minimization, in constrained coordinates.

    ``residuals`` is filled by the calibration wrappers (one entry per
    market quote); the bare optimizer leaves it empty.  ``objective`` is
    the function value at ``x`` -- re-evaluating there must reproduce it
    to 1e-10, which the tests enforce.
    """

    x: np.ndarray
    objective: float
    iterations: int
    n_eval: int
    converged: bool
    residuals: tuple[float, ...] = field(default=())
    elapsed: float = 0.0


def _initial_simplex(z0: np.ndarray) -> np.ndarray:
    """Axis-aligned start: 5% bump per coordinate, absolute for zeros."""
    n = z0.size
    sim = np.tile(z0, (n + 1, 1))
    for i in range(n):
        if sim[i + 1, i] != 0.0:
            sim[i + 1, i] *= 1.05
        else:
            sim[i + 1, i] = 0.00025
    return sim


def nelder_mead(
    objective,
    x0,
    transform: Transform | None = None,
    *,
    diameter_tol: float = 1e-8,
    fspread_tol: float = 1e-12,
    max_iter: int | None = None,
) -> CalibrationResult:
    """Minimize ``objective`` from ``x0`` with the (1, 2, 0.5, 0.5) simplex.

    Convergence is declared when the simplex diameter (max-norm distance
    of any vertex from the best one, in unconstrained coordinates) falls
    below ``diameter_tol`` or the objective spread across vertices falls
    below ``fspread_tol``.  Exhausting the iteration budget returns the
    best vertex with ``converged=False`` instead of raising; a non-finite
    objective at the start is an error.
    """
    t_start = time.perf_counter()
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    n = x0.size
    if transform is not None and len(transform.kinds) != n:
        raise ValueError("transform dimension does not match the start point")
    if max_iter is None:
        max_iter = 500 * n

    if transform is None:
        constrain = lambda z: np.array(z, dtype=float)  # noqa: E731
        z0 = np.array(x0, dtype=float)
    else:
        constrain = transform.constrain
        z0 = transform.unconstrain(x0)

    n_eval = 0

    def f(z: np.ndarray) -> float:
        nonlocal n_eval
        n_eval += 1
        return float(objective(constrain(z)))

    sim = _initial_simplex(z0)
    fvals = np.array([f(z) for z in sim])
    if not math.isfinite(fvals[0]):
        raise ValueError("objective is not finite at the initial point")

    iterations = 0
    converged = False
    while iterations < max_iter:
        order = np.argsort(fvals, kind="stable")
        sim, fvals = sim[order], fvals[order]

        diameter = 0.0 if n == 0 else float(np.max(np.abs(sim[1:] - sim[0])))
        fspread = float(fvals[-1] - fvals[0])
        if diameter < diameter_tol or fspread < fspread_tol:
            converged = True
            break
        iterations += 1

        centroid = np.mean(sim[:-1], axis=0)
        xr = centroid + _RHO * (centroid - sim[-1])
        fr = f(xr)

        if fr < fvals[0]:
            xe = centroid + _RHO * _CHI * (centroid - sim[-1])
            fe = f(xe)
            sim[-1], fvals[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif fr < fvals[-2]:
            sim[-1], fvals[-1] = xr, fr
        else:
            if fr < fvals[-1]:
                xc = centroid + _GAMMA * _RHO * (centroid - sim[-1])
                fc = f(xc)
                accepted = fc <= fr
            else:
                xc = centroid - _GAMMA * (centroid - sim[-1])
                fc = f(xc)
                accepted = fc < fvals[-1]
            if accepted:
                sim[-1], fvals[-1] = xc, fc
            else:
                sim[1:] = sim[0] + _SIGMA * (sim[1:] - sim[0])
                fvals[1:] = [f(z) for z in sim[1:]]

    best = int(np.argmin(fvals))
    return CalibrationResult(
        x=constrain(sim[best]),
        objective=float(fvals[best]),
        iterations=iterations,
        n_eval=n_eval,
        converged=converged,
        elapsed=time.perf_counter() - t_start,
    )
