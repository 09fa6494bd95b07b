"""CDS leg valuation under the two-factor square-root model.

Values are per unit notional at time 0.  With short rate r and default
intensity lam, the loss leg of a contract maturing at T pays (1 - recovery)
at the default time if it lands in (0, T]; its value is

    (1 - recovery) * int_0^T E[exp(-int_0^s (r+lam)) lam_s] ds
    = (1 - recovery) * int_0^T exp(-alpha2 s) h(s) ds,

since the expansion engine's h carries the exp(+alpha2 s) change of scale.
The premium leg per unit of running spread collects the coupons,

    sum_i dt_i * E[exp(-int_0^{t_i} (r+lam))] = sum_i dt_i * v(t_i),

plus the accrued coupon paid at default,

    int_0^T exp(-alpha2 s) h(s) (s - t_prev(s)) ds,

where t_prev(s) is the last payment time before s.  The accrual factor has
a kink at every payment date, so all time integrals here use Gauss-Legendre
panels aligned with the coupon grid: no panel straddles a payment date, and
doubling the node count refines every period in place.

The par spread is the ratio of the two legs.  It is quoted as a decimal
(multiply by 1e4 for basis points) and is exactly zero at full recovery.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .cir import CirParams, cir_bond, cir_bond_dT, feller_margin
from .expansion import ModelParams, expansion_terms
from .market import PricingConfig, Schedule, build_schedule
from .timeint import panel_nodes

__all__ = [
    "LegValues",
    "price_cds",
    "spread_curve",
    "spread_ladder",
    "uncorrelated_spread",
]


@dataclass(frozen=True)
class LegValues:
    """Both legs of a CDS and the par spread they imply.

    protection  loss-leg value per unit notional, loss-given-default included
    annuity     premium leg per unit spread: coupons plus accrual-on-default,
                in year units (positive for any nonempty schedule)
    spread      protection / annuity, decimal
    """

    protection: float
    annuity: float
    spread: float

    @property
    def spread_bps(self) -> float:
        return 1e4 * self.spread


def _warn_feller(params: ModelParams) -> None:
    for name, leg in (("rate", params.rate_leg()), ("intensity", params.intensity_leg())):
        if feller_margin(leg) < 0.0:
            warnings.warn(
                f"{name} factor violates 2*alpha*beta >= sigma^2; the zero "
                "boundary is attainable and expansion accuracy may degrade",
                RuntimeWarning,
                stacklevel=3,
            )


def _leg_pieces(
    params: ModelParams, schedule: Schedule, config: PricingConfig
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-coupon-period leg contributions, one expansion call for all of them.

    For period i = (t_{i-1}, t_i] returns
        prot[i] = int exp(-alpha2 s) h(s) ds          over the period,
        acc[i]  = int exp(-alpha2 s) h(s) (s - t_{i-1}) ds,
        coup[i] = dt_i * v(t_i),
    so any prefix sum prices the contract truncated at a payment date.
    """
    times = np.asarray(schedule.times, dtype=float)
    accruals = np.asarray(schedule.accruals, dtype=float)
    breaks = np.concatenate(([0.0], times))
    nodes, weights = panel_nodes(breaks, config.quad_nodes)

    points = np.concatenate((nodes.ravel(), times))
    terms = expansion_terms(params, points, order=config.order, quad_nodes=config.quad_nodes)
    n_panel = nodes.size
    h_nodes = terms.h().reshape(-1)[:n_panel].reshape(nodes.shape)
    v_coupon = terms.v().reshape(-1)[n_panel:]

    kernel = weights * np.exp(-params.alpha2 * nodes) * h_nodes
    prot = np.sum(kernel, axis=1)
    acc = np.sum(kernel * (nodes - breaks[:-1, None]), axis=1)
    coup = accruals * v_coupon
    return prot, acc, coup


def price_cds(params: ModelParams, schedule: Schedule, config: PricingConfig) -> LegValues:
    """Value both legs of one contract and return the par spread.

    The expansion order and nodes-per-panel come from ``config``; when the
    params carry a matched rate volatility it is used automatically by the
    expansion engine.  A Feller violation on either factor gets a warning,
    not an error -- the expansion stays well defined, only its accuracy
    claim weakens.  Empty or nonpositive schedules cannot be constructed,
    so the schedule type itself guards those error cases.
    """
    _warn_feller(params)
    prot, acc, coup = _leg_pieces(params, schedule, config)
    protection = (1.0 - config.recovery) * float(np.sum(prot))
    annuity = float(np.sum(acc) + np.sum(coup))
    return LegValues(protection=protection, annuity=annuity, spread=protection / annuity)


def spread_ladder(
    params: ModelParams,
    schedule: Schedule,
    prefix_lengths,
    config: PricingConfig,
) -> np.ndarray:
    """Par spreads for contracts that are coupon-grid prefixes of ``schedule``.

    ``prefix_lengths[k]`` is the number of leading coupon periods in the
    k-th contract.  One expansion evaluation covers the whole family, and
    because the quadrature panels are per-period, each prefix sum is
    bit-identical to pricing that contract on its own schedule.  This is
    the hot path of the spread calibration loop (one call per objective
    evaluation instead of one per quote) and deliberately skips the Feller
    warning: callers exploring the parameter space handle that via their
    own penalty.
    """
    ends = np.asarray(prefix_lengths, dtype=int)
    if ends.size and (ends.min() < 1 or ends.max() > len(schedule.times)):
        raise ValueError("prefix length outside the coupon grid")
    prot, acc, coup = _leg_pieces(params, schedule, config)
    # summed per prefix, not cumulatively, so each entry reproduces a
    # standalone price_cds on the prefix schedule bit for bit
    lgd = 1.0 - config.recovery
    return np.array(
        [lgd * np.sum(prot[:k]) / (np.sum(acc[:k]) + np.sum(coup[:k])) for k in ends]
    )


def spread_curve(
    params: ModelParams, tenors, config: PricingConfig
) -> list[tuple[float, float]]:
    """Par spreads for a list of tenors, in the order given.

    Schedules are built from ``config`` (valuation date, roll convention,
    day count).  When every schedule is a prefix of the longest one -- the
    normal case for a quote strip on a common roll cycle -- all tenors are
    priced from one expansion evaluation; otherwise each tenor is priced
    independently.  Both paths perform the same arithmetic per tenor.
    """
    tenor_list = [float(T) for T in tenors]
    if not tenor_list:
        return []
    _warn_feller(params)
    schedules = [build_schedule(config.valuation, T, config) for T in tenor_list]
    longest = max(schedules, key=lambda s: len(s.times))
    if all(s.is_prefix_of(longest) for s in schedules):
        ends = [len(s.times) for s in schedules]
        spreads = spread_ladder(params, longest, ends, config)
        return list(zip(tenor_list, (float(r) for r in spreads)))
    out = []
    for T, sched in zip(tenor_list, schedules):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out.append((T, price_cds(params, sched, config).spread))
    return out


def uncorrelated_spread(params: ModelParams, schedule: Schedule, config: PricingConfig) -> float:
    """Par spread for independent factors, from exact one-factor bond formulas.

    At zero correlation the joint expectations factorise: the loss-leg
    integrand is P(0,s) * (-d/ds Q)(0,s) and each coupon carries
    P(0,t_i) * Q(0,t_i), with P and Q the closed-form square-root bond
    prices.  No series expansion enters anywhere, which makes this an
    independent cross-check of ``price_cds``; the quadrature panels match,
    so any difference between the two isolates the expansion error.  The
    rate factor uses the same volatility the expansion engine would (the
    matched value when present).
    """
    if params.rho != 0.0:
        raise ValueError("exact factorisation requires zero correlation")
    rate = CirParams(params.alpha1, params.beta1, params.sigma1_active, params.r0)
    hazard = params.intensity_leg()

    times = np.asarray(schedule.times, dtype=float)
    accruals = np.asarray(schedule.accruals, dtype=float)
    breaks = np.concatenate(([0.0], times))
    nodes, weights = panel_nodes(breaks, config.quad_nodes)

    density = weights * cir_bond(rate, 0.0, nodes) * (-cir_bond_dT(hazard, 0.0, nodes))
    prot = float(np.sum(density))
    acc = float(np.sum(density * (nodes - breaks[:-1, None])))
    coup = float(np.sum(accruals * cir_bond(rate, 0.0, times) * cir_bond(hazard, 0.0, times)))
    return (1.0 - config.recovery) * prot / (acc + coup)
