"""Shared fixtures: parameter sets, market strips, pricing configs.

The four intensity parameter sets span the behaviors that stress the
expansion differently: "slow" has near-zero mean reversion toward a high
level (long-memory hazard), "fast" reverts quickly to a low level with the
largest volatility-to-level ratio, and the two "mid" sets sit between, one
with low and one with high volatility.  All four satisfy the Feller
condition and are paired with the same moderate rate factor.
"""

from __future__ import annotations

import numpy as np
import pytest

from ssrd.cir import CirParams
from ssrd.expansion import ModelParams
from ssrd.market import PricingConfig

RATE_FIXTURE = {"alpha1": 0.2, "beta1": 0.03, "sigma1": 0.05, "r0": 0.02}

INTENSITY_SETS = {
    "slow": {"alpha2": 0.00561, "beta2": 0.92493, "sigma2": 0.02352,
             "lambda0": 0.01011, "rho": -0.02910},
    "mid1": {"alpha2": 0.03966, "beta2": 0.16350, "sigma2": 0.01600,
             "lambda0": 0.00436, "rho": 0.04662},
    "fast": {"alpha2": 0.22724, "beta2": 0.05817, "sigma2": 0.06869,
             "lambda0": 0.00537, "rho": -0.05432},
    "mid2": {"alpha2": 0.04117, "beta2": 0.18416, "sigma2": 0.07196,
             "lambda0": 0.01103, "rho": 0.05469},
}

SET_NAMES = tuple(INTENSITY_SETS)

# An 11-tenor observed spread strip (bps, semiannual 1y..6y) used by the
# bootstrap tests; mids quoted directly, one-bp synthetic bid/ask around them.
MARKET_STRIP_TENORS = tuple(1.0 + 0.5 * k for k in range(11))
MARKET_STRIP_MIDS = (76.878, 83.557, 90.452, 97.552, 104.847, 112.325,
                     119.976, 127.787, 135.743, 143.832, 152.039)


def make_model(name: str, *, rho: float | None = None, **overrides) -> ModelParams:
    """Rate fixture + one named intensity set, with optional overrides."""
    kw = dict(RATE_FIXTURE)
    kw.update(INTENSITY_SETS[name])
    if rho is not None:
        kw["rho"] = rho
    kw.update(overrides)
    return ModelParams(**kw)


def rate_leg_params() -> CirParams:
    f = RATE_FIXTURE
    return CirParams(f["alpha1"], f["beta1"], f["sigma1"], f["r0"])


def intensity_leg_params(name: str) -> CirParams:
    s = INTENSITY_SETS[name]
    return CirParams(s["alpha2"], s["beta2"], s["sigma2"], s["lambda0"])


@pytest.fixture
def anniversary_config() -> PricingConfig:
    return PricingConfig(roll="anniversary")


@pytest.fixture(params=SET_NAMES)
def set_name(request) -> str:
    return request.param


def assert_close(actual, expected, rtol=0.0, atol=0.0, label=""):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    err = np.abs(actual - expected)
    bound = atol + rtol * np.abs(expected)
    assert np.all(err <= bound), (
        f"{label or 'value'}: max error {float(np.max(err - bound)):.3e} above bound "
        f"(actual {actual!r}, expected {expected!r})"
    )
