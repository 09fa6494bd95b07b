"""Market data containers: discount curves, CDS quotes, schedules, config.

File formats are deliberately plain text so fixtures stay diffable:

* curve CSV     -- ``tenor_years,value`` rows preceded by a ``# mode=rate``
                   or ``# mode=df`` header; rate mode means continuously
                   compounded zeros, DF = exp(-z*T).  An optional ``# r0=``
                   header carries the observed short rate.
* quotes CSV    -- ``tenor_years,bid_bps,ask_bps[,mid_bps]`` rows; optional
                   ``# currency=`` / ``# valuation=YYYY-MM-DD`` headers.
                   Missing mid defaults to (bid+ask)/2.
* config        -- flat ``key=value`` lines (recovery, frequency_months,
                   roll, day_count, quad_nodes, order, valuation).
"""

from __future__ import annotations

import bisect
import calendar
import datetime as _dt
import math
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "MarketDataError",
    "DiscountCurve",
    "CdsQuoteSet",
    "PricingConfig",
    "Schedule",
    "load_discount_curve",
    "save_discount_curve",
    "load_cds_quotes",
    "load_pricing_config",
    "build_schedule",
    "add_months",
]


class MarketDataError(ValueError):
    """Malformed or inconsistent market input."""


# --------------------------------------------------------------------------
# Discount curve
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscountCurve:
    """Discount factors on an ascending tenor grid (years).

    Factors above 1 are accepted (negative-rate curves) up to a sanity cap
    of 1.5.  No interpolation is offered: the calibration only ever reads
    the quoted pillars.
    """

    tenors: tuple[float, ...]
    dfs: tuple[float, ...]
    short_rate: float | None = None

    def __post_init__(self):
        if len(self.tenors) == 0:
            raise MarketDataError("discount curve is empty")
        if len(self.tenors) != len(self.dfs):
            raise MarketDataError("tenor/df length mismatch")
        prev = -math.inf
        for t, p in zip(self.tenors, self.dfs):
            if not (math.isfinite(t) and math.isfinite(p)):
                raise MarketDataError("non-finite curve entry")
            if t < 0.0:
                raise MarketDataError(f"negative tenor {t}")
            if t <= prev:
                raise MarketDataError(f"tenors not strictly ascending at {t}")
            prev = t
            if not (0.0 < p <= 1.5):
                raise MarketDataError(f"discount factor {p} at {t}y outside (0, 1.5]")
            if t == 0.0 and abs(p - 1.0) > 1e-12:
                raise MarketDataError("discount factor at t=0 must be 1")

    def df(self, tenor: float) -> float:
        """Discount factor at an exact grid tenor."""
        i = bisect.bisect_left(self.tenors, tenor - 1e-12)
        if i < len(self.tenors) and abs(self.tenors[i] - tenor) <= 1e-12:
            return self.dfs[i]
        raise MarketDataError(f"tenor {tenor} not on curve grid")

    def zero_rate(self, tenor: float) -> float:
        if tenor <= 0:
            raise MarketDataError("zero rate needs a positive tenor")
        return -math.log(self.df(tenor)) / tenor

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.tenors), np.asarray(self.dfs)


def _parse_comment_headers(lines):
    """Split '# key=value' comment headers from data lines."""
    meta: dict[str, str] = {}
    data = []
    for ln_no, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, val = body.partition("=")
                meta[key.strip().lower()] = val.strip()
            continue
        data.append((ln_no, line))
    return meta, data


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise MarketDataError(f"non-numeric value {token!r} in {where}") from None


def load_discount_curve(path, mode: str | None = None) -> DiscountCurve:
    """Read a curve CSV; ``mode`` overrides the file's ``# mode=`` header."""
    with open(path, "r", encoding="utf-8") as fh:
        meta, rows = _parse_comment_headers(fh)
    mode = (mode or meta.get("mode", "")).lower()
    if mode not in ("rate", "df"):
        raise MarketDataError(f"curve {path}: mode must be 'rate' or 'df', got {mode!r}")
    tenors, values = [], []
    for ln_no, line in rows:
        cells = [c.strip() for c in line.split(",")]
        if cells[0].lower() in ("tenor_years", "tenor"):
            continue  # tolerated header row
        if len(cells) != 2:
            raise MarketDataError(f"curve {path}:{ln_no}: expected 2 columns")
        t = _parse_float(cells[0], f"{path}:{ln_no}")
        v = _parse_float(cells[1], f"{path}:{ln_no}")
        if t in tenors:
            raise MarketDataError(f"curve {path}:{ln_no}: duplicate tenor {t}")
        tenors.append(t)
        values.append(v)
    if not tenors:
        raise MarketDataError(f"curve {path}: no data rows")
    order = np.argsort(tenors)
    tenors = [tenors[i] for i in order]
    values = [values[i] for i in order]
    if mode == "rate":
        dfs = [math.exp(-z * t) for t, z in zip(tenors, values)]
    else:
        dfs = values
    r0 = None
    if "r0" in meta:
        r0 = _parse_float(meta["r0"], f"{path} header r0")
    return DiscountCurve(tenors=tuple(tenors), dfs=tuple(dfs), short_rate=r0)


def save_discount_curve(curve: DiscountCurve, path) -> None:
    """Write a curve as df-mode CSV; reload reproduces factors bit-exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# mode=df\n")
        if curve.short_rate is not None:
            fh.write(f"# r0={curve.short_rate!r}\n")
        fh.write("tenor_years,value\n")
        for t, p in zip(curve.tenors, curve.dfs):
            fh.write(f"{t!r},{p!r}\n")


# --------------------------------------------------------------------------
# CDS quotes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CdsQuoteSet:
    """Bid/ask/mid CDS spreads in basis points on ascending tenors."""

    tenors: tuple[float, ...]
    bid_bps: tuple[float, ...]
    ask_bps: tuple[float, ...]
    mid_bps: tuple[float, ...]
    currency: str = "USD"
    valuation: _dt.date | None = None

    def __post_init__(self):
        n = len(self.tenors)
        if n == 0:
            raise MarketDataError("quote set is empty")
        if not (len(self.bid_bps) == len(self.ask_bps) == len(self.mid_bps) == n):
            raise MarketDataError("quote column length mismatch")
        prev = 0.0
        for t, b, a, m in zip(self.tenors, self.bid_bps, self.ask_bps, self.mid_bps):
            if t <= prev:
                raise MarketDataError(f"tenors not strictly ascending/positive at {t}")
            prev = t
            if not (b > 0.0 and math.isfinite(b) and math.isfinite(a) and math.isfinite(m)):
                raise MarketDataError(f"bad quote at tenor {t}")
            if a < b:
                raise MarketDataError(f"ask below bid at tenor {t}")
            if a > b:
                if not (b - 1e-9 <= m <= a + 1e-9):
                    raise MarketDataError(f"mid outside bid/ask at tenor {t}")
            elif abs(m - b) > 1e-9:
                raise MarketDataError(f"mid must equal bid when bid == ask (tenor {t})")

    def __len__(self) -> int:
        return len(self.tenors)

    @property
    def mid_decimal(self) -> np.ndarray:
        return np.asarray(self.mid_bps) * 1e-4


def load_cds_quotes(path) -> CdsQuoteSet:
    with open(path, "r", encoding="utf-8") as fh:
        meta, rows = _parse_comment_headers(fh)
    tenors, bids, asks, mids = [], [], [], []
    for ln_no, line in rows:
        cells = [c.strip() for c in line.split(",")]
        if cells[0].lower() in ("tenor_years", "tenor"):
            continue
        if len(cells) not in (3, 4):
            raise MarketDataError(f"quotes {path}:{ln_no}: expected 3 or 4 columns")
        vals = [_parse_float(c, f"{path}:{ln_no}") for c in cells]
        tenors.append(vals[0])
        bids.append(vals[1])
        asks.append(vals[2])
        mids.append(vals[3] if len(vals) == 4 else 0.5 * (vals[1] + vals[2]))
    if not tenors:
        raise MarketDataError(f"quotes {path}: no data rows")
    valuation = None
    if "valuation" in meta:
        try:
            valuation = _dt.date.fromisoformat(meta["valuation"])
        except ValueError:
            raise MarketDataError(f"quotes {path}: bad valuation date") from None
    return CdsQuoteSet(
        tenors=tuple(tenors),
        bid_bps=tuple(bids),
        ask_bps=tuple(asks),
        mid_bps=tuple(mids),
        currency=meta.get("currency", "USD"),
        valuation=valuation,
    )


# --------------------------------------------------------------------------
# Pricing configuration
# --------------------------------------------------------------------------

_CONFIG_KEYS = {
    "recovery", "frequency_months", "roll", "day_count", "quad_nodes", "order", "valuation",
}


@dataclass(frozen=True)
class PricingConfig:
    recovery: float = 0.40
    frequency_months: int = 6
    roll: str = "fixed"
    day_count: str = "act360"
    quad_nodes: int = 32
    order: int = 2
    valuation: _dt.date | None = None
    roll_days: tuple[tuple[int, int], ...] = ((6, 20), (12, 20))

    def __post_init__(self):
        if not (0.0 <= self.recovery < 1.0):
            raise MarketDataError(f"recovery must be < 1 and >= 0, got {self.recovery}")
        if not (isinstance(self.frequency_months, int) and self.frequency_months > 0):
            raise MarketDataError("frequency_months must be a positive integer")
        if self.roll not in ("fixed", "anniversary"):
            raise MarketDataError(f"unknown roll rule {self.roll!r}")
        if self.day_count not in ("act360", "act365"):
            raise MarketDataError(f"unknown day count {self.day_count!r}")
        if self.quad_nodes < 8:
            raise MarketDataError("quad_nodes must be >= 8")
        if self.order not in (0, 1, 2):
            raise MarketDataError("order must be 0, 1 or 2")

    def with_overrides(self, **kw) -> "PricingConfig":
        return replace(self, **kw)


def load_pricing_config(path) -> PricingConfig:
    with open(path, "r", encoding="utf-8") as fh:
        meta, rows = _parse_comment_headers(fh)
    kw: dict = {}
    items = list(meta.items())
    for ln_no, line in rows:
        if "=" not in line:
            raise MarketDataError(f"config {path}:{ln_no}: expected key=value")
        key, _, val = line.partition("=")
        items.append((key.strip().lower(), val.strip()))
    for key, val in items:
        if key not in _CONFIG_KEYS:
            raise MarketDataError(f"config {path}: unknown key {key!r}")
        if key == "recovery":
            kw[key] = _parse_float(val, f"{path} recovery")
        elif key in ("frequency_months", "quad_nodes", "order"):
            try:
                kw[key] = int(val)
            except ValueError:
                raise MarketDataError(f"config {path}: {key} must be an integer") from None
        elif key == "valuation":
            try:
                kw[key] = _dt.date.fromisoformat(val)
            except ValueError:
                raise MarketDataError(f"config {path}: bad valuation date") from None
        else:
            kw[key] = val
    return PricingConfig(**kw)


# --------------------------------------------------------------------------
# Premium schedules
# --------------------------------------------------------------------------

def add_months(d: _dt.date, months: int) -> _dt.date:
    """Calendar-month shift with end-of-month day clamping."""
    y, m0 = divmod(d.month - 1 + months, 12)
    year, month = d.year + y, m0 + 1
    day = min(d.day, calendar.monthrange(year, month)[1])
    return _dt.date(year, month, day)


def _year_fraction(d1: _dt.date, d2: _dt.date, day_count: str) -> float:
    days = (d2 - d1).days
    return days / 360.0 if day_count == "act360" else days / 365.0


@dataclass(frozen=True)
class Schedule:
    """Premium payment grid: times in years from valuation, t0 = 0 implicit.

    ``accruals[i]`` is the year fraction of (times[i-1], times[i]].  For a
    running time s in (0, maturity], ``payment_index(s)`` returns the index
    of the first payment time >= s, so that
    ``previous_time(s) < s <= times[payment_index(s)]``.
    """

    times: tuple[float, ...]
    accruals: tuple[float, ...]
    valuation: _dt.date | None = None
    dates: tuple[_dt.date, ...] | None = None

    def __post_init__(self):
        if not self.times:
            raise MarketDataError("schedule has no payment dates")
        if len(self.times) != len(self.accruals):
            raise MarketDataError("times/accruals length mismatch")
        prev = 0.0
        for t, a in zip(self.times, self.accruals):
            if t <= prev:
                raise MarketDataError("payment times must be strictly increasing and > 0")
            if abs(a - (t - prev)) > 1e-12:
                raise MarketDataError("accrual inconsistent with payment times")
            prev = t

    @property
    def maturity(self) -> float:
        return self.times[-1]

    def payment_index(self, s: float) -> int:
        if not (0.0 < s <= self.maturity + 1e-12):
            raise MarketDataError(f"time {s} outside (0, maturity]")
        return min(bisect.bisect_left(self.times, s - 1e-12), len(self.times) - 1)

    def previous_time(self, s: float) -> float:
        i = self.payment_index(s)
        return 0.0 if i == 0 else self.times[i - 1]

    def is_prefix_of(self, other: "Schedule") -> bool:
        n = len(self.times)
        if n > len(other.times):
            return False
        return all(abs(a - b) < 1e-12 for a, b in zip(self.times, other.times[:n]))


def _roll_dates_after(start: _dt.date, roll_days) -> "iter":
    """Yield configured roll dates strictly after ``start``, ascending."""
    rolls = sorted(roll_days)
    year = start.year - 1
    while True:
        for month, day in rolls:
            d = _dt.date(year, month, day)
            if d > start:
                yield d
        year += 1


def build_schedule(valuation: _dt.date | None, tenor_years: float, config: PricingConfig) -> Schedule:
    """Build the premium schedule for one CDS maturity.

    Fixed-roll mode places payments on the configured roll days and extends
    the final payment to the first roll date at or beyond valuation+tenor;
    it requires a valuation date.  Anniversary mode steps in multiples of
    the payment frequency from valuation; without a valuation date it works
    on an abstract year-fraction grid (accruals equal time differences).
    """
    if tenor_years <= 0:
        raise MarketDataError("tenor must be positive")
    fm = config.frequency_months
    if config.roll == "anniversary":
        if 12 % fm != 0:
            raise MarketDataError("frequency must divide a year cleanly in anniversary mode")
        if valuation is None:
            delta = fm / 12.0
            n_full = int(math.floor(tenor_years / delta + 1e-9))
            times = [k * delta for k in range(1, n_full + 1)]
            if not times or times[-1] < tenor_years - 1e-9:
                times.append(tenor_years)
            accruals = [t - p for t, p in zip(times, [0.0] + times[:-1])]
            return Schedule(times=tuple(times), accruals=tuple(accruals))
        months_total = tenor_years * 12.0
        if abs(months_total - round(months_total)) > 1e-9:
            raise MarketDataError("dated anniversary schedules need whole-month tenors")
        months_total = int(round(months_total))
        dates = [add_months(valuation, k) for k in range(fm, months_total + 1, fm)]
        if not dates or dates[-1] < add_months(valuation, months_total):
            dates.append(add_months(valuation, months_total))
    else:
        if valuation is None:
            raise MarketDataError("fixed-roll schedules need a valuation date")
        months_total = tenor_years * 12.0
        if abs(months_total - round(months_total)) < 1e-9:
            nominal_end = add_months(valuation, int(round(months_total)))
        else:
            nominal_end = valuation + _dt.timedelta(days=round(tenor_years * 365))
        dates = []
        for d in _roll_dates_after(valuation, config.roll_days):
            dates.append(d)
            if d >= nominal_end:
                break
    times = [_year_fraction(valuation, d, config.day_count) for d in dates]
    accruals = [t - p for t, p in zip(times, [0.0] + times[:-1])]
    return Schedule(times=tuple(times), accruals=tuple(accruals), valuation=valuation, dates=tuple(dates))
