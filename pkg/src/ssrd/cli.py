"""Batch command line: calibration steps, pricing, survival, MC checks.

Every subcommand reads CSV/key=value inputs, runs the corresponding
library operations, prints an aligned report table to stdout, and -- when
``--out DIR`` is given -- writes the same report as ``<command>.txt``,
``.csv``, and ``.json`` alongside each other.  Exit status: 0 on success,
2 on any input problem (missing file, schema violation, bad flag
combination), 3 when a calibration ran but did not converge.

The quadrature node count can be overridden without touching config
files through the ``SSRD_QUAD_NODES`` environment variable (useful for
quick accuracy/runtime sweeps over otherwise frozen inputs).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from dataclasses import fields as dc_fields

import numpy as np

from .calibrate import (
    BOOTSTRAP_MODES,
    CalibrationError,
    WEIGHT_SCHEMES,
    bootstrap_survival,
    calibrate_rates,
    match_volatility,
    run_pipeline,
)
from .cir import CirParams, cir_bond
from .expansion import ModelParams, h_expansion, survival_approx, v_expansion
from .market import (
    MarketDataError,
    PricingConfig,
    build_schedule,
    load_cds_quotes,
    load_discount_curve,
    load_pricing_config,
)
from .mc import McConfig, mc_estimate
from .pricing import price_cds, spread_curve
from .report import CalibrationReport, fmt_bps, fmt_param, fmt_prob, relative_error_pct

__all__ = ["main"]

_PARAM_KEYS = (
    "alpha1", "beta1", "sigma1", "r0",
    "alpha2", "beta2", "sigma2", "lambda0", "rho",
)


class _InputError(Exception):
    """Anything that should end the process with exit status 2."""


def _require(value, flag: str):
    if value is None:
        raise _InputError(f"{flag} is required for this command")
    return value


def _load_params(path: str) -> ModelParams:
    """Model parameters from a flat key=value file (sigma1_hat optional)."""
    kw: dict[str, float] = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln_no, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise _InputError(f"params {path}:{ln_no}: expected key=value")
                key, _, val = line.partition("=")
                key = key.strip().lower()
                if key not in _PARAM_KEYS and key != "sigma1_hat":
                    raise _InputError(f"params {path}: unknown key {key!r}")
                try:
                    kw[key] = float(val)
                except ValueError:
                    raise _InputError(f"params {path}: bad value for {key}") from None
    except OSError as exc:
        raise _InputError(f"cannot read params file {path}: {exc.strerror}") from None
    missing = [k for k in _PARAM_KEYS if k not in kw]
    if missing:
        raise _InputError(f"params {path}: missing keys {', '.join(missing)}")
    return ModelParams(**kw)


def _parse_tenors(text: str) -> tuple[float, ...]:
    try:
        tenors = tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise _InputError(f"bad tenor list {text!r}") from None
    if not tenors:
        raise _InputError("tenor list is empty")
    return tenors


def _effective_config(args) -> PricingConfig:
    config = load_pricing_config(args.config) if args.config else PricingConfig()
    env_nodes = os.environ.get("SSRD_QUAD_NODES")
    if env_nodes:
        try:
            config = config.with_overrides(quad_nodes=int(env_nodes))
        except ValueError:
            raise _InputError(f"SSRD_QUAD_NODES must be an integer, got {env_nodes!r}") from None
    if getattr(args, "order", None) is not None:
        config = config.with_overrides(order=args.order)
    return config


def _config_echo(config: PricingConfig, **extra) -> tuple[tuple[str, str], ...]:
    pairs = [(f.name, str(getattr(config, f.name))) for f in dc_fields(config)]
    pairs.extend((k, str(v)) for k, v in extra.items())
    return tuple(pairs)


def _timing(seconds: float) -> str:
    return f"{seconds:.3f}"


def _emit(report: CalibrationReport, out_dir: str | None) -> None:
    sys.stdout.write(report.text())
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        base = os.path.join(out_dir, report.command)
        for ext, payload in ((".txt", report.text()), (".csv", report.csv()), (".json", report.json())):
            with open(base + ext, "w", encoding="utf-8") as fh:
                fh.write(payload)


def _model_table_rows(tenors, market_bps, model_spreads):
    rows = []
    for T, mkt, mod in zip(tenors, market_bps, model_spreads):
        rows.append((f"{T:g}", f"{mkt:.3f}", fmt_bps(mod), relative_error_pct(1e4 * mod, mkt)))
    return tuple(rows)


# --------------------------------------------------------------------------
# Subcommands


def _cmd_calibrate_rates(args) -> int:
    curve = load_discount_curve(_require(args.curve, "--curve"))
    res = calibrate_rates(curve)
    fit = CirParams(float(res.x[0]), float(res.x[1]), float(res.x[2]), curve.short_rate)
    rows = []
    for T, df in zip(curve.tenors, curve.dfs):
        if T <= 0.0:
            continue
        model = float(cir_bond(fit, 0.0, T))
        rows.append((f"{T:g}", f"{df:.8f}", f"{model:.8f}", relative_error_pct(model, df)))
    report = CalibrationReport(
        command="calibrate-rates",
        headers=("tenor", "market_df", "model_df", "rel_error_pct"),
        rows=tuple(rows),
        params=(
            ("alpha1", fmt_param(fit.alpha)),
            ("beta1", fmt_param(fit.beta)),
            ("sigma1", fmt_param(fit.sigma)),
            ("r0", fmt_param(fit.x0)),
            ("objective", f"{res.objective:.6e}"),
            ("iterations", str(res.iterations)),
            ("converged", str(res.converged).lower()),
        ),
        timings=(("rates", _timing(res.elapsed)),),
        config_echo=(("curve", args.curve),),
    )
    _emit(report, args.out)
    return 0 if res.converged else 3


def _cmd_match_vol(args) -> int:
    curve = load_discount_curve(_require(args.curve, "--curve"))
    if args.tmax is not None:
        t_max = args.tmax
    elif args.quotes:
        t_max = max(load_cds_quotes(args.quotes).tenors)
    else:
        raise _InputError("need --tmax or --quotes to set the matching horizon")
    res = calibrate_rates(curve)
    fit = CirParams(float(res.x[0]), float(res.x[1]), float(res.x[2]), curve.short_rate)
    mv = match_volatility(fit, fit.x0, t_max)
    report = CalibrationReport(
        command="match-vol",
        headers=(),
        rows=(),
        params=(
            ("alpha1", fmt_param(fit.alpha)),
            ("beta1", fmt_param(fit.beta)),
            ("sigma1", fmt_param(fit.sigma)),
            ("r0", fmt_param(fit.x0)),
            ("sigma1_hat", fmt_param(mv.sigma1_hat)),
            ("branch", mv.branch),
            ("residual", f"{mv.residual:.3e}"),
            ("t_max", f"{t_max:g}"),
        ),
        timings=(("rates", _timing(res.elapsed)),),
        config_echo=(("curve", args.curve),),
    )
    _emit(report, args.out)
    return 0 if res.converged else 3


def _pipeline_report(args, command: str, with_survival: bool) -> tuple[CalibrationReport, bool]:
    curve = load_discount_curve(_require(args.curve, "--curve"))
    quotes = load_cds_quotes(_require(args.quotes, "--quotes"))
    config = _effective_config(args)
    correlated = args.correlated != "no"
    result = run_pipeline(
        curve, quotes, config, weights=args.weights, correlated=correlated
    )
    model_spreads = [s for _, s in result.repriced]
    if with_survival:
        q_market = bootstrap_survival(quotes, config.recovery, mode="standard")
        leg = result.model.intensity_leg()
        q_model = survival_approx(leg, np.asarray(quotes.tenors), order=min(config.order, 2))
        rows = tuple(
            (f"{T:g}", f"{mkt:.3f}", fmt_bps(mod), relative_error_pct(1e4 * mod, mkt),
             fmt_prob(qm), fmt_prob(qe))
            for T, mkt, mod, qm, qe in zip(
                quotes.tenors, quotes.mid_bps, model_spreads, q_market, np.atleast_1d(q_model)
            )
        )
        headers = ("tenor", "market_bps", "model_bps", "rel_error_pct",
                   "survival_market", "survival_model")
    else:
        rows = _model_table_rows(quotes.tenors, quotes.mid_bps, model_spreads)
        headers = ("tenor", "market_bps", "model_bps", "rel_error_pct")
    m = result.model
    worst = max(
        abs(1e4 * mod - mkt) for mod, mkt in zip(model_spreads, quotes.mid_bps)
    )
    report = CalibrationReport(
        command=command,
        headers=headers,
        rows=rows,
        params=(
            ("alpha1", fmt_param(m.alpha1)),
            ("beta1", fmt_param(m.beta1)),
            ("sigma1", fmt_param(m.sigma1)),
            ("r0", fmt_param(m.r0)),
            ("sigma1_hat", fmt_param(m.sigma1_hat)),
            ("vol_branch", result.vol.branch),
            ("alpha2", fmt_param(m.alpha2)),
            ("beta2", fmt_param(m.beta2)),
            ("sigma2", fmt_param(m.sigma2)),
            ("lambda0", fmt_param(m.lambda0)),
            ("rho", fmt_param(m.rho)),
            ("objective", f"{result.credit.objective:.6e}"),
            ("iterations", str(result.credit.iterations)),
            ("converged", str(result.rates.converged and result.credit.converged).lower()),
            ("max_abs_error_bps", f"{worst:.3f}"),
        ),
        timings=(
            ("rates", _timing(result.rates.elapsed)),
            ("credit", _timing(result.credit.elapsed)),
        ),
        config_echo=_config_echo(
            config, weights=args.weights, correlated=correlated,
            curve=args.curve, quotes=args.quotes,
        ),
    )
    return report, result.rates.converged and result.credit.converged


def _cmd_calibrate_cds(args) -> int:
    report, converged = _pipeline_report(args, "calibrate-cds", with_survival=False)
    _emit(report, args.out)
    return 0 if converged else 3


def _cmd_full_pipeline(args) -> int:
    report, converged = _pipeline_report(args, "full-pipeline", with_survival=True)
    _emit(report, args.out)
    return 0 if converged else 3


def _cmd_price(args) -> int:
    params = _load_params(_require(args.params, "--params"))
    tenors = _parse_tenors(_require(args.tenors, "--tenors"))
    config = _effective_config(args)
    curve = spread_curve(params, tenors, config)
    rows = tuple((f"{T:g}", fmt_bps(s)) for T, s in curve)
    report = CalibrationReport(
        command="price",
        headers=("tenor", "spread_bps"),
        rows=rows,
        params=tuple((k, fmt_param(getattr(params, k))) for k in _PARAM_KEYS),
        config_echo=_config_echo(config, params=args.params),
    )
    _emit(report, args.out)
    return 0


def _cmd_survival(args) -> int:
    params = _load_params(_require(args.params, "--params"))
    tenors = _parse_tenors(_require(args.tenors, "--tenors"))
    config = _effective_config(args)
    order = min(config.order, 2)
    q = np.atleast_1d(survival_approx(params.intensity_leg(), np.asarray(tenors), order=order))
    rows = tuple((f"{T:g}", fmt_prob(v)) for T, v in zip(tenors, q))
    report = CalibrationReport(
        command="survival",
        headers=("tenor", "survival"),
        rows=rows,
        params=(
            ("alpha2", fmt_param(params.alpha2)),
            ("beta2", fmt_param(params.beta2)),
            ("sigma2", fmt_param(params.sigma2)),
            ("lambda0", fmt_param(params.lambda0)),
            ("order", str(order)),
        ),
        config_echo=_config_echo(config, params=args.params),
    )
    _emit(report, args.out)
    return 0


def _cmd_bootstrap(args) -> int:
    quotes = load_cds_quotes(_require(args.quotes, "--quotes"))
    config = _effective_config(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        q = bootstrap_survival(quotes, config.recovery, mode=args.mode)
    rows = tuple(
        (f"{T:g}", f"{mid:.3f}", fmt_prob(v))
        for T, mid, v in zip(quotes.tenors, quotes.mid_bps, q)
    )
    report = CalibrationReport(
        command="bootstrap",
        headers=("tenor", "mid_bps", "survival"),
        rows=rows,
        params=(("mode", args.mode), ("recovery", fmt_param(config.recovery))),
        config_echo=_config_echo(config, quotes=args.quotes),
        notes=tuple(str(w.message) for w in caught),
    )
    _emit(report, args.out)
    return 0


def _cmd_mc_check(args) -> int:
    params = _load_params(_require(args.params, "--params"))
    tenors = _parse_tenors(_require(args.tenors, "--tenors"))
    config = _effective_config(args)
    mc_config = McConfig(
        n_paths=args.paths, step=args.step, seed=args.seed, antithetic=True
    )
    rows = []
    notes = []
    for T in tenors:
        model_v = float(v_expansion(params, T, order=config.order, quad_nodes=config.quad_nodes))
        model_h = float(
            h_expansion(params, T, order=config.order, quad_nodes=config.quad_nodes)
        ) * math.exp(-params.alpha2 * T)
        model_q = float(survival_approx(params.intensity_leg(), T, order=min(config.order, 2)))
        for target, model in (("v", model_v), ("h", model_h), ("q", model_q)):
            est, se = mc_estimate(params, T, target, mc_config)
            z = (model - est) / se if se > 0.0 else 0.0
            rows.append(
                (f"{T:g}", target, f"{est:.8f}", f"{se:.2e}", f"{model:.8f}", f"{z:+.2f}")
            )
            if abs(z) > 3.0:
                notes.append(f"target {target} at tenor {T:g}: |z| = {abs(z):.2f} exceeds 3")
    report = CalibrationReport(
        command="mc-check",
        headers=("tenor", "target", "mc_estimate", "std_error", "model", "z"),
        rows=tuple(rows),
        params=tuple((k, fmt_param(getattr(params, k))) for k in _PARAM_KEYS),
        config_echo=_config_echo(
            config, params=args.params, paths=args.paths, step=args.step,
            seed=args.seed, antithetic=True,
        ),
        notes=tuple(notes),
    )
    _emit(report, args.out)
    return 0


# --------------------------------------------------------------------------
# Argument wiring


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssrd",
        description="Two-factor square-root credit model: calibration, CDS pricing, "
        "survival curves, and Monte Carlo cross-checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        sp = sub.add_parser(name, help=help_text)
        sp.set_defaults(func=func)
        sp.add_argument("--curve", help="discount curve CSV (# mode=rate|df, # r0=...)")
        sp.add_argument("--quotes", help="CDS quote CSV (tenor, bid, ask[, mid] in bps)")
        sp.add_argument("--config", help="pricing config, flat key=value")
        sp.add_argument("--out", help="directory for .txt/.csv/.json report files")
        sp.add_argument("--order", type=int, choices=(0, 1, 2), help="expansion order override")
        sp.add_argument("--weights", choices=WEIGHT_SCHEMES, default="bidask",
                        help="quote weighting scheme (default bidask)")
        sp.add_argument("--correlated", choices=("yes", "no"), default="yes",
                        help="fit rho (yes) or pin it to zero (no)")
        sp.add_argument("--seed", type=int, default=0, help="Monte Carlo seed")
        sp.add_argument("--params", help="model parameter file, key=value")
        sp.add_argument("--tenors", help="comma-separated tenor list in years")
        return sp

    add("calibrate-rates", _cmd_calibrate_rates, "fit the rate factor to discount pillars")
    mv = add("match-vol", _cmd_match_vol, "matched rate volatility at the longest tenor")
    mv.add_argument("--tmax", type=float, help="matching horizon (defaults to longest quote)")
    add("calibrate-cds", _cmd_calibrate_cds, "three-step calibration to CDS quotes")
    add("price", _cmd_price, "price a spread curve from explicit parameters")
    add("survival", _cmd_survival, "model survival probabilities from explicit parameters")
    bs = add("bootstrap", _cmd_bootstrap, "market-implied survival from quotes alone")
    bs.add_argument("--mode", choices=BOOTSTRAP_MODES, default="standard",
                    help="recursion form (default standard)")
    mc = add("mc-check", _cmd_mc_check, "Monte Carlo cross-check of expansion values")
    mc.add_argument("--paths", type=int, default=200_000, help="simulated paths")
    mc.add_argument("--step", type=float, default=0.01, help="Euler step in years")
    add("full-pipeline", _cmd_full_pipeline,
        "calibrate, reprice at order 2, and compare survival curves")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: no such file: {exc.filename}", file=sys.stderr)
        return 2
    except (_InputError, MarketDataError, CalibrationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
