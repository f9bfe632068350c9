from __future__ import annotations

import argparse
import logging
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import Any, Callable

import numpy as np
import pandas as pd

from sofrgit.core.asian_engine import AMERICAN, CONTINUATION, EUROPEAN, WHOLE, solve_strikes
from sofrgit.core.bond_forward import (
    ForwardCurveMap,
    ForwardPutContract,
    solve_forward_put,
    solve_zcb,
    zcb_forward_surface,
)
from sofrgit.core.config import RunConfig, load_config, merge_config
from sofrgit.core.contract import DEFAULT_FORWARD_DQ
from sofrgit.core.errors import ConfigError, ContractError, DomainError, NumericalError
from sofrgit.core.futures import (
    TENOR_3M,
    FuturesSpec,
    compounded_3m_rate,
    continuous_3m_rate,
    expected_growth,
    fixings_from_frame,
    load_daily_rates,
    partial_3m_rate,
    price_1m_option,
    simple_average_rate,
)
from sofrgit.core.validation import run_checks
from sofrgit.core.weber_orr import ThetaQuery, theta
from sofrgit.report.csv_report import (
    forward_frame,
    forward_put_frames,
    strike_tag,
    write_boundary_csvs,
    write_csv,
    write_price_csvs,
    zcb_frame,
)
from sofrgit.report.json_report import build_validation_payload, write_run_summary, write_validation_report
from sofrgit.tools.validate_json import validate_payload

try:
    SOFRGIT_PACKAGE_VERSION = version("sofrgit")
except PackageNotFoundError:
    SOFRGIT_PACKAGE_VERSION = "dev"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

logger = logging.getLogger("sofrgit.cli")


def _require_existing_file(path: Path, label: str) -> None:
    if not path.exists():
        raise FileNotFoundError(f"{label} not found: {path}")
    if path.is_dir():
        raise IsADirectoryError(f"{label} is a directory, expected a file: {path}")


def _configure_logging(verbosity: int) -> None:
    level = logging.WARNING if verbosity <= 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s", force=True)


# ----------------------------
# Parser
# ----------------------------

def _common_parser() -> argparse.ArgumentParser:
    """Config file plus the scalar overrides every run command accepts."""
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=None, help="Path to config TOML (optional)")
    p.add_argument("--strikes", type=float, nargs="+", default=None, help="Strike list")
    p.add_argument("--style", choices=(AMERICAN, EUROPEAN), default=None)
    p.add_argument("--region", choices=(CONTINUATION, WHOLE), default=None)
    p.add_argument("--T", dest="T", type=float, default=None, help="End of the averaging window (years)")
    p.add_argument("--t0", type=float, default=None, help="Start of the averaging window (years)")
    p.add_argument("--y-spot", type=float, default=None)
    p.add_argument("--n-t", type=int, default=None)
    p.add_argument("--n-x", type=int, default=None)
    p.add_argument("--n-z", type=int, default=None)
    p.add_argument("--x-max", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir", default=None, help="Output directory")
    p.add_argument("--prefix", default=None, help="Output file prefix")
    return p


def build_arg_parser() -> argparse.ArgumentParser:
    # --v on theta must not resolve as an abbreviation of --verbose or --version
    p = argparse.ArgumentParser(
        prog="sofrgit", description="Asian-American options on SOFR futures (CEV short rate)", allow_abbrev=False
    )
    p.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG logging")
    p.add_argument("--version", action="version", version=f"%(prog)s {SOFRGIT_PACKAGE_VERSION}")
    sub = p.add_subparsers(dest="command", required=True)
    common = _common_parser()

    th = sub.add_parser("theta", help="Evaluate the Weber-Orr Theta function at one point")
    th.add_argument("--nu", type=float, required=True, help="|nu|")
    th.add_argument("--tau", type=float, required=True)
    th.add_argument("--v", type=float, required=True)
    th.add_argument("--w", type=float, required=True)
    th.add_argument("--a", type=float, required=True)
    th.add_argument("--derivative", action="store_true", help="d/dv Theta instead of Theta")

    sub.add_parser("boundary", parents=[common], help="Exercise boundary and boundary gradient per strike")
    sub.add_parser("price", parents=[common], help="Asian put price surfaces per strike")

    zc = sub.add_parser("zcb", parents=[common], help="Zero-coupon bond surface")
    zc.add_argument("--Q", dest="Q", type=float, default=None, help="Bond maturity (default: contract Q or T)")

    fw = sub.add_parser("forward", parents=[common], help="Instantaneous forward rate surface")
    fw.add_argument("--Q", dest="Q", type=float, default=None)
    fw.add_argument("--dq", type=float, default=DEFAULT_FORWARD_DQ)

    fp = sub.add_parser("price-forward-put", parents=[common], help="Put on the forward rate")
    fp.add_argument("--Q", dest="Q", type=float, default=None)
    fp.add_argument("--T-f", dest="T_f", type=float, default=None, help="Put maturity (default t0, or T/2 when t0 = 0)")
    fp.add_argument("--dq", type=float, default=DEFAULT_FORWARD_DQ)

    sub.add_parser("price-1m", parents=[common], help="Option on the 1M futures")

    r3 = sub.add_parser("rate-3m", parents=[common], help="3M compounded futures rate from a daily path")
    r3.add_argument("--path", required=True, help="CSV with date, rate, accrual_days")
    r3.add_argument("--realized-days", type=int, default=None, help="Rows already fixed; the rest is expected")

    va = sub.add_parser("validate", parents=[common], help="Run the oracle and invariant checks")
    va.add_argument("--checks", nargs="+", default=None, help="Subset of checks to run")
    va.add_argument("--json-out", "--json", dest="json_out", default=None, help="Validation report path")
    va.add_argument("--seed", type=int, default=None)
    return p


def _overrides(args: argparse.Namespace) -> dict[str, Any]:
    """Only flags the user actually gave (defaults are None)."""
    pairs = {
        "contract.strikes": getattr(args, "strikes", None),
        "contract.style": getattr(args, "style", None),
        "contract.region": getattr(args, "region", None),
        "contract.T": getattr(args, "T", None),
        "contract.t0": getattr(args, "t0", None),
        "contract.y_spot": getattr(args, "y_spot", None),
        "contract.Q": getattr(args, "Q", None),
        "contract.forward_put_maturity": getattr(args, "T_f", None),
        "grid.n_t": getattr(args, "n_t", None),
        "grid.n_x": getattr(args, "n_x", None),
        "grid.n_z": getattr(args, "n_z", None),
        "grid.x_max": getattr(args, "x_max", None),
        "grid.workers": getattr(args, "workers", None),
        "output.directory": getattr(args, "out_dir", None),
        "output.prefix": getattr(args, "prefix", None),
        "oracle.checks": getattr(args, "checks", None),
        "oracle.seed": getattr(args, "seed", None),
    }
    out = {k: v for k, v in pairs.items() if v is not None}
    for key in ("contract.strikes", "oracle.checks"):
        if key in out:
            out[key] = tuple(out[key])
    return out


def _resolve_config(args: argparse.Namespace) -> RunConfig:
    if args.config is not None:
        _require_existing_file(Path(args.config), "Config file")
    return merge_config(load_config(args.config), _overrides(args))


# ----------------------------
# Commands
# ----------------------------

def _summary(cfg: RunConfig, command: str, results: pd.DataFrame, written: list[Path]) -> list[Path]:
    if "json" not in cfg.output.formats:
        return written
    out = Path(cfg.output.directory) / f"{cfg.output.prefix}_{command}_summary.json"
    write_run_summary(out, command=command, config_source=cfg.source, results=results, outputs=written)
    return [*written, out]


def _print_written(paths: list[Path]) -> None:
    for p in paths:
        print(f"Wrote: {p}")


def cmd_theta(args: argparse.Namespace) -> int:
    q = ThetaQuery(nu_abs=abs(args.nu), tau=args.tau, v=args.v, w=args.w, a=args.a, derivative=args.derivative)
    print(f"{theta(q):.12g}")
    return EXIT_OK


def _solve_asian(cfg: RunConfig, *, compute_prices: bool):
    contracts = [cfg.asian_contract(K) for K in cfg.contract.strikes]
    return solve_strikes(cfg.model_spec(), contracts, cfg.grid_spec(), compute_prices=compute_prices,
                         workers=cfg.grid.workers)


def cmd_boundary(cfg: RunConfig, args: argparse.Namespace) -> int:
    solutions = _solve_asian(cfg, compute_prices=False)
    written: list[Path] = []
    if "csv" in cfg.output.formats:
        written = write_boundary_csvs(solutions, cfg.output.directory, cfg.output.prefix)
    rows = pd.DataFrame({
        "K": [s.contract.K for s in solutions],
        "z_B_at_t0_spot": [float(np.interp(s.contract.y_spot, s.boundary.y_nodes[-1], s.boundary.z_b[-1]))
                           for s in solutions],
        "seconds": [s.elapsed_seconds for s in solutions],
    })
    print(rows.to_string(index=False))
    _print_written(_summary(cfg, "boundary", rows, written))
    return EXIT_OK


def cmd_price(cfg: RunConfig, args: argparse.Namespace) -> int:
    solutions = _solve_asian(cfg, compute_prices=True)
    written: list[Path] = []
    if "csv" in cfg.output.formats:
        written = write_price_csvs(solutions, cfg.output.directory, cfg.output.prefix)
        written += write_boundary_csvs(solutions, cfg.output.directory, cfg.output.prefix)
    rows = pd.DataFrame({
        "K": [s.contract.K for s in solutions],
        "style": [s.contract.style for s in solutions],
        "price": [s.spot_price for s in solutions],
        "seconds": [s.elapsed_seconds for s in solutions],
    })
    print(rows.to_string(index=False))
    _print_written(_summary(cfg, "price", rows, written))
    return EXIT_OK


def cmd_zcb(cfg: RunConfig, args: argparse.Namespace) -> int:
    Q = cfg.contract.bond_maturity
    g = cfg.grid
    sol = solve_zcb(cfg.model_spec(), Q, n_t=g.n_t, n_x=g.n_x, x_max=g.x_max, y_spot=cfg.contract.y_spot,
                    theta_cache_size=g.theta_cache_size)
    written: list[Path] = []
    if "csv" in cfg.output.formats:
        written.append(write_csv(zcb_frame(sol), Path(cfg.output.directory) / f"{cfg.output.prefix}_zcb.csv"))
    rows = pd.DataFrame({"Q": [Q], "price": [sol.price(0.0, cfg.contract.y_spot)], "method": [sol.method]})
    print(rows.to_string(index=False))
    _print_written(_summary(cfg, "zcb", rows, written))
    return EXIT_OK


def cmd_forward(cfg: RunConfig, args: argparse.Namespace) -> int:
    Q = cfg.contract.bond_maturity
    g = cfg.grid
    fmap = ForwardCurveMap(cfg.model_spec(), Q, n_t=g.n_t, n_x=g.n_x, x_max=g.x_max, y_spot=cfg.contract.y_spot,
                           dq=args.dq, theta_cache_size=g.theta_cache_size)
    # t must stay below every stencil maturity
    t_hi = min(fmap.solutions) - args.dq
    if t_hi <= 0.0:
        raise ConfigError("Q too close to 0 for the forward stencil; lower --dq")
    t_nodes = np.linspace(0.0, t_hi, g.n_t)
    y_lo = float(np.max(cfg.model_spec().y_lower(t_nodes)))
    y_nodes = np.linspace(y_lo, g.x_max, g.n_x)
    y_nodes[0] = max(y_nodes[0], 1e-12)
    surface = zcb_forward_surface(fmap, t_nodes, np.tile(y_nodes, (t_nodes.size, 1)))
    written: list[Path] = []
    if "csv" in cfg.output.formats:
        written.append(write_csv(forward_frame(t_nodes, y_nodes, Q, surface),
                                 Path(cfg.output.directory) / f"{cfg.output.prefix}_forward.csv"))
    rows = pd.DataFrame({"Q": [Q], "forward": [fmap(0.0, cfg.contract.y_spot)]})
    print(rows.to_string(index=False))
    _print_written(_summary(cfg, "forward", rows, written))
    return EXIT_OK


def cmd_price_forward_put(cfg: RunConfig, args: argparse.Namespace) -> int:
    c, g = cfg.contract, cfg.grid
    model = cfg.model_spec()
    fmap = ForwardCurveMap(model, c.bond_maturity, n_t=g.n_t, n_x=g.n_x, x_max=g.x_max, y_spot=c.y_spot,
                           dq=args.dq, theta_cache_size=g.theta_cache_size)
    out_dir = Path(cfg.output.directory)
    written: list[Path] = []
    records = []
    for K in c.strikes:
        contract = ForwardPutContract(K=K, T_f=c.put_maturity, Q=c.bond_maturity, y_spot=c.y_spot, style=c.style)
        sol = solve_forward_put(model, contract, n_t=g.n_t, n_x=g.n_x, x_max=g.x_max, forward=fmap,
                                theta_cache_size=g.theta_cache_size)
        records.append({"K": K, "T_f": contract.T_f, "Q": contract.Q, "price": sol.spot_price,
                        "worthless": sol.worthless})
        if "csv" in cfg.output.formats:
            prices, boundary = forward_put_frames(sol)
            tag = strike_tag(K)
            written.append(write_csv(prices, out_dir / f"{cfg.output.prefix}_forward_put_K{tag}.csv"))
            written.append(write_csv(boundary, out_dir / f"{cfg.output.prefix}_forward_put_boundary_K{tag}.csv"))
    rows = pd.DataFrame.from_records(records)
    print(rows.to_string(index=False))
    _print_written(_summary(cfg, "price-forward-put", rows, written))
    return EXIT_OK


def cmd_price_1m(cfg: RunConfig, args: argparse.Namespace) -> int:
    model = cfg.model_spec()
    grid = cfg.grid_spec()
    records = []
    for K in cfg.contract.strikes:
        res = price_1m_option(model, cfg.asian_contract(K), grid)
        records.append({"K": K, "price": res.price, "forward_branch": res.forward_branch,
                        "asian_branch": res.asian_branch, "discount": res.discount,
                        "density_mass": res.density_mass})
    rows = pd.DataFrame.from_records(records)
    written: list[Path] = []
    if "csv" in cfg.output.formats:
        written.append(write_csv(rows, Path(cfg.output.directory) / f"{cfg.output.prefix}_1m.csv"))
    print(rows.to_string(index=False))
    _print_written(_summary(cfg, "price-1m", rows, written))
    return EXIT_OK


def cmd_rate_3m(cfg: RunConfig, args: argparse.Namespace) -> int:
    path = Path(args.path)
    _require_existing_file(path, "Rate path CSV")
    df = load_daily_rates(path)
    year_days = cfg.contract.year_days
    fixings = fixings_from_frame(df, year_days=year_days)
    period = sum(f.accrual for f in fixings)
    spec = FuturesSpec(tenor=TENOR_3M, t0=0.0, T=period, fixings=fixings)

    accruals = [f.accrual for f in fixings]
    rates = [f.rate for f in fixings]
    discrete = compounded_3m_rate(spec)
    continuous = continuous_3m_rate(accruals, rates, period)
    row: dict[str, Any] = {
        "days": int(df["accrual_days"].sum()),
        "discrete": discrete,
        "continuous": continuous,
        "difference": discrete - continuous,
        "simple_average": simple_average_rate(list(zip(df["rate"], df["accrual_days"])), int(df["accrual_days"].sum())),
    }
    if args.realized_days is not None:
        if not 0 <= args.realized_days <= len(df):
            raise ConfigError(f"--realized-days must lie in [0, {len(df)}]")
        partial = FuturesSpec(tenor=TENOR_3M, t0=0.0, T=period,
                              fixings=fixings_from_frame(df, year_days=year_days, realized_days=args.realized_days))
        pending = sum(f.accrual for f in partial.fixings if f.rate is None)
        model = cfg.model_spec()
        if pending > model.horizon + 1e-12:
            raise ConfigError(f"pending accrual {pending:.4f}y exceeds model horizon {model.horizon}")
        growth = expected_growth(model, 0.0, cfg.contract.y_spot, pending)
        row["realized_days"] = args.realized_days
        row["partial"] = partial_3m_rate(partial, growth)

    rows = pd.DataFrame([row])
    written: list[Path] = []
    if "csv" in cfg.output.formats:
        written.append(write_csv(rows, Path(cfg.output.directory) / f"{cfg.output.prefix}_rate_3m.csv"))
    print(rows.to_string(index=False))
    _print_written(_summary(cfg, "rate-3m", rows, written))
    return EXIT_OK


def _model_block(cfg: RunConfig) -> dict[str, Any]:
    m, c = cfg.model, cfg.contract
    return {
        "beta": m.beta, "alpha": list(m.alpha.values), "sigma": list(m.sigma.values),
        "rbar_star": list(m.rbar_star.values), "horizon": m.horizon, "discounting": m.discounting,
        "killing": m.killing, "T": c.T, "t0": c.t0, "y_spot": c.y_spot, "strikes": list(c.strikes),
    }


def cmd_validate(cfg: RunConfig, args: argparse.Namespace) -> int:
    checks = run_checks(cfg)
    g = cfg.grid
    payload = build_validation_payload(
        checks=checks,
        config_source=cfg.source,
        model=_model_block(cfg),
        grid={"n_t": g.n_t, "n_x": g.n_x, "n_z": g.n_z, "x_max": g.x_max, "seed": cfg.oracle.seed},
    )
    validate_payload(payload)
    json_out = Path(args.json_out) if args.json_out else Path(cfg.output.directory) / f"{cfg.output.prefix}_validation.json"
    write_validation_report(json_out, payload)

    for ch in checks:
        value = "-" if ch.value is None else f"{ch.value:.4g}"
        print(f"{ch.status.upper():5s} {ch.name:22s} {value}")
    s = payload["summary"]
    print(f"passed={s['passed']} failed={s['failed']} skipped={s['skipped']}")
    print(f"JSON saved: {json_out.resolve()}")
    return EXIT_CHECK_FAILED if s["failed"] else EXIT_OK


COMMANDS: dict[str, Callable[[RunConfig, argparse.Namespace], int]] = {
    "boundary": cmd_boundary,
    "price": cmd_price,
    "zcb": cmd_zcb,
    "forward": cmd_forward,
    "price-forward-put": cmd_price_forward_put,
    "price-1m": cmd_price_1m,
    "rate-3m": cmd_rate_3m,
    "validate": cmd_validate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_arg_parser().parse_args(argv)
    _configure_logging(args.verbose)

    try:
        if args.command == "theta":
            return cmd_theta(args)
        cfg = _resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (FileNotFoundError, IsADirectoryError, ConfigError, ContractError, DomainError) as e:
        print(f"ERROR: {e}")
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"ERROR: [{e.where}] {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
