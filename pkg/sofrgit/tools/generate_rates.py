from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from sofrgit.core.contract import DEFAULT_ORACLE_SEED, DEFAULT_YEAR_DAYS
from sofrgit.core.futures import RATE_COLUMNS
from sofrgit.report.csv_report import write_csv

# ----------------------------
# Profiles
# ----------------------------

FLAT = "flat"
STEP = "step"
OU = "ou"
PROFILES = (FLAT, STEP, OU)


@dataclass(frozen=True)
class PathConfig:
    start: str = "2024-03-20"
    days: int = 91  # calendar days in the reference period
    profile: str = FLAT
    level: float = 0.053  # decimal rate
    step_size: float = -0.0025  # STEP: jump applied at mid-period
    reversion: float = 2.0  # OU: per year
    vol: float = 0.01  # OU: per sqrt(year)
    seed: int = DEFAULT_ORACLE_SEED
    year_days: int = DEFAULT_YEAR_DAYS


# ----------------------------
# Helpers
# ----------------------------

def business_days(start: str, days: int) -> tuple[pd.DatetimeIndex, np.ndarray]:
    """
    Fixing dates inside [start, start + days) and the calendar days each fixing
    accrues (a Friday fixing covers the weekend, 3 days).
    """
    if days <= 0:
        raise ValueError("days must be > 0")
    first = pd.Timestamp(start)
    end = first + pd.Timedelta(days=days)
    dates = pd.bdate_range(first, end - pd.Timedelta(days=1))
    if dates.empty:
        raise ValueError("reference period contains no business day")
    nxt = np.append(dates[1:].to_numpy(), end.to_datetime64())
    accrual = ((nxt - dates.to_numpy()) / np.timedelta64(1, "D")).astype(int)
    # a period starting on a weekend accrues those days to nobody; fold them into the first fixing
    accrual[0] += int((dates[0] - first) / pd.Timedelta(days=1))
    return dates, accrual


def rate_path(cfg: PathConfig, accrual_days: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    n = accrual_days.size
    if cfg.profile == FLAT:
        return np.full(n, cfg.level)
    if cfg.profile == STEP:
        out = np.full(n, cfg.level)
        out[n // 2:] += cfg.step_size
        return out
    if cfg.profile == OU:
        out = np.empty(n)
        r = cfg.level
        for k in range(n):
            out[k] = r
            dt = accrual_days[k] / cfg.year_days
            r = r + cfg.reversion * (cfg.level - r) * dt + cfg.vol * np.sqrt(dt) * rng.standard_normal()
        return out
    raise ValueError(f"Unknown profile: {cfg.profile}")


def generate_path(cfg: PathConfig) -> pd.DataFrame:
    """Seeded daily fixings as a (date, rate, accrual_days) frame."""
    rng = np.random.default_rng(cfg.seed)
    dates, accrual = business_days(cfg.start, cfg.days)
    rates = rate_path(cfg, accrual, rng)
    df = pd.DataFrame({
        "date": dates.strftime("%Y-%m-%d"),
        "rate": rates,
        "accrual_days": accrual,
    })
    return df.loc[:, list(RATE_COLUMNS)]


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(description="Generate a synthetic daily SOFR path (date, rate, accrual_days).")
    ap.add_argument("--out", required=True, help="Output CSV path")
    ap.add_argument("--start", default=PathConfig.start, help="First calendar day (YYYY-MM-DD)")
    ap.add_argument("--days", type=int, default=PathConfig.days, help="Calendar days in the period")
    ap.add_argument("--profile", choices=PROFILES, default=FLAT)
    ap.add_argument("--level", type=float, default=PathConfig.level, help="Rate level (decimal)")
    ap.add_argument("--step-size", type=float, default=PathConfig.step_size)
    ap.add_argument("--reversion", type=float, default=PathConfig.reversion)
    ap.add_argument("--vol", type=float, default=PathConfig.vol)
    ap.add_argument("--seed", type=int, default=DEFAULT_ORACLE_SEED)
    args = ap.parse_args(argv)

    cfg = PathConfig(
        start=args.start,
        days=args.days,
        profile=args.profile,
        level=args.level,
        step_size=args.step_size,
        reversion=args.reversion,
        vol=args.vol,
        seed=args.seed,
    )
    try:
        df = generate_path(cfg)
    except ValueError as e:
        print(f"ERROR: {e}")
        return 2
    out = write_csv(df, Path(args.out))
    print(f"Wrote {len(df)} fixings ({int(df['accrual_days'].sum())} days) -> {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
