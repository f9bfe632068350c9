from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.integrate import trapezoid

from sofrgit.core.asian_engine import WHOLE, AsianContract, GridSpec, solve
from sofrgit.core.contract import DEFAULT_YEAR_DAYS, DENSITY_MASS_TOL, TAU_MIN
from sofrgit.core.errors import ConfigError, ContractError, DensityError, DomainError
from sofrgit.core.term_structure import KILLING_CURVE, ModelSpec
from sofrgit.core.transforms import build_transform
from sofrgit.core.weber_orr import theta_matrix

logger = logging.getLogger(__name__)

TENOR_1M = "1M"
TENOR_3M = "3M"

RATE_COLUMNS = ("date", "rate", "accrual_days")


@dataclass(frozen=True)
class DailyFixing:
    accrual: float  # year fraction d_i
    rate: float | None = None  # None while the fixing is still pending


@dataclass(frozen=True)
class FuturesSpec:
    tenor: str
    t0: float
    T: float
    fixings: tuple[DailyFixing, ...] = ()

    def __post_init__(self) -> None:
        if self.tenor not in (TENOR_1M, TENOR_3M):
            raise ConfigError(f"unknown futures tenor: {self.tenor!r}")
        if not self.t0 < self.T:
            raise ConfigError("reference period needs t0 < T")
        if any(f.accrual <= 0.0 for f in self.fixings):
            raise ContractError("accrual fractions must be > 0")
        seen_pending = False
        for f in self.fixings:
            if f.rate is None:
                seen_pending = True
            elif seen_pending:
                raise ContractError("realized fixings must precede pending ones")

    @property
    def accrual_years(self) -> float:
        return self.T - self.t0

    @property
    def realized(self) -> tuple[DailyFixing, ...]:
        return tuple(f for f in self.fixings if f.rate is not None)


def load_daily_rates(path: str | Path) -> pd.DataFrame:
    """Read a (date, rate, accrual_days) CSV; rates are decimals."""
    df = pd.read_csv(path)
    missing = [c for c in RATE_COLUMNS if c not in df.columns]
    if missing:
        raise ContractError(f"{path}: missing columns {missing}")
    df = df.loc[:, list(RATE_COLUMNS)].copy()
    df["accrual_days"] = df["accrual_days"].astype(int)
    df["rate"] = df["rate"].astype(float)
    if (df["accrual_days"] <= 0).any():
        raise ContractError(f"{path}: accrual_days must be positive")
    return df


def fixings_from_frame(df: pd.DataFrame, *, year_days: int = DEFAULT_YEAR_DAYS,
                       realized_days: int | None = None) -> tuple[DailyFixing, ...]:
    """Fixings from a rate frame; rows past `realized_days` become pending."""
    out = []
    for k, row in enumerate(df.itertuples(index=False)):
        pending = realized_days is not None and k >= realized_days
        out.append(DailyFixing(accrual=row.accrual_days / year_days, rate=None if pending else float(row.rate)))
    return tuple(out)


# ----------------------------
# Averages
# ----------------------------

def simple_average_rate(daily: Sequence[tuple[float, int]], calendar_days: int) -> float:
    """Day-weighted average sum(r_i n_i) / d_c of (rate, days) pairs."""
    days = sum(int(n) for _, n in daily)
    if days != int(calendar_days):
        raise ContractError(f"accrual days sum to {days}, calendar period has {calendar_days}")
    if days == 0:
        raise ContractError("empty averaging period")
    return float(sum(float(r) * int(n) for r, n in daily) / days)


def continuous_average_rate(breakpoints: Sequence[float], rates: Sequence[float]) -> float:
    """
    (1 / (T - t0)) int_t0^T r(s) ds of a step path with rates[k] on
    [breakpoints[k], breakpoints[k + 1]).
    """
    b = np.asarray(breakpoints, dtype=float)
    r = np.asarray(rates, dtype=float)
    if b.size != r.size + 1:
        raise ContractError("a step path needs one more breakpoint than rates")
    if np.any(np.diff(b) <= 0.0):
        raise ContractError("breakpoints must increase")
    return float(np.sum(r * np.diff(b)) / (b[-1] - b[0]))


# ----------------------------
# 3M compounding
# ----------------------------

def _growth(fixings: Sequence[DailyFixing]) -> float:
    acc = 1.0
    for f in fixings:
        step = 1.0 + f.accrual * float(f.rate)
        if step < 0.0:
            raise DomainError(f"negative compounding factor 1 + d R = {step:g}")
        acc *= step
    return acc


def compounded_3m_rate(spec: FuturesSpec) -> float:
    """(prod(1 + d_i R_i) - 1) / (T - t0) over a fully realized period."""
    if len(spec.realized) != len(spec.fixings) or not spec.fixings:
        raise ContractError("discrete compounding needs every fixing realized")
    return (_growth(spec.fixings) - 1.0) / spec.accrual_years


def continuous_3m_rate(accruals: Sequence[float], rates: Sequence[float], accrual_years: float) -> float:
    """(exp(int r) - 1) / (T - t0) for a step path with durations `accruals`."""
    d = np.asarray(accruals, dtype=float)
    r = np.asarray(rates, dtype=float)
    if d.shape != r.shape:
        raise ContractError("accruals and rates differ in length")
    if accrual_years <= 0.0:
        raise ContractError("accrual period must be > 0")
    return float(np.expm1(np.sum(d * r)) / accrual_years)


def partial_3m_rate(spec: FuturesSpec, expected_growth: float) -> float:
    """
    Realized factors times the expected growth over the pending remainder,
    annualized over the whole period.
    """
    if expected_growth <= 0.0:
        raise DomainError("expected growth must be > 0")
    return (_growth(spec.realized) * expected_growth - 1.0) / spec.accrual_years


def expected_growth(model: ModelSpec, t: float, y: float, T: float) -> float:
    """Deterministic-limit growth exp(int_t^T E[r]) of the pending part."""
    if T <= t:
        return 1.0
    return float(np.exp(model.mean_rate_integral(t, y, T)))


# ----------------------------
# 1M option
# ----------------------------

def futures_rate_1m(model: ModelSpec, t0: float, r: float, T: float) -> float:
    """(1/(T - t0)) int_t0^T E[r_s | r_t0 = r] ds."""
    y = r - float(model.rbar_star(t0))
    return model.mean_rate_integral(t0, y, T) / (T - t0)


def combined_payoff(K: float, f1m, asian_value):
    """max(K - f1m, P): exercise on the forward or keep the averaging put."""
    av = np.asarray(asian_value, dtype=float)
    if np.any(av < 0.0):
        raise ContractError("Asian value must be >= 0")
    out = np.maximum(K - np.asarray(f1m, dtype=float), av)
    return out if np.ndim(out) else float(out)


def discount_factor(model: ModelSpec, t: float, y: float) -> float:
    if not model.discounting_enabled or t <= 0.0:
        return 1.0
    if model.killing == KILLING_CURVE:
        return float(np.exp(-float(model.rbar_star.integral(0.0, t))))
    return float(np.exp(-model.mean_rate_integral(0.0, y, t)))


@dataclass(frozen=True)
class RateDensity:
    """Density of the short rate at t0 given y at 0, sampled on increasing rates."""
    rates: np.ndarray
    density: np.ndarray
    mass: float

    @property
    def is_point_mass(self) -> bool:
        return self.rates.size == 1


def rate_density(model: ModelSpec, t0: float, y0: float, *, n: int = 400, width: float = 10.0) -> RateDensity:
    """
    Transition density of the short rate from (0, y0) to t0. The transformed
    Green function x0^-nu xi^(nu+1) Theta(tau, x0, xi, x_l) is sampled on `n`
    points within `width` kernel widths of x0, mapped back to rates through the
    Jacobian d xi / d y and renormalised to unit mass. A window too short for
    the kernel gives a point mass.
    """
    rbar0 = float(model.rbar_star(t0))
    if t0 <= 0.0:
        return RateDensity(rates=np.array([rbar0 + y0]), density=np.array([1.0]), mass=1.0)
    cache = build_transform(model, t0, 0.0)
    tau = cache.tau_total
    if tau < TAU_MIN:
        return RateDensity(rates=np.array([rbar0 + y0]), density=np.array([1.0]), mass=1.0)
    a = float(cache.x_lower_at_t(0.0))
    x0 = float(cache.x_of_y(0.0, y0))
    nu = cache.nu
    span = width * np.sqrt(tau)
    xi = np.linspace(max(a, x0 - span), x0 + span, n)
    inside = xi > 0.0
    green = np.zeros(n)
    green[inside] = (
        x0 ** (-nu) * xi[inside] ** (nu + 1.0) * theta_matrix(abs(nu), tau, [x0], xi[inside], a)[0]
    )
    green = np.maximum(green, 0.0)
    # x at maturity t0 (tau = 0) maps to y through F(t0) = 1
    y = np.asarray(cache.y_of_x(t0, xi))
    dens_y = green * np.gradient(xi, y)
    rates = rbar0 + y
    mass = float(trapezoid(dens_y, rates))
    if abs(mass - 1.0) > DENSITY_MASS_TOL:
        raise DensityError(
            f"density mass {mass:.6f} outside 1 +/- {DENSITY_MASS_TOL:g}",
            module="futures",
            operation="price_1m_option",
        )
    if abs(mass - 1.0) > 1e-9:
        logger.warning("density renormalised from mass %.6f", mass)
    return RateDensity(rates=rates, density=dens_y / mass, mass=mass)


@dataclass(frozen=True)
class OneMonthPrice:
    price: float
    forward_branch: float
    asian_branch: float
    discount: float
    density_mass: float


def price_1m_option(model: ModelSpec, contract: AsianContract, grid: GridSpec, *,
                    asian=None) -> OneMonthPrice:
    """
    Option on the 1M futures: at t0 the holder takes max(K - f1m(r), P(t0, y(r), r)),
    averaged against the density of r at t0 and discounted to 0. The Asian leg is
    solved once over the whole region.
    """
    if asian is None:
        whole = replace(contract, region=WHOLE, z_spot=None)
        grid_whole = grid if grid.z_top is not None else replace(grid, z_top=grid.z_top_multiple * contract.K)
        asian = solve(model, whole, grid_whole)
    dens = rate_density(model, contract.t0, contract.y_spot)
    rbar0 = float(model.rbar_star(contract.t0))
    f1m = np.array([futures_rate_1m(model, contract.t0, r, contract.T) for r in dens.rates])
    p_asian = np.array([
        max(asian.price_at(max(r - rbar0, 1e-300), r), 0.0) for r in dens.rates
    ])
    payoff = combined_payoff(contract.K, f1m, p_asian)
    fwd = np.maximum(contract.K - f1m, 0.0)
    disc = discount_factor(model, contract.t0, contract.y_spot)
    if dens.is_point_mass:
        e_pay, e_fwd, e_asian = float(payoff[0]), float(fwd[0]), float(p_asian[0])
    else:
        w = dens.density
        e_pay = float(trapezoid(w * payoff, dens.rates))
        e_fwd = float(trapezoid(w * fwd, dens.rates))
        e_asian = float(trapezoid(w * p_asian, dens.rates))
    out = OneMonthPrice(
        price=disc * e_pay,
        forward_branch=disc * e_fwd,
        asian_branch=disc * e_asian,
        discount=disc,
        density_mass=dens.mass,
    )
    logger.info("1M option K=%g: %.6g (forward %.6g, asian %.6g)", contract.K, out.price, out.forward_branch,
                out.asian_branch)
    return out

