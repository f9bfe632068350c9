from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

from sofrgit.core.asian_engine import AsianContract, GridSpec
from sofrgit.core.errors import ConfigError, ContractError, DomainError
from sofrgit.core.futures import (
    TENOR_3M,
    DailyFixing,
    FuturesSpec,
    combined_payoff,
    compounded_3m_rate,
    continuous_3m_rate,
    continuous_average_rate,
    discount_factor,
    expected_growth,
    fixings_from_frame,
    futures_rate_1m,
    load_daily_rates,
    partial_3m_rate,
    price_1m_option,
    rate_density,
    simple_average_rate,
)


def _week(rate: float) -> tuple[DailyFixing, ...]:
    # Mon..Thu accrue one day, Friday three
    return tuple(DailyFixing(accrual=n / 360.0, rate=rate) for n in (1, 1, 1, 1, 3))


def test_simple_average_is_day_weighted() -> None:
    daily = [(0.05, 1), (0.05, 1), (0.05, 1), (0.05, 1), (0.04, 3)]
    assert simple_average_rate(daily, 7) == pytest.approx((0.2 + 0.12) / 7.0)


def test_simple_average_rejects_day_count_mismatch() -> None:
    with pytest.raises(ContractError):
        simple_average_rate([(0.05, 1), (0.05, 3)], 5)


def test_continuous_average_of_a_step_path() -> None:
    assert continuous_average_rate([0.0, 0.5, 1.0], [0.02, 0.04]) == pytest.approx(0.03)
    with pytest.raises(ContractError):
        continuous_average_rate([0.0, 1.0], [0.02, 0.04])


def test_discrete_compounding_of_a_flat_week() -> None:
    spec = FuturesSpec(tenor=TENOR_3M, t0=0.0, T=7.0 / 360.0, fixings=_week(0.05))
    growth = (1.0 + 0.05 / 360.0) ** 4 * (1.0 + 0.15 / 360.0)
    assert compounded_3m_rate(spec) == pytest.approx((growth - 1.0) * 360.0 / 7.0, rel=1e-12)


def test_discrete_and_continuous_compounding_agree_for_small_rates() -> None:
    d = np.array([1, 1, 1, 1, 3] * 13) / 360.0
    r = np.full(d.size, 0.02)
    period = float(d.sum())
    spec = FuturesSpec(tenor=TENOR_3M, t0=0.0, T=period,
                       fixings=tuple(DailyFixing(accrual=a, rate=x) for a, x in zip(d, r)))
    gap = abs(compounded_3m_rate(spec) - continuous_3m_rate(d, r, period))
    assert gap < 2e-6


def test_partial_rate_with_nothing_pending_is_the_realized_rate() -> None:
    spec = FuturesSpec(tenor=TENOR_3M, t0=0.0, T=7.0 / 360.0, fixings=_week(0.05))
    assert partial_3m_rate(spec, 1.0) == pytest.approx(compounded_3m_rate(spec))


def test_pending_fixings_must_follow_realized_ones() -> None:
    with pytest.raises(ContractError):
        FuturesSpec(tenor=TENOR_3M, t0=0.0, T=0.1,
                    fixings=(DailyFixing(1 / 360.0), DailyFixing(1 / 360.0, 0.05)))
    spec = FuturesSpec(tenor=TENOR_3M, t0=0.0, T=0.1,
                       fixings=(DailyFixing(1 / 360.0, 0.05), DailyFixing(1 / 360.0)))
    with pytest.raises(ContractError):
        compounded_3m_rate(spec)


def test_futures_spec_validation() -> None:
    with pytest.raises(ConfigError):
        FuturesSpec(tenor="6M", t0=0.0, T=0.25)
    with pytest.raises(ConfigError):
        FuturesSpec(tenor=TENOR_3M, t0=0.25, T=0.25)


def test_negative_compounding_factor_is_a_domain_error() -> None:
    spec = FuturesSpec(tenor=TENOR_3M, t0=0.0, T=1.0, fixings=(DailyFixing(1.0, -2.0),))
    with pytest.raises(DomainError):
        compounded_3m_rate(spec)


def test_load_daily_rates_and_pending_rows(tmp_path: Path) -> None:
    p = tmp_path / "rates.csv"
    pd.DataFrame({
        "date": ["2024-03-20", "2024-03-21", "2024-03-22"],
        "rate": [0.05, 0.05, 0.051],
        "accrual_days": [1, 1, 3],
    }).to_csv(p, index=False)
    df = load_daily_rates(p)
    fix = fixings_from_frame(df, year_days=360, realized_days=2)
    assert [f.rate for f in fix] == [0.05, 0.05, None]
    assert fix[2].accrual == pytest.approx(3.0 / 360.0)


def test_load_daily_rates_requires_columns(tmp_path: Path) -> None:
    p = tmp_path / "rates.csv"
    pd.DataFrame({"date": ["2024-03-20"], "rate": [0.05]}).to_csv(p, index=False)
    with pytest.raises(ContractError):
        load_daily_rates(p)


def test_expected_growth_without_volatility_effect(flat_model) -> None:
    m = flat_model(alpha=0.0, rbar_star=0.01)
    assert expected_growth(m, 0.0, 0.02, 0.5) == pytest.approx(np.exp(0.015))
    assert expected_growth(m, 0.5, 0.02, 0.5) == 1.0


def test_futures_rate_1m_without_reversion(flat_model) -> None:
    m = flat_model(alpha=0.0, rbar_star=-0.01)
    assert futures_rate_1m(m, 0.1, 0.04, 0.2) == pytest.approx(0.04)


def test_combined_payoff_takes_the_better_branch() -> None:
    assert combined_payoff(100.0, 95.0, 2.0) == pytest.approx(5.0)
    assert combined_payoff(100.0, 99.0, 2.0) == pytest.approx(2.0)
    out = combined_payoff(100.0, np.array([95.0, 105.0]), np.array([1.0, 0.5]))
    assert out.tolist() == pytest.approx([5.0, 0.5])
    with pytest.raises(ContractError):
        combined_payoff(100.0, 95.0, -1.0)


def test_discount_factor_variants(flat_model) -> None:
    curve = flat_model(rbar_star=-0.01, killing="curve")
    assert discount_factor(curve, 0.5, 0.05) == pytest.approx(np.exp(0.005))
    assert discount_factor(curve, 0.0, 0.05) == 1.0
    full = flat_model(alpha=0.0, rbar_star=-0.01, killing="short_rate")
    assert discount_factor(full, 0.5, 0.05) == pytest.approx(np.exp(-0.02))


def test_density_at_the_valuation_date_is_a_point_mass(reference_model) -> None:
    dens = rate_density(reference_model, 0.0, 100.0)
    assert dens.is_point_mass
    assert dens.rates.tolist() == pytest.approx([99.99])


def test_one_month_option_with_averaging_from_today(reference_model) -> None:
    contract = AsianContract(K=100.0, T=0.25, t0=0.0, y_spot=100.0)
    res = price_1m_option(reference_model, contract, GridSpec(n_t=8, n_x=24, n_z=6, x_max=1000.0))
    assert res.density_mass == 1.0
    assert res.discount == 1.0
    # a point mass at t0 picks the better branch outright
    assert res.price == pytest.approx(max(res.forward_branch, res.asian_branch))
    # f1m ~ 101.2 > K
    assert res.forward_branch == 0.0


def _density_moments(dens) -> tuple[float, float]:
    mean = float(trapezoid(dens.rates * dens.density, dens.rates))
    var = float(trapezoid((dens.rates - mean) ** 2 * dens.density, dens.rates))
    return mean, float(np.sqrt(var))


def test_rate_density_matches_the_gaussian_factor(reference_model) -> None:
    # beta = -1: dy = 0.1 y dt + 20 dW, an explosive OU far above its reflecting barrier
    t0 = 0.25
    dens = rate_density(reference_model, t0, 100.0)
    assert not dens.is_point_mass
    assert np.all(np.diff(dens.rates) > 0.0)
    assert dens.mass == pytest.approx(1.0, abs=1e-3)
    mean, sd = _density_moments(dens)
    assert mean == pytest.approx(-0.01 + 100.0 * np.exp(0.025), rel=1e-4)
    assert sd == pytest.approx(np.sqrt(400.0 * np.expm1(0.05) / 0.2), rel=1e-2)


def test_rate_density_agrees_with_simulated_rates(reference_model) -> None:
    t0, steps, paths = 0.25, 50, 20000
    rng = np.random.default_rng(11)
    dt = t0 / steps
    y = np.full(paths, 100.0)
    for _ in range(steps):
        y = y + 0.1 * y * dt + 20.0 * np.sqrt(dt) * rng.standard_normal(paths)
    r = -0.01 + y
    mean, sd = _density_moments(rate_density(reference_model, t0, 100.0))
    se = r.std() / np.sqrt(paths)
    assert abs(mean - r.mean()) < 4.0 * se
    assert sd == pytest.approx(r.std(), rel=3e-2)
