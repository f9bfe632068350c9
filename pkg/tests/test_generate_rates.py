from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from sofrgit.core.futures import RATE_COLUMNS, load_daily_rates
from sofrgit.tools.generate_rates import OU, STEP, PathConfig, business_days, generate_path, main


def test_friday_fixing_accrues_the_weekend() -> None:
    # 2024-03-20 is a Wednesday
    dates, accrual = business_days("2024-03-20", 7)
    assert [d.strftime("%a") for d in dates] == ["Wed", "Thu", "Fri", "Mon", "Tue"]
    assert accrual.tolist() == [1, 1, 3, 1, 1]


def test_weekend_start_folds_into_the_first_fixing() -> None:
    # 2024-03-23 is a Saturday
    dates, accrual = business_days("2024-03-23", 5)
    assert dates[0].strftime("%a") == "Mon"
    assert accrual.sum() == 5
    assert accrual[0] == 3


def test_business_days_rejects_empty_periods() -> None:
    with pytest.raises(ValueError):
        business_days("2024-03-23", 2)
    with pytest.raises(ValueError):
        business_days("2024-03-20", 0)


def test_generated_paths_cover_the_calendar_period() -> None:
    df = generate_path(PathConfig())
    assert tuple(df.columns) == RATE_COLUMNS
    assert df["accrual_days"].sum() == 91
    assert np.allclose(df["rate"], 0.053)


def test_step_profile_moves_at_mid_period() -> None:
    df = generate_path(PathConfig(profile=STEP, level=0.05, step_size=-0.0025))
    n = len(df)
    assert df["rate"].iloc[: n // 2].eq(0.05).all()
    assert np.allclose(df["rate"].iloc[n // 2:], 0.0475)


def test_ou_profile_is_seeded() -> None:
    a = generate_path(PathConfig(profile=OU, seed=3))
    b = generate_path(PathConfig(profile=OU, seed=3))
    c = generate_path(PathConfig(profile=OU, seed=4))
    pd.testing.assert_frame_equal(a, b)
    assert not a["rate"].equals(c["rate"])


def test_main_writes_a_loadable_csv(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    out = tmp_path / "rates.csv"
    rc = main(["--out", str(out), "--profile", "flat", "--level", "0.05", "--days", "14"])
    assert rc == 0
    df = load_daily_rates(out)
    assert df["accrual_days"].sum() == 14
    assert "Wrote 10 fixings (14 days)" in capsys.readouterr().out


def test_main_reports_bad_periods(tmp_path: Path) -> None:
    assert main(["--out", str(tmp_path / "x.csv"), "--days", "0"]) == 2
