from dataclasses import replace

import numpy as np
import pytest

from sofrgit.core import validation
from sofrgit.core.config import ALL_CHECKS, RunConfig, config_from_mapping
from sofrgit.core.contract import BOUNDARY_CHECK_GRID, BOUNDARY_CHECK_MODELS, COMPOUNDING_MAX_RATE, COMPOUNDING_TOL
from sofrgit.core.errors import SingularityError
from sofrgit.report.json_report import ERROR, PASS, SKIP, CheckResult


def _only(*checks: str) -> RunConfig:
    cfg = RunConfig()
    return replace(cfg, oracle=replace(cfg.oracle, checks=checks))


def test_theta_lattice_is_admissible() -> None:
    lattice = validation.theta_lattice()
    assert len(lattice) == 27
    assert all(v >= a and w >= a for v, w, a in lattice)


def test_kernel_checks_pass() -> None:
    cfg = RunConfig()
    closed = validation.check_theta_closed_form(cfg)
    assert closed.status == PASS
    annihilation = validation.check_theta_annihilation(cfg)
    assert annihilation.status == PASS
    assert annihilation.value == 0.0


def test_compounding_check_passes_for_small_rates() -> None:
    res = validation.check_compounding_3m(RunConfig())
    assert res.status == PASS
    assert 0.0 < res.value < COMPOUNDING_TOL


def test_random_accruals_cover_the_period() -> None:
    rng = np.random.default_rng(1)
    for _ in range(20):
        n = validation.random_accruals(rng)
        assert n.sum() == 91
        assert set(n.tolist()) <= {1, 2, 3}


def test_random_models_are_seeded_and_admissible() -> None:
    cfg = RunConfig()
    a = validation.random_models(cfg)
    b = validation.random_models(cfg)
    assert len(a) == BOUNDARY_CHECK_MODELS
    assert a == b
    for m in a:
        assert -1.0 <= m.beta < 0.0
        assert float(m.rbar_star(0.0)) < 0.0


def test_price_table_is_skipped_off_the_reference_model() -> None:
    cfg = config_from_mapping({"model": {"alpha": 0.0}})
    assert not validation.is_reference_setup(cfg)
    res = validation.check_table3_prices(cfg)
    assert res.status == SKIP
    assert validation.is_reference_setup(RunConfig())


def test_run_checks_keeps_canonical_order_and_skips_unselected() -> None:
    results = validation.run_checks(_only("compounding_3m"))
    assert [r.name for r in results] == list(ALL_CHECKS)
    by_name = {r.name: r for r in results}
    assert by_name["compounding_3m"].status == PASS
    assert by_name["fd_oracle"].status == SKIP
    assert by_name["fd_oracle"].detail == {"reason": "not selected"}


def test_numerical_failure_becomes_an_error_entry(monkeypatch: pytest.MonkeyPatch) -> None:
    def boom(cfg: RunConfig) -> CheckResult:
        raise SingularityError("tau too small", module="weber_orr", operation="theta")

    monkeypatch.setitem(validation.CHECKS, "theta_closed_form", boom)
    results = validation.run_checks(_only("theta_closed_form"))
    res = results[0]
    assert res.status == ERROR
    assert res.detail == {"where": "weber_orr.theta", "message": "tau too small"}


def test_median_strike_and_small_grid() -> None:
    cfg = RunConfig()
    assert validation.median_strike(cfg) == 105.0
    g = validation.small_grid(cfg)
    assert (g.n_t, g.n_x, g.n_z) == (8, 24, 6)
    assert g.x_max == cfg.grid.x_max


def test_compounding_tolerance_covers_the_worst_weekend_path() -> None:
    # every accrual three days long at the top rate bounds sum(d^2 R^2) / (2 (T - t0))
    d = np.full(30, 3.0 / 360.0)
    gap = float(np.sum(d ** 2) * COMPOUNDING_MAX_RATE ** 2 / (2.0 * d.sum()))
    assert gap < COMPOUNDING_TOL
    assert COMPOUNDING_MAX_RATE == pytest.approx(0.10)


def test_boundary_check_runs_on_the_coarse_grid() -> None:
    cfg = RunConfig()
    g = validation.boundary_grid(cfg)
    assert (g.n_t, g.n_x, g.n_z) == BOUNDARY_CHECK_GRID
    res = validation.check_boundary_invariants(cfg)
    assert res.status == PASS
    assert res.detail["models"] == BOUNDARY_CHECK_MODELS + 1


def test_scheme_equivalence_check_passes_in_the_homogeneous_limit() -> None:
    res = validation.check_scheme_equivalence(RunConfig())
    assert res.status == PASS
    assert res.value <= res.tolerance
    assert np.isfinite(res.detail["coupled_gap"])
