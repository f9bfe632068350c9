from __future__ import annotations

import json
from pathlib import Path

import pandas as pd
import pytest

from sofrgit.cli import main as cli_main
from sofrgit.tools.validate_json import validate_json

BOND_TOML = """\
[model]
beta = -1.0
alpha = 0.0
sigma = 0.005
rbar_star = -0.02
horizon = 1.0

[contract]
strikes = [0.03]
T = 0.5
y_spot = 0.05

[grid]
n_t = 8
n_x = 80
x_max = 1.0

[output]
formats = ["csv", "json"]
"""

DESK_TOML = """\
[contract]
strikes = [100.0]

[grid]
n_t = 8
n_x = 24
n_z = 6

[output]
formats = ["csv", "json"]
"""


@pytest.fixture
def bond_desk(tmp_path: Path) -> tuple[Path, Path]:
    cfg = tmp_path / "bond.toml"
    cfg.write_text(BOND_TOML, encoding="utf-8")
    return cfg, tmp_path / "outputs"


@pytest.fixture
def desk(tmp_path: Path) -> tuple[Path, Path]:
    cfg = tmp_path / "desk.toml"
    cfg.write_text(DESK_TOML, encoding="utf-8")
    return cfg, tmp_path / "outputs"


def _run(command: str, cfg: Path, out_dir: Path, *extra: str) -> int:
    return cli_main([command, "--config", str(cfg), "--out-dir", str(out_dir), *extra])


@pytest.mark.slow
def test_bond_and_forward_commands_write_surfaces(bond_desk: tuple[Path, Path]) -> None:
    cfg, out_dir = bond_desk
    assert _run("zcb", cfg, out_dir) == 0
    zcb = pd.read_csv(out_dir / "sofrgit_zcb.csv")
    assert list(zcb.columns) == ["t", "y", "Q", "price"]
    assert zcb["price"].between(-1e-12, 1.0 + 1e-12).all()

    assert _run("forward", cfg, out_dir) == 0
    assert (out_dir / "sofrgit_forward.csv").stat().st_size > 0

    summary = json.loads((out_dir / "sofrgit_zcb_summary.json").read_text(encoding="utf-8"))
    assert summary["results"][0]["method"] == "recurrent"
    assert str(out_dir / "sofrgit_zcb.csv") in summary["outputs"]


@pytest.mark.slow
def test_forward_put_command(bond_desk: tuple[Path, Path]) -> None:
    cfg, out_dir = bond_desk
    assert _run("price-forward-put", cfg, out_dir) == 0
    assert (out_dir / "sofrgit_forward_put_K0.03.csv").exists()
    assert (out_dir / "sofrgit_forward_put_boundary_K0.03.csv").exists()


def test_one_month_option_command(desk: tuple[Path, Path]) -> None:
    cfg, out_dir = desk
    assert _run("price-1m", cfg, out_dir) == 0
    row = pd.read_csv(out_dir / "sofrgit_1m.csv").iloc[0]
    assert row["K"] == 100.0
    assert row["density_mass"] == pytest.approx(1.0)
    assert row["price"] >= max(row["forward_branch"], row["asian_branch"]) - 1e-12


def test_validation_run_with_a_config_records_its_source(desk: tuple[Path, Path]) -> None:
    cfg, out_dir = desk
    json_out = out_dir / "validation.json"
    rc = _run("validate", cfg, out_dir, "--checks", "theta_closed_form", "compounding_3m", "--json-out", str(json_out))
    assert rc == 0

    result = validate_json(json_out)
    assert result.failed_checks == 0

    obj = json.loads(json_out.read_text(encoding="utf-8"))
    assert obj["run"]["config"] == str(cfg)
    assert obj["run"]["grid"]["n_t"] == 8
    assert obj["summary"]["passed"] == 2
