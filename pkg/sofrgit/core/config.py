from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib  # py3.11+
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib  # type: ignore

from sofrgit.core.asian_engine import AMERICAN, CONTINUATION, EUROPEAN, WHOLE, AsianContract, GridSpec
from sofrgit.core.contract import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    DEFAULT_FD_N_T,
    DEFAULT_FD_N_Y,
    DEFAULT_FD_N_Z,
    DEFAULT_HORIZON,
    DEFAULT_MC_PATHS,
    DEFAULT_MC_STEPS,
    DEFAULT_N_T,
    DEFAULT_N_X,
    DEFAULT_N_Z,
    DEFAULT_ORACLE_SEED,
    DEFAULT_RBAR_STAR,
    DEFAULT_SIGMA,
    DEFAULT_SMALL_N_T,
    DEFAULT_SMALL_N_X,
    DEFAULT_SMALL_N_Z,
    DEFAULT_STRIKES,
    DEFAULT_T,
    DEFAULT_T0,
    DEFAULT_THETA_CACHE_SIZE,
    DEFAULT_X_MAX,
    DEFAULT_Y_SPOT,
    DEFAULT_YEAR_DAYS,
    DEFAULT_Z_TOP_MULTIPLE,
    TABLE3_TOLERANCE,
)
from sofrgit.core.errors import ConfigError
from sofrgit.core.term_structure import CONSTANT, KILLING_CURVE, KILLING_SHORT_RATE, ModelSpec, ParamCurve

ALL_CHECKS = (
    "theta_closed_form",
    "theta_annihilation",
    "delta_limit_rate",
    "boundary_invariants",
    "table3_prices",
    "fd_oracle",
    "mc_oracle",
    "scheme_equivalence",
    "zcb_deterministic",
    "compounding_3m",
)
OUTPUT_FORMATS = ("csv", "json")


# ----------------------------
# Config objects
# ----------------------------

@dataclass(frozen=True)
class CurveConfig:
    """A number (flat over [0, horizon]) or explicit breakpoints/values."""
    values: tuple[float, ...]
    breakpoints: tuple[float, ...] | None = None
    interpolation: str = CONSTANT

    def build(self, horizon: float) -> ParamCurve:
        if self.breakpoints is None:
            return ParamCurve.flat(self.values[0], 0.0, horizon)
        return ParamCurve(breakpoints=self.breakpoints, values=self.values, interpolation=self.interpolation)


@dataclass(frozen=True)
class ModelConfig:
    beta: float = DEFAULT_BETA
    alpha: CurveConfig = CurveConfig((DEFAULT_ALPHA,))
    sigma: CurveConfig = CurveConfig((DEFAULT_SIGMA,))
    rbar_star: CurveConfig = CurveConfig((DEFAULT_RBAR_STAR,))
    horizon: float = DEFAULT_HORIZON
    discounting: bool = True
    killing: str = KILLING_CURVE


@dataclass(frozen=True)
class ContractConfig:
    style: str = AMERICAN
    region: str = CONTINUATION
    strikes: tuple[float, ...] = DEFAULT_STRIKES
    T: float = DEFAULT_T
    t0: float = DEFAULT_T0
    y_spot: float = DEFAULT_Y_SPOT
    z_spot: float | None = None
    tenor: str = "1M"
    Q: float | None = None
    forward_put_maturity: float | None = None
    year_days: int = DEFAULT_YEAR_DAYS

    @property
    def bond_maturity(self) -> float:
        return self.Q if self.Q is not None else self.T

    @property
    def put_maturity(self) -> float:
        if self.forward_put_maturity is not None:
            return self.forward_put_maturity
        return self.t0 if self.t0 > 0.0 else 0.5 * self.T


@dataclass(frozen=True)
class GridConfig:
    n_t: int = DEFAULT_N_T
    n_x: int = DEFAULT_N_X
    n_z: int = DEFAULT_N_Z
    x_max: float = DEFAULT_X_MAX
    z_top: float | None = None
    z_top_multiple: float = DEFAULT_Z_TOP_MULTIPLE
    theta_cache_size: int = DEFAULT_THETA_CACHE_SIZE
    workers: int = 1


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "outputs"
    prefix: str = "sofrgit"
    formats: tuple[str, ...] = ("csv",)


@dataclass(frozen=True)
class OracleConfig:
    checks: tuple[str, ...] = ALL_CHECKS
    seed: int = DEFAULT_ORACLE_SEED
    mc_paths: int = DEFAULT_MC_PATHS
    mc_steps: int = DEFAULT_MC_STEPS
    fd_n_y: int = DEFAULT_FD_N_Y
    fd_n_z: int = DEFAULT_FD_N_Z
    fd_n_t: int = DEFAULT_FD_N_T
    small_n_t: int = DEFAULT_SMALL_N_T
    small_n_x: int = DEFAULT_SMALL_N_X
    small_n_z: int = DEFAULT_SMALL_N_Z
    table3_tolerance: float = TABLE3_TOLERANCE


@dataclass(frozen=True)
class RunConfig:
    """
    Whole run configuration. Built-in defaults reproduce the reference test:
    beta = -1, sigma_eff = 0.2 y_spot, flat rbar_star = -1%, T = 0.25, y = 100.
    """
    model: ModelConfig = field(default_factory=ModelConfig)
    contract: ContractConfig = field(default_factory=ContractConfig)
    grid: GridConfig = field(default_factory=GridConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)
    source: str | None = None

    def model_spec(self) -> ModelSpec:
        m = self.model
        return ModelSpec(
            beta=m.beta,
            alpha=m.alpha.build(m.horizon),
            sigma=m.sigma.build(m.horizon),
            rbar_star=m.rbar_star.build(m.horizon),
            horizon=m.horizon,
            discounting_enabled=m.discounting,
            killing=m.killing,
        )

    def grid_spec(self) -> GridSpec:
        g = self.grid
        return GridSpec(
            n_t=g.n_t,
            n_x=g.n_x,
            n_z=g.n_z,
            x_max=g.x_max,
            z_top=g.z_top,
            z_top_multiple=g.z_top_multiple,
            theta_cache_size=g.theta_cache_size,
        )

    def asian_contract(self, K: float) -> AsianContract:
        c = self.contract
        return AsianContract(K=float(K), T=c.T, t0=c.t0, y_spot=c.y_spot, z_spot=c.z_spot, style=c.style,
                             region=c.region)


# ----------------------------
# Helpers
# ----------------------------

def _as_dict(x: Any) -> dict[str, Any]:
    return x if isinstance(x, dict) else {}


def _get(d: dict[str, Any], key: str, default: Any) -> Any:
    return d.get(key, default) if isinstance(d, dict) else default


def _coerce_float(x: Any, key: str) -> float:
    try:
        return float(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {x!r}") from None


def _coerce_int(x: Any, key: str) -> int:
    if isinstance(x, bool):
        raise ConfigError(f"{key}: expected an integer, got {x!r}")
    try:
        v = int(x)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected an integer, got {x!r}") from None
    if v != x and not isinstance(x, str):
        raise ConfigError(f"{key}: expected an integer, got {x!r}")
    return v


def _coerce_bool(x: Any, key: str) -> bool:
    if isinstance(x, bool):
        return x
    raise ConfigError(f"{key}: expected true/false, got {x!r}")


def _coerce_choice(x: Any, key: str, choices: tuple[str, ...]) -> str:
    s = str(x).strip()
    if s not in choices:
        raise ConfigError(f"{key}: expected one of {', '.join(choices)}, got {x!r}")
    return s


def _coerce_opt_float(x: Any, key: str) -> float | None:
    return None if x is None else _coerce_float(x, key)


def _coerce_floats(x: Any, key: str) -> tuple[float, ...]:
    if not isinstance(x, (list, tuple)) or not x:
        raise ConfigError(f"{key}: expected a non-empty list of numbers")
    return tuple(_coerce_float(v, f"{key}[{i}]") for i, v in enumerate(x))


def _coerce_curve(x: Any, key: str) -> CurveConfig:
    if isinstance(x, dict):
        bps = _coerce_floats(x.get("breakpoints"), f"{key}.breakpoints")
        vals = _coerce_floats(x.get("values"), f"{key}.values")
        interp = _coerce_choice(x.get("interpolation", CONSTANT), f"{key}.interpolation", ("constant", "linear"))
        return CurveConfig(values=vals, breakpoints=bps, interpolation=interp)
    return CurveConfig(values=(_coerce_float(x, key),))


# ----------------------------
# Load + merge
# ----------------------------

def _model_from(d: dict[str, Any], contract: ContractConfig) -> ModelConfig:
    base = ModelConfig()
    beta = _coerce_float(_get(d, "beta", base.beta), "model.beta")
    if "sigma" in d and "sigma_effective" in d:
        raise ConfigError("model: give sigma or sigma_effective, not both")
    if "sigma_effective" in d:
        eff = _coerce_curve(d["sigma_effective"], "model.sigma_effective")
        scale = contract.y_spot ** (beta + 1.0)
        sigma = replace(eff, values=tuple(v / scale for v in eff.values))
    else:
        sigma = _coerce_curve(_get(d, "sigma", DEFAULT_SIGMA), "model.sigma")
    return ModelConfig(
        beta=beta,
        alpha=_coerce_curve(_get(d, "alpha", DEFAULT_ALPHA), "model.alpha"),
        sigma=sigma,
        rbar_star=_coerce_curve(_get(d, "rbar_star", DEFAULT_RBAR_STAR), "model.rbar_star"),
        horizon=_coerce_float(_get(d, "horizon", base.horizon), "model.horizon"),
        discounting=_coerce_bool(_get(d, "discounting", base.discounting), "model.discounting"),
        killing=_coerce_choice(_get(d, "killing", base.killing), "model.killing",
                               (KILLING_SHORT_RATE, KILLING_CURVE)),
    )


def _contract_from(d: dict[str, Any]) -> ContractConfig:
    base = ContractConfig()
    return ContractConfig(
        style=_coerce_choice(_get(d, "style", base.style), "contract.style", (AMERICAN, EUROPEAN)),
        region=_coerce_choice(_get(d, "region", base.region), "contract.region", (CONTINUATION, WHOLE)),
        strikes=_coerce_floats(_get(d, "strikes", list(base.strikes)), "contract.strikes"),
        T=_coerce_float(_get(d, "T", base.T), "contract.T"),
        t0=_coerce_float(_get(d, "t0", base.t0), "contract.t0"),
        y_spot=_coerce_float(_get(d, "y_spot", base.y_spot), "contract.y_spot"),
        z_spot=_coerce_opt_float(_get(d, "z_spot", None), "contract.z_spot"),
        tenor=_coerce_choice(_get(d, "tenor", base.tenor), "contract.tenor", ("1M", "3M")),
        Q=_coerce_opt_float(_get(d, "Q", None), "contract.Q"),
        forward_put_maturity=_coerce_opt_float(_get(d, "forward_put_maturity", None),
                                               "contract.forward_put_maturity"),
        year_days=_coerce_int(_get(d, "year_days", base.year_days), "contract.year_days"),
    )


def _grid_from(d: dict[str, Any]) -> GridConfig:
    base = GridConfig()
    return GridConfig(
        n_t=_coerce_int(_get(d, "n_t", base.n_t), "grid.n_t"),
        n_x=_coerce_int(_get(d, "n_x", base.n_x), "grid.n_x"),
        n_z=_coerce_int(_get(d, "n_z", base.n_z), "grid.n_z"),
        x_max=_coerce_float(_get(d, "x_max", base.x_max), "grid.x_max"),
        z_top=_coerce_opt_float(_get(d, "z_top", None), "grid.z_top"),
        z_top_multiple=_coerce_float(_get(d, "z_top_multiple", base.z_top_multiple), "grid.z_top_multiple"),
        theta_cache_size=_coerce_int(_get(d, "theta_cache_size", base.theta_cache_size), "grid.theta_cache_size"),
        workers=_coerce_int(_get(d, "workers", base.workers), "grid.workers"),
    )


def _output_from(d: dict[str, Any]) -> OutputConfig:
    base = OutputConfig()
    formats = _get(d, "formats", list(base.formats))
    if not isinstance(formats, (list, tuple)):
        raise ConfigError("output.formats: expected a list")
    return OutputConfig(
        directory=str(_get(d, "directory", base.directory)),
        prefix=str(_get(d, "prefix", base.prefix)),
        formats=tuple(_coerce_choice(f, "output.formats", OUTPUT_FORMATS) for f in formats),
    )


def _oracle_from(d: dict[str, Any]) -> OracleConfig:
    base = OracleConfig()
    checks = _get(d, "checks", list(base.checks))
    if not isinstance(checks, (list, tuple)):
        raise ConfigError("oracle.checks: expected a list")
    return OracleConfig(
        checks=tuple(_coerce_choice(c, "oracle.checks", ALL_CHECKS) for c in checks),
        seed=_coerce_int(_get(d, "seed", base.seed), "oracle.seed"),
        mc_paths=_coerce_int(_get(d, "mc_paths", base.mc_paths), "oracle.mc_paths"),
        mc_steps=_coerce_int(_get(d, "mc_steps", base.mc_steps), "oracle.mc_steps"),
        fd_n_y=_coerce_int(_get(d, "fd_n_y", base.fd_n_y), "oracle.fd_n_y"),
        fd_n_z=_coerce_int(_get(d, "fd_n_z", base.fd_n_z), "oracle.fd_n_z"),
        fd_n_t=_coerce_int(_get(d, "fd_n_t", base.fd_n_t), "oracle.fd_n_t"),
        small_n_t=_coerce_int(_get(d, "small_n_t", base.small_n_t), "oracle.small_n_t"),
        small_n_x=_coerce_int(_get(d, "small_n_x", base.small_n_x), "oracle.small_n_x"),
        small_n_z=_coerce_int(_get(d, "small_n_z", base.small_n_z), "oracle.small_n_z"),
        table3_tolerance=_coerce_float(_get(d, "table3_tolerance", base.table3_tolerance),
                                       "oracle.table3_tolerance"),
    )


def config_from_mapping(data: Mapping[str, Any], source: str | None = None) -> RunConfig:
    contract = _contract_from(_as_dict(data.get("contract", {})))
    cfg = RunConfig(
        model=_model_from(_as_dict(data.get("model", {})), contract),
        contract=contract,
        grid=_grid_from(_as_dict(data.get("grid", {}))),
        output=_output_from(_as_dict(data.get("output", {}))),
        oracle=_oracle_from(_as_dict(data.get("oracle", {}))),
        source=source,
    )
    validate_config(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    """
    Load a TOML run config. None gives the built-in defaults; a path that does not
    exist (or is a directory) is a ConfigError.
    """
    if not path:
        return RunConfig()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    if p.is_dir():
        raise ConfigError(f"config path is a directory: {p}")
    try:
        data = tomllib.loads(p.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{p}: invalid TOML ({e})") from None
    return config_from_mapping(data, source=str(p))


def validate_config(cfg: RunConfig) -> None:
    c, g, m = cfg.contract, cfg.grid, cfg.model
    if not 0.0 <= c.t0 < c.T:
        raise ConfigError("contract: need 0 <= t0 < T")
    if c.T > m.horizon + 1e-12:
        raise ConfigError("contract.T exceeds model.horizon")
    if any(k <= 0.0 for k in c.strikes):
        raise ConfigError("contract.strikes must be > 0")
    if c.y_spot <= 0.0:
        raise ConfigError("contract.y_spot must be > 0")
    if c.Q is not None and not c.t0 < c.Q <= m.horizon:
        raise ConfigError("contract.Q must satisfy t0 < Q <= horizon")
    if c.year_days <= 0:
        raise ConfigError("contract.year_days must be > 0")
    if g.n_t < 3 or g.n_x < 3 or g.n_z < 2:
        raise ConfigError("grid: need n_t >= 3, n_x >= 3, n_z >= 2")
    if g.x_max <= c.y_spot:
        raise ConfigError("grid.x_max must exceed contract.y_spot")
    if g.workers < 1:
        raise ConfigError("grid.workers must be >= 1")
    if g.theta_cache_size < 0:
        raise ConfigError("grid.theta_cache_size must be >= 0")
    unknown = [c for c in cfg.oracle.checks if c not in ALL_CHECKS]
    if unknown:
        raise ConfigError(f"oracle.checks: unknown checks {', '.join(unknown)}")
    if cfg.model.killing not in (KILLING_SHORT_RATE, KILLING_CURVE):
        raise ConfigError(f"model.killing: unknown value {cfg.model.killing!r}")
    # builds and validates the curves
    cfg.model_spec()


def merge_config(cfg: RunConfig, overrides: Mapping[str, Any]) -> RunConfig:
    """
    Apply CLI overrides keyed "section.key" (e.g. "grid.n_t"). Only keys whose
    value is not None are applied.
    """
    sections: dict[str, dict[str, Any]] = {}
    for dotted, v in overrides.items():
        if v is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in ("model", "contract", "grid", "output", "oracle") or not key:
            raise ConfigError(f"unknown override: {dotted}")
        sections.setdefault(section, {})[key] = v

    def pick(section: str, obj: Any) -> Any:
        vals = sections.get(section)
        if not vals:
            return obj
        unknown = [k for k in vals if not hasattr(obj, k)]
        if unknown:
            raise ConfigError(f"unknown {section} keys: {', '.join(unknown)}")
        return replace(obj, **vals)

    merged = RunConfig(
        model=pick("model", cfg.model),
        contract=pick("contract", cfg.contract),
        grid=pick("grid", cfg.grid),
        output=pick("output", cfg.output),
        oracle=pick("oracle", cfg.oracle),
        source=cfg.source,
    )
    validate_config(merged)
    return merged
