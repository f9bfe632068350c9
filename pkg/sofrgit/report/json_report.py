from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import pandas as pd

from sofrgit.core.contract import ENGINE_VERSION
from sofrgit.schema_constants import SCHEMA_VERSION

PASS = "pass"
FAIL = "fail"
SKIP = "skip"
ERROR = "error"


@dataclass(frozen=True)
class CheckResult:
    name: str
    status: str
    value: float | None = None
    tolerance: float | None = None
    detail: dict[str, Any] = field(default_factory=dict)


def _json_safe(x: Any) -> Any:
    """Plain JSON types only: numpy unwrapped, non-finite numbers and NA become null."""
    match x:
        case None | bool() | str():
            return x
        case dict():
            return {str(k): _json_safe(v) for k, v in x.items()}
        case np.ndarray():
            return [_json_safe(v) for v in x.tolist()]
        case list() | tuple():
            return [_json_safe(v) for v in x]
        case np.generic():
            return _json_safe(x.item())
        case int():
            return x
        case float():
            return x if math.isfinite(x) else None
    return None if x is pd.NA or x is pd.NaT else str(x)


def _df_to_records(df: pd.DataFrame | None) -> list[dict[str, Any]]:
    if df is None or df.empty:
        return []
    return [_json_safe(r) for r in df.to_dict(orient="records")]


def _meta(generated_at: str | None = None) -> dict[str, str]:
    stamp = generated_at or datetime.now(timezone.utc).replace(microsecond=0).isoformat()
    return {"generated_at": stamp, "engine_version": ENGINE_VERSION, "schema_version": SCHEMA_VERSION}


def _write_strict(payload: dict[str, Any], out_path: str | Path) -> Path:
    p = Path(out_path)
    p.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_json_safe(payload), indent=2, sort_keys=False, allow_nan=False)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", suffix=".tmp", dir=p.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return p


def summarize(checks: Sequence[CheckResult]) -> dict[str, int]:
    return {
        "passed": sum(c.status == PASS for c in checks),
        "failed": sum(c.status in (FAIL, ERROR) for c in checks),
        "skipped": sum(c.status == SKIP for c in checks),
    }


def build_validation_payload(
    *,
    checks: Sequence[CheckResult],
    config_source: str | None,
    model: dict[str, Any],
    grid: dict[str, Any],
    generated_at: str | None = None,
) -> dict[str, Any]:
    """
    Validation report payload. `meta` must stay schema-stable: no extra keys.
    """
    return _json_safe({
        "meta": _meta(generated_at),
        "run": {
            "config": config_source,
            "model": model,
            "grid": grid,
        },
        "checks": [asdict(c) for c in checks],
        "summary": summarize(checks),
    })


def write_validation_report(out_path: str | Path, payload: dict[str, Any]) -> Path:
    return _write_strict(payload, out_path)


def write_run_summary(
    out_path: str | Path,
    *,
    command: str,
    config_source: str | None,
    results: pd.DataFrame,
    outputs: Sequence[str | Path],
    notes: list[str] | None = None,
) -> Path:
    """Per-command summary (spot prices per strike, files written)."""
    payload = {
        "meta": _meta(),
        "command": command,
        "config": config_source,
        "results": _df_to_records(results),
        "outputs": [str(p) for p in outputs],
        "notes": notes or [],
    }
    return _write_strict(payload, out_path)
