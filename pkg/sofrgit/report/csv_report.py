from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from sofrgit.core.asian_engine import AsianSolution
from sofrgit.core.bond_forward import ForwardPutSolution, ZcbSolution

BOUNDARY_COLUMNS = ["t", "y", "z_B", "psi_at_boundary"]
PRICE_COLUMNS = ["t", "K", "y", "z", "price", "delta_z"]
ZCB_COLUMNS = ["t", "y", "Q", "price"]
FORWARD_COLUMNS = ["t", "y", "Q", "forward"]
FORWARD_PUT_COLUMNS = ["t", "y", "price"]
FORWARD_PUT_BOUNDARY_COLUMNS = ["t", "y_B", "f_plus"]


def strike_tag(K: float) -> str:
    """90.0 -> '90', 92.5 -> '92.5' (file-name safe)."""
    return f"{K:g}".replace("-", "m")


def write_csv(df: pd.DataFrame, path: str | Path) -> Path:
    """Write next to the target then os.replace, so readers never see half a file."""
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", suffix=".tmp", dir=p.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            df.to_csv(fh, index=False, float_format="%.10g")
        os.replace(tmp, p)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return p


# ----------------------------
# Frames
# ----------------------------

def boundary_frame(solution: AsianSolution) -> pd.DataFrame:
    b = solution.boundary
    n_t, n_x = b.z_b.shape
    return pd.DataFrame({
        "t": np.repeat(b.t_nodes, n_x),
        "y": b.y_nodes.ravel(),
        "z_B": b.z_b.ravel(),
        "psi_at_boundary": b.psi_b.ravel(),
    }, columns=BOUNDARY_COLUMNS)


def price_frame(solution: AsianSolution) -> pd.DataFrame:
    p = solution.prices
    if p is None:
        return pd.DataFrame(columns=PRICE_COLUMNS)
    b = solution.boundary
    n_t, n_x, n_z = p.z.shape
    return pd.DataFrame({
        "t": np.repeat(b.t_nodes, n_x * n_z),
        "K": np.full(n_t * n_x * n_z, p.K),
        "y": np.repeat(b.y_nodes.ravel(), n_z),
        "z": p.z.ravel(),
        "price": p.price.ravel(),
        "delta_z": p.delta_z.ravel(),
    }, columns=PRICE_COLUMNS)


def zcb_frame(solution: ZcbSolution) -> pd.DataFrame:
    n_t, n_x = solution.u.shape
    return pd.DataFrame({
        "t": np.repeat(solution.t_nodes, n_x),
        "y": solution.y_nodes.ravel(),
        "Q": np.full(n_t * n_x, solution.Q),
        "price": solution.u.ravel(),
    }, columns=ZCB_COLUMNS)


def forward_frame(t: np.ndarray, y: np.ndarray, Q: float, forward: np.ndarray) -> pd.DataFrame:
    tt, yy = np.meshgrid(np.asarray(t, dtype=float), np.asarray(y, dtype=float), indexing="ij")
    return pd.DataFrame({
        "t": tt.ravel(),
        "y": yy.ravel(),
        "Q": np.full(tt.size, Q),
        "forward": np.asarray(forward, dtype=float).ravel(),
    }, columns=FORWARD_COLUMNS)


def forward_put_frames(solution: ForwardPutSolution) -> tuple[pd.DataFrame, pd.DataFrame]:
    n_t, n_x = solution.u.shape
    prices = pd.DataFrame({
        "t": np.repeat(solution.t_nodes, n_x),
        "y": solution.y_nodes.ravel(),
        "price": solution.u.ravel(),
    }, columns=FORWARD_PUT_COLUMNS)
    boundary = pd.DataFrame({
        "t": solution.t_nodes,
        "y_B": solution.y_b,
        "f_plus": solution.f_plus,
    }, columns=FORWARD_PUT_BOUNDARY_COLUMNS)
    return prices, boundary


# ----------------------------
# Writers
# ----------------------------

def write_boundary_csvs(solutions: Sequence[AsianSolution], out_dir: str | Path, prefix: str) -> list[Path]:
    """One file per strike plus a combined file with a K column."""
    out = Path(out_dir)
    written: list[Path] = []
    frames = []
    for s in solutions:
        df = boundary_frame(s)
        written.append(write_csv(df, out / f"{prefix}_boundary_K{strike_tag(s.contract.K)}.csv"))
        frames.append(df.assign(K=s.contract.K))
    combined = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=["K", *BOUNDARY_COLUMNS])
    combined = combined.loc[:, ["K", *BOUNDARY_COLUMNS]]
    written.append(write_csv(combined, out / f"{prefix}_boundary.csv"))
    return written


def write_price_csvs(solutions: Sequence[AsianSolution], out_dir: str | Path, prefix: str) -> list[Path]:
    out = Path(out_dir)
    written: list[Path] = []
    frames = []
    for s in solutions:
        df = price_frame(s)
        written.append(write_csv(df, out / f"{prefix}_price_K{strike_tag(s.contract.K)}.csv"))
        frames.append(df)
    combined = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=PRICE_COLUMNS)
    written.append(write_csv(combined, out / f"{prefix}_price.csv"))
    return written
