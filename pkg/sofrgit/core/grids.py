from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid

from sofrgit.core.contract import (
    CLUSTER_WIDTH_FRACTION,
    GRID_CDF_SAMPLES,
    LOWER_CLUSTER_STRENGTH,
    MIN_Z_REF_NODES,
    SPOT_CLUSTER_STRENGTH,
    Z_REF_PER_Z_NODE,
)
from sofrgit.core.errors import ConfigError, ContractError
from sofrgit.core.transforms import TransformCache

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverGrids:
    """
    Level i of the transformed time axis sits at tau_nodes[i] (t_nodes[i] in
    calendar time); level 0 is the option maturity, the last level is t0.
    x_nodes[i] starts exactly at x_l(tau_i).
    """
    tau_nodes: np.ndarray
    t_nodes: np.ndarray
    x_nodes: np.ndarray  # (n_t, n_x)
    n_z: int
    y_max: float
    y_spot: float

    @property
    def n_t(self) -> int:
        return int(self.tau_nodes.size)

    @property
    def n_x(self) -> int:
        return int(self.x_nodes.shape[1])

    @property
    def dtau(self) -> float:
        return float(self.tau_nodes[1] - self.tau_nodes[0])

    @property
    def x_lower(self) -> np.ndarray:
        return self.x_nodes[:, 0]

    def time_weights(self, m: int) -> np.ndarray:
        """Quadrature weights over levels 0..m for the integral on [0, tau_m]."""
        return simpson_weights(m, self.dtau)


def simpson_weights(n_intervals: int, h: float) -> np.ndarray:
    """
    Composite Simpson weights on n_intervals + 1 equispaced nodes. An odd interval
    count closes with the 3/8 rule on the last three intervals; one interval falls
    back to the trapezoid and zero intervals give a zero weight.
    """
    n = int(n_intervals)
    if n < 0:
        raise ContractError("negative interval count")
    w = np.zeros(n + 1)
    if n == 0:
        return w
    if n == 1:
        w[:] = 0.5 * h
        return w
    n_simpson = n if n % 2 == 0 else n - 3
    if n_simpson > 0:
        w[0:n_simpson + 1:2] += 2.0 * h / 3.0
        w[1:n_simpson:2] += 4.0 * h / 3.0
        w[0] -= h / 3.0
        w[n_simpson] -= h / 3.0
    if n % 2 == 1:
        k = n_simpson
        w[k:k + 4] += 3.0 * h / 8.0 * np.array([1.0, 3.0, 3.0, 1.0])
    return w


def integrate_time(values: np.ndarray, weights: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.shape[0] != weights.shape[0]:
        raise ContractError(f"time values ({values.shape[0]}) and weights ({weights.shape[0]}) differ in length")
    return np.tensordot(weights, values, axes=(0, 0))


def integrate_space(values: np.ndarray, nodes: np.ndarray) -> float:
    values = np.asarray(values, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    if values.shape[-1] != nodes.shape[-1]:
        raise ContractError("space values and nodes differ in length")
    if nodes.size < 2:
        return 0.0
    return trapezoid(values, nodes, axis=-1)


# ----------------------------
# x stretching
# ----------------------------

def _cluster_cdf(x: np.ndarray, lo: float, spot: float, width: float) -> np.ndarray:
    # integral from lo of 1 + S sech((s - spot)/w) + L sech((s - lo)/w)
    s_part = np.arctan(np.sinh((x - spot) / width)) - np.arctan(np.sinh((lo - spot) / width))
    l_part = np.arctan(np.sinh((x - lo) / width))
    return (x - lo) + SPOT_CLUSTER_STRENGTH * width * s_part + LOWER_CLUSTER_STRENGTH * width * l_part


def _cluster_density(x: np.ndarray, lo: float, spot: float, width: float) -> np.ndarray:
    return (
        1.0
        + SPOT_CLUSTER_STRENGTH / np.cosh((x - spot) / width)
        + LOWER_CLUSTER_STRENGTH / np.cosh((x - lo) / width)
    )


def stretched_nodes(lo: float, hi: float, spot: float, n: int) -> np.ndarray:
    """n nodes on [lo, hi], dense around spot and (less so) around lo."""
    width = (hi - lo) * CLUSTER_WIDTH_FRACTION
    dense = np.linspace(lo, hi, GRID_CDF_SAMPLES)
    cdf = _cluster_cdf(dense, lo, spot, width)
    targets = np.linspace(0.0, cdf[-1], n)
    x = np.interp(targets, cdf, dense)
    x = x - (_cluster_cdf(x, lo, spot, width) - targets) / _cluster_density(x, lo, spot, width)
    x = np.clip(x, lo, hi)
    x[0] = lo
    x[-1] = hi
    if np.any(np.diff(x) <= 0.0):
        raise ConfigError("stretched x grid is not strictly increasing; increase n_x or x_max")
    return x


def z_nodes(z_b, z_top: float, n_z: int) -> np.ndarray:
    """Uniform z columns from z_B to z_top, shape z_b.shape + (n_z,)."""
    zb = np.asarray(z_b, dtype=float)
    s = np.linspace(0.0, 1.0, n_z)
    return zb[..., None] + (z_top - zb)[..., None] * s


def reference_z_nodes(z_top: float, n_z: int) -> np.ndarray:
    return np.linspace(0.0, z_top, max(Z_REF_PER_Z_NODE * n_z, MIN_Z_REF_NODES))


def build_grids(cache: TransformCache, n_t: int, n_x: int, n_z: int, x_max: float, spot_x: float) -> SolverGrids:
    """
    x_max and spot_x are x-images at t0; every level carries them through the
    factor y so the rate-space truncation is the same on all levels.
    """
    if n_t < 3:
        raise ConfigError("n_t must be >= 3")
    if n_x < 3:
        raise ConfigError("n_x must be >= 3")
    if n_z < 2:
        raise ConfigError("n_z must be >= 2")
    if x_max <= spot_x:
        raise ConfigError(f"x_max ({x_max:g}) must exceed the spot image ({spot_x:g})")

    tau_nodes = np.linspace(0.0, cache.tau_total, n_t)
    t_nodes = np.asarray(cache.t_of_tau(tau_nodes), dtype=float)
    t_nodes[0] = cache.T
    t_nodes[-1] = cache.t0

    y_max = float(cache.y_of_x(cache.t0, x_max))
    y_spot = float(cache.y_of_x(cache.t0, spot_x))

    x_nodes = np.empty((n_t, n_x))
    for i, t in enumerate(t_nodes):
        lo = float(cache.x_lower_at_t(t))
        hi = float(cache.x_of_y(t, y_max))
        sp = float(cache.x_of_y(t, y_spot))
        if not (hi > sp > lo):
            raise ConfigError(f"level {i}: need x_max > spot > x_l, got {hi:g}, {sp:g}, {lo:g}")
        x_nodes[i] = stretched_nodes(lo, hi, sp, n_x)

    logger.debug("grids: n_t=%d n_x=%d n_z=%d dtau=%.6g", n_t, n_x, n_z, tau_nodes[1])
    return SolverGrids(
        tau_nodes=tau_nodes,
        t_nodes=t_nodes,
        x_nodes=x_nodes,
        n_z=int(n_z),
        y_max=y_max,
        y_spot=y_spot,
    )
