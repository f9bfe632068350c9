"""
Brute-force reference pricers used by the tests and by `sofrgit validate`.

None of these sit on the production path: they exist to check the recurrent
engines against independent discretizations (finite differences, Monte Carlo,
fixed-point iteration of the level equation, the zero-volatility bond).
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.linalg import solve_banded

from sofrgit.core.asian_engine import AMERICAN, AsianContract, GridSpec
from sofrgit.core.contract import (
    BOUNDARY_EXTRAPOLATION_LEVELS,
    DEFAULT_FD_N_T,
    DEFAULT_FD_N_Y,
    DEFAULT_FD_N_Z,
    DEFAULT_MC_PATHS,
    DEFAULT_MC_STEPS,
    DEFAULT_ORACLE_SEED,
    FD_MAX_STEPS,
    FD_T0_CUTOFF_FRACTION,
    LIVESK_MAX_ITER,
    LIVESK_TOL,
)
from sofrgit.core.errors import ConfigError, ConvergenceError, NumericalInstabilityError
from sofrgit.core.grids import build_grids, reference_z_nodes
from sofrgit.core.term_structure import ModelSpec
from sofrgit.core.transforms import build_transform
from sofrgit.core.weber_orr import KernelWeightCache, green_point

logger = logging.getLogger(__name__)

FD = "fd"
MC = "mc"
LIVESK = "livesk-iterative"
DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class OracleResult:
    price: float | None
    method: str
    boundary: np.ndarray | None = None
    metadata: dict[str, Any] = field(default_factory=dict)


def _spot_z(contract: AsianContract, model: ModelSpec) -> float:
    if contract.z_spot is not None:
        return float(contract.z_spot)
    return float(model.rbar_star(contract.t0)) + float(contract.y_spot)


# ----------------------------
# Finite differences
# ----------------------------

def _fd_y_range(model: ModelSpec, contract: AsianContract, y_max: float) -> tuple[float, float]:
    lo = float(np.min(model.y_lower(np.linspace(contract.t0, contract.T, 64))))
    spread = float(np.sqrt(model.sigma.integral(0.0, contract.T, square=True)))
    spread *= contract.y_spot ** (model.beta + 1.0)
    hi = min(y_max, contract.y_spot + 10.0 * spread)
    if hi <= contract.y_spot:
        raise ConfigError("FD y range does not contain the spot")
    return lo, hi


def _y_operator(model: ModelSpec, t: float, y: np.ndarray, dt: float) -> np.ndarray:
    """Banded (2, 2) form of I - dt L_y: Dirichlet row at y_l, P_yy = 0 at the top."""
    n = y.size
    h = y[1] - y[0]
    diff = 0.5 * np.asarray(model.diffusion(t, y)) ** 2
    drift = -float(model.alpha(t)) * y
    kill = np.asarray(model.killing_rate(t, y), dtype=float)
    lower = -dt * (diff / h ** 2 - drift / (2.0 * h))
    upper = -dt * (diff / h ** 2 + drift / (2.0 * h))
    diag = 1.0 + dt * (2.0 * diff / h ** 2 + kill)

    ab = np.zeros((5, n))
    ab[2, 1:-1] = diag[1:-1]
    ab[1, 2:] = upper[1:-1]
    ab[3, :-2] = lower[1:-1]
    ab[2, 0], ab[1, 1], ab[0, 2] = 1.0, 0.0, 0.0
    ab[2, -1], ab[3, -2], ab[4, -3] = 1.0, -2.0, 1.0
    return ab


def _z_advect(P: np.ndarray, c: np.ndarray, dt: float, dz: float) -> np.ndarray:
    """One explicit upwind step of P <- P + dt c P_z (backward in time), zero gradient at the ends."""
    fwd = np.zeros_like(P)
    bwd = np.zeros_like(P)
    fwd[:, :-1] = (P[:, 1:] - P[:, :-1]) / dz
    bwd[:, 1:] = (P[:, 1:] - P[:, :-1]) / dz
    return P + dt * np.where(c > 0.0, c * fwd, c * bwd)


def fd_asian(model: ModelSpec, contract: AsianContract, *, n_y: int = DEFAULT_FD_N_Y, n_z: int = DEFAULT_FD_N_Z,
             n_t: int = DEFAULT_FD_N_T, y_max: float = 1000.0, z_top: float | None = None) -> OracleResult:
    """
    Asian put on the (t, y, z) pricing equation: implicit in y, explicit upwind in
    z with CFL sub-stepping, stopped just after t0 where the averaging speed blows up.
    """
    start = time.perf_counter()
    K = contract.K
    y_lo, y_hi = _fd_y_range(model, contract, y_max)
    y = np.linspace(y_lo, y_hi, n_y)
    z_hi = z_top if z_top is not None else max(3.0 * K, float(model.rbar_star(contract.t0)) + y_hi)
    z = np.linspace(0.0, z_hi, n_z)
    dz = z[1] - z[0]
    t_end = contract.t0 + FD_T0_CUTOFF_FRACTION * (contract.T - contract.t0)
    times = np.linspace(contract.T, t_end, n_t + 1)

    intrinsic = np.broadcast_to(np.maximum(K - z, 0.0), (n_y, n_z))
    P = intrinsic.copy()
    american = contract.style == AMERICAN
    total_sub = 0
    for t_old, t_new in zip(times[:-1], times[1:]):
        dt = t_old - t_new
        r = float(model.rbar_star(t_new)) + y
        c = (r[:, None] - z[None, :]) / (t_new - contract.t0)
        n_sub = max(1, int(np.ceil(np.max(np.abs(c)) * dt / dz)))
        total_sub += n_sub
        if total_sub > FD_MAX_STEPS:
            raise NumericalInstabilityError(
                f"CFL sub-stepping exceeded {FD_MAX_STEPS} steps; coarsen n_z or raise the t0 cutoff",
                module="oracles",
                operation="fd_asian",
            )
        h = dt / n_sub
        for k in range(n_sub):
            tk = t_old - (k + 1) * h
            rk = float(model.rbar_star(tk)) + y
            ck = (rk[:, None] - z[None, :]) / (tk - contract.t0)
            P = _z_advect(P, ck, h, dz)
        rhs = P.copy()
        rhs[0] = K
        rhs[-1] = 0.0
        P = solve_banded((2, 2), _y_operator(model, t_new, y, dt), rhs)
        if american:
            P = np.maximum(P, intrinsic)

    interp = RegularGridInterpolator((y, z), P)
    zs = _spot_z(contract, model)
    price = float(interp([[contract.y_spot, min(max(zs, 0.0), z_hi)]])[0])
    meta = {"n_y": n_y, "n_z": n_z, "n_t": n_t, "substeps": total_sub, "y_range": [y_lo, y_hi], "z_top": z_hi,
            "elapsed_seconds": time.perf_counter() - start}
    logger.info("fd oracle K=%g style=%s: %.6g (%d sub-steps)", K, contract.style, price, total_sub)
    return OracleResult(price=price, method=FD, boundary=None, metadata=meta)


# ----------------------------
# Monte Carlo
# ----------------------------

def mc_asian_european(model: ModelSpec, contract: AsianContract, *, paths: int = DEFAULT_MC_PATHS,
                      steps: int = DEFAULT_MC_STEPS, seed: int = DEFAULT_ORACLE_SEED) -> OracleResult:
    """European Asian put from t0: Euler paths reflected at y_l, trapezoid averages."""
    if contract.style == AMERICAN:
        raise ConfigError("the Monte Carlo oracle prices European style only")
    if paths < 2 or steps < 1:
        raise ConfigError("need paths >= 2 and steps >= 1")
    rng = np.random.default_rng(seed)
    times = np.linspace(contract.t0, contract.T, steps + 1)
    dt = times[1] - times[0]
    sq = np.sqrt(dt)

    y = np.full(paths, float(contract.y_spot))
    r_prev = float(model.rbar_star(times[0])) + y
    k_prev = np.asarray(model.killing_rate(times[0], y), dtype=float) * np.ones(paths)
    avg = np.zeros(paths)
    kill = np.zeros(paths)
    for t_old, t_new in zip(times[:-1], times[1:]):
        drift = -float(model.alpha(t_old)) * y
        vol = np.asarray(model.diffusion(t_old, y))
        y = y + drift * dt + vol * sq * rng.standard_normal(paths)
        yl = float(model.y_lower(t_new))
        y = np.where(y < yl, 2.0 * yl - y, y)
        y = np.maximum(y, 1e-300)
        r_new = float(model.rbar_star(t_new)) + y
        k_new = np.asarray(model.killing_rate(t_new, y), dtype=float) * np.ones(paths)
        avg += 0.5 * dt * (r_prev + r_new)
        kill += 0.5 * dt * (k_prev + k_new)
        r_prev, k_prev = r_new, k_new

    z_T = avg / (contract.T - contract.t0)
    payoff = np.exp(-kill) * np.maximum(contract.K - z_T, 0.0)
    price = float(payoff.mean())
    se = float(payoff.std(ddof=1) / np.sqrt(paths))
    logger.info("mc oracle K=%g: %.6g +/- %.3g (%d paths, seed %d)", contract.K, price, se, paths, seed)
    return OracleResult(
        price=price,
        method=MC,
        metadata={"paths": paths, "steps": steps, "seed": seed, "standard_error": se},
    )


# ----------------------------
# Iterative level equation
# ----------------------------

def _march_outward(R: np.ndarray, z: np.ndarray, A: float, r: float) -> np.ndarray:
    """
    Upwind finite differences for u + A m u_m = R, m = |z - r|, marched away from
    z = r on either side (one Gauss-Seidel sweep solves the upwind system).
    """
    u = np.empty_like(R)
    start = float(np.interp(r, z, R))
    d = z - r
    for side in (d >= 0.0, d < 0.0):
        idx = np.flatnonzero(side)
        prev_u, prev_m = start, 0.0
        for k in idx[np.argsort(np.abs(d[idx]), kind="stable")]:
            m = abs(d[k])
            if m <= prev_m:
                u[k] = prev_u if m > 0.0 else R[k]
            else:
                c = A * m / (m - prev_m)
                u[k] = (R[k] + c * prev_u) / (1.0 + c)
            prev_u, prev_m = u[k], m
    return u


def _frontier(z: np.ndarray, u: np.ndarray, K: float) -> float:
    below = z < K
    zz = np.append(z[below], K)
    gap = np.append(u[below], np.interp(K, z, u)) - (K - zz)
    hits = np.nonzero(gap <= 0.0)[0]
    if hits.size == 0:
        return 0.0
    k = hits[-1]
    if k == zz.size - 1:
        return K
    return float(zz[k] - gap[k] * (zz[k + 1] - zz[k]) / (gap[k + 1] - gap[k]))


def livesk_iterative(model: ModelSpec, contract: AsianContract, grid: GridSpec, *,
                     homogeneous: bool = False, tol: float = LIVESK_TOL,
                     max_iter: int = LIVESK_MAX_ITER) -> OracleResult:
    """
    Level-by-level fixed-point iteration of the Duhamel representation. The
    level's own source enters with weight dtau / 2 and is re-evaluated from the
    previous iterate: killing lagged, u_z by upwind finite differences marched
    away from z = r. Stops when successive iterates agree within tol * K.
    `homogeneous` drops killing and averaging (B = C = 0).
    """
    start = time.perf_counter()
    K = float(contract.K)
    cache = build_transform(model, contract.T, contract.t0)
    grids = build_grids(
        cache, grid.n_t, grid.n_x, grid.n_z,
        float(cache.x_of_y(contract.t0, grid.x_max)),
        float(cache.x_of_y(contract.t0, contract.y_spot)),
    )
    z_top = float(grid.z_top) if grid.z_top is not None else grid.z_top_multiple * max(K, _spot_z(contract, model))
    Z = reference_z_nodes(z_top, grid.n_z)
    n_t, n_x, n_z = grids.n_t, grids.n_x, Z.size
    N = n_t - 1
    X = grids.x_nodes
    lower = grids.x_lower
    half = 0.5 * grids.dtau
    nu = cache.nu
    inverse = cache.inverse_homogenizer()
    kernels = KernelWeightCache(grid.theta_cache_size)

    H = np.empty((n_t, n_x))
    lam = np.empty((n_t, n_x))
    B = np.zeros((n_t, n_x))
    Q = np.zeros(n_t)
    r = np.empty((n_t, n_x))
    for i, t in enumerate(grids.t_nodes):
        H[i] = cache.homogenizer_at_t(t, X[i], K, inverse=inverse)
        lam[i] = cache.source_lambda_at_t(t, X[i], K, inverse=inverse)
        r[i] = float(model.rbar_star(t)) + np.asarray(cache.y_of_x(t, X[i]))
        if not homogeneous:
            B[i] = cache.coeff_B_at_t(t, X[i])
            t_q = t if i < N else t + 0.5 * (grids.t_nodes[N - 1] - t)
            Q[i] = cache.coeff_Q_at_t(t_q)
    slope_H = -K / lower if inverse else np.zeros(n_t)

    pays = contract.style == AMERICAN or contract.region == "whole"
    g = np.maximum(K - Z, 0.0) if pays else np.zeros(n_z)
    u = np.zeros((n_t, n_x, n_z))
    source = np.zeros((n_t, n_x, n_z))
    psi = np.zeros((n_t, n_z))
    zb = np.zeros((n_t, n_x))

    def level_source(i: int, ui: np.ndarray) -> np.ndarray:
        uz = np.gradient(ui, Z, axis=1)
        C = Q[i] * (r[i][:, None] - Z[None, :])
        return (lam[i] - B[i] * H[i])[:, None] + C * uz - B[i][:, None] * (ui - H[i][:, None])

    def restrict(s: int, a: float, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nodes = X[s]
        k = int(np.searchsorted(nodes, a, side="right"))
        if k == 0 or k >= nodes.size - 1:
            return nodes, values
        w = (a - nodes[k - 1]) / (nodes[k] - nodes[k - 1])
        edge = (1.0 - w) * np.asarray(values[k - 1]) + w * np.asarray(values[k])
        return np.concatenate([[a], nodes[k:]]), np.concatenate([edge[None, ...], values[k:]])

    def carry(tau: float, s: int, a: float, values: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        nodes, vals = restrict(s, a, values)
        out = kernels.weights(nu, tau, x, nodes, a) @ vals
        if a > 0.0:
            d = kernels.weights(nu, tau, [a], nodes, a, derivative=True)[0] @ vals
        else:
            d = np.zeros(vals.shape[1:])
        return out, d

    u[0] = g[None, :]
    zb[0] = K
    source[0] = level_source(0, u[0])
    traces: list[list[float]] = []
    for i in range(1, n_t):
        a_i = float(lower[i])
        x = X[i]
        tau_i = grids.tau_nodes[i]
        w = grids.time_weights(i - 1).copy()
        w[i - 1] += half

        hist = np.zeros((n_x, n_z))
        grad = np.zeros(n_z)
        for s in range(i):
            gap = tau_i - grids.tau_nodes[s]
            val, d = carry(gap, s, a_i, source[s], x)
            hist += w[s] * val
            grad += w[s] * d
            if lower[s] > a_i:
                hist -= 0.5 * w[s] * green_point(nu, gap, x, lower[s], a_i)[:, None] * psi[s][None, :]
                if a_i > 0.0:
                    grad -= 0.5 * w[s] * float(green_point(nu, gap, [a_i], lower[s], a_i, derivative=True)[0]) * psi[s]
        val, d = carry(tau_i, 0, a_i, -H[0], x)
        hist += val[:, None]
        grad += d
        if pays:
            val, d = carry(tau_i, 0, a_i, np.ones(n_x), x)
            hist += val[:, None] * g[None, :]
            grad += float(d) * g
        if a_i <= 0.0:
            grad[:] = 0.0

        base = hist + (H[i] + half * lam[i])[:, None]
        current = u[i - 1].copy()
        trace = []
        for _ in range(max_iter):
            rhs = base - half * B[i][:, None] * current
            nxt = np.empty_like(current)
            nxt[0] = K
            for j in range(1, n_x):
                # killing is lagged: its H part is known exactly
                nxt[j] = _march_outward(rhs[j], Z, half * Q[i], r[i, j])
            change = float(np.max(np.abs(nxt - current)))
            trace.append(change)
            current = nxt
            if change <= tol * K:
                break
        else:
            raise ConvergenceError(
                f"level {i} iteration stalled at change {trace[-1]:.3g}",
                module="oracles",
                operation="livesk_iterative",
            )
        traces.append(trace)

        if i < N:
            zb[i] = np.clip([_frontier(Z, current[j], K) for j in range(n_x)], 0.0, K)
        elif N - BOUNDARY_EXTRAPOLATION_LEVELS < 1:
            zb[N] = np.interp(X[N], X[N - 1], zb[N - 1])
        else:
            taus = grids.tau_nodes[N - BOUNDARY_EXTRAPOLATION_LEVELS:N]
            cols = np.stack([np.interp(X[N], X[k], zb[k]) for k in range(N - BOUNDARY_EXTRAPOLATION_LEVELS, N)])
            coeffs = np.polyfit(taus, cols, BOUNDARY_EXTRAPOLATION_LEVELS - 1)
            zb[N] = np.clip(np.polyval(coeffs, grids.tau_nodes[N]), 0.0, K)
        zb[i, 0] = 0.0
        if contract.style == AMERICAN:
            current = np.maximum(current, np.maximum(K - Z, 0.0)[None, :])
        u[i] = current
        psi[i] = grad
        source[i] = level_source(i, u[i])

    y_spot = float(contract.y_spot)
    ys = np.asarray(cache.y_of_x(grids.t_nodes[N], X[N]))
    zs = _spot_z(contract, model)
    columns = np.array([np.interp(zs, Z, u[N, j]) for j in range(n_x)])
    price = float(np.interp(y_spot, ys, columns))
    sweeps = [len(t) for t in traces]
    result = OracleResult(
        price=price,
        method=LIVESK,
        boundary=zb,
        metadata={
            "residual_traces": traces,
            "max_sweeps": max(sweeps) if sweeps else 0,
            "tol": tol,
            "homogeneous": homogeneous,
            "psi": psi + slope_H[:, None],
            "elapsed_seconds": time.perf_counter() - start,
        },
    )
    logger.info("iterative scheme K=%g: %.6g, max %d sweeps per level", K, price, result.metadata["max_sweeps"])
    return result


# ----------------------------
# Zero-volatility bond
# ----------------------------

def deterministic_zcb(model: ModelSpec, t: float, y: float, Q: float) -> float:
    """exp(-int_t^Q [rbar_star(s) + y exp(-int_t^s alpha)] ds)."""
    return float(np.exp(-model.mean_rate_integral(t, y, Q)))
