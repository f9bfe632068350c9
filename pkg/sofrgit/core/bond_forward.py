from __future__ import annotations

import logging
import time
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from sofrgit.core.contract import (
    DEFAULT_FORWARD_DQ,
    DEFAULT_THETA_CACHE_SIZE,
    ZCB_MAX_SWEEPS,
    ZCB_RANGE_TOL,
    ZCB_SWEEP_TOL,
)
from sofrgit.core.errors import ConfigError, ConvergenceError, DomainError, NumericalInstabilityError
from sofrgit.core.grids import SolverGrids, build_grids, stretched_nodes
from sofrgit.core.term_structure import KILLING_SHORT_RATE, ModelSpec
from sofrgit.core.transforms import TransformCache, build_transform
from sofrgit.core.weber_orr import KernelWeightCache, green_point

logger = logging.getLogger(__name__)

RECURRENT = "recurrent"
ITERATIVE = "iterative"
AUTO = "auto"

PriceFn = Callable[[float, float, float], float]


# ----------------------------
# Green history
# ----------------------------

def _cut(nodes: np.ndarray, values: np.ndarray, a: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and values restricted to x >= a (linear value at the cut)."""
    k = int(np.searchsorted(nodes, a, side="right"))
    if k == 0 or k >= nodes.size - 1:
        return nodes, values
    w = (a - nodes[k - 1]) / (nodes[k] - nodes[k - 1])
    edge = (1.0 - w) * values[k - 1] + w * values[k]
    return np.concatenate([[a], nodes[k:]]), np.concatenate([[edge], values[k:]])


@dataclass
class _GreenHistory:
    """
    Duhamel sums for U = u - H on x >= a_i with U = 0 at the boundary:

        U(tau_i) = int G(tau_i) U_0 + sum_s W_s [int G(gap) Lam_s - 1/2 G(gap; x, a_s) psi_s]
                   + dtau/2 Lam_i,

    W_s the Simpson weights over the committed levels plus the half step of the
    last interval; the flux term is kept while the boundary recedes (a_s > a_i).
    """
    kernels: KernelWeightCache
    nu: float
    tau_nodes: np.ndarray
    half_step: float

    def propagate(self, tau: float, nodes: np.ndarray, values: np.ndarray, a: float,
                  x: np.ndarray | None) -> tuple[np.ndarray | None, float]:
        nodes, values = _cut(nodes, values, a)
        out = None if x is None else self.kernels.weights(self.nu, tau, x, nodes, a) @ values
        slope = 0.0
        if a > 0.0:
            slope = float(self.kernels.weights(self.nu, tau, [a], nodes, a, derivative=True)[0] @ values)
        return out, slope

    def sums(self, i: int, X: np.ndarray, Lam: np.ndarray, bound: np.ndarray, psi: np.ndarray, a: float,
             x: np.ndarray | None, weights: np.ndarray) -> tuple[np.ndarray | None, float]:
        tau_i = self.tau_nodes[i]
        val = None if x is None else np.zeros_like(x)
        grad = 0.0
        for s in range(i):
            ws = weights[s]
            if ws == 0.0:
                continue
            gap = tau_i - self.tau_nodes[s]
            v, g = self.propagate(gap, X[s], Lam[s], a, x)
            grad += ws * g
            if x is not None:
                val += ws * v
            if bound[s] > a:
                if x is not None:
                    val -= 0.5 * ws * green_point(self.nu, gap, x, bound[s], a) * psi[s]
                if a > 0.0:
                    grad -= 0.5 * ws * float(green_point(self.nu, gap, [a], bound[s], a, derivative=True)[0]) * psi[s]
        return val, grad

    def weights(self, i: int, time_weights: Callable[[int], np.ndarray]) -> np.ndarray:
        w = time_weights(i - 1).copy()
        w[i - 1] += self.half_step
        return w


# ----------------------------
# Zero-coupon bond
# ----------------------------

@dataclass(frozen=True)
class ZcbSolution:
    """
    Bond price F(t, y, Q) on the solver grid. u[i, j] is the price at calendar
    time t_nodes[i] and factor y_nodes[i, j]; level 0 is the maturity Q.
    """
    Q: float
    t_nodes: np.ndarray
    tau_nodes: np.ndarray
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    u: np.ndarray
    psi_l: np.ndarray
    method: str

    def price(self, t: float, y: float) -> float:
        """F(t, y, Q), linear in y on each level and linear in t between levels."""
        if t > self.Q + 1e-12 or t < self.t_nodes[-1] - 1e-12:
            raise DomainError(f"t={t} outside [{self.t_nodes[-1]}, {self.Q}]")
        tn = self.t_nodes
        # t_nodes decrease with the level index
        k = int(np.clip(np.searchsorted(-tn, -t, side="right") - 1, 0, tn.size - 2))
        w = (tn[k] - t) / (tn[k] - tn[k + 1])
        lo = self._level_price(k, y)
        hi = self._level_price(k + 1, y)
        return float((1.0 - w) * lo + w * hi)

    def _level_price(self, i: int, y: float) -> float:
        ys = self.y_nodes[i]
        if y <= ys[0]:
            return 1.0
        return float(np.interp(y, ys, self.u[i]))


def _zcb_model(model: ModelSpec) -> ModelSpec:
    # a bond always discounts at the full short rate
    if model.killing == KILLING_SHORT_RATE and model.discounting_enabled:
        return model
    return replace(model, killing=KILLING_SHORT_RATE, discounting_enabled=True)


def solve_zcb(
    model: ModelSpec,
    Q: float,
    *,
    n_t: int,
    n_x: int,
    x_max: float,
    y_spot: float,
    method: str = AUTO,
    theta_cache_size: int = DEFAULT_THETA_CACHE_SIZE,
) -> ZcbSolution:
    """
    Bond price on [0, Q]. With U = u - 1 the maturity data vanish and the only
    source is the discounting -B u, so each level reads

        u_i = 1 + hist_i - (dtau / 2) B_i u_i.

    "recurrent" solves the level's own killing term in closed form; "iterative"
    sweeps it to a fixed point. The lower boundary may sit at the origin.
    """
    if method == AUTO:
        method = RECURRENT if model.beta == -1.0 else ITERATIVE
    if method not in (RECURRENT, ITERATIVE):
        raise ConfigError(f"unknown ZCB method: {method!r}")
    if not 0.0 < Q <= model.horizon + 1e-12:
        raise ConfigError(f"bond maturity Q={Q} must lie in (0, horizon]")

    start = time.perf_counter()
    zm = _zcb_model(model)
    cache = build_transform(zm, Q, 0.0)
    grids = build_grids(
        cache, n_t, n_x, 2,
        float(cache.x_of_y(0.0, x_max)),
        float(cache.x_of_y(0.0, y_spot)),
    )
    a = grids.x_lower
    X = grids.x_nodes
    n = grids.n_t
    half = 0.5 * grids.dtau
    history = _GreenHistory(KernelWeightCache(theta_cache_size), cache.nu, grids.tau_nodes, half)

    B = np.stack([np.asarray(cache.coeff_B_at_t(t, X[i])) for i, t in enumerate(grids.t_nodes)])
    u = np.ones((n, grids.n_x))
    psi = np.zeros(n)
    Lam = np.zeros((n, grids.n_x))
    Lam[0] = -B[0] * u[0]

    for i in range(1, n):
        w = history.weights(i, grids.time_weights)
        hist, grad = history.sums(i, X, Lam, a, psi, float(a[i]), X[i], w)
        kill = half * B[i]
        if method == RECURRENT:
            ui = (1.0 + hist) / (1.0 + kill)
        else:
            ui = _sweep_level(1.0 + hist, kill, i)
        ui[0] = 1.0
        u[i] = ui
        psi[i] = grad
        Lam[i] = -B[i] * u[i]
        logger.debug("zcb level %d/%d", i, n - 1)

    _check_bond_range(u)
    u = np.clip(u, 0.0, 1.0)
    y_nodes = np.stack([np.asarray(cache.y_of_x(t, X[i])) for i, t in enumerate(grids.t_nodes)])
    logger.info("zcb Q=%g method=%s grid=%dx%d: %.2fs", Q, method, n, grids.n_x, time.perf_counter() - start)
    return ZcbSolution(
        Q=float(Q),
        t_nodes=grids.t_nodes.copy(),
        tau_nodes=grids.tau_nodes.copy(),
        x_nodes=X.copy(),
        y_nodes=y_nodes,
        u=u,
        psi_l=psi,
        method=method,
    )


def _check_bond_range(u: np.ndarray) -> None:
    lo, hi = float(u.min()), float(u.max())
    if lo < -ZCB_RANGE_TOL or hi > 1.0 + ZCB_RANGE_TOL:
        raise NumericalInstabilityError(
            f"bond prices outside [0, 1] (min {lo:.6g}, max {hi:.6g}); refine the grid",
            module="bond_forward",
            operation="solve_zcb",
        )


def _sweep_level(rhs: np.ndarray, kill: np.ndarray, level: int) -> np.ndarray:
    u = rhs.copy()
    err = np.inf
    for sweep in range(1, ZCB_MAX_SWEEPS + 1):
        nxt = rhs - kill * u
        err = float(np.max(np.abs(nxt - u)))
        u = nxt
        if err <= ZCB_SWEEP_TOL:
            logger.debug("zcb level %d converged after %d sweeps", level, sweep)
            return u
    raise ConvergenceError(
        f"bond level {level} did not converge in {ZCB_MAX_SWEEPS} sweeps (last change {err:.3g})",
        module="bond_forward",
        operation="solve_zcb",
    )


# ----------------------------
# Forward rate
# ----------------------------

def forward_rate(price_fn: PriceFn, t: float, y: float, Q: float, *, dq: float = DEFAULT_FORWARD_DQ,
                 horizon: float | None = None) -> float:
    """
    f(t, Q) = -d/dQ log F(t, y, Q) by a second-order difference: central where
    Q + dq stays inside the horizon, one-sided backward otherwise.
    """
    if dq <= 0.0:
        raise ConfigError("dq must be > 0")
    if horizon is not None and Q + dq > horizon + 1e-12:
        qs = (Q, Q - dq, Q - 2.0 * dq)
        coeffs = (3.0, -4.0, 1.0)
    else:
        qs = (Q + dq, Q - dq)
        coeffs = (1.0, -1.0)
    if min(qs) <= t:
        raise DomainError(f"forward stencil reaches t={t}; use a smaller dq or a later Q")
    logs = []
    for q in qs:
        p = float(price_fn(t, y, q))
        if not p > 0.0:
            raise NumericalInstabilityError(
                f"non-positive bond price {p:g} at Q={q:g}", module="bond_forward", operation="forward_rate"
            )
        logs.append(np.log(p))
    return float(-sum(c * lp for c, lp in zip(coeffs, logs)) / (2.0 * dq))


class ForwardCurveMap:
    """
    f(t, y, Q) for one Q from bond solutions on the stencil maturities around Q.
    Each stencil maturity is solved once.
    """

    def __init__(self, model: ModelSpec, Q: float, *, n_t: int, n_x: int, x_max: float, y_spot: float,
                 dq: float = DEFAULT_FORWARD_DQ, method: str = AUTO,
                 theta_cache_size: int = DEFAULT_THETA_CACHE_SIZE) -> None:
        self.model = model
        self.Q = float(Q)
        self.dq = float(dq)
        if self.Q + self.dq > model.horizon + 1e-12:
            mats = (self.Q, self.Q - self.dq, self.Q - 2.0 * self.dq)
        else:
            mats = (self.Q + self.dq, self.Q - self.dq)
        self.solutions = {
            q: solve_zcb(model, q, n_t=n_t, n_x=n_x, x_max=x_max, y_spot=y_spot, method=method,
                         theta_cache_size=theta_cache_size)
            for q in mats
        }

    def price(self, t: float, y: float, q: float) -> float:
        for key, sol in self.solutions.items():
            if abs(key - q) < 1e-12:
                return sol.price(t, y)
        raise DomainError(f"no bond solution at Q={q}")

    def __call__(self, t: float, y: float) -> float:
        return forward_rate(self.price, t, y, self.Q, dq=self.dq, horizon=self.model.horizon)


def zcb_forward_surface(forward: Callable[[float, float], float], t_nodes: np.ndarray,
                        y_nodes: np.ndarray) -> np.ndarray:
    """f on a (level, node) lattice; y_nodes has one row per level."""
    out = np.empty(y_nodes.shape)
    for i, t in enumerate(t_nodes):
        out[i] = [forward(float(t), float(y)) for y in y_nodes[i]]
    return out


# ----------------------------
# American put on the forward
# ----------------------------

@dataclass(frozen=True)
class ForwardPutContract:
    K: float
    T_f: float
    Q: float
    y_spot: float
    style: str = "american"

    def __post_init__(self) -> None:
        if self.K <= 0.0:
            raise ConfigError("strike K must be > 0")
        if not 0.0 < self.T_f <= self.Q:
            raise ConfigError("need 0 < T_f <= Q")
        if self.style not in ("american", "european"):
            raise ConfigError(f"unknown exercise style: {self.style!r}")


@dataclass(frozen=True)
class ForwardPutSolution:
    t_nodes: np.ndarray
    x_b: np.ndarray
    y_b: np.ndarray
    f_plus: np.ndarray
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    u: np.ndarray
    spot_price: float
    worthless: bool
    style: str

    def price_at(self, y: float, level: int = -1) -> float:
        if self.worthless:
            return 0.0
        ys = self.y_nodes[level]
        if y <= ys[0]:
            return float(self.u[level, 0])
        return float(np.interp(y, ys, self.u[level]))


class _ForwardLevels:
    """f(t_i, x) per level as a monotone cubic in x with its x-derivative."""

    def __init__(self, cache: TransformCache, grids: SolverGrids, forward: Callable[[float, float], float]) -> None:
        self.fx: list[PchipInterpolator] = []
        self.dfx: list[PchipInterpolator] = []
        self.lo = grids.x_lower.copy()
        self.hi = grids.x_nodes[:, -1].copy()
        for i, t in enumerate(grids.t_nodes):
            xs = np.linspace(self.lo[i], self.hi[i], max(grids.n_x, 64))
            ys = np.asarray(cache.y_of_x(t, xs))
            ys[0] = max(ys[0], 1e-300)
            fv = np.array([forward(float(t), float(y)) for y in ys])
            p = PchipInterpolator(xs, fv, extrapolate=True)
            self.fx.append(p)
            self.dfx.append(p.derivative())

    def f(self, i: int, x):
        return self.fx[i](x)

    def f_x(self, i: int, x):
        return self.dfx[i](x)


def solve_forward_put(
    model: ModelSpec,
    contract: ForwardPutContract,
    *,
    n_t: int,
    n_x: int,
    x_max: float,
    forward: Callable[[float, float], float] | None = None,
    dq: float = DEFAULT_FORWARD_DQ,
    theta_cache_size: int = DEFAULT_THETA_CACHE_SIZE,
) -> ForwardPutSolution:
    """
    Put on the forward f(T_f, y, Q) valued at t = 0. American: the boundary x_B(tau)
    follows from smooth pasting against the payoff K - f; European: the boundary is
    pinned at x_l and the payoff enters as maturity data on the whole region.
    """
    start = time.perf_counter()
    if forward is None:
        forward = ForwardCurveMap(model, contract.Q, n_t=n_t, n_x=n_x, x_max=x_max, y_spot=contract.y_spot,
                                  dq=dq, theta_cache_size=theta_cache_size)
    cache = build_transform(model, contract.T_f, 0.0)
    grids = build_grids(
        cache, n_t, n_x, 2,
        float(cache.x_of_y(0.0, x_max)),
        float(cache.x_of_y(0.0, contract.y_spot)),
    )
    levels = _ForwardLevels(cache, grids, forward)
    K = float(contract.K)
    n = grids.n_t

    f_low = np.array([float(levels.f(i, grids.x_lower[i])) for i in range(n)])
    if np.all(f_low >= K):
        logger.info("forward put K=%g is worthless: K below every forward on the grid", K)
        zeros = np.zeros((n, grids.n_x))
        y_nodes = np.stack([np.asarray(cache.y_of_x(t, grids.x_nodes[i])) for i, t in enumerate(grids.t_nodes)])
        return ForwardPutSolution(
            t_nodes=grids.t_nodes.copy(), x_b=grids.x_lower.copy(), y_b=np.asarray(cache.y_lower_at(grids.t_nodes)),
            f_plus=np.zeros(n), x_nodes=grids.x_nodes.copy(), y_nodes=y_nodes, u=zeros,
            spot_price=0.0, worthless=True, style=contract.style,
        )

    solver = _ForwardPutRecurrence(cache, grids, levels, K, contract.style == "american",
                                   KernelWeightCache(theta_cache_size))
    for i in range(1, n):
        solver.advance(i)

    y_nodes = np.stack([np.asarray(cache.y_of_x(t, solver.X[i])) for i, t in enumerate(grids.t_nodes)])
    y_b = np.array([float(cache.y_of_x(t, solver.x_b[i])) for i, t in enumerate(grids.t_nodes)])
    sol = ForwardPutSolution(
        t_nodes=grids.t_nodes.copy(),
        x_b=solver.x_b.copy(),
        y_b=y_b,
        f_plus=solver.f_plus.copy(),
        x_nodes=solver.X.copy(),
        y_nodes=y_nodes,
        u=solver.u.copy(),
        spot_price=0.0,
        worthless=False,
        style=contract.style,
    )
    y0 = contract.y_spot
    if solver.american and y0 <= y_b[-1]:
        spot = max(K - float(forward(0.0, y0)), 0.0)
    else:
        spot = sol.price_at(y0)
    sol = replace(sol, spot_price=spot)
    logger.info("forward put K=%g style=%s: %.2fs", K, contract.style, time.perf_counter() - start)
    return sol


class _ForwardPutRecurrence:
    """
    Level recurrence for the put on the forward. The boundary value f+ = K - f(x_B)
    is lifted by the level constant H = f+, so U = u - H vanishes on x_B and the
    source carries -dH/dtau and the discounting.
    """

    def __init__(self, cache: TransformCache, grids: SolverGrids, levels: _ForwardLevels, K: float,
                 american: bool, kernels: KernelWeightCache) -> None:
        self.cache = cache
        self.grids = grids
        self.levels = levels
        self.K = K
        self.american = american
        self.history = _GreenHistory(kernels, cache.nu, grids.tau_nodes, 0.5 * grids.dtau)
        n, nx = grids.n_t, grids.n_x
        self.X = np.zeros((n, nx))
        self.u = np.zeros((n, nx))
        self.Lam = np.zeros((n, nx))
        self.x_b = np.zeros(n)
        self.f_plus = np.zeros(n)
        self.psi = np.zeros(n)

        self.x_b[0] = self._anchor() if american else grids.x_lower[0]
        self.f_plus[0] = max(self.K - float(levels.f(0, self.x_b[0])), 0.0)
        self.X[0] = self._nodes(0)
        self.u[0] = np.maximum(self.K - levels.f(0, self.X[0]), 0.0)
        self.U0 = self.u[0] - self.f_plus[0]
        self.Lam[0] = -np.asarray(cache.coeff_B_at_t(self._t(0), self.X[0])) * self.u[0]

    def _anchor(self) -> float:
        lo = self.grids.x_lower[0]
        hi = self.grids.x_nodes[0, -1]

        def g(x: float) -> float:
            return float(self.levels.f(0, x)) - self.K

        if g(hi) < 0.0:
            raise ConfigError("strike above every forward on the grid at expiry; increase x_max")
        if g(lo) >= 0.0:
            return lo
        return float(brentq(g, lo, hi, xtol=1e-12))

    def _nodes(self, i: int) -> np.ndarray:
        lo = self.x_b[i]
        hi = self.grids.x_nodes[i, -1]
        spot = float(np.clip(self.grids.x_nodes[i, self.grids.n_x // 2], lo, hi))
        return stretched_nodes(lo, hi, 0.5 * (lo + hi) if spot <= lo else spot, self.grids.n_x)

    def _t(self, i: int) -> float:
        return float(self.grids.t_nodes[i])

    def _level(self, i: int, c: float, x: np.ndarray | None) -> tuple[np.ndarray | None, float]:
        """Value of U over x (or None) and its slope at the candidate boundary c."""
        w = self.history.weights(i, self.grids.time_weights)
        val, grad = self.history.sums(i, self.X, self.Lam, self.x_b, self.psi, c, x, w)
        tv, tg = self.history.propagate(self.grids.tau_nodes[i], self.X[0], self.U0, c, x)
        if x is not None:
            val = val + tv
        return val, grad + tg

    def _boundary(self, i: int) -> float:
        lo = float(self.grids.x_lower[i])
        if not self.american:
            return lo
        hi_cap = float(self.grids.x_nodes[i, -1])

        def resid(c: float) -> float:
            # smooth pasting: du/dx = d(K - f)/dx at the boundary
            return self._level(i, c, None)[1] + float(self.levels.f_x(i, c))

        # payoff is positive only below the strike crossing
        f_lo = float(self.levels.f(i, lo))
        if f_lo >= self.K:
            return lo
        f_hi = float(self.levels.f(i, hi_cap))
        hi = hi_cap if f_hi < self.K else float(brentq(lambda x: float(self.levels.f(i, x)) - self.K, lo, hi_cap))
        span = hi - lo
        lo_in = lo + 1e-9 * span
        hi_in = hi - 1e-9 * span
        r_lo, r_hi = resid(lo_in), resid(hi_in)
        if r_lo * r_hi > 0.0:
            logger.debug("forward put level %d: no smooth-pasting root, boundary at x_l", i)
            return lo
        return float(brentq(resid, lo_in, hi_in, xtol=1e-10 * max(hi, 1e-12)))

    def advance(self, i: int) -> None:
        c = self._boundary(i)
        self.x_b[i] = c
        self.f_plus[i] = max(self.K - float(self.levels.f(i, c)), 0.0)
        x = self._nodes(i)
        self.X[i] = x
        val, grad = self._level(i, c, x)
        half = 0.5 * self.grids.dtau
        B = np.asarray(self.cache.coeff_B_at_t(self._t(i), x))
        H = self.f_plus[i]
        lam = -(self.f_plus[i] - self.f_plus[i - 1]) / self.grids.dtau
        den = 1.0 + half * B
        if np.any(den <= 0.0):
            raise NumericalInstabilityError(
                f"non-positive denominator at level {i}", module="bond_forward", operation="solve_forward_put"
            )
        ui = (H + val + half * lam) / den
        ui[0] = self.f_plus[i]
        if self.american:
            ui = np.maximum(ui, np.maximum(self.K - self.levels.f(i, x), 0.0))
        ui = np.maximum(ui, 0.0)
        self.u[i] = ui
        self.psi[i] = grad
        self.Lam[i] = lam - B * ui
        logger.debug("forward put level %d/%d: x_B=%.6g f+=%.6g", i, self.grids.n_t - 1, c, self.f_plus[i])
