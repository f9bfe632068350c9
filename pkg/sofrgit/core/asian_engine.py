from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from sofrgit.core.contract import (
    BOUNDARY_EXTRAPOLATION_LEVELS,
    DEFAULT_THETA_CACHE_SIZE,
    DEFAULT_Z_TOP_MULTIPLE,
    DELTA_Z_DENOMINATOR_FLOOR,
    ODE_SMALL_A,
)
from sofrgit.core.errors import ConfigError, ContractError, NumericalInstabilityError
from sofrgit.core.grids import SolverGrids, build_grids, reference_z_nodes, z_nodes
from sofrgit.core.term_structure import ModelSpec
from sofrgit.core.transforms import TransformCache, build_transform
from sofrgit.core.weber_orr import KernelWeightCache, green_point

logger = logging.getLogger(__name__)

AMERICAN = "american"
EUROPEAN = "european"
CONTINUATION = "continuation"
WHOLE = "whole"


# ----------------------------
# Inputs / outputs
# ----------------------------

@dataclass(frozen=True)
class AsianContract:
    """Fixed-strike arithmetic Asian put on the short rate averaged over [t0, T]."""
    K: float
    T: float
    t0: float
    y_spot: float
    z_spot: float | None = None
    style: str = AMERICAN
    region: str = CONTINUATION

    def __post_init__(self) -> None:
        if self.K <= 0.0:
            raise ConfigError("strike K must be > 0")
        if not self.t0 < self.T:
            raise ConfigError("t0 must be < T")
        if self.style not in (AMERICAN, EUROPEAN):
            raise ConfigError(f"unknown exercise style: {self.style!r}")
        if self.region not in (CONTINUATION, WHOLE):
            raise ConfigError(f"unknown pricing region: {self.region!r}")
        if self.y_spot <= 0.0:
            raise ConfigError("y_spot must be > 0")

    @property
    def pays_at_maturity(self) -> bool:
        """Whether the lattice carries the payoff (K - z)^+ at maturity."""
        return self.style == AMERICAN or self.region == WHOLE


@dataclass(frozen=True)
class GridSpec:
    n_t: int
    n_x: int
    n_z: int
    x_max: float  # rate units
    z_top: float | None = None
    z_top_multiple: float = DEFAULT_Z_TOP_MULTIPLE
    theta_cache_size: int = DEFAULT_THETA_CACHE_SIZE


@dataclass(frozen=True)
class BoundarySolution:
    t_nodes: np.ndarray
    tau_nodes: np.ndarray
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    z_b: np.ndarray
    psi_b: np.ndarray
    extrapolated_t0: bool


@dataclass(frozen=True)
class GradientSurface:
    z_nodes: np.ndarray
    psi: np.ndarray  # (n_t, n_ref)


@dataclass(frozen=True)
class PriceCube:
    """
    Prices on per-node columns z in [z_B, z_top] (`z`, `u_bar`, `u_bar_z`) and on
    the shared reference lattice (`z_ref`, `u_ref`) the recurrence runs on.
    """
    z: np.ndarray  # (n_t, n_x, n_z)
    u_bar: np.ndarray
    u_bar_z: np.ndarray
    exercise_style: str
    K: float
    z_b: np.ndarray
    z_ref: np.ndarray
    u_ref: np.ndarray  # (n_t, n_x, n_ref)

    @property
    def price(self) -> np.ndarray:
        return self.u_bar + (self.K - self.z_b)[..., None]

    @property
    def delta_z(self) -> np.ndarray:
        return self.u_bar_z


@dataclass(frozen=True)
class AsianSolution:
    contract: AsianContract
    boundary: BoundarySolution
    gradient: GradientSurface | None
    prices: PriceCube | None
    spot_price: float | None
    z_top: float
    elapsed_seconds: float

    def price_at(self, y: float, z: float, level: int = -1) -> float:
        """Option value at calendar level `level` for factor y and running average z."""
        if self.prices is None:
            raise ContractError("solution was computed without prices")
        return _price_lookup(self, level, y, z)


@dataclass
class _LevelHistory:
    """History of one level on its x nodes and the reference z lattice."""
    A: np.ndarray  # (n_x, n_ref)
    psi_U: np.ndarray  # (n_ref,)


# ----------------------------
# Recurrent state
# ----------------------------

@dataclass
class RecurrentState:
    """
    Level-by-level Duhamel recurrence for U = u - H on x >= x_l(tau), with H the
    homogenizer carrying the boundary value K. Level i needs only the committed
    sources of levels 0..i-1; the level's own source enters through the
    trapezoid weight a = dtau / 2 and turns the level equation into a linear ODE
    in z per x node.
    """
    model: ModelSpec
    contract: AsianContract
    cache: TransformCache
    grids: SolverGrids
    z_top: float
    compute_prices: bool = True
    homogeneous: bool = False
    kernels: KernelWeightCache = field(default_factory=KernelWeightCache)

    def __post_init__(self) -> None:
        g = self.grids
        n_t, n_x = g.n_t, g.n_x
        self.N = n_t - 1
        self.K = float(self.contract.K)
        self.nu = float(self.cache.nu)
        self.X = g.x_nodes
        self.a = g.x_lower.copy()
        self.half_step = 0.5 * g.dtau
        self.inverse = self.cache.inverse_homogenizer()
        self.Zref = reference_z_nodes(self.z_top, g.n_z)
        self.american = self.contract.style == AMERICAN

        # Q is singular at t0: the last level reads it half a step earlier
        self.t_coef = g.t_nodes.copy()
        self.t_coef[self.N] = g.t_nodes[self.N] + 0.5 * (g.t_nodes[self.N - 1] - g.t_nodes[self.N])
        self.B = np.zeros((n_t, n_x))
        self.Q = np.zeros(n_t)
        self.r = np.empty((n_t, n_x))
        self.H = np.empty((n_t, n_x))
        self.lam = np.empty((n_t, n_x))
        self.lam_inh = np.empty((n_t, n_x))
        for i in range(n_t):
            t = g.t_nodes[i]
            x = self.X[i]
            self.r[i] = float(self.model.rbar_star(t)) + np.asarray(self.cache.y_of_x(t, x))
            self.H[i] = self.cache.homogenizer_at_t(t, x, self.K, inverse=self.inverse)
            self.lam[i] = self.cache.source_lambda_at_t(t, x, self.K, inverse=self.inverse)
            if self.homogeneous:
                self.lam_inh[i] = self.lam[i]
                continue
            self.B[i] = self.cache.coeff_B_at_t(t, x)
            self.Q[i] = self.cache.coeff_Q_at_t(self.t_coef[i])
            self.lam_inh[i] = self.cache.source_lambda_inh_at_t(t, x, self.K, inverse=self.inverse)
        # x-slope of H at the boundary: converts psi_U into the price gradient
        with np.errstate(divide="ignore"):
            self.dH = np.where(self.a > 0.0, -self.K / np.where(self.a > 0.0, self.a, 1.0), 0.0)
        if not self.inverse:
            self.dH[:] = 0.0

        n_ref = self.Zref.size
        if self.contract.pays_at_maturity:
            self.payoff = np.maximum(self.K - self.Zref, 0.0)
            self.payoff_z = np.where(self.Zref < self.K, -1.0, 0.0)
        else:
            self.payoff = np.zeros(n_ref)
            self.payoff_z = np.zeros(n_ref)

        self.u = np.zeros((n_t, n_x, n_ref))
        self.u_z = np.zeros((n_t, n_x, n_ref))
        self.U = np.zeros((n_t, n_x, n_ref))
        self.Lam = np.zeros((n_t, n_x, n_ref))
        self.psi_U = np.zeros((n_t, n_ref))
        self.z_b = np.zeros((n_t, n_x))
        self.psi_b = np.zeros((n_t, n_x))
        self.extrapolated_t0 = False

        self.u[0] = self.payoff[None, :]
        self.u_z[0] = self.payoff_z[None, :]
        self.z_b[0] = self.K
        self.psi_b[0] = self.dH[0]
        self._commit_sources(0)
        if self.inverse:
            logger.info("initial gradient -K/x_l(0) used for every z node")

    @property
    def psi(self) -> np.ndarray:
        """Price gradient at the lower boundary, (n_t, n_ref)."""
        return self.psi_U + self.dH[:, None]

    # ----------------------------
    # Sources
    # ----------------------------

    def _commit_sources(self, s: int) -> None:
        self.U[s] = self.u[s] - self.H[s][:, None]
        C = self.Q[s] * (self.r[s][:, None] - self.Zref[None, :])
        self.Lam[s] = self.lam_inh[s][:, None] + C * self.u_z[s] - self.B[s][:, None] * self.U[s]

    # ----------------------------
    # Terminal contributions
    # ----------------------------

    def _restricted(self, s: int, a_i: float, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and values of level s cut at x_l(tau_i); the Green function vanishes there."""
        nodes = self.X[s]
        k = int(np.searchsorted(nodes, a_i, side="right"))
        if k == 0 or k >= nodes.size - 1:
            return nodes, values
        w = (a_i - nodes[k - 1]) / (nodes[k] - nodes[k - 1])
        edge = (1.0 - w) * values[k - 1] + w * values[k]
        return np.concatenate([[a_i], nodes[k:]]), np.concatenate([np.asarray(edge)[None, ...], values[k:]])

    def _propagate(self, tau: float, s: int, a_i: float, values: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Green propagation of level-s data onto x and its x-slope at a_i (zero when a_i = 0)."""
        nodes, vals = self._restricted(s, a_i, values)
        out = self.kernels.weights(self.nu, tau, x, nodes, a_i) @ vals
        if a_i > 0.0:
            slope = self.kernels.weights(self.nu, tau, [a_i], nodes, a_i, derivative=True)[0] @ vals
        else:
            slope = np.zeros(vals.shape[1:])
        return out, slope

    def _terminal(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Propagated maturity data -H(0, xi) on level i: values (n_x,) and boundary slope."""
        value, slope = self._propagate(self.grids.tau_nodes[i], 0, self.a[i], self.H[0], self.X[i])
        return -value, -np.asarray(slope)

    def europeanize_whole_region(self, i: int) -> tuple[np.ndarray, np.ndarray] | None:
        """
        Terminal terms carried by the payoff (K - z)^+ placed on every x node at
        maturity. Active for the whole-region European put and for American style,
        whose exercise region lies on the same lattice.
        Returns (price term (n_x, n_ref), gradient (n_ref,)).
        """
        if not self.contract.pays_at_maturity:
            return None
        ones = np.ones(self.X[0].size)
        mass, dmass = self._propagate(self.grids.tau_nodes[i], 0, self.a[i], ones, self.X[i])
        return mass[:, None] * self.payoff[None, :], float(dmass) * self.payoff

    # ----------------------------
    # History
    # ----------------------------

    def _history(self, i: int) -> _LevelHistory:
        if i < 1 or i > self.N:
            raise ContractError(f"level {i} outside 1..{self.N}")
        m = i - 1
        g = self.grids
        tau_i = g.tau_nodes[i]
        a_i = self.a[i]
        x = self.X[i]
        w = g.time_weights(m).copy()
        w[m] += self.half_step

        n_ref = self.Zref.size
        A = np.zeros((x.size, n_ref))
        grad = np.zeros(n_ref)
        for s in range(m + 1):
            ws = w[s]
            if ws == 0.0:
                continue
            gap = tau_i - g.tau_nodes[s]
            a_s = self.a[s]
            value, slope = self._propagate(gap, s, a_i, self.Lam[s], x)
            A += ws * value
            grad += ws * slope
            if a_s > a_i:
                # receding boundary: flux of U through x_l(s)
                gb = green_point(self.nu, gap, x, a_s, a_i)
                A -= 0.5 * ws * gb[:, None] * self.psi_U[s][None, :]
                if a_i > 0.0:
                    gbd = float(green_point(self.nu, gap, [a_i], a_s, a_i, derivative=True)[0])
                    grad -= 0.5 * ws * gbd * self.psi_U[s]

        value, slope = self._terminal(i)
        A += value[:, None]
        grad += slope
        extra = self.europeanize_whole_region(i)
        if extra is not None:
            A += extra[0]
            grad += extra[1]
        if a_i <= 0.0:
            grad[:] = 0.0
        return _LevelHistory(A=A, psi_U=grad)

    # ----------------------------
    # Price
    # ----------------------------

    def step_price(self, i: int, hist: _LevelHistory) -> tuple[np.ndarray, np.ndarray]:
        """
        Continuation values on level i: per x node, (1 + aB) u - aQ (r - z) u_z = R
        with R = A + H + a lambda, solved regular at z = r. The boundary node
        carries the boundary value K.
        """
        a = self.half_step
        R = hist.A + (self.H[i] + a * self.lam[i])[:, None]
        n_x = self.X[i].size
        u = np.empty_like(R)
        u_z = np.zeros_like(R)
        A_ode = a * self.Q[i]
        for j in range(n_x):
            if j == 0:
                u[j] = self.K
                continue
            kappa = 1.0 + a * self.B[i, j]
            u[j], u_z[j] = solve_z_ode(R[j], self.Zref, kappa, A_ode, self.r[i, j])
        if np.any(~np.isfinite(u)):
            raise NumericalInstabilityError(
                f"non-finite prices at level {i}", module="asian_engine", operation="step_price"
            )
        return u, u_z

    def american_project(self, i: int, u: np.ndarray, u_z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """u <- max(u, (K - z)^+); the slope is -1 wherever exercise wins."""
        if not self.american:
            return u, u_z
        intrinsic = np.broadcast_to(self.payoff[None, :], u.shape)
        exercised = u < intrinsic
        return np.where(exercised, intrinsic, u), np.where(exercised, -1.0, u_z)

    # ----------------------------
    # Boundary
    # ----------------------------

    def step_boundary(self, i: int, u_cont: np.ndarray) -> np.ndarray:
        """
        z_B(tau_i, x): the largest z in [0, K] where the continuation value does not
        exceed K - z, located by linear interpolation on the reference lattice.
        """
        if i >= self.N:
            raise ContractError("the t0 level comes from extrapolate_boundary_at_t0")
        below = self.Zref < self.K
        zz = np.append(self.Zref[below], self.K)
        zb = np.zeros(u_cont.shape[0])
        for j in range(1, u_cont.shape[0]):
            d = np.append(u_cont[j][below], np.interp(self.K, self.Zref, u_cont[j])) - (self.K - zz)
            zb[j] = exercise_frontier(zz, d)
        zb = np.clip(zb, 0.0, self.K)
        zb[0] = 0.0
        return zb

    def step_boundary_gradient(self, i: int) -> np.ndarray:
        """Psi(tau_i, x_l, z_B(tau_i, x)) read off the gradient column."""
        return np.interp(self.z_b[i], self.Zref, self.psi[i])

    def extrapolate_boundary_at_t0(self) -> np.ndarray:
        N = self.N
        levels = list(range(max(1, N - BOUNDARY_EXTRAPOLATION_LEVELS), N))
        x_last = self.X[N]
        if len(levels) < BOUNDARY_EXTRAPOLATION_LEVELS:
            logger.warning("fewer than %d levels before t0; copying the last boundary level", BOUNDARY_EXTRAPOLATION_LEVELS)
            zb = np.interp(x_last, self.X[N - 1], self.z_b[N - 1])
        else:
            taus = self.grids.tau_nodes[levels]
            cols = np.stack([np.interp(x_last, self.X[k], self.z_b[k]) for k in levels])
            target = self.grids.tau_nodes[N]
            zb = np.zeros_like(x_last)
            for k, tk in enumerate(taus):
                others = np.delete(taus, k)
                zb += cols[k] * np.prod((target - others) / (tk - others))
            self.extrapolated_t0 = True
        zb = np.clip(zb, 0.0, self.K)
        zb[0] = 0.0
        return zb

    # ----------------------------
    # Driver
    # ----------------------------

    def advance(self, i: int) -> None:
        hist = self._history(i)
        u_cont, u_z = self.step_price(i, hist)
        zb = self.step_boundary(i, u_cont) if i < self.N else self.extrapolate_boundary_at_t0()
        u, u_z = self.american_project(i, u_cont, u_z)
        self.u[i] = u
        self.u_z[i] = u_z
        self.psi_U[i] = hist.psi_U
        self.z_b[i] = zb
        self.psi_b[i] = self.step_boundary_gradient(i)
        self._commit_sources(i)
        logger.debug("level %d/%d done (t=%.6g)", i, self.N, self.grids.t_nodes[i])


def exercise_frontier(z: np.ndarray, d: np.ndarray) -> float:
    """Largest z with d(z) <= 0 on increasing nodes, d linear in between; z[0] if d > 0 throughout."""
    hit = np.flatnonzero(d <= 0.0)
    if hit.size == 0:
        return float(z[0])
    k = int(hit[-1])
    if k == z.size - 1:
        return float(z[-1])
    lo, hi = d[k], d[k + 1]
    return float(z[k] + (z[k + 1] - z[k]) * (-lo) / (hi - lo))


def _safe_gradient(u: np.ndarray, z: np.ndarray) -> np.ndarray:
    """np.gradient over the distinct nodes of z, mapped back onto repeated ones."""
    zu, inv = np.unique(z, return_inverse=True)
    if zu.size < 2:
        return np.zeros_like(u)
    uu = np.bincount(inv, weights=u) / np.bincount(inv)
    return np.gradient(uu, zu)[inv]


def _side_solution(m: np.ndarray, R: np.ndarray, R_r: float, p: float) -> np.ndarray:
    """
    m^(-p) int_0^m s^(p-1) R(s) ds at the increasing distances m > 0, R linear
    between (0, R_r) and the nodes. Zero-length segments contribute nothing.
    """
    mm = np.concatenate([[0.0], m])
    RR = np.concatenate([[R_r], R])
    width = np.diff(mm)
    with np.errstate(divide="ignore", invalid="ignore"):
        gam = np.where(width > 0.0, np.diff(RR) / np.where(width > 0.0, width, 1.0), 0.0)
    alp = RR[:-1] - gam * mm[:-1]

    target = m[:, None]
    hi = mm[None, 1:] / target
    lo = mm[None, :-1] / target
    mask = mm[None, 1:] <= target
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        log_hi = np.log(hi)
        log_lo = np.log(lo)
        d0 = np.where(lo > 0.0, np.exp(p * log_lo) * np.expm1(p * (log_hi - log_lo)), np.exp(p * log_hi))
        d1 = np.where(lo > 0.0, np.exp((p + 1.0) * log_lo) * np.expm1((p + 1.0) * (log_hi - log_lo)),
                      np.exp((p + 1.0) * log_hi))
    d0 = np.where(mask & (width[None, :] > 0.0), d0, 0.0)
    d1 = np.where(mask & (width[None, :] > 0.0), d1, 0.0)
    return (d0 @ alp) / p + target[:, 0] * (d1 @ gam) / (p + 1.0)


def solve_z_ode(R: np.ndarray, z: np.ndarray, kappa: float, A: float, r: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Solve kappa u - A (r - z) u_z = R(z) on the nodes z for the solution that is
    regular at the characteristic point z = r. R is taken piecewise linear in z
    (held constant outside the nodes) and integrated exactly against the factor
    |z - r|^(p - 1), p = kappa / A, outwards from r on either side.
    Returns (u, u_z); u_z comes from the equation itself away from z = r.
    """
    R = np.asarray(R, dtype=float)
    z = np.asarray(z, dtype=float)
    if kappa <= 0.0:
        raise NumericalInstabilityError(
            "1 + aB <= 0 in the price step; refine the time grid", module="asian_engine", operation="step_price"
        )
    if A < ODE_SMALL_A:
        u = R / kappa
        return u, _safe_gradient(u, z)

    p = kappa / A
    R_r = float(np.interp(r, z, R))
    u = np.empty_like(R)
    dist = z - r
    at = np.abs(dist) <= 1e-14 * max(1.0, abs(r))
    u[at] = R_r / kappa
    for side in (dist > 0.0, dist < 0.0):
        idx = np.flatnonzero(side & ~at)
        if idx.size == 0:
            continue
        order = idx[np.argsort(np.abs(dist[idx]), kind="stable")]
        m = np.abs(dist[order])
        u[order] = _side_solution(m, R[order], R_r, p) / A

    u_z = _safe_gradient(u, z)
    denom = A * (r - z)
    spacing = np.gradient(z) if z.size > 1 else np.ones_like(z)
    use_ode = (np.abs(denom) > DELTA_Z_DENOMINATOR_FLOOR) & (np.abs(r - z) > np.abs(spacing))
    with np.errstate(divide="ignore", invalid="ignore"):
        u_z = np.where(use_ode, (kappa * u - R) / np.where(use_ode, denom, 1.0), u_z)
    return u, u_z


# ----------------------------
# Public entry points
# ----------------------------

def resolve_z_top(contract: AsianContract, model: ModelSpec, grid: GridSpec) -> float:
    if grid.z_top is not None:
        if grid.z_top <= contract.K:
            raise ConfigError("z_top must exceed the strike")
        return float(grid.z_top)
    return float(grid.z_top_multiple * max(contract.K, spot_z(contract, model)))


def spot_z(contract: AsianContract, model: ModelSpec) -> float:
    if contract.z_spot is not None:
        return float(contract.z_spot)
    return float(model.rbar_star(contract.t0)) + float(contract.y_spot)


def prepare(model: ModelSpec, contract: AsianContract, grid: GridSpec) -> tuple[TransformCache, SolverGrids]:
    cache = build_transform(model, contract.T, contract.t0)
    x_max = float(cache.x_of_y(contract.t0, grid.x_max))
    spot_x = float(cache.x_of_y(contract.t0, contract.y_spot))
    grids = build_grids(cache, grid.n_t, grid.n_x, grid.n_z, x_max, spot_x)
    return cache, grids


def solve(model: ModelSpec, contract: AsianContract, grid: GridSpec, *, compute_prices: bool = True,
          homogeneous: bool = False) -> AsianSolution:
    """
    Boundary, gradients and (optionally) prices of the Asian put by the recurrent
    scheme. `homogeneous` drops the killing and averaging couplings (B = C = 0).
    """
    start = time.perf_counter()
    cache, grids = prepare(model, contract, grid)
    z_top = resolve_z_top(contract, model, grid)
    state = RecurrentState(
        model=model,
        contract=contract,
        cache=cache,
        grids=grids,
        z_top=z_top,
        compute_prices=compute_prices,
        homogeneous=homogeneous,
        kernels=KernelWeightCache(grid.theta_cache_size),
    )
    for i in range(1, grids.n_t):
        state.advance(i)
    solution = collect_solution(state, start)
    logger.info(
        "asian solve K=%g style=%s region=%s grid=%dx%dx%d: %.2fs",
        contract.K, contract.style, contract.region, grids.n_t, grids.n_x, grids.n_z, solution.elapsed_seconds,
    )
    return solution


def collect_solution(state: RecurrentState, start: float) -> AsianSolution:
    g = state.grids
    y_nodes = np.stack([np.asarray(state.cache.y_of_x(t, state.X[i])) for i, t in enumerate(g.t_nodes)])
    boundary = BoundarySolution(
        t_nodes=g.t_nodes.copy(),
        tau_nodes=g.tau_nodes.copy(),
        x_nodes=state.X.copy(),
        y_nodes=y_nodes,
        z_b=state.z_b.copy(),
        psi_b=state.psi_b.copy(),
        extrapolated_t0=state.extrapolated_t0,
    )
    gradient = prices = None
    if state.compute_prices:
        gradient = GradientSurface(z_nodes=state.Zref.copy(), psi=state.psi.copy())
        prices = _price_cube(state)
    solution = AsianSolution(
        contract=state.contract,
        boundary=boundary,
        gradient=gradient,
        prices=prices,
        spot_price=None,
        z_top=state.z_top,
        elapsed_seconds=time.perf_counter() - start,
    )
    if prices is not None:
        spot = _price_lookup(solution, -1, state.contract.y_spot, spot_z(state.contract, state.model))
        solution = replace(solution, spot_price=spot)
    return solution


def _price_cube(state: RecurrentState) -> PriceCube:
    n_t, n_x = state.z_b.shape
    Z = z_nodes(state.z_b, state.z_top, state.grids.n_z)
    price = np.empty_like(Z)
    slope = np.empty_like(Z)
    for i in range(n_t):
        for j in range(n_x):
            price[i, j] = np.interp(Z[i, j], state.Zref, state.u[i, j])
            slope[i, j] = np.interp(Z[i, j], state.Zref, state.u_z[i, j])
    return PriceCube(
        z=Z,
        u_bar=price - (state.K - state.z_b)[..., None],
        u_bar_z=slope,
        exercise_style=state.contract.style,
        K=state.K,
        z_b=state.z_b.copy(),
        z_ref=state.Zref.copy(),
        u_ref=state.u.copy(),
    )


def _price_lookup(solution: AsianSolution, level: int, y: float, z: float) -> float:
    p = solution.prices
    ys = solution.boundary.y_nodes[level]
    u = p.u_ref[level]

    def column(j: int) -> float:
        return float(np.interp(z, p.z_ref, u[j]))

    if y <= ys[0]:
        return column(0)
    if y >= ys[-1]:
        return column(ys.size - 1)
    j = int(np.searchsorted(ys, y)) - 1
    w = (y - ys[j]) / (ys[j + 1] - ys[j])
    return (1.0 - w) * column(j) + w * column(j + 1)


def _solve_one(args: tuple[ModelSpec, AsianContract, GridSpec, bool]) -> AsianSolution:
    model, contract, grid, compute_prices = args
    return solve(model, contract, grid, compute_prices=compute_prices)


def solve_strikes(
    model: ModelSpec,
    contracts: Sequence[AsianContract],
    grid: GridSpec,
    *,
    compute_prices: bool = True,
    workers: int = 1,
) -> list[AsianSolution]:
    """Independent strikes, optionally in worker processes; results keep the input order."""
    jobs = [(model, c, grid, compute_prices) for c in contracts]
    if workers <= 1 or len(jobs) <= 1:
        return [_solve_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_solve_one, jobs))
