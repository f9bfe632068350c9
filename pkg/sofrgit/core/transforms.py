from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from sofrgit.core.contract import INVERSE_MAP_SAMPLES, INVERSE_NEWTON_STEPS
from sofrgit.core.errors import ConfigError, DomainError, SingularityError
from sofrgit.core.term_structure import (
    CONSTANT,
    ModelSpec,
    gauss_legendre_segments,
    merged_breakpoints,
)

logger = logging.getLogger(__name__)

_T0_GUARD = 1e-14


@dataclass(frozen=True)
class TransformCache:
    """
    Coordinate maps taking the backward pricing PDE in (t, y) to the Bessel
    heat equation in (tau, x), anchored at the option maturity T:

        phi(t) = int_t^T sigma^2,   F = exp(beta int_t^T alpha),
        tau(t) = int_t^T sigma^2 F^2,   x = -(F / beta) y^(-beta).

    Forward maps are exact per segment; t(tau) comes from a monotone cubic
    table refined with Newton steps on the forward map.
    """
    model: ModelSpec
    T: float
    t0: float
    nu: float
    b: float
    t_samples: np.ndarray
    tau_samples: np.ndarray
    _t_of_tau: PchipInterpolator

    @property
    def tau_total(self) -> float:
        """tau at t0, the end of the transformed time axis."""
        return float(self.tau_samples[0])

    # ----------------------------
    # Forward maps
    # ----------------------------

    def _check_t(self, t) -> np.ndarray:
        tt = np.asarray(t, dtype=float)
        if np.any(tt < self.t0 - 1e-12) or np.any(tt > self.T + 1e-12):
            raise DomainError(f"t outside [{self.t0}, {self.T}]")
        return np.clip(tt, self.t0, self.T)

    def alpha_integral(self, t):
        """int_t^T alpha."""
        return np.asarray(self.model.alpha.integral(self._check_t(t), self.T))

    def phi(self, t):
        tt = self._check_t(t)
        return _out(np.asarray(self.model.sigma.integral(tt, self.T, square=True)))

    def F(self, t):
        return _out(np.exp(self.model.beta * self.alpha_integral(t)))

    def tau(self, t):
        tt = self._check_t(t)
        k = np.searchsorted(self.t_samples, tt, side="left")
        k = np.clip(k, 0, self.t_samples.size - 1)
        hi = self.t_samples[k]
        out = self.tau_samples[k] + _tau_piece(self.model, self.T, tt, hi)
        return _out(out)

    def dtau_dt(self, t):
        tt = self._check_t(t)
        return _out(-np.asarray(self.model.sigma(tt)) ** 2 * np.asarray(self.F(tt)) ** 2)

    # ----------------------------
    # Inverse maps
    # ----------------------------

    def t_of_tau(self, tau):
        ta = np.asarray(tau, dtype=float)
        if np.any(ta < -1e-12) or np.any(ta > self.tau_total * (1.0 + 1e-12) + 1e-12):
            raise DomainError(f"tau outside [0, {self.tau_total}]")
        t = np.clip(self._t_of_tau(ta), self.t0, self.T)
        for _ in range(INVERSE_NEWTON_STEPS):
            d = np.asarray(self.dtau_dt(t))
            t = np.clip(t - (np.asarray(self.tau(t)) - ta) / d, self.t0, self.T)
        return _out(t)

    # ----------------------------
    # Space maps
    # ----------------------------

    def x_of_y(self, t, y):
        ya = np.asarray(y, dtype=float)
        if np.any(ya <= 0.0):
            raise DomainError("y must be > 0 in the coordinate map")
        beta = self.model.beta
        return _out(-np.asarray(self.F(t)) / beta * ya ** (-beta))

    def y_of_x(self, t, x):
        xa = np.asarray(x, dtype=float)
        if np.any(xa < 0.0):
            raise DomainError("x must be >= 0 in the coordinate map")
        beta = self.model.beta
        return _out((-beta * xa / np.asarray(self.F(t))) ** (-1.0 / beta))

    def y_lower_at(self, t):
        return np.asarray(self.model.y_lower(self._check_t(t)))

    def x_lower_at_t(self, t):
        beta = self.model.beta
        return _out(-np.asarray(self.F(t)) / beta * self.y_lower_at(t) ** (-beta))

    def x_l(self, tau):
        return self.x_lower_at_t(self.t_of_tau(tau))

    def x_l_prime_at_t(self, t):
        """d x_l / d tau by the chain rule through the segment-exact maps."""
        tt = self._check_t(t)
        m = self.model
        beta = m.beta
        F = np.asarray(self.F(tt))
        sig2 = np.asarray(m.sigma(tt)) ** 2
        alpha = np.asarray(m.alpha(tt))
        yl = self.y_lower_at(tt)
        rbar = np.asarray(m.rbar_star(tt))
        dyl = np.where(rbar < 0.0, -np.asarray(m.rbar_star.slope(tt)), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            growth = alpha * F * yl ** (-beta)
            shift = np.where(yl > 0.0, F * yl ** (-beta - 1.0) * dyl, 0.0)
        # dF/dt = -alpha beta F and d tau / dt = -sigma^2 F^2
        return _out(-(growth + shift) / (sig2 * F * F))

    def x_l_prime(self, tau):
        return self.x_l_prime_at_t(self.t_of_tau(tau))

    # ----------------------------
    # Coefficient fields
    # ----------------------------

    def coeff_B_at_t(self, t, x):
        tt = self._check_t(t)
        y = np.asarray(self.y_of_x(tt, x))
        F = np.asarray(self.F(tt))
        sig2 = np.asarray(self.model.sigma(tt)) ** 2
        return _out(np.asarray(self.model.killing_rate(tt, y)) / (sig2 * F * F))

    def coeff_Q_at_t(self, t):
        tt = self._check_t(t)
        if np.any(tt - self.t0 <= _T0_GUARD):
            raise SingularityError(
                "Q(tau) evaluated at t <= t0", module="transforms", operation="coeff_Q"
            )
        F = np.asarray(self.F(tt))
        sig2 = np.asarray(self.model.sigma(tt)) ** 2
        return _out(1.0 / ((tt - self.t0) * sig2 * F * F))

    def coeff_C_at_t(self, t, x, z):
        q = np.asarray(self.coeff_Q_at_t(t))
        tt = self._check_t(t)
        y = np.asarray(self.y_of_x(tt, x))
        r = np.asarray(self.model.rbar_star(tt)) + y
        return _out(q * (r - np.asarray(z, dtype=float)))

    def coeff_B(self, tau, x):
        return self.coeff_B_at_t(self.t_of_tau(tau), x)

    def coeff_Q(self, tau):
        return self.coeff_Q_at_t(self.t_of_tau(tau))

    def coeff_C(self, tau, x, z):
        return self.coeff_C_at_t(self.t_of_tau(tau), x, z)

    # ----------------------------
    # Homogenizer
    # ----------------------------
    # The boundary value K at x_l is lifted by H = K x_l / x while the boundary
    # stays off the origin on the whole window, and by the constant H = K once it
    # may touch it (rbar_star >= 0 somewhere). U = u - H then vanishes at x_l.

    def inverse_homogenizer(self) -> bool:
        t = self.t_samples
        return bool(np.all(np.asarray(self.x_lower_at_t(t)) > 0.0))

    def homogenizer_at_t(self, t, x, K: float = 1.0, *, inverse: bool = True):
        xa = np.asarray(x, dtype=float)
        if not inverse:
            return _out(K * np.ones_like(xa))
        return _out(K * np.asarray(self.x_lower_at_t(t)) / xa)

    def source_lambda_at_t(self, t, x, K: float = 1.0, *, inverse: bool = True):
        """-dH/dtau + L H for the Bessel generator L = (1/2) d_xx + (b / x) d_x."""
        xa = np.asarray(x, dtype=float)
        if not inverse:
            return _out(np.zeros_like(xa))
        xl = np.asarray(self.x_lower_at_t(t))
        dxl = np.asarray(self.x_l_prime_at_t(t))
        return _out(K / xa * ((1.0 - self.b) / xa ** 2 * xl - dxl))

    def source_lambda_inh_at_t(self, t, x, K: float = 1.0, *, inverse: bool = True):
        xa = np.asarray(x, dtype=float)
        lam = np.asarray(self.source_lambda_at_t(t, xa, K, inverse=inverse))
        H = np.asarray(self.homogenizer_at_t(t, xa, K, inverse=inverse))
        return _out(lam - H * np.asarray(self.coeff_B_at_t(t, xa)))


def _out(a):
    a = np.asarray(a, dtype=float)
    return a if a.ndim else float(a)


def _tau_piece(model: ModelSpec, T: float, lo, hi) -> np.ndarray:
    """int_lo^hi sigma^2 exp(2 beta int_s^T alpha) ds, [lo, hi] inside one sample cell."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    beta = model.beta
    out = np.zeros(np.broadcast(lo, hi).shape)
    length = np.broadcast_to(hi - lo, out.shape)
    mask = length > 0.0
    if not np.any(mask):
        return out
    lo_m = np.broadcast_to(lo, out.shape)[mask]
    hi_m = np.broadcast_to(hi, out.shape)[mask]
    L = hi_m - lo_m
    if model.alpha.interpolation == CONSTANT and model.sigma.interpolation == CONSTANT:
        mid = 0.5 * (lo_m + hi_m)
        a_k = np.asarray(model.alpha(mid), dtype=float)
        s2 = np.asarray(model.sigma(mid), dtype=float) ** 2
        a_hi = np.asarray(model.alpha.integral(hi_m, T), dtype=float)
        c = 2.0 * beta * a_k
        with np.errstate(divide="ignore", invalid="ignore"):
            growth = np.where(np.abs(c * L) < 1e-14, L, np.expm1(c * L) / c)
        out[mask] = s2 * np.exp(2.0 * beta * a_hi) * growth
        return out
    vals = np.empty(lo_m.size)
    for i, (a, b) in enumerate(zip(lo_m, hi_m)):
        s, w = gauss_legendre_segments(np.array([a, b]))
        integrand = np.asarray(model.sigma(s)) ** 2 * np.exp(2.0 * beta * np.asarray(model.alpha.integral(s, T)))
        vals[i] = float(np.sum(w * integrand))
    out[mask] = vals
    return out


def build_transform(model: ModelSpec, T: float, t0: float) -> TransformCache:
    if not (0.0 <= t0 < T <= model.horizon + 1e-12):
        raise ConfigError(f"need 0 <= t0 < T <= horizon, got t0={t0}, T={T}, horizon={model.horizon}")

    beta = model.beta
    edges = merged_breakpoints([model.alpha, model.sigma, model.rbar_star], t0, T)
    t_samples = np.unique(np.concatenate([np.linspace(t0, T, INVERSE_MAP_SAMPLES), edges]))

    cells = _tau_piece(model, T, t_samples[:-1], t_samples[1:])
    tau_samples = np.concatenate([np.cumsum(cells[::-1])[::-1], [0.0]])

    if np.any(np.diff(tau_samples) >= 0.0):
        raise ConfigError("tau(t) is not strictly decreasing; check sigma")

    t_of_tau = PchipInterpolator(tau_samples[::-1], t_samples[::-1], extrapolate=True)

    cache = TransformCache(
        model=model,
        T=float(T),
        t0=float(t0),
        nu=1.0 / (2.0 * beta),
        b=(1.0 + beta) / (2.0 * beta),
        t_samples=t_samples,
        tau_samples=tau_samples,
        _t_of_tau=t_of_tau,
    )
    logger.debug("transform built: T=%s t0=%s tau(t0)=%.6g samples=%d", T, t0, cache.tau_total, t_samples.size)
    return cache
