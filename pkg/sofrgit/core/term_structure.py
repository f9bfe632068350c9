from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from sofrgit.core.contract import GAUSS_LEGENDRE_SEGMENT_NODES
from sofrgit.core.errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

_EDGE_TOL = 1e-12

CONSTANT = "constant"
LINEAR = "linear"
KILLING_SHORT_RATE = "short_rate"
KILLING_CURVE = "curve"


# ----------------------------
# Parameter curves
# ----------------------------

@dataclass(frozen=True)
class ParamCurve:
    """
    Breakpointed piecewise function of time (years).

    interpolation = "constant": one value per segment [b_k, b_{k+1}), last segment closed.
    interpolation = "linear":   one value per breakpoint, linear in between.
    """
    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    interpolation: str = CONSTANT
    _b: np.ndarray = field(init=False, repr=False, compare=False)
    _v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        b = np.asarray(self.breakpoints, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if b.ndim != 1 or b.size < 2:
            raise ConfigError("curve needs at least two breakpoints (one segment)")
        if np.any(np.diff(b) <= 0.0):
            raise ConfigError("curve breakpoints must be strictly increasing")
        if self.interpolation == CONSTANT:
            if v.size != b.size - 1:
                raise ConfigError(f"constant curve needs {b.size - 1} values, got {v.size}")
        elif self.interpolation == LINEAR:
            if v.size != b.size:
                raise ConfigError(f"linear curve needs {b.size} values, got {v.size}")
        else:
            raise ConfigError(f"unknown curve interpolation: {self.interpolation!r}")
        if not np.all(np.isfinite(v)):
            raise ConfigError("curve values must be finite")
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "_v", v)

    @classmethod
    def flat(cls, value: float, start: float, end: float) -> "ParamCurve":
        return cls(breakpoints=(float(start), float(end)), values=(float(value),), interpolation=CONSTANT)

    @property
    def start(self) -> float:
        return float(self._b[0])

    @property
    def end(self) -> float:
        return float(self._b[-1])

    def _check(self, t: np.ndarray) -> np.ndarray:
        if np.any(t < self.start - _EDGE_TOL) or np.any(t > self.end + _EDGE_TOL):
            raise DomainError(f"t outside curve domain [{self.start}, {self.end}]")
        return np.clip(t, self.start, self.end)

    def _segment(self, t: np.ndarray) -> np.ndarray:
        k = np.searchsorted(self._b, t, side="right") - 1
        return np.clip(k, 0, self._b.size - 2)

    def __call__(self, t):
        return evaluate_curve(self, t)

    def slope(self, t):
        """Right derivative in t (zero for piecewise-constant curves)."""
        tt = self._check(np.asarray(t, dtype=float))
        if self.interpolation == CONSTANT:
            out = np.zeros_like(tt)
        else:
            k = self._segment(tt)
            out = (self._v[k + 1] - self._v[k]) / (self._b[k + 1] - self._b[k])
        return out if out.ndim else float(out)

    def _segment_integrals(self, square: bool) -> np.ndarray:
        h = np.diff(self._b)
        if self.interpolation == CONSTANT:
            return h * (self._v ** 2 if square else self._v)
        f0, f1 = self._v[:-1], self._v[1:]
        if square:
            return h * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0
        return 0.5 * h * (f0 + f1)

    def _partial(self, k: np.ndarray, t: np.ndarray, square: bool) -> np.ndarray:
        # integral over [b_k, t] inside segment k
        d = t - self._b[k]
        if self.interpolation == CONSTANT:
            v = self._v[k]
            return d * (v * v if square else v)
        f0 = self._v[k]
        f1 = f0 + (self._v[k + 1] - f0) * d / (self._b[k + 1] - self._b[k])
        if square:
            return d * (f0 * f0 + f0 * f1 + f1 * f1) / 3.0
        return 0.5 * d * (f0 + f1)

    def cumulative(self, t, *, square: bool = False):
        """Integral of the curve (or its square) from the first breakpoint to t."""
        tt = self._check(np.asarray(t, dtype=float))
        seg = np.concatenate(([0.0], np.cumsum(self._segment_integrals(square))))
        k = self._segment(tt)
        out = seg[k] + self._partial(k, tt, square)
        return out if out.ndim else float(out)

    def integral(self, a, b, *, square: bool = False):
        return np.subtract(self.cumulative(b, square=square), self.cumulative(a, square=square))


def evaluate_curve(curve: ParamCurve, t):
    tt = curve._check(np.asarray(t, dtype=float))
    k = curve._segment(tt)
    if curve.interpolation == CONSTANT:
        out = curve._v[k]
    else:
        w = (tt - curve._b[k]) / (curve._b[k + 1] - curve._b[k])
        out = (1.0 - w) * curve._v[k] + w * curve._v[k + 1]
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def merged_breakpoints(curves: Sequence[ParamCurve], a: float, b: float) -> np.ndarray:
    """Union of the curves' breakpoints inside [a, b], endpoints included."""
    pts = [np.array([a, b], dtype=float)]
    for c in curves:
        pts.append(c._b[(c._b > a) & (c._b < b)])
    return np.unique(np.concatenate(pts))


def gauss_legendre_segments(edges: np.ndarray, n: int = GAUSS_LEGENDRE_SEGMENT_NODES) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of an n-point Gauss-Legendre rule on every [edges[k], edges[k+1]]."""
    x, w = leggauss(n)
    lo, hi = edges[:-1, None], edges[1:, None]
    half = 0.5 * (hi - lo)
    nodes = (lo + hi) * 0.5 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


# ----------------------------
# Model
# ----------------------------

@dataclass(frozen=True)
class ModelSpec:
    """
    r = rbar_star(t) + y,  dy = -alpha(t) y dt + sigma(t) y^(beta+1) dW.

    alpha is taken verbatim from the config. With killing = "curve" the killing
    term uses rbar_star(t) alone (equity-like variant).
    """
    beta: float
    alpha: ParamCurve
    sigma: ParamCurve
    rbar_star: ParamCurve
    horizon: float
    discounting_enabled: bool = True
    killing: str = KILLING_SHORT_RATE

    def __post_init__(self) -> None:
        if not (-1.0 <= self.beta < 0.0):
            raise ConfigError(f"beta must lie in [-1, 0), got {self.beta}")
        if self.horizon <= 0.0:
            raise ConfigError("horizon must be > 0")
        for name in ("alpha", "sigma", "rbar_star"):
            c: ParamCurve = getattr(self, name)
            if c.start > _EDGE_TOL or c.end < self.horizon - _EDGE_TOL:
                raise ConfigError(f"{name} curve must cover [0, {self.horizon}]")
        sig_nodes = self.sigma._v
        if np.any(sig_nodes <= 0.0):
            raise ConfigError("sigma must be > 0 on every segment")
        if self.killing not in (KILLING_SHORT_RATE, KILLING_CURVE):
            raise ConfigError(f"unknown killing term: {self.killing!r}")

    def _check_t(self, t) -> np.ndarray:
        tt = np.asarray(t, dtype=float)
        if np.any(tt < -_EDGE_TOL) or np.any(tt > self.horizon + _EDGE_TOL):
            raise DomainError(f"t outside [0, {self.horizon}]")
        return tt

    def y_lower(self, t):
        return y_lower(self, t)

    def diffusion(self, t, y):
        """sigma(t) * y^(beta+1); y-independent at beta = -1."""
        tt = self._check_t(t)
        return np.asarray(self.sigma(tt)) * np.power(np.asarray(y, dtype=float), self.beta + 1.0)

    def killing_rate(self, t, y):
        tt = self._check_t(t)
        rbar = np.asarray(self.rbar_star(tt))
        if not self.discounting_enabled:
            return np.zeros(np.broadcast(rbar, np.asarray(y)).shape)
        if self.killing == KILLING_CURVE:
            return rbar + 0.0 * np.asarray(y, dtype=float)
        return rbar + np.asarray(y, dtype=float)

    def mean_rate_integral(self, t: float, y: float, q: float) -> float:
        """
        Integral over [t, q] of rbar_star(s) + y exp(-int_t^s alpha), i.e. of the
        conditional mean short rate. Signed: q < t gives minus the reversed integral.
        """
        self._check_t([t, q])
        if q < t:
            return -_mean_rate_reversed(self, t, y, q)
        total = float(self.rbar_star.integral(t, q))
        if y == 0.0 or q == t:
            return total
        edges = merged_breakpoints([self.alpha], t, q)
        if self.alpha.interpolation == CONSTANT:
            acc = 0.0
            a_lo = 0.0  # int_t^{edge} alpha
            for lo, hi in zip(edges[:-1], edges[1:]):
                a_k = float(self.alpha(0.5 * (lo + hi)))
                length = hi - lo
                if abs(a_k * length) < 1e-14:
                    seg = length
                else:
                    seg = -np.expm1(-a_k * length) / a_k
                acc += np.exp(-a_lo) * seg
                a_lo += a_k * length
            return total + y * acc
        s, w = gauss_legendre_segments(edges)
        a_ts = np.asarray(self.alpha.integral(t, s))
        return total + y * float(np.sum(w * np.exp(-a_ts)))


def _mean_rate_reversed(model: ModelSpec, t: float, y: float, q: float) -> float:
    # int_q^t [rbar(s) + y exp(-int_t^s alpha)] ds for q < t
    total = float(model.rbar_star.integral(q, t))
    edges = merged_breakpoints([model.alpha], q, t)
    s, w = gauss_legendre_segments(edges)
    a_ts = -np.asarray(model.alpha.integral(s, t))
    return total + y * float(np.sum(w * np.exp(-a_ts)))


def y_lower(model: ModelSpec, t):
    """Non-negativity lower boundary of the factor: max(-rbar_star(t), 0)."""
    tt = model._check_t(t)
    out = np.maximum(-np.asarray(model.rbar_star(tt)), 0.0)
    return out if np.ndim(out) else float(out)
