from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import special as SS

from sofrgit.core.contract import (
    DEFAULT_THETA_CACHE_SIZE,
    ENVELOPE_CUT,
    P_CHUNK,
    P_NODES_PER_PANEL,
    SPACE_SUBNODES_MAX,
    TAU_MIN,
)
from sofrgit.core.errors import ContractError, DomainError, SingularityError

logger = logging.getLogger(__name__)

HALF = 0.5
_SQRT_2PI = np.sqrt(2.0 * np.pi)


def is_half_order(nu_abs: float) -> bool:
    return abs(nu_abs - HALF) < 1e-14


# ----------------------------
# Bessel functions
# ----------------------------

def bessel_j(order: float, x):
    xa = np.asarray(x, dtype=float)
    if is_half_order(abs(order)) and order > 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(xa > 0.0, np.sqrt(2.0 / (np.pi * xa)) * np.sin(xa), 0.0)
    else:
        out = SS.jv(order, xa)
    return out if np.ndim(out) else float(out)


def bessel_y(order: float, x):
    xa = np.asarray(x, dtype=float)
    if np.any(xa <= 0.0):
        raise DomainError("Y_nu(x) needs x > 0")
    if is_half_order(abs(order)) and order > 0:
        out = -np.sqrt(2.0 / (np.pi * xa)) * np.cos(xa)
    else:
        out = SS.yv(order, xa)
    return out if np.ndim(out) else float(out)


def _jy(nu_abs: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if is_half_order(nu_abs):
        r = np.sqrt(2.0 / (np.pi * x))
        return r * np.sin(x), -r * np.cos(x)
    return SS.jv(nu_abs, x), SS.yv(nu_abs, x)


def _jy_prime(nu_abs: float, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if is_half_order(nu_abs):
        r = np.sqrt(2.0 / (np.pi * x))
        s, c = np.sin(x), np.cos(x)
        return r * (c - s / (2.0 * x)), r * (s + c / (2.0 * x))
    return SS.jvp(nu_abs, x), SS.yvp(nu_abs, x)


# ----------------------------
# Weber-Orr kernel
# ----------------------------

def kernel_W(nu_abs: float, p, v, a):
    """W(p, v, a) = J(pv) Y(pa) - Y(pv) J(pa); vanishes identically at v = a."""
    p = np.asarray(p, dtype=float)
    jv_, yv_ = _jy(nu_abs, p * np.asarray(v, dtype=float))
    ja, ya = _jy(nu_abs, p * a)
    out = jv_ * ya - yv_ * ja
    return out if np.ndim(out) else float(out)


def kernel_W_prime(nu_abs: float, p, v, a):
    """dW/dv = p (J'(pv) Y(pa) - Y'(pv) J(pa))."""
    p = np.asarray(p, dtype=float)
    djv, dyv = _jy_prime(nu_abs, p * np.asarray(v, dtype=float))
    ja, ya = _jy(nu_abs, p * a)
    out = p * (djv * ya - dyv * ja)
    return out if np.ndim(out) else float(out)


def kernel_V(nu_abs: float, p, a):
    """Spectral weight J(pa)^2 + Y(pa)^2 of the Weber-Orr pair."""
    ja, ya = _jy(nu_abs, np.asarray(p, dtype=float) * a)
    out = ja * ja + ya * ya
    return out if np.ndim(out) else float(out)


# ----------------------------
# Theta function
# ----------------------------

@dataclass(frozen=True)
class ThetaQuery:
    nu_abs: float
    tau: float
    v: float
    w: float
    a: float
    derivative: bool = False

    def __post_init__(self) -> None:
        if self.a < 0.0:
            raise DomainError("Theta needs a >= 0")
        if self.v < self.a - 1e-14 or self.w < self.a - 1e-14:
            raise DomainError("Theta needs v >= a and w >= a")
        if self.nu_abs <= 0.0:
            raise DomainError("Theta needs |nu| > 0")


def _check_tau(tau: float) -> None:
    if not tau >= TAU_MIN:
        raise SingularityError(
            f"tau={tau:g} below {TAU_MIN:g}; use theta_delta_action for the limit",
            module="weber_orr",
            operation="theta",
        )


def theta_closed_form(tau: float, v, w, a: float, *, derivative: bool = False):
    """Theta at |nu| = 1/2 (heat kernel with an image at 2a - v), or its v-derivative."""
    _check_tau(tau)
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    pref = 1.0 / (np.sqrt(v * w) * np.sqrt(2.0 * np.pi * tau))
    d1 = v - w
    d2 = v + w - 2.0 * a
    e1 = np.exp(-d1 * d1 / (2.0 * tau))
    e2 = np.exp(-d2 * d2 / (2.0 * tau))
    th = pref * (e1 - e2)
    if not derivative:
        return th if th.ndim else float(th)
    out = -th / (2.0 * v) + pref * (-d1 / tau * e1 + d2 / tau * e2)
    return out if out.ndim else float(out)


def _p_nodes(tau: float, span: float) -> tuple[np.ndarray, np.ndarray]:
    p_max = np.sqrt(2.0 * ENVELOPE_CUT / tau)
    width = min(np.pi / max(span, 1e-300), p_max)
    n_panels = int(np.ceil(p_max / width))
    edges = np.linspace(0.0, p_max, n_panels + 1)
    x, w = leggauss(P_NODES_PER_PANEL)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    p = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wt = (half[:, None] * w[None, :]).ravel()
    return p, wt


def theta_quadrature(nu_abs: float, tau: float, v, w, a: float, *, derivative: bool = False) -> np.ndarray:
    """
    Theta (or its v-derivative) as a len(v) x len(w) matrix from the defining
    spectral integral over p, on Gauss-Legendre panels half a wavelength wide,
    truncated where exp(-p^2 tau / 2) drops below 1e-16.
    """
    _check_tau(tau)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    span = float(max(v.max(), w.max(), a))
    p_all, wt_all = _p_nodes(tau, span)
    out = np.zeros((v.size, w.size))
    for s in range(0, p_all.size, P_CHUNK):
        p = p_all[s:s + P_CHUNK]
        wt = wt_all[s:s + P_CHUNK]
        c = wt * np.exp(-0.5 * p * p * tau) * p / kernel_V(nu_abs, p, a)
        kernel = kernel_W_prime if derivative else kernel_W
        Wv = kernel(nu_abs, p[:, None], v[None, :], a)
        Ww = kernel_W(nu_abs, p[:, None], w[None, :], a)
        out += (Wv * c[:, None]).T @ Ww
    return out


def theta_hankel(nu_abs: float, tau: float, v, w, *, derivative: bool = False) -> np.ndarray:
    """
    Theta with the boundary at the origin, where the Weber-Orr pair reduces to
    the Hankel transform: exp(-(v^2 + w^2) / 2tau) I(vw / tau) / tau, on the
    exponentially scaled Bessel function so large vw/tau does not overflow.
    """
    _check_tau(tau)
    v = np.atleast_1d(np.asarray(v, dtype=float))[:, None]
    w = np.atleast_1d(np.asarray(w, dtype=float))[None, :]
    arg = v * w / tau
    env = np.exp(-0.5 * (v - w) ** 2 / tau) / tau
    i_n = SS.ive(nu_abs, arg)
    if not derivative:
        return env * i_n
    di = 0.5 * (SS.ive(nu_abs - 1.0, arg) + SS.ive(nu_abs + 1.0, arg)) - i_n
    return env * (-(v - w) / tau * i_n + w / tau * di)


def theta_matrix(nu_abs: float, tau: float, v, w, a: float, *, derivative: bool = False) -> np.ndarray:
    v = np.atleast_1d(np.asarray(v, dtype=float))
    w = np.atleast_1d(np.asarray(w, dtype=float))
    if a == 0.0 and not is_half_order(nu_abs):
        return theta_hankel(nu_abs, tau, v, w, derivative=derivative)
    if is_half_order(nu_abs):
        return np.asarray(theta_closed_form(tau, v[:, None], w[None, :], a, derivative=derivative))
    return theta_quadrature(nu_abs, tau, v, w, a, derivative=derivative)


def theta(query: ThetaQuery) -> float:
    m = theta_matrix(query.nu_abs, query.tau, [query.v], [query.w], query.a, derivative=query.derivative)
    return float(m[0, 0])


def theta_delta_action(nu_abs: float, g: Callable[[float], float] | np.ndarray, v: float, a: float,
                       nodes: np.ndarray | None = None) -> float:
    """
    tau -> 0 limit of int Theta(tau, v, w, a) g(w) dw: g(v)/v for v > a and 0 at
    v = a where the image cancels the source. The limit does not depend on the order.
    """
    if v <= a:
        return 0.0
    if callable(g):
        gv = float(g(v))
    else:
        if nodes is None or len(nodes) != len(g):
            raise ContractError("sampled g needs matching nodes")
        gv = float(np.interp(v, nodes, g))
    return gv / v


def smoothed_action(nu_abs: float, tau: float, v: float, a: float, g: Callable[[np.ndarray], np.ndarray],
                    n: int = 400, width: float = 12.0) -> float:
    """int Theta(tau, v, w, a) g(w) dw on the window where the kernel is not negligible."""
    half = width * np.sqrt(tau)
    lo = max(a, v - half)
    hi = v + half
    x, wt = leggauss(n)
    w = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x
    th = theta_matrix(nu_abs, tau, [v], w, a)[0]
    return float(np.sum(0.5 * (hi - lo) * wt * th * g(w)))


# ----------------------------
# Kernel-weight matrices
# ----------------------------

def _gauss_moments(A: np.ndarray, B: np.ndarray, mu: np.ndarray, tau: float):
    s = np.sqrt(tau)
    al = (A - mu) / s
    be = (B - mu) / s
    pa = np.exp(-0.5 * al * al) / _SQRT_2PI
    pb = np.exp(-0.5 * be * be) / _SQRT_2PI
    i0 = SS.ndtr(be) - SS.ndtr(al)
    i1 = s * (pa - pb)
    i2 = tau * (i0 + al * pa - be * pb)
    return i0, i1, i2


def _hat_gauss(nodes: np.ndarray, mu: np.ndarray, tau: float, first_moment: bool) -> np.ndarray:
    """
    int N(xi; mu_j, tau) hat_l(xi) dxi (optionally times (xi - mu_j)) for the
    piecewise-linear hat functions on `nodes`; shape (len(mu), len(nodes)).
    """
    A = nodes[None, :-1]
    B = nodes[None, 1:]
    h = B - A
    m = mu[:, None]
    i0, i1, i2 = _gauss_moments(A, B, m, tau)
    if first_moment:
        left = ((B - m) * i1 - i2) / h
        right = (i2 - (A - m) * i1) / h
    else:
        left = ((B - m) * i0 - i1) / h
        right = (i1 - (A - m) * i0) / h
    out = np.zeros((mu.size, nodes.size))
    out[:, :-1] += left
    out[:, 1:] += right
    return out


def _weights_half(tau: float, v: np.ndarray, nodes: np.ndarray, a: float,
                  weight_power: float, derivative: bool) -> np.ndarray:
    # a node or target at the origin carries no weight (the kernel vanishes there)
    img = 2.0 * a - v
    with np.errstate(divide="ignore"):
        scale = np.where(nodes > 0.0, nodes ** (weight_power - 0.5), 0.0)
        root = np.where(v > 0.0, 1.0 / np.sqrt(np.where(v > 0.0, v, 1.0)), 0.0)
    h0 = _hat_gauss(nodes, v, tau, False)
    h0i = _hat_gauss(nodes, img, tau, False)
    base = (h0 - h0i) * root[:, None]
    if not derivative:
        return base * scale[None, :]
    h1 = _hat_gauss(nodes, v, tau, True)
    h1i = _hat_gauss(nodes, img, tau, True)
    out = -base * (0.5 * root * root)[:, None] + (h1 + h1i) * (root / tau)[:, None]
    return out * scale[None, :]


def _weights_general(nu_abs: float, tau: float, v: np.ndarray, nodes: np.ndarray, a: float,
                     weight_power: float, derivative: bool) -> np.ndarray:
    h = np.diff(nodes)
    n_sub = np.clip(np.ceil(3.0 * h / np.sqrt(tau)).astype(int) + 2, 2, SPACE_SUBNODES_MAX)
    xs, ws, seg, lam = [], [], [], []
    rules: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for l, n in enumerate(n_sub):
        if n not in rules:
            rules[n] = leggauss(int(n))
        gx, gw = rules[n]
        u = 0.5 * (gx + 1.0)
        xs.append(nodes[l] + h[l] * u)
        ws.append(0.5 * h[l] * gw)
        seg.append(np.full(int(n), l))
        lam.append(u)
    xf = np.concatenate(xs)
    wf = np.concatenate(ws) * xf ** weight_power
    sf = np.concatenate(seg)
    lf = np.concatenate(lam)
    if a == 0.0:
        th = theta_hankel(nu_abs, tau, v, xf, derivative=derivative)
    else:
        th = theta_quadrature(nu_abs, tau, v, xf, a, derivative=derivative)
    interp = np.zeros((xf.size, nodes.size))
    rows = np.arange(xf.size)
    interp[rows, sf] = 1.0 - lf
    interp[rows, sf + 1] += lf
    return (th * wf[None, :]) @ interp


def kernel_weights(nu_abs: float, tau: float, v, nodes, a: float, *,
                   weight_power: float = 0.0, derivative: bool = False) -> np.ndarray:
    """
    Matrix M with sum_l M[j, l] g(nodes[l]) ~ int xi^m Theta(tau, v_j, xi, a) g(xi) dxi
    over [nodes[0], nodes[-1]], g taken piecewise linear between nodes (m = weight_power).
    Theta is replaced by its v-derivative when `derivative` is set.

    Below TAU_MIN the kernel is taken at its short-time asymptote
    (v xi)^(-1/2) [N(v - xi) - N(v + xi - 2a)], which holds for every order.
    """
    if not tau > 0.0:
        _check_tau(tau)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size < 2:
        raise ContractError("kernel weights need at least two nodes")
    if is_half_order(nu_abs) or tau < TAU_MIN:
        return _weights_half(tau, v, nodes, a, weight_power, derivative)
    return _weights_general(nu_abs, tau, v, nodes, a, weight_power, derivative)


# ----------------------------
# Green function of the transformed problem
# ----------------------------
# G(tau; x, xi; a) = x^(-nu) xi^(nu + 1) Theta_|nu|(tau, x, xi, a) propagates data
# against d xi. At nu = -1/2 (Gaussian factor) it is the heat kernel with an
# image at 2a - x and is evaluated without the (x xi)^(-1/2) prefactor, so the
# boundary may sit at the origin.

def _heat_green(tau: float, x: np.ndarray, nodes: np.ndarray, a: float, derivative: bool) -> np.ndarray:
    img = 2.0 * a - x
    if not derivative:
        return _hat_gauss(nodes, x, tau, False) - _hat_gauss(nodes, img, tau, False)
    return (_hat_gauss(nodes, x, tau, True) + _hat_gauss(nodes, img, tau, True)) / tau


def green_weights(nu: float, tau: float, x, nodes, a: float, *, derivative: bool = False) -> np.ndarray:
    """
    Matrix M with M @ g ~ int G(tau; x_j, xi; a) g(xi) d xi for g piecewise linear
    on `nodes` (or the x-derivative of that integral when `derivative` is set).
    """
    if not tau > 0.0:
        _check_tau(tau)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    nodes = np.asarray(nodes, dtype=float)
    if nodes.size < 2:
        raise ContractError("kernel weights need at least two nodes")
    if is_half_order(abs(nu)) and nu < 0.0:
        return _heat_green(tau, x, nodes, a, derivative)
    m = kernel_weights(abs(nu), tau, x, nodes, a, weight_power=nu + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xp = x ** (-nu)
        if not derivative:
            return xp[:, None] * m
        dm = kernel_weights(abs(nu), tau, x, nodes, a, weight_power=nu + 1.0, derivative=True)
        return (-nu * xp / x)[:, None] * m + xp[:, None] * dm


def green_point(nu: float, tau: float, x, w: float, a: float, *, derivative: bool = False) -> np.ndarray:
    """G(tau; x, w; a) (or its x-derivative) for a single source point w; zero when w = a."""
    if not tau > 0.0:
        _check_tau(tau)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if w == a:
        return np.zeros_like(x)
    if is_half_order(abs(nu)) and nu < 0.0:
        d1 = x - w
        d2 = x + w - 2.0 * a
        n1 = np.exp(-d1 * d1 / (2.0 * tau)) / (_SQRT_2PI * np.sqrt(tau))
        n2 = np.exp(-d2 * d2 / (2.0 * tau)) / (_SQRT_2PI * np.sqrt(tau))
        if not derivative:
            return n1 - n2
        return -d1 / tau * n1 + d2 / tau * n2
    nu_abs = abs(nu)
    kernel = theta_matrix if tau >= TAU_MIN else _short_theta
    th = kernel(nu_abs, tau, x, [w], a)[:, 0]
    scale = w ** (nu + 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        xp = x ** (-nu)
        if not derivative:
            return scale * xp * th
        dth = kernel(nu_abs, tau, x, [w], a, derivative=True)[:, 0]
        return scale * (-nu * xp / x * th + xp * dth)


def _short_theta(nu_abs: float, tau: float, v, w, a: float, *, derivative: bool = False) -> np.ndarray:
    """Short-time asymptote of Theta, shared by every order."""
    v = np.atleast_1d(np.asarray(v, dtype=float))[:, None]
    w = np.atleast_1d(np.asarray(w, dtype=float))[None, :]
    pref = 1.0 / (np.sqrt(v * w) * _SQRT_2PI * np.sqrt(tau))
    d1 = v - w
    d2 = v + w - 2.0 * a
    e1 = np.exp(-d1 * d1 / (2.0 * tau))
    e2 = np.exp(-d2 * d2 / (2.0 * tau))
    th = pref * (e1 - e2)
    if not derivative:
        return th
    return -th / (2.0 * v) + pref * (-d1 / tau * e1 + d2 / tau * e2)


class KernelWeightCache:
    """
    Bounded LRU of Green-weight matrices for one solver run (size 0 disables it).
    Levels repeat the same (gap, boundary, nodes) triple whenever the boundary
    and the x grid do not move in tau, which is the common flat-curve case.
    """

    def __init__(self, maxsize: int = DEFAULT_THETA_CACHE_SIZE) -> None:
        self.maxsize = int(maxsize)
        self._store: OrderedDict[tuple, np.ndarray] = OrderedDict()
        self.hits = 0
        self.misses = 0

    def weights(self, nu: float, tau: float, x, nodes, a: float, *, derivative: bool = False) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        nodes = np.asarray(nodes, dtype=float)
        if self.maxsize <= 0:
            return green_weights(nu, tau, x, nodes, a, derivative=derivative)
        key = (
            round(nu, 14), round(tau, 12), round(a, 14), bool(derivative),
            hash(np.round(x, 14).tobytes()), hash(np.round(nodes, 14).tobytes()),
        )
        hit = self._store.get(key)
        if hit is not None:
            self._store.move_to_end(key)
            self.hits += 1
            return hit
        self.misses += 1
        m = green_weights(nu, tau, x, nodes, a, derivative=derivative)
        self._store[key] = m
        if len(self._store) > self.maxsize:
            self._store.popitem(last=False)
        return m
