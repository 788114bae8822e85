"""Analytic CDF of the daily supremum (and infimum) of the stationary model.

Conditional on a start value x < a, the probability that the supremum over
[0, t) stays below a is one minus an integral of the level-hitting density,

    F_c(a, theta, t, x) = 1 - int_0^{t*beta} w(u) * E_bridge(u) du,

    w(u) = exp(-(l/2) [(a-mu)^2 - (x-mu)^2 - u]) * (a-x)/sqrt(2 pi u^3)
           * exp(-(a-x)^2 / (2u)),

with E_bridge the exponential functional of a 3-d Bessel bridge from 0 to
a-x over [0, u] (see bridge.py).  The unconditional CDF integrates the
conditional one against the stationary Normal(mu, 1/(2l)) start density.

Numerics: the u-integral uses the midpoint rule on a logarithmic grid (the
integrand has a boundary layer near u = 0 when a-x is small) and the
x-integral uses Gauss-Legendre nodes on [mu - k*sigma, a].  All bridge
expectations are served from one cached standardized-bridge table, which also
acts as the frozen set of common random numbers: every evaluation with the
same grid is deterministic, and parameter sweeps are pathwise coupled.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from ._util import NumericsError
from .bridge import BridgeTable, BridgeTableConfig
from .process import OUParams

log = logging.getLogger(__name__)

# exp(-(a-x)^2/(2u)) < exp(-30) below u = (a-x)^2 / _U_SUPPRESSION: negligible.
_U_SUPPRESSION = 60.0


@dataclass(frozen=True)
class CdfGrid:
    """Quadrature and Monte Carlo configuration for the CDF integrals."""

    u_steps: int = 48
    x_nodes: int = 32
    x_lower_sigmas: float = 8.0
    bridge: BridgeTableConfig = field(default_factory=BridgeTableConfig)
    cache_enabled: bool = True
    max_mc_error: float | None = None

    def __post_init__(self):
        if self.u_steps < 8:
            raise ValueError("u_steps must be >= 8")
        if self.x_nodes < 8:
            raise ValueError("x_nodes must be >= 8")
        if self.x_lower_sigmas < 4.0:
            raise ValueError("x_lower_sigmas must be >= 4")

    @staticmethod
    def fast(seed: int = 0) -> "CdfGrid":
        """Reduced-cost grid for estimation loops and replication studies."""
        return CdfGrid(
            u_steps=32,
            x_nodes=24,
            bridge=BridgeTableConfig(paths=2048, steps=192, chat_nodes=64, seed=seed),
        )


@dataclass(frozen=True)
class CdfValue:
    """A probability with its propagated Monte Carlo error bound."""

    p: float
    mc_error: float

    def __post_init__(self):
        if not (0.0 <= self.p <= 1.0):
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.mc_error < 0.0:
            raise ValueError("mc_error must be >= 0")


_table_cache: dict[BridgeTableConfig, BridgeTable] = {}
_table_lock = threading.Lock()


def _get_table(grid: CdfGrid) -> BridgeTable:
    if not grid.cache_enabled:
        return BridgeTable(grid.bridge)
    with _table_lock:
        table = _table_cache.get(grid.bridge)
        if table is None:
            table = BridgeTable(grid.bridge)
            _table_cache[grid.bridge] = table
    return table


def clear_table_cache() -> None:
    with _table_lock:
        _table_cache.clear()


def _u_grid(c: float, u_max: float, n_u: int):
    """Log-midpoint nodes and weights on [c^2/suppression, u_max]; None if empty."""
    u_lo = max(c * c / _U_SUPPRESSION, u_max * 1e-12)
    if u_lo >= u_max:
        return None
    lo, hi = np.log(u_lo), np.log(u_max)
    dv = (hi - lo) / n_u
    v = lo + (np.arange(n_u) + 0.5) * dv
    u = np.exp(v)
    return u, u * dv


def _hit_integral_nodes(a, x, params, t, n_u):
    """Flattened u-quadrature nodes of the hitting integral for one start x.

    Returns (u, du, log_w) with the full deterministic log-prefactor, or None
    when the integral is negligibly small (start too far from the level).
    """
    c = abs(a - x)
    grid = _u_grid(c, t * params.beta, n_u)
    if grid is None:
        return None
    u, du = grid
    quad = (a - params.mu) ** 2 - (x - params.mu) ** 2
    log_w = (
        0.5 * params.l * (u - quad)
        + np.log(c)
        - 0.5 * np.log(2.0 * np.pi * u**3)
        - c * c / (2.0 * u)
    )
    return u, du, log_w


def _check_and_clip(raw: float, mc_error: float, what: str) -> float:
    tol = max(2.0 * mc_error, 1e-6)
    if raw < -tol or raw > 1.0 + tol:
        raise NumericsError(
            f"{what} = {raw:.6g} overshoots [0, 1] by more than 2*mc_error={mc_error:.2g}; "
            "grid is too coarse for this parameter point"
        )
    if raw < 0.0 or raw > 1.0:
        log.debug("%s clipped to [0,1]: raw value %.6g", what, raw)
    return min(max(raw, 0.0), 1.0)


def _require_precision(grid: CdfGrid, mc_error: float, what: str) -> None:
    if grid.max_mc_error is not None and mc_error > grid.max_mc_error:
        raise NumericsError(
            f"{what}: propagated mc_error {mc_error:.3g} exceeds requested "
            f"max_mc_error {grid.max_mc_error:.3g}; refine the grid"
        )


def conditional_sup_cdf(
    a: float, params: OUParams, t: float, x: float, grid: CdfGrid | None = None
) -> CdfValue:
    """P(sup over [0, t) <= a | X_0 = x); exactly 0 when a <= x."""
    if t <= 0.0:
        raise ValueError(f"t must be > 0, got {t}")
    if a <= x:
        return CdfValue(0.0, 0.0)
    grid = grid or CdfGrid()
    nodes = _hit_integral_nodes(a, x, params, t, grid.u_steps)
    if nodes is None:
        return CdfValue(1.0, 0.0)
    u, du, log_w = nodes
    table = _get_table(grid)
    g, g_se = table.weighted_mean_exp(u, a - x, a - params.mu, params.l, log_w)
    deficit = float(np.dot(g, du))
    mc_error = float(np.sqrt(np.sum((g_se * du) ** 2)))
    _require_precision(grid, mc_error, "conditional_sup_cdf")
    return CdfValue(_check_and_clip(1.0 - deficit, mc_error, "conditional_sup_cdf"), mc_error)


def conditional_inf_cdf(
    a: float, params: OUParams, t: float, x: float, grid: CdfGrid | None = None
) -> CdfValue:
    """P(inf over [0, t) <= a | X_0 = x); returns 0 when x <= a.

    Mirrors conditional_sup_cdf through the reflection X -> 2*mu - X: the
    bridge endpoint is x - a and the functional offset is mu - a, so
    F_c(a, theta, t, x) == 1 - F^c(2*mu - a, theta, t, 2*mu - x).
    """
    if t <= 0.0:
        raise ValueError(f"t must be > 0, got {t}")
    if x <= a:
        return CdfValue(0.0, 0.0)
    grid = grid or CdfGrid()
    nodes = _hit_integral_nodes(a, x, params, t, grid.u_steps)
    if nodes is None:
        return CdfValue(0.0, 0.0)
    u, du, log_w = nodes
    table = _get_table(grid)
    g, g_se = table.weighted_mean_exp(u, x - a, params.mu - a, params.l, log_w)
    p_raw = float(np.dot(g, du))
    mc_error = float(np.sqrt(np.sum((g_se * du) ** 2)))
    _require_precision(grid, mc_error, "conditional_inf_cdf")
    return CdfValue(_check_and_clip(p_raw, mc_error, "conditional_inf_cdf"), mc_error)


def stationary_sup_cdf(
    a: float, params: OUParams, t: float, grid: CdfGrid | None = None
) -> CdfValue:
    """P(sup over [0, t) <= a) under the stationary start law.

    Head term Phi((a-mu)*sqrt(2l)) minus the stationary-density-weighted
    hitting integral over starts x in [mu - k*sigma, a].
    """
    if t <= 0.0:
        raise ValueError(f"t must be > 0, got {t}")
    grid = grid or CdfGrid()
    sigma = params.stationary_std()
    head = float(ndtr((a - params.mu) * np.sqrt(2.0 * params.l)))
    x_lo = params.mu - grid.x_lower_sigmas * sigma
    if a <= x_lo:
        return CdfValue(head, 0.0)
    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(grid.x_nodes)
    xs = 0.5 * (a - x_lo) * gl_nodes + 0.5 * (a + x_lo)
    ws = 0.5 * (a - x_lo) * gl_weights
    dens = np.sqrt(params.l / np.pi) * np.exp(-params.l * (xs - params.mu) ** 2)

    u_all, du_all, logw_all, c_all = [], [], [], []
    for xi, wi, di in zip(xs, ws, dens):
        nodes = _hit_integral_nodes(a, xi, params, t, grid.u_steps)
        if nodes is None:
            continue
        u, du, log_w = nodes
        u_all.append(u)
        du_all.append(du * wi * di)
        logw_all.append(log_w)
        c_all.append(np.full_like(u, a - xi))
    if not u_all:
        return CdfValue(head, 0.0)
    u_flat = np.concatenate(u_all)
    w_flat = np.concatenate(du_all)
    logw_flat = np.concatenate(logw_all)
    c_flat = np.concatenate(c_all)
    table = _get_table(grid)
    g, g_se = table.weighted_mean_exp(u_flat, c_flat, a - params.mu, params.l, logw_flat)
    deficit = float(np.dot(g, w_flat))
    mc_error = float(np.sqrt(np.sum((g_se * w_flat) ** 2)))
    _require_precision(grid, mc_error, "stationary_sup_cdf")
    return CdfValue(_check_and_clip(head - deficit, mc_error, "stationary_sup_cdf"), mc_error)


def sup_cdf_inverse(
    p: float,
    params: OUParams,
    t: float,
    grid: CdfGrid | None = None,
    tol: float = 1e-3,
) -> float:
    """Level a with stationary_sup_cdf(a) = p, by bisection on [mu-10s, mu+10s]."""
    if not (0.0 < p < 1.0):
        raise ValueError(f"p must lie in (0, 1), got {p}")
    grid = grid or CdfGrid()
    sigma = params.stationary_std()
    lo = params.mu - 10.0 * sigma
    hi = params.mu + 10.0 * sigma
    p_lo = stationary_sup_cdf(lo, params, t, grid).p
    p_hi = stationary_sup_cdf(hi, params, t, grid).p
    if not (p_lo < p < p_hi):
        raise ValueError(
            f"p={p} is outside the achievable range [{p_lo:.3g}, {p_hi:.3g}] "
            "of the bisection bracket"
        )
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if stationary_sup_cdf(mid, params, t, grid).p < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
