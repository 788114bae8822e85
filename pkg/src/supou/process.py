"""Stationary Ornstein-Uhlenbeck simulation and daily-extrema extraction.

The model is the mean-reverting diffusion

    dX_t = l*beta*(mu - X_t) dt + sqrt(beta) dB_t,

whose stationary law is Normal(mu, 1/(2l)).  Everything downstream (CDF
fitting, risk measures) consumes only the per-day suprema/infima of sampled
paths, so this module is also the brute-force oracle used to validate the
analytic supremum CDF.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from ._util import DataError, chunk_sizes, map_chunks, stream_rng

# Steps simulated per lfilter call when a long horizon is processed in chunks.
_CHUNK_STEPS = 4_000_000


@dataclass(frozen=True)
class OUParams:
    """Parameter triple (beta, mu, l) of the stationary OU temperature model.

    beta : squared-volatility scale, degC^2/day.  beta == 0 is allowed and
        gives the degenerate deterministic (constant) process.
    mu : stationary mean, degC.
    l : inverse of twice the stationary variance, 1/degC^2.
    """

    beta: float
    mu: float
    l: float

    def __post_init__(self):
        if not (self.beta >= 0.0 and np.isfinite(self.beta)):
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if not (self.l > 0.0 and np.isfinite(self.l)):
            raise ValueError(f"l must be > 0, got {self.l}")
        if not np.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu}")

    def stationary_variance(self) -> float:
        return 1.0 / (2.0 * self.l)

    def stationary_std(self) -> float:
        return float(np.sqrt(self.stationary_variance()))

    def relaxation_rate(self) -> float:
        """Mean-reversion rate l*beta (1/day)."""
        return self.l * self.beta


@dataclass(frozen=True)
class SimConfig:
    """Euler simulation settings.

    initial=None draws X0 from the stationary law; a float pins X0.
    """

    dt: float = 1e-3
    horizon_days: int = 1
    seed: int = 0
    initial: float | None = None

    def __post_init__(self):
        if not (0.0 < self.dt <= 1.0):
            raise ValueError(f"dt must be in (0, 1], got {self.dt}")
        if self.horizon_days < 1:
            raise ValueError(f"horizon_days must be >= 1, got {self.horizon_days}")


@dataclass(eq=False)
class DailyExtrema:
    """Per-day suprema (and optionally infima) over windows of length h days.

    segment_lengths marks contiguous runs of days; increments are never taken
    across segment boundaries (pooled multi-year samples, dropped days).
    """

    sup: np.ndarray
    inf: np.ndarray | None = None
    h: float = 1.0
    segment_lengths: tuple[int, ...] | None = None

    def __post_init__(self):
        self.sup = np.asarray(self.sup, dtype=float)
        if self.sup.ndim != 1 or self.sup.size == 0:
            raise DataError("sup must be a non-empty 1-d array")
        if self.inf is not None:
            self.inf = np.asarray(self.inf, dtype=float)
            if self.inf.shape != self.sup.shape:
                raise DataError("inf and sup must have equal length")
            if np.any(self.inf > self.sup + 1e-12):
                raise DataError("inf[i] must not exceed sup[i]")
        if self.h <= 0:
            raise DataError(f"window length h must be > 0, got {self.h}")
        if self.segment_lengths is not None:
            seg = tuple(int(s) for s in self.segment_lengths)
            if any(s <= 0 for s in seg) or sum(seg) != self.sup.size:
                raise DataError("segment_lengths must be positive and sum to n")
            self.segment_lengths = seg

    @property
    def n(self) -> int:
        return int(self.sup.size)

    def segments(self) -> tuple[int, ...]:
        return self.segment_lengths if self.segment_lengths else (self.n,)

    def require_inf(self) -> np.ndarray:
        if self.inf is None:
            raise DataError("operation requires daily infima, but none are present")
        return self.inf

    def shifted(self, c: float) -> "DailyExtrema":
        """Same sample translated by +c degC."""
        return DailyExtrema(
            self.sup + c,
            None if self.inf is None else self.inf + c,
            self.h,
            self.segment_lengths,
        )


def _euler_coeffs(params: OUParams, dt: float):
    """AR(1) form of one Euler step: X' = (1-c) X + c*mu + sig*Z."""
    c = params.l * params.beta * dt
    sig = np.sqrt(params.beta * dt)
    return c, sig


def simulate_path(params: OUParams, cfg: SimConfig) -> np.ndarray:
    """Euler-Maruyama path X_0..X_N at step cfg.dt; N = horizon_days/dt.

    Deterministic for a fixed (params, cfg).  The returned array includes the
    initial value, so it has horizon_days/dt + 1 entries.
    """
    rng = stream_rng(cfg.seed)
    n_steps = int(round(cfg.horizon_days / cfg.dt))
    c, sig = _euler_coeffs(params, cfg.dt)
    if cfg.initial is None:
        x0 = float(rng.normal(params.mu, params.stationary_std()))
    else:
        x0 = float(cfg.initial)
    drive = c * params.mu + sig * rng.standard_normal(n_steps)
    y, _ = lfilter([1.0], [1.0, -(1.0 - c)], drive, zi=np.array([(1.0 - c) * x0]))
    return np.concatenate(([x0], y))


def extract_daily_extrema(path: np.ndarray, dt: float) -> DailyExtrema:
    """Per-day max/min over windows [i, i+1); a trailing partial day is dropped.

    The grid must tile whole days, i.e. 1/dt must be an integer step count.
    """
    path = np.asarray(path, dtype=float)
    steps_per_day = int(round(1.0 / dt))
    if abs(steps_per_day * dt - 1.0) > 1e-9:
        raise DataError(f"dt={dt} does not divide one day into whole steps")
    n_days = path.size // steps_per_day
    if n_days < 1:
        raise DataError("path is shorter than one day")
    days = path[: n_days * steps_per_day].reshape(n_days, steps_per_day)
    return DailyExtrema(sup=days.max(axis=1), inf=days.min(axis=1), h=1.0)


def empirical_sup_cdf(data: DailyExtrema, a: float) -> float:
    """Fraction of observed daily suprema <= a (right-continuous in a)."""
    return float(np.count_nonzero(data.sup <= a)) / data.n


def simulate_daily_extrema(
    params: OUParams,
    n_days: int,
    dt: float = 1e-3,
    seed: int = 0,
    initial: float | None = None,
) -> DailyExtrema:
    """Daily extrema of one long stationary path, streamed in chunks.

    Equivalent to extract_daily_extrema(simulate_path(...)) but never holds
    the full path in memory; the noise stream matches the monolithic call.
    """
    if n_days < 1:
        raise DataError("n_days must be >= 1")
    steps_per_day = int(round(1.0 / dt))
    if abs(steps_per_day * dt - 1.0) > 1e-9:
        raise DataError(f"dt={dt} does not divide one day into whole steps")
    rng = stream_rng(seed)
    c, sig = _euler_coeffs(params, dt)
    x = params.mu if initial is None else float(initial)
    if initial is None:
        x = float(rng.normal(params.mu, params.stationary_std()))
    sups = np.empty(n_days)
    infs = np.empty(n_days)
    days_per_chunk = max(1, _CHUNK_STEPS // steps_per_day)
    done = 0
    while done < n_days:
        m = min(days_per_chunk, n_days - done)
        drive = c * params.mu + sig * rng.standard_normal(m * steps_per_day)
        y, _ = lfilter([1.0], [1.0, -(1.0 - c)], drive, zi=np.array([(1.0 - c) * x]))
        days = np.concatenate(([x], y[:-1])).reshape(m, steps_per_day)
        sups[done : done + m] = days.max(axis=1)
        infs[done : done + m] = days.min(axis=1)
        x = float(y[-1])
        done += m
    return DailyExtrema(sup=sups, inf=infs, h=1.0)


def batch_daily_extrema(
    params: OUParams,
    n_sims: int,
    n_days: int,
    dt: float = 1e-3,
    seed: int = 0,
    initial: float | None = None,
    workers: int = 1,
    dtype=np.float64,
    season_chunk: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Daily (sup, inf) arrays of shape (n_sims, n_days) for independent paths.

    Each path is an independent season: X0 stationary (or pinned at
    `initial`), then Euler steps at dt.  Chunks use independent RNG streams
    derived from (seed, chunk index), so results do not depend on `workers`.
    """
    if n_sims < 1:
        raise DataError("n_sims must be >= 1")
    steps_per_day = int(round(1.0 / dt))
    if abs(steps_per_day * dt - 1.0) > 1e-9:
        raise DataError(f"dt={dt} does not divide one day into whole steps")
    n_steps = n_days * steps_per_day
    if season_chunk is None:
        season_chunk = max(1, _CHUNK_STEPS // (2 * n_steps))
    c, sig = _euler_coeffs(params, dt)
    dtype = np.dtype(dtype)
    sups = np.empty((n_sims, n_days), dtype=dtype)
    infs = np.empty((n_sims, n_days), dtype=dtype)
    offsets = np.concatenate(([0], np.cumsum(chunk_sizes(n_sims, season_chunk))))

    def run_chunk(i: int, m: int):
        rng = stream_rng(seed, i)
        if initial is None:
            x0 = rng.normal(params.mu, params.stationary_std(), size=m).astype(dtype)
        else:
            x0 = np.full(m, initial, dtype=dtype)
        drive = rng.standard_normal((m, n_steps), dtype=dtype)
        drive *= dtype.type(sig)
        drive += dtype.type(c * params.mu)
        zi = ((1.0 - c) * x0)[:, None]
        y, _ = lfilter([1.0], [1.0, -(1.0 - c)], drive, axis=1, zi=zi)
        path = np.concatenate([x0[:, None], y[:, :-1]], axis=1)
        days = path.reshape(m, n_days, steps_per_day)
        lo = offsets[i]
        sups[lo : lo + m] = days.max(axis=2)
        infs[lo : lo + m] = days.min(axis=2)

    map_chunks(run_chunk, chunk_sizes(n_sims, season_chunk), workers)
    return sups, infs
