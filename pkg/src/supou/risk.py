"""Heat-wave risk measures by Monte Carlo over simulated seasons.

A heat wave is a run of at least `delta` consecutive qualifying days, where a
day qualifies either when its maximum stays above a high threshold and its
minimum above a low one (two-threshold definition) or when its minimum stays
above a single level.  Seasons are independent stationary draws; all sweeps
are chunked with per-chunk RNG streams, so results are reproducible for a
fixed seed regardless of the worker count.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._util import DataError, chunk_sizes, map_chunks, stream_rng
from .process import OUParams, batch_daily_extrema


@dataclass(frozen=True)
class TwoThreshold:
    """Qualifying day: daily max >= a_max and daily min >= a_min."""

    a_max: float
    a_min: float

    def __post_init__(self):
        if not (self.a_min < self.a_max):
            raise ValueError("need a_min < a_max")

    def qualifying(self, sup: np.ndarray, inf: np.ndarray) -> np.ndarray:
        return (sup >= self.a_max) & (inf >= self.a_min)


@dataclass(frozen=True)
class SingleThreshold:
    """Qualifying day: daily min >= a."""

    a: float

    def qualifying(self, sup: np.ndarray, inf: np.ndarray) -> np.ndarray:
        return inf >= self.a


@dataclass(frozen=True)
class HeatwaveSpec:
    definition: TwoThreshold | SingleThreshold
    delta: int = 3
    season_days: int = 61

    def __post_init__(self):
        if self.delta < 1:
            raise ValueError("delta must be >= 1")
        if self.season_days < self.delta:
            raise ValueError("season_days must be >= delta")


@dataclass(frozen=True)
class MonteCarloValue:
    value: float
    std_error: float


@dataclass(frozen=True)
class RiskReport:
    """Heat-wave risk measures with their Monte Carlo standard errors."""

    probability: MonteCarloValue
    mean_duration: MonteCarloValue | None
    severity_area: MonteCarloValue | None
    n_sims: int
    seed: int
    n_events: int = 0

    def __post_init__(self):
        if not (0.0 <= self.probability.value <= 1.0):
            raise ValueError("probability must lie in [0, 1]")
        if self.severity_area is not None and self.severity_area.value < 0.0:
            raise ValueError("severity area must be >= 0")


def detect_heatwave(
    sup: np.ndarray, inf: np.ndarray, spec: HeatwaveSpec
) -> tuple[int, int] | None:
    """First heat wave of a season as (tau_in, tau_out), or None.

    tau_in is the first day index starting `delta` consecutive qualifying
    days; tau_out extends to the end of that uninterrupted qualifying run
    (half-open: the wave covers days [tau_in, tau_out)).
    """
    sup = np.asarray(sup)
    inf = np.asarray(inf)
    if sup.shape != (spec.season_days,) or inf.shape != (spec.season_days,):
        raise DataError("sup and inf must both have length season_days")
    qual = spec.definition.qualifying(sup, inf)
    n = spec.season_days
    run = 0
    tau_in = -1
    for i in range(n):
        if qual[i]:
            run += 1
            if run == spec.delta:
                tau_in = i - spec.delta + 1
                break
        else:
            run = 0
    if tau_in < 0:
        return None
    tau_out = tau_in + spec.delta
    while tau_out < n and qual[tau_out]:
        tau_out += 1
    return tau_in, tau_out


def _durations_of_chunk(qual: np.ndarray, delta: int) -> np.ndarray:
    """Durations (tau_out - tau_in) of the first heat wave per qualifying season."""
    windows = sliding_window_view(qual, delta, axis=1).all(axis=2)
    hit_rows = np.flatnonzero(windows.any(axis=1))
    durations = np.empty(hit_rows.size)
    n = qual.shape[1]
    for k, row in enumerate(hit_rows):
        tau_in = int(np.argmax(windows[row]))
        tau_out = tau_in + delta
        q = qual[row]
        while tau_out < n and q[tau_out]:
            tau_out += 1
        durations[k] = tau_out - tau_in
    return durations


def heatwave_summary(
    params: OUParams,
    spec: HeatwaveSpec,
    n_sims: int = 1_000_000,
    seed: int = 0,
    dt: float = 1e-3,
    workers: int = 1,
    dtype=np.float32,
    season_chunk: int = 512,
) -> tuple[MonteCarloValue, MonteCarloValue | None, int]:
    """Occurrence probability and mean duration from one simulation sweep.

    Returns (probability, mean_duration_or_None, n_events).  mean_duration is
    None when no season contained a heat wave.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be >= 1")
    durations = _sweep_durations(params, spec, n_sims, seed, dt, workers, dtype, season_chunk)
    n_hit = durations.size
    p = n_hit / n_sims
    prob = MonteCarloValue(p, float(np.sqrt(p * (1.0 - p) / n_sims)))
    if n_hit == 0:
        return prob, None, 0
    mean = float(durations.mean())
    se = float(durations.std(ddof=1) / np.sqrt(n_hit)) if n_hit > 1 else 0.0
    return prob, MonteCarloValue(mean, se), n_hit


def _sweep_durations(params, spec, n_sims, seed, dt, workers, dtype, season_chunk):
    sizes = chunk_sizes(n_sims, season_chunk)

    def run_chunk(i: int, m: int):
        sup, inf = _extrema_stream(params, m, spec.season_days, dt, seed, i, dtype)
        qual = spec.definition.qualifying(sup, inf)
        return _durations_of_chunk(qual, spec.delta)

    results = map_chunks(run_chunk, sizes, workers)
    return np.concatenate(results) if results else np.empty(0)


def _extrema_stream(params, m, n_days, dt, seed, chunk_index, dtype):
    """Simulate m seasons on the dedicated (seed, chunk_index) stream."""
    from scipy.signal import lfilter

    steps_per_day = int(round(1.0 / dt))
    if abs(steps_per_day * dt - 1.0) > 1e-9:
        raise DataError(f"dt={dt} does not divide one day into whole steps")
    n_steps = n_days * steps_per_day
    dtype = np.dtype(dtype)
    rng = stream_rng(seed, chunk_index)
    c = params.l * params.beta * dt
    sig = np.sqrt(params.beta * dt)
    x0 = rng.normal(params.mu, params.stationary_std(), size=m).astype(dtype)
    drive = rng.standard_normal((m, n_steps), dtype=dtype)
    drive *= dtype.type(sig)
    drive += dtype.type(c * params.mu)
    b = np.array([1.0], dtype=dtype)
    a = np.array([1.0, -(1.0 - c)], dtype=dtype)
    zi = (dtype.type(1.0 - c) * x0)[:, None]
    y, _ = lfilter(b, a, drive, axis=1, zi=zi)
    path = np.concatenate([x0[:, None], y[:, :-1]], axis=1)
    days = path.reshape(m, n_days, steps_per_day)
    return days.max(axis=2), days.min(axis=2)


def heatwave_probability(
    params: OUParams,
    spec: HeatwaveSpec,
    n_sims: int = 1_000_000,
    seed: int = 0,
    dt: float = 1e-3,
    workers: int = 1,
    dtype=np.float32,
    season_chunk: int = 512,
) -> MonteCarloValue:
    """P(at least one heat wave during a season), with std error sqrt(p(1-p)/n)."""
    prob, _, _ = heatwave_summary(
        params, spec, n_sims, seed, dt, workers, dtype, season_chunk
    )
    return prob


def mean_duration(
    params: OUParams,
    spec: HeatwaveSpec,
    n_sims: int = 1_000_000,
    seed: int = 0,
    dt: float = 1e-3,
    workers: int = 1,
    dtype=np.float32,
    season_chunk: int = 512,
) -> tuple[MonteCarloValue, int]:
    """Mean (tau_out - tau_in) over seasons with a heat wave, and the event count.

    Raises DataError when no season qualified (undefined conditional mean).
    """
    _, dur, n_events = heatwave_summary(
        params, spec, n_sims, seed, dt, workers, dtype, season_chunk
    )
    if dur is None:
        raise DataError("no season contained a heat wave: mean duration undefined")
    return dur, n_events


def severity_area(
    params: OUParams,
    a: float,
    delta: int = 3,
    n_sims: int = 1_000_000,
    seed: int = 0,
    dt: float = 1e-3,
    workers: int = 1,
    dtype=np.float32,
    block_chunk: int = 8192,
) -> tuple[MonteCarloValue, int]:
    """Expected area over level a during the first delta days of a heat wave.

    By stationarity the block location does not matter, so delta-day blocks
    are simulated from the stationary law and conditioned on the block
    minimum staying at or above a.  Returns (estimate, accepted block count).
    """
    if delta < 1 or n_sims < 1:
        raise ValueError("delta and n_sims must be >= 1")
    steps_per_day = int(round(1.0 / dt))
    if abs(steps_per_day * dt - 1.0) > 1e-9:
        raise DataError(f"dt={dt} does not divide one day into whole steps")
    from scipy.signal import lfilter

    n_steps = delta * steps_per_day
    dtype = np.dtype(dtype)
    c = params.l * params.beta * dt
    sig = np.sqrt(params.beta * dt)
    b = np.array([1.0], dtype=dtype)
    aa = np.array([1.0, -(1.0 - c)], dtype=dtype)

    def run_chunk(i: int, m: int):
        rng = stream_rng(seed, i)
        x0 = rng.normal(params.mu, params.stationary_std(), size=m).astype(dtype)
        drive = rng.standard_normal((m, n_steps), dtype=dtype)
        drive *= dtype.type(sig)
        drive += dtype.type(c * params.mu)
        y, _ = lfilter(b, aa, drive, axis=1, zi=(dtype.type(1.0 - c) * x0)[:, None])
        path = np.concatenate([x0[:, None], y[:, :-1]], axis=1)
        keep = path.min(axis=1) >= a
        if not np.any(keep):
            return np.empty(0)
        excess = path[keep].astype(np.float64) - a
        return excess.sum(axis=1) * dt

    areas = map_chunks(run_chunk, chunk_sizes(n_sims, block_chunk), workers)
    areas = np.concatenate(areas) if areas else np.empty(0)
    n_acc = areas.size
    if n_acc == 0:
        raise DataError("no simulated block satisfied the conditioning event")
    value = float(areas.mean())
    se = float(areas.std(ddof=1) / np.sqrt(n_acc)) if n_acc > 1 else 0.0
    return MonteCarloValue(value, se), n_acc


@dataclass(frozen=True)
class PredictionIntervals:
    """Per-day empirical bounds on the daily suprema from a pinned start."""

    lower: np.ndarray
    upper: np.ndarray
    level: float


def prediction_intervals(
    params: OUParams,
    x0: float,
    horizon_days: int,
    n_sims: int = 1000,
    level: float = 0.95,
    dt: float = 1e-3,
    seed: int = 0,
    workers: int = 1,
) -> PredictionIntervals:
    """Monte Carlo (1-level)/2 and 1-(1-level)/2 quantiles of each day's supremum."""
    if horizon_days < 1:
        raise ValueError("horizon_days must be >= 1")
    if not (0.0 < level < 1.0):
        raise ValueError("level must lie in (0, 1)")
    sup, _ = batch_daily_extrema(
        params,
        n_sims=n_sims,
        n_days=horizon_days,
        dt=dt,
        seed=seed,
        initial=x0,
        workers=workers,
    )
    alpha = (1.0 - level) / 2.0
    return PredictionIntervals(
        lower=np.quantile(sup, alpha, axis=0),
        upper=np.quantile(sup, 1.0 - alpha, axis=0),
        level=level,
    )


def compute_risk_report(
    params: OUParams,
    spec: HeatwaveSpec,
    severity_level: float | None = None,
    n_sims: int = 1_000_000,
    seed: int = 0,
    dt: float = 1e-3,
    workers: int = 1,
    dtype=np.float32,
) -> RiskReport:
    """Probability, mean duration and (optionally) severity in one report."""
    prob, dur, n_events = heatwave_summary(
        params, spec, n_sims=n_sims, seed=seed, dt=dt, workers=workers, dtype=dtype
    )
    severity = None
    if severity_level is not None:
        severity, _ = severity_area(
            params,
            severity_level,
            delta=spec.delta,
            n_sims=n_sims,
            seed=seed + 1,
            dt=dt,
            workers=workers,
            dtype=dtype,
        )
    return RiskReport(
        probability=prob,
        mean_duration=dur,
        severity_area=severity,
        n_sims=n_sims,
        seed=seed,
        n_events=n_events,
    )
