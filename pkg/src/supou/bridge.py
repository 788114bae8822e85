"""Three-dimensional Bessel bridge simulation and its exponential functional.

The hitting-time density of the mean-reverting model contains the factor

    E[ exp( -(l^2/2) * int_0^u (r_s - offset)^2 ds ) ],

where r is a 3-d Bessel bridge from 0 to `endpoint` over [0, u].  The bridge
is simulated backwards in time (from `endpoint` down to the pinned 0), which
turns the start into a regular point; the remaining 1/r drift is handled with
a drift-implicit step that keeps the path strictly positive.

Brownian scaling reduces every (u, endpoint) bridge to a standardized bridge
on [0, 1] with endpoint chat = endpoint/sqrt(u):

    int_0^u r^2 ds = u^2 * A,   int_0^u r ds = u^(3/2) * B,

with A = int_0^1 R^2, B = int_0^1 R of the standardized bridge R.  The
BridgeTable below caches per-path (A, B) on a chat grid once and serves every
expectation afterwards at the cost of one exp() per path.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import stream_rng


@dataclass(frozen=True)
class BridgeSpec:
    """One bridge-expectation job: duration u, endpoint > 0, Euler grid, MC size."""

    u: float
    endpoint: float
    steps: int = 256
    paths: int = 10_000

    def __post_init__(self):
        if not (self.u > 0.0):
            raise ValueError(f"u must be > 0, got {self.u}")
        if not (self.endpoint > 0.0):
            raise ValueError(f"endpoint must be > 0, got {self.endpoint}")
        if self.steps < 2:
            raise ValueError(f"steps must be >= 2, got {self.steps}")
        if self.paths < 1:
            raise ValueError(f"paths must be >= 1, got {self.paths}")


@dataclass(frozen=True)
class BridgeExpectation:
    """Monte Carlo estimate of the exponential bridge functional."""

    value: float
    std_error: float
    rescued_steps: int = 0  # steps where the positivity-preserving solve mattered

    def __post_init__(self):
        if not (0.0 < self.value <= 1.0 + 1e-12):
            raise ValueError(f"value must lie in (0, 1], got {self.value}")
        if self.std_error < 0.0:
            raise ValueError("std_error must be >= 0")


def _implicit_step(r: np.ndarray, dt: float, time_left: float, dz: np.ndarray):
    """One reversed-bridge Euler step with the 1/r drift taken implicitly.

    Solves r' = p + dt/r' with p = r - r*dt/time_left + dz, whose positive
    root is (p + sqrt(p^2 + 4 dt))/2.  Explicit Euler with a positivity clamp
    fails here: once a path is clamped near zero the 1/r drift of the next
    step catapults it to ~dt/eps, which zeroes that path's weight in the
    exponential functional and biases the estimate low.
    """
    p = r - r * (dt / time_left) + dz
    rescued = int(np.count_nonzero(p + dt / np.maximum(r, 1e-300) <= 0.0))
    return 0.5 * (p + np.sqrt(p * p + 4.0 * dt)), rescued


def simulate_reversed_bridge(spec: BridgeSpec, rng: np.random.Generator | int) -> np.ndarray:
    """Paths of the reversed bridge on the uniform grid of [0, u].

    Returns an array of shape (paths, steps+1) with [:, 0] == endpoint and
    [:, -1] == 0 (the pinned end is set exactly; the ~1/(u-s) drift is never
    evaluated at s == u).  The forward bridge is the time reversal
    r_s = out[:, steps - k] at s = k*u/steps.
    """
    if isinstance(rng, (int, np.integer)):
        rng = stream_rng(int(rng))
    dt = spec.u / spec.steps
    out = np.empty((spec.paths, spec.steps + 1))
    out[:, 0] = spec.endpoint
    r = out[:, 0].copy()
    sqdt = np.sqrt(dt)
    for k in range(spec.steps - 1):
        dz = sqdt * rng.standard_normal(spec.paths)
        r, _ = _implicit_step(r, dt, spec.u - k * dt, dz)
        out[:, k + 1] = r
    out[:, spec.steps] = 0.0
    return out


def _bridge_square_linear_integrals(
    u: float,
    endpoint: float,
    steps: int,
    n_paths: int,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Per-path trapezoid values of (int r^2 ds, int r ds) over [0, u].

    Streams the path, so `steps` can be large without storing trajectories.
    `noise` (standard normals, shape (n_paths, steps-1)) overrides rng draws;
    reusing one noise array across endpoints gives common random numbers.
    """
    dt = u / steps
    sqdt = np.sqrt(dt)
    r = np.full(n_paths, float(endpoint))
    acc_sq = 0.5 * r * r
    acc_lin = 0.5 * r
    rescued = 0
    for k in range(steps - 1):
        dz = noise[:, k] * sqdt if noise is not None else sqdt * rng.standard_normal(n_paths)
        r, n_resc = _implicit_step(r, dt, u - k * dt, dz)
        rescued += n_resc
        acc_sq += r * r
        acc_lin += r
    # pinned terminal value 0 adds nothing (half weight of the trapezoid rule)
    return acc_sq * dt, acc_lin * dt, rescued


def bridge_exponential_expectation(
    l: float,
    offset: float,
    spec: BridgeSpec,
    rng: np.random.Generator | int,
    path_chunk: int = 20_000,
) -> BridgeExpectation:
    """E[exp(-(l^2/2) int_0^u (r_s - offset)^2 ds)] by direct simulation.

    The time integral is the trapezoid sum over the Euler grid:
    int (r-offset)^2 = int r^2 - 2*offset*int r + offset^2*u.
    """
    if not (l > 0.0):
        raise ValueError(f"l must be > 0, got {l}")
    if isinstance(rng, (int, np.integer)):
        rng = stream_rng(int(rng))
    total = 0.0
    total_sq = 0.0
    rescued = 0
    done = 0
    while done < spec.paths:
        m = min(path_chunk, spec.paths - done)
        a_sq, a_lin, n_resc = _bridge_square_linear_integrals(
            spec.u, spec.endpoint, spec.steps, m, rng=rng
        )
        integral = a_sq - 2.0 * offset * a_lin + offset * offset * spec.u
        vals = np.exp(-0.5 * l * l * integral)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        rescued += n_resc
        done += m
    mean = total / spec.paths
    var = max(total_sq / spec.paths - mean * mean, 0.0)
    se = float(np.sqrt(var / spec.paths))
    return BridgeExpectation(value=min(mean, 1.0), std_error=se, rescued_steps=rescued)


@dataclass(frozen=True)
class BridgeTableConfig:
    """Standardized-bridge cache settings shared by all CDF evaluations."""

    paths: int = 4096
    steps: int = 256
    chat_nodes: int = 96
    chat_lo: float = 0.02
    chat_hi: float = 8.6
    seed: int = 0

    def __post_init__(self):
        if self.paths < 16:
            raise ValueError("paths must be >= 16")
        if self.steps < 8:
            raise ValueError("steps must be >= 8")
        if self.chat_nodes < 4:
            raise ValueError("chat_nodes must be >= 4")
        if not (0.0 < self.chat_lo < self.chat_hi):
            raise ValueError("need 0 < chat_lo < chat_hi")


class BridgeTable:
    """Per-path (A, B) functionals of standardized bridges on a chat grid.

    One noise array is shared by every grid endpoint (common random numbers),
    so the per-path functionals vary smoothly in chat and log-linear
    interpolation between neighbouring grid points is accurate.  The table is
    immutable after construction and safe to share across threads.
    """

    def __init__(self, config: BridgeTableConfig):
        self.config = config
        rng = stream_rng(config.seed)
        noise = rng.standard_normal((config.paths, config.steps - 1))
        self.chat = np.geomspace(config.chat_lo, config.chat_hi, config.chat_nodes)
        self._log_chat = np.log(self.chat)
        self.A = np.empty((config.chat_nodes, config.paths))
        self.B = np.empty((config.chat_nodes, config.paths))
        for i, ch in enumerate(self.chat):
            a_sq, a_lin, _ = _bridge_square_linear_integrals(
                1.0, ch, config.steps, config.paths, noise=noise
            )
            self.A[i] = a_sq
            self.B[i] = a_lin

    @property
    def n_paths(self) -> int:
        return self.config.paths

    def _brackets(self, chat: np.ndarray):
        lc = np.log(np.clip(chat, self.chat[0], self.chat[-1]))
        idx = np.clip(np.searchsorted(self._log_chat, lc) - 1, 0, len(self.chat) - 2)
        w = (self._log_chat[idx + 1] - lc) / (self._log_chat[idx + 1] - self._log_chat[idx])
        return idx, np.clip(w, 0.0, 1.0)

    def weighted_mean_exp(
        self,
        u: np.ndarray,
        endpoint: np.ndarray,
        offset: float,
        l: float,
        log_weight: np.ndarray,
        node_chunk: int = 512,
    ) -> tuple[np.ndarray, np.ndarray]:
        """mean_p exp(log_weight - (l^2/2) int_0^u (r - offset)^2 ds) per node.

        Folding the deterministic log-prefactor of the integrand into the
        exponent keeps huge prefactors (e.g. exp(l*u/2)) from overflowing
        before they are cancelled by the bridge functional.

        Returns (values, standard errors), one per (u, endpoint) node.
        """
        u = np.asarray(u, dtype=float)
        endpoint = np.asarray(endpoint, dtype=float)
        log_weight = np.asarray(log_weight, dtype=float)
        n = u.size
        values = np.empty(n)
        ses = np.empty(n)
        idx, w = self._brackets(endpoint / np.sqrt(u))
        half_l2 = 0.5 * l * l
        for lo in range(0, n, node_chunk):
            hi = min(lo + node_chunk, n)
            sl = slice(lo, hi)
            wv = w[sl][:, None]
            a = wv * self.A[idx[sl]] + (1.0 - wv) * self.A[idx[sl] + 1]
            b = wv * self.B[idx[sl]] + (1.0 - wv) * self.B[idx[sl] + 1]
            uu = u[sl][:, None]
            expo = log_weight[sl][:, None] - half_l2 * (
                uu * uu * a - (2.0 * offset) * uu * np.sqrt(uu) * b + uu * offset * offset
            )
            vals = np.exp(expo)
            values[sl] = vals.mean(axis=1)
            ses[sl] = vals.std(axis=1) / np.sqrt(self.n_paths)
        return values, ses

    def expectation(self, u: float, endpoint: float, offset: float, l: float) -> BridgeExpectation:
        """Scalar bridge expectation served from the cache (no new simulation)."""
        v, se = self.weighted_mean_exp(
            np.array([u]), np.array([endpoint]), offset, l, np.zeros(1)
        )
        return BridgeExpectation(value=float(min(v[0], 1.0)), std_error=float(se[0]))
