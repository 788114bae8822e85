"""Quantile least-squares estimation of the model parameters.

Pipeline: freeze anchor levels and their empirical quantiles, bound the
parameter search box from the data, then minimize

    Q_n(theta) = sum_j [ F*(s_j, theta, h) - F_n(s_j) ]^2

by Nelder-Mead over the box (smooth logistic transform to unconstrained
coordinates, deterministic multi-start).  The bridge table frozen inside the
CdfGrid acts as common random numbers, so Q_n is a deterministic function of
theta throughout one run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

from ._util import DataError, EstimationError, map_chunks
from .neldermead import minimize
from .process import DailyExtrema, OUParams, empirical_sup_cdf, simulate_daily_extrema
from .supcdf import CdfGrid, stationary_sup_cdf

log = logging.getLogger(__name__)

DEFAULT_LEVELS = (0.2, 0.4, 0.6, 0.8)


@dataclass(frozen=True)
class QuantileAnchors:
    """Anchor levels and the empirical quantiles s_j frozen at setup.

    The s_values are fixed once, before optimization, and never recomputed.
    """

    levels: tuple[float, ...]
    s_values: np.ndarray

    def __post_init__(self):
        levels = tuple(float(p) for p in self.levels)
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "s_values", np.asarray(self.s_values, dtype=float))
        if len(levels) < 3:
            raise DataError("need at least 3 anchor levels to identify 3 parameters")
        if any(not (0.0 < p < 1.0) for p in levels) or any(
            levels[i] >= levels[i + 1] for i in range(len(levels) - 1)
        ):
            raise DataError("levels must be strictly increasing inside (0, 1)")
        if self.s_values.shape != (len(levels),):
            raise DataError("s_values must match levels")
        if np.any(np.diff(self.s_values) < 0.0):
            raise DataError("s_values must be nondecreasing")

    @staticmethod
    def from_data(data: DailyExtrema, levels=DEFAULT_LEVELS) -> "QuantileAnchors":
        return QuantileAnchors(tuple(levels), np.quantile(data.sup, levels))


@dataclass(frozen=True)
class ParamBox:
    """Search box [0, beta_max] x [mu_min, mu_max] x [l_min, l_max]."""

    beta_max: float
    mu_min: float
    mu_max: float
    l_min: float
    l_max: float

    def __post_init__(self):
        if not (self.beta_max > 0.0):
            raise DataError(f"beta_max must be > 0, got {self.beta_max}")
        if not (self.mu_min <= self.mu_max):
            raise DataError("mu_min must not exceed mu_max")
        if not (0.0 < self.l_min <= self.l_max):
            raise DataError(
                f"need 0 < l_min <= l_max, got l_min={self.l_min:.4g}, l_max={self.l_max:.4g}"
            )

    def contains(self, params: OUParams, rtol: float = 1e-9) -> bool:
        pad = rtol * max(1.0, abs(self.beta_max))
        return (
            0.0 <= params.beta <= self.beta_max + pad
            and self.mu_min - rtol <= params.mu <= self.mu_max + rtol
            and self.l_min * (1 - rtol) <= params.l <= self.l_max * (1 + rtol)
        )


@dataclass(frozen=True)
class OptConfig:
    """Nelder-Mead settings for the two-phase fit.

    Phase 1 fits (mu, l) with the volatility scale frozen at its data-driven
    start and runs to geometric convergence (simplex diameter < diam_tol in
    transformed coordinates, or max_iter).  Phase 2 refines all three
    coordinates but additionally stops as soon as the objective reaches
    discrepancy_c times the sampling-noise floor of the anchor constraints:
    the objective is nearly flat along a (beta, mu) valley, and descending
    below the noise floor only fits noise (it drifts into a degenerate
    near-Gaussian mode with beta near 0).  extra_start_fractions adds raw
    multi-start refinements; the reported result is the best objective among
    all runs.
    """

    max_iter: int = 300
    diam_tol: float = 1e-3
    simplex_step: float = 0.6
    refine_step: float = 0.3
    discrepancy_c: float = 0.2
    extra_start_fractions: tuple[tuple[float, float, float], ...] = ()


@dataclass(frozen=True)
class EstimationResult:
    """Fitted parameters with optimizer diagnostics.

    restarts_used counts the additional multi-start runs beyond the first;
    objective equals the sum of squared per_anchor_residuals at theta_hat.
    """

    theta_hat: OUParams
    objective: float
    box: ParamBox
    anchors: QuantileAnchors
    iterations: int
    restarts_used: int
    per_anchor_residuals: np.ndarray
    n_evals: int = 0
    converged: bool = True


# Li-Shao exceedance probes: upper quantiles of the centered suprema.
_LISHAO_PROBE_LEVELS = (0.70, 0.80, 0.90, 0.95)


def compute_param_box(data: DailyExtrema) -> ParamBox:
    """Data-driven parameter bounds.

    mu is bracketed by the means of the infima and suprema; the variance
    bound max(|rec_min - m_max|, |rec_max - m_min|)^2 gives l_min; the
    Gaussian concentration of the supremum gives l_max from empirical
    exceedance frequencies; and a quadratic-variation-style sum of squared
    day-to-day swings bounds beta.  Increments are only taken inside
    contiguous segments.
    """
    inf = data.require_inf()
    sup = data.sup
    n = data.n
    if n < 2:
        raise DataError("need at least 2 days to bound parameters")
    m_min = float(inf.mean())
    m_max = float(sup.mean())
    rec_min = float(inf.min())
    rec_max = float(sup.max())
    spread = max(abs(rec_min - m_max), abs(rec_max - m_min))
    if spread <= 0.0:
        raise DataError("degenerate data: all observations equal")
    l_min = 1.0 / (2.0 * spread * spread)

    centered = sup - m_max
    l_max = np.inf
    for lev in _LISHAO_PROBE_LEVELS:
        x = float(np.quantile(centered, lev))
        if x <= 0.0:
            continue
        p_x = max(float(np.count_nonzero(centered >= x)) / n, 1.0 / (2.0 * n))
        l_max = min(l_max, -np.log(p_x) / (x * x))
    if not np.isfinite(l_max):
        raise DataError("could not place an upper bound on l: no positive exceedance probes")

    qv = 0.0
    start = 0
    n_pairs = 0
    for seg in data.segments():
        s_seg = sup[start : start + seg]
        i_seg = inf[start : start + seg]
        if seg >= 2:
            up = (s_seg[1:] - i_seg[:-1]) ** 2
            down = (i_seg[1:] - s_seg[:-1]) ** 2
            qv += float(np.maximum(up, down).sum())
            n_pairs += seg - 1
        start += seg
    if n_pairs == 0:
        raise DataError("no consecutive-day pairs available for the beta bound")
    beta_max = qv / (n * data.h)

    return ParamBox(beta_max=beta_max, mu_min=m_min, mu_max=m_max, l_min=l_min, l_max=l_max)


def _residuals(theta: OUParams, anchors: QuantileAnchors, data: DailyExtrema, grid: CdfGrid):
    return np.array(
        [
            stationary_sup_cdf(s, theta, data.h, grid).p - empirical_sup_cdf(data, s)
            for s in anchors.s_values
        ]
    )


def objective_qn(
    theta: OUParams, anchors: QuantileAnchors, data: DailyExtrema, grid: CdfGrid | None = None
) -> float:
    """Sum of squared gaps between the model CDF and the empirical CDF at the anchors."""
    if theta.beta <= 0.0:
        raise ValueError("objective requires beta > 0")
    r = _residuals(theta, anchors, data, grid or CdfGrid())
    return float(r @ r)


class _BoxTransform:
    """Smooth bijection between the open box and unconstrained coordinates.

    Logistic per coordinate; frozen coordinates (2-d estimation) are held at
    fixed values and excluded from the search space.
    """

    def __init__(self, box: ParamBox, beta_fixed: float | None = None):
        self.beta_fixed = beta_fixed
        bounds = [(0.0, box.beta_max), (box.mu_min, box.mu_max), (box.l_min, box.l_max)]
        if beta_fixed is not None:
            bounds = bounds[1:]
        self.lo = np.array([b[0] for b in bounds])
        self.hi = np.array([b[1] for b in bounds])

    @property
    def dim(self) -> int:
        return self.lo.size

    def to_params(self, z: np.ndarray) -> OUParams:
        v = self.lo + (self.hi - self.lo) * expit(np.asarray(z, dtype=float))
        if self.beta_fixed is not None:
            return OUParams(beta=self.beta_fixed, mu=float(v[0]), l=float(v[1]))
        return OUParams(beta=float(v[0]), mu=float(v[1]), l=float(v[2]))

    def z_from_fractions(self, fractions) -> np.ndarray:
        f = np.asarray(fractions, dtype=float)
        if self.beta_fixed is not None:
            f = f[1:]
        return logit(f)


# E[daily range] of a driftless diffusion with squared volatility beta over a
# unit window is sqrt(8/pi)*sqrt(beta); mean reversion only shrinks it mildly
# at daily relaxation rates near one, so the inverted statistic seeds beta.
_RANGE_CONST = float(np.sqrt(8.0 / np.pi))


def _initial_fractions(data: DailyExtrema, box: ParamBox) -> np.ndarray:
    """Data-driven start, as box fractions (beta, mu, l).

    beta from the mean daily range, mu from the midpoint of its bounds
    (unbiased by the sup/inf symmetry of the process), l from the suprema
    variance.  The quantile objective is nearly flat along a (beta, mu)
    valley, so the fitted beta stays close to this moment-matched seed.
    """
    inf = data.require_inf()
    beta0 = (float(np.mean(data.sup - inf)) / _RANGE_CONST) ** 2
    l0 = 1.0 / (2.0 * float(np.var(data.sup)))
    f_beta = beta0 / box.beta_max
    f_mu = 0.5
    f_l = (l0 - box.l_min) / max(box.l_max - box.l_min, 1e-300)
    return np.clip(np.array([f_beta, f_mu, f_l]), 0.02, 0.98)


def _anchor_noise_floor(data: DailyExtrema, levels) -> float:
    """Sampling-noise scale of the anchor residuals.

    Quantile anchors carry variance p(1-p)/n_eff each, with n_eff discounted
    for the day-to-day correlation of the suprema (AR(1) at the lag-1 sample
    autocorrelation).
    """
    sups = data.sup
    if data.n < 3:
        return 0.0
    r1 = float(np.corrcoef(sups[:-1], sups[1:])[0, 1])
    r1 = min(max(r1, 0.0), 0.95)
    n_eff = data.n * (1.0 - r1) / (1.0 + r1)
    p = np.asarray(levels)
    return float(np.sum(p * (1.0 - p)) / n_eff)


def _run_estimation(
    data: DailyExtrema,
    anchors: QuantileAnchors | None,
    grid: CdfGrid | None,
    opt_cfg: OptConfig | None,
    beta_fixed: float | None,
    workers: int,
) -> EstimationResult:
    grid = grid or CdfGrid()
    opt_cfg = opt_cfg or OptConfig()
    if anchors is None:
        anchors = QuantileAnchors.from_data(data)
    box = compute_param_box(data)
    emp = np.array([empirical_sup_cdf(data, s) for s in anchors.s_values])

    def objective_for(transform: _BoxTransform):
        def objective_z(z: np.ndarray) -> float:
            theta = transform.to_params(z)
            try:
                model = np.array(
                    [stationary_sup_cdf(s, theta, data.h, grid).p for s in anchors.s_values]
                )
            except Exception:
                return np.inf
            r = model - emp
            return float(r @ r)

        return objective_z

    fractions = _initial_fractions(data, box)
    beta_start = beta_fixed if beta_fixed is not None else float(box.beta_max * fractions[0])

    # phase 1: the well-posed 2-d problem (mu, l | beta) to full convergence
    tr2 = _BoxTransform(box, beta_fixed=beta_start)
    res2 = minimize(
        objective_for(tr2),
        logit(fractions[1:]),
        step=opt_cfg.simplex_step,
        diam_tol=opt_cfg.diam_tol,
        max_iter=opt_cfg.max_iter,
    )
    theta2 = tr2.to_params(res2.x)
    iterations = res2.iterations
    n_evals = res2.n_evals
    candidates = [(res2.fx, 0, theta2, res2.converged)]

    restarts_used = 0
    if beta_fixed is None:
        # phase 2: refine all coordinates, stopping at the noise floor
        tr3 = _BoxTransform(box)
        f_stop = opt_cfg.discrepancy_c * _anchor_noise_floor(data, anchors.levels)
        span_mu = box.mu_max - box.mu_min
        span_l = box.l_max - box.l_min
        refined_fr = np.clip(
            np.array(
                [
                    fractions[0],
                    (theta2.mu - box.mu_min) / span_mu,
                    (theta2.l - box.l_min) / span_l,
                ]
            ),
            0.02,
            0.98,
        )
        starts = [refined_fr] + [np.asarray(f, dtype=float) for f in opt_cfg.extra_start_fractions]

        def run_start(i: int, _m: int):
            return minimize(
                objective_for(tr3),
                logit(starts[i]),
                step=opt_cfg.refine_step if i == 0 else opt_cfg.simplex_step,
                diam_tol=opt_cfg.diam_tol,
                max_iter=opt_cfg.max_iter,
                f_stop=f_stop,
            )

        results = map_chunks(run_start, [1] * len(starts), workers)
        restarts_used = len(starts) - 1
        for i, res in enumerate(results):
            iterations += res.iterations
            n_evals += res.n_evals
            candidates.append((res.fx, i + 1, tr3.to_params(res.x), res.converged))

    finite = [c for c in candidates if np.isfinite(c[0])]
    if not finite:
        raise EstimationError(
            "optimization produced no finite objective value; "
            f"box={box}, anchors at {anchors.s_values}"
        )
    _, _, theta_hat, converged = min(finite, key=lambda c: (c[0], c[1]))
    residuals = _residuals(theta_hat, anchors, data, grid)
    return EstimationResult(
        theta_hat=theta_hat,
        objective=float(residuals @ residuals),
        box=box,
        anchors=anchors,
        iterations=iterations,
        restarts_used=restarts_used,
        per_anchor_residuals=residuals,
        n_evals=n_evals,
        converged=converged,
    )


def estimate(
    data: DailyExtrema,
    anchors: QuantileAnchors | None = None,
    grid: CdfGrid | None = None,
    opt_cfg: OptConfig | None = None,
    workers: int = 1,
) -> EstimationResult:
    """Fit (beta, mu, l) by quantile least squares over the data-driven box."""
    return _run_estimation(data, anchors, grid, opt_cfg, None, workers)


def estimate_2d(
    data: DailyExtrema,
    beta_fixed: float,
    anchors: QuantileAnchors | None = None,
    grid: CdfGrid | None = None,
    opt_cfg: OptConfig | None = None,
    workers: int = 1,
) -> EstimationResult:
    """Same pipeline with beta frozen; only (mu, l) are optimized."""
    if not (beta_fixed > 0.0):
        raise ValueError(f"beta_fixed must be > 0, got {beta_fixed}")
    return _run_estimation(data, anchors, grid, opt_cfg, beta_fixed, workers)


@dataclass(frozen=True)
class LagCorrelation:
    """Measured daily-suprema correlations at one lag against decay bounds.

    bound is exp(-l*beta*lag) + 3/sqrt(n_days); gap_bound replaces the lag by
    the actual time gap between the two windows (lag - 1 for unit windows),
    which is what the covariance-decay property of the process guarantees.
    """

    lag: int
    corr_identity: float
    corr_indicator: float
    bound: float
    gap_bound: float

    @property
    def within_bound(self) -> bool:
        return abs(self.corr_identity) <= self.bound and abs(self.corr_indicator) <= self.bound

    @property
    def within_gap_bound(self) -> bool:
        return (
            abs(self.corr_identity) <= self.gap_bound
            and abs(self.corr_indicator) <= self.gap_bound
        )


def mixing_decay_check(
    params: OUParams,
    lags,
    n_days: int = 10_000,
    seed: int = 0,
    dt: float = 1e-3,
) -> list[LagCorrelation]:
    """Simulate daily suprema and report their correlation decay over lags.

    Correlations are computed for the identity and for the indicator of
    exceeding the empirical 0.8-quantile.
    """
    lags = [int(r) for r in lags]
    if any(r < 0 for r in lags):
        raise ValueError("lags must be nonnegative")
    if n_days < 100:
        raise ValueError("n_days too small for a meaningful correlation estimate")
    sups = simulate_daily_extrema(params, n_days, dt=dt, seed=seed).sup
    q80 = np.quantile(sups, 0.8)
    indicator = (sups > q80).astype(float)
    slack = 3.0 / np.sqrt(n_days)
    rate = params.relaxation_rate()
    out = []
    for r in lags:
        if r == 0:
            ci = cind = 1.0
        else:
            ci = float(np.corrcoef(sups[:-r], sups[r:])[0, 1])
            cind = float(np.corrcoef(indicator[:-r], indicator[r:])[0, 1])
        out.append(
            LagCorrelation(
                lag=r,
                corr_identity=ci,
                corr_indicator=cind,
                bound=float(np.exp(-rate * r) + slack),
                gap_bound=float(np.exp(-rate * max(r - 1, 0)) + slack),
            )
        )
    return out


def anchor_separation(
    thetas, s_values, t: float = 1.0, grid: CdfGrid | None = None
) -> float:
    """Smallest pairwise max-abs gap between anchor-CDF vectors of the thetas.

    A positive separation well above the numerical noise supports treating
    the anchor map theta -> (F*(s_j, theta)) as injective on the probed set.
    """
    grid = grid or CdfGrid()
    vectors = [
        np.array([stationary_sup_cdf(s, th, t, grid).p for s in s_values]) for th in thetas
    ]
    sep = np.inf
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            sep = min(sep, float(np.max(np.abs(vectors[i] - vectors[j]))))
    return sep


@dataclass
class StudyResult:
    """Replication study over simulated datasets from known true parameters."""

    true_params: OUParams
    theta_hats: np.ndarray  # (n_reps, 3) columns beta, mu, l
    n_days: int

    def relative_rmse(self) -> np.ndarray:
        truth = np.array([self.true_params.beta, self.true_params.mu, self.true_params.l])
        return np.sqrt(np.mean((self.theta_hats - truth) ** 2, axis=0)) / np.abs(truth)


def replication_study(
    true_params: OUParams,
    n_days: int,
    n_reps: int,
    grid: CdfGrid | None = None,
    opt_cfg: OptConfig | None = None,
    seed: int = 0,
    beta_fixed: float | None = None,
    dt: float = 1e-3,
    workers: int = 1,
) -> StudyResult:
    """Simulate n_reps datasets from true_params and estimate each one."""
    grid = grid or CdfGrid.fast()
    rep_seeds = np.random.SeedSequence(seed).generate_state(n_reps).tolist()

    def run_rep(i: int, _m: int):
        data = simulate_daily_extrema(true_params, n_days, dt=dt, seed=rep_seeds[i])
        if beta_fixed is None:
            res = estimate(data, grid=grid, opt_cfg=opt_cfg)
        else:
            res = estimate_2d(data, beta_fixed, grid=grid, opt_cfg=opt_cfg)
        log.info(
            "replication %d/%d: theta_hat=(%.4g, %.4g, %.5g) Qn=%.3g",
            i + 1, n_reps, res.theta_hat.beta, res.theta_hat.mu, res.theta_hat.l,
            res.objective,
        )
        return np.array([res.theta_hat.beta, res.theta_hat.mu, res.theta_hat.l])

    rows = map_chunks(run_rep, [1] * n_reps, workers)
    return StudyResult(true_params=true_params, theta_hats=np.vstack(rows), n_days=n_days)


class OUSupremaEstimator:
    """Scikit-learn-style front end: fit the model from daily extrema.

    X is either a DailyExtrema or an array of shape (n_days, 2) with columns
    (sup, inf).  After fit, `theta_` holds the fitted OUParams and `result_`
    the full EstimationResult.
    """

    def __init__(
        self,
        levels=DEFAULT_LEVELS,
        beta_fixed: float | None = None,
        grid: CdfGrid | None = None,
        max_iter: int = 300,
        diam_tol: float = 1e-3,
        workers: int = 1,
    ):
        self.levels = levels
        self.beta_fixed = beta_fixed
        self.grid = grid
        self.max_iter = max_iter
        self.diam_tol = diam_tol
        self.workers = workers

    _param_names = ("levels", "beta_fixed", "grid", "max_iter", "diam_tol", "workers")

    def get_params(self, deep: bool = True) -> dict:
        return {name: getattr(self, name) for name in self._param_names}

    def set_params(self, **params) -> "OUSupremaEstimator":
        for name, value in params.items():
            if name not in self._param_names:
                raise ValueError(f"unknown parameter {name!r} for OUSupremaEstimator")
            setattr(self, name, value)
        return self

    @staticmethod
    def _as_daily_extrema(X) -> DailyExtrema:
        if isinstance(X, DailyExtrema):
            return X
        arr = np.asarray(X, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise DataError("X must be a DailyExtrema or an array of shape (n_days, 2)")
        return DailyExtrema(sup=arr[:, 0], inf=arr[:, 1])

    def fit(self, X, y=None) -> "OUSupremaEstimator":
        data = self._as_daily_extrema(X)
        opt_cfg = OptConfig(max_iter=self.max_iter, diam_tol=self.diam_tol)
        anchors = QuantileAnchors.from_data(data, self.levels)
        if self.beta_fixed is None:
            result = estimate(data, anchors, self.grid, opt_cfg, workers=self.workers)
        else:
            result = estimate_2d(
                data, self.beta_fixed, anchors, self.grid, opt_cfg, workers=self.workers
            )
        self.result_ = result
        self.theta_ = result.theta_hat
        self.box_ = result.box
        self.anchors_ = result.anchors
        self.n_features_in_ = 2
        return self

    def _check_fitted(self):
        if not hasattr(self, "theta_"):
            raise EstimationError("this OUSupremaEstimator instance is not fitted yet")

    def sup_cdf(self, a: float, t: float = 1.0):
        self._check_fitted()
        return stationary_sup_cdf(a, self.theta_, t, self.grid or CdfGrid())

    def score(self, X, y=None) -> float:
        """Negative quantile least-squares objective of the fitted model on X."""
        self._check_fitted()
        data = self._as_daily_extrema(X)
        anchors = QuantileAnchors.from_data(data, self.levels)
        return -objective_qn(self.theta_, anchors, data, self.grid or CdfGrid())

    def predict_interval(
        self,
        x0: float,
        horizon_days: int = 10,
        level: float = 0.95,
        n_sims: int = 1000,
        dt: float = 1e-3,
        seed: int = 0,
    ):
        """Per-day prediction bounds for the daily suprema from X_0 = x0."""
        from .risk import prediction_intervals

        self._check_fitted()
        return prediction_intervals(
            self.theta_, x0, horizon_days, n_sims=n_sims, level=level, dt=dt, seed=seed
        )
