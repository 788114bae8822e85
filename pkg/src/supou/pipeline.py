"""Config-driven orchestration: estimation, risk, validation, plot data.

All outputs are machine-readable: one versioned report.json plus flat CSV
files (qq.csv, prediction.csv, replications.csv, trajectories.csv).  Outputs
are deterministic for a fixed (config, seed, worker count); nothing
wall-clock-dependent is written (runtimes are logged, not reported).  If a
stage fails, files already written by this run are removed and the error is
re-raised tagged with the stage name.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from ._util import ConfigError, DataError, EstimationError
from .estimator import (
    EstimationResult,
    OptConfig,
    estimate,
    estimate_2d,
    replication_study,
)
from .io import SeasonWindow, StationDataset, build_train_sample, ingest
from .process import OUParams, SimConfig, simulate_path
from .risk import (
    HeatwaveSpec,
    RiskReport,
    SingleThreshold,
    TwoThreshold,
    compute_risk_report,
    prediction_intervals,
)
from .supcdf import CdfGrid, sup_cdf_inverse
from .bridge import BridgeTableConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
QQ_LEVELS = tuple(np.round(np.arange(0.05, 0.951, 0.05), 2))

_DEFAULT_TRAJECTORY_SWEEPS = (
    {"label": "baseline", "beta": 47.5, "mu": 22.0, "l": 0.02},
    {"label": "beta_low", "beta": 4.75, "mu": 22.0, "l": 0.02},
    {"label": "beta_high", "beta": 475.0, "mu": 22.0, "l": 0.02},
    {"label": "l_low", "beta": 47.5, "mu": 22.0, "l": 0.002},
    {"label": "l_high", "beta": 47.5, "mu": 22.0, "l": 0.2},
    {"label": "mu_high", "beta": 47.5, "mu": 27.0, "l": 0.02},
)


@dataclass
class RunConfig:
    """Validated run settings; see RunConfig.from_dict for the JSON schema."""

    data_path: str | None = None
    data_format: str = "csv_simple"
    season: SeasonWindow = field(default_factory=SeasonWindow)
    train_years: list[int] = field(default_factory=list)
    test_years: list[int] = field(default_factory=list)
    grid: CdfGrid = field(default_factory=CdfGrid)
    optimizer: OptConfig = field(default_factory=OptConfig)
    params: OUParams | None = None
    beta_fixed: float | None = None
    heatwave: HeatwaveSpec = field(
        default_factory=lambda: HeatwaveSpec(TwoThreshold(a_max=31.0, a_min=21.0))
    )
    risk_n_sims: int = 1_000_000
    risk_dt: float = 1e-2
    severity_level: float | None = 26.67
    predict_horizon: int = 10
    predict_n_sims: int = 1000
    predict_level: float = 0.95
    predict_dt: float = 1e-3
    study_theta0: OUParams = field(default_factory=lambda: OUParams(47.5, 22.0, 0.02))
    study_n_days: list[int] = field(default_factory=lambda: [100, 1000])
    study_n_reps: int = 50
    study_dt: float = 1e-3
    study_beta_fixed: float | None = None
    trajectory_sweeps: list[dict] = field(
        default_factory=lambda: [dict(s) for s in _DEFAULT_TRAJECTORY_SWEEPS]
    )
    trajectory_horizon: int = 10
    trajectory_dt: float = 1e-4
    trajectory_x0: float = 22.0
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        overlap = set(self.train_years) & set(self.test_years)
        if overlap:
            raise ConfigError(f"train and test years overlap: {sorted(overlap)}")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @staticmethod
    def _years(raw) -> list[int]:
        if raw is None:
            return []
        if isinstance(raw, dict):
            return list(range(int(raw["first"]), int(raw["last"]) + 1))
        return [int(y) for y in raw]

    @classmethod
    def from_dict(cls, cfg: dict) -> "RunConfig":
        try:
            return cls._from_dict(cfg)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config: {exc}") from exc

    @classmethod
    def _from_dict(cls, cfg: dict) -> "RunConfig":
        kwargs: dict = {}
        data = cfg.get("data", {})
        kwargs["data_path"] = data.get("path")
        kwargs["data_format"] = data.get("format", "csv_simple")
        season = cfg.get("season", {})
        kwargs["season"] = SeasonWindow(
            SeasonWindow.parse(season.get("start", "06-15")),
            SeasonWindow.parse(season.get("end", "08-14")),
        )
        kwargs["train_years"] = cls._years(cfg.get("train_years"))
        kwargs["test_years"] = cls._years(cfg.get("test_years"))

        grid_cfg = cfg.get("grid", {})
        seed = int(cfg.get("seed", 0))
        if grid_cfg.get("profile") == "fast":
            grid = CdfGrid.fast(seed=seed)
        else:
            grid = CdfGrid(bridge=BridgeTableConfig(seed=seed))
        overrides = {k: grid_cfg[k] for k in ("u_steps", "x_nodes", "x_lower_sigmas") if k in grid_cfg}
        bridge_over = {
            k: grid_cfg[f"bridge_{k}"] for k in ("paths", "steps") if f"bridge_{k}" in grid_cfg
        }
        if overrides or bridge_over:
            bridge = BridgeTableConfig(
                paths=bridge_over.get("paths", grid.bridge.paths),
                steps=bridge_over.get("steps", grid.bridge.steps),
                chat_nodes=grid.bridge.chat_nodes,
                seed=seed,
            )
            grid = CdfGrid(
                u_steps=int(overrides.get("u_steps", grid.u_steps)),
                x_nodes=int(overrides.get("x_nodes", grid.x_nodes)),
                x_lower_sigmas=float(overrides.get("x_lower_sigmas", grid.x_lower_sigmas)),
                bridge=bridge,
            )
        kwargs["grid"] = grid

        opt = cfg.get("optimizer", {})
        kwargs["optimizer"] = OptConfig(
            max_iter=int(opt.get("max_iter", 300)),
            diam_tol=float(opt.get("diam_tol", 1e-3)),
        )
        if "params" in cfg and cfg["params"] is not None:
            b, m, l_ = cfg["params"]
            kwargs["params"] = OUParams(float(b), float(m), float(l_))
        kwargs["beta_fixed"] = cfg.get("beta_fixed")

        risk = cfg.get("risk", {})
        defn = risk.get("definition", {"type": "two_threshold", "a_max": 31.0, "a_min": 21.0})
        if defn.get("type") == "single":
            definition = SingleThreshold(a=float(defn["a"]))
        elif defn.get("type") == "two_threshold":
            definition = TwoThreshold(a_max=float(defn["a_max"]), a_min=float(defn["a_min"]))
        else:
            raise ConfigError(f"unknown heat-wave definition {defn.get('type')!r}")
        kwargs["heatwave"] = HeatwaveSpec(
            definition,
            delta=int(risk.get("delta", 3)),
            season_days=int(risk.get("season_days", 61)),
        )
        kwargs["risk_n_sims"] = int(risk.get("n_sims", 1_000_000))
        kwargs["risk_dt"] = float(risk.get("dt", 1e-2))
        kwargs["severity_level"] = risk.get("severity_level", 26.67)

        pred = cfg.get("prediction", {})
        kwargs["predict_horizon"] = int(pred.get("horizon_days", 10))
        kwargs["predict_n_sims"] = int(pred.get("n_sims", 1000))
        kwargs["predict_level"] = float(pred.get("level", 0.95))
        kwargs["predict_dt"] = float(pred.get("dt", 1e-3))

        study = cfg.get("study", {})
        if "theta0" in study:
            b, m, l_ = study["theta0"]
            kwargs["study_theta0"] = OUParams(float(b), float(m), float(l_))
        raw_days = study.get("n_days", [100, 1000])
        kwargs["study_n_days"] = [int(d) for d in (raw_days if isinstance(raw_days, list) else [raw_days])]
        kwargs["study_n_reps"] = int(study.get("n_reps", 50))
        kwargs["study_dt"] = float(study.get("dt", 1e-3))
        kwargs["study_beta_fixed"] = study.get("beta_fixed")

        traj = cfg.get("trajectories", {})
        if "sweeps" in traj:
            kwargs["trajectory_sweeps"] = [dict(s) for s in traj["sweeps"]]
        kwargs["trajectory_horizon"] = int(traj.get("horizon_days", 10))
        kwargs["trajectory_dt"] = float(traj.get("dt", 1e-4))
        kwargs["trajectory_x0"] = float(traj.get("x0", 22.0))

        kwargs["seed"] = seed
        kwargs["workers"] = int(cfg.get("workers", 1))
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)


class _OutputSet:
    """Tracks files written by one run so a failed stage can clean them up."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.created: list[Path] = []
        self.stage = "setup"

    def path(self, name: str) -> Path:
        p = self.out_dir / name
        self.created.append(p)
        return p

    def discard_all(self):
        for p in self.created:
            p.unlink(missing_ok=True)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])


def _mc_block(mc, units: str) -> dict:
    return {"value": float(mc.value), "std_error": float(mc.std_error), "units": units}


def _theta_block(theta: OUParams) -> dict:
    return {
        "beta": {"value": theta.beta, "units": "degC^2/day"},
        "mu": {"value": theta.mu, "units": "degC"},
        "l": {"value": theta.l, "units": "1/degC^2"},
    }


def _estimation_block(result: EstimationResult, drop_report) -> dict:
    return {
        "theta_hat": _theta_block(result.theta_hat),
        "objective": {"value": result.objective, "units": "1"},
        "box": {
            "beta_max": {"value": result.box.beta_max, "units": "degC^2/day"},
            "mu_min": {"value": result.box.mu_min, "units": "degC"},
            "mu_max": {"value": result.box.mu_max, "units": "degC"},
            "l_min": {"value": result.box.l_min, "units": "1/degC^2"},
            "l_max": {"value": result.box.l_max, "units": "1/degC^2"},
        },
        "anchors": {
            "levels": list(result.anchors.levels),
            "s_values": {"value": result.anchors.s_values.tolist(), "units": "degC"},
        },
        "per_anchor_residuals": result.per_anchor_residuals.tolist(),
        "iterations": result.iterations,
        "restarts_used": result.restarts_used,
        "n_evals": result.n_evals,
        "converged": result.converged,
        "dropped_days": drop_report.total_dropped if drop_report else 0,
        "train_days": drop_report.total_kept if drop_report else None,
    }


def _risk_block(report: RiskReport) -> dict:
    out = {
        "probability": _mc_block(report.probability, "1"),
        "n_sims": report.n_sims,
        "n_events": report.n_events,
        "seed": report.seed,
    }
    if report.mean_duration is not None:
        out["mean_duration"] = _mc_block(report.mean_duration, "day")
    if report.severity_area is not None:
        out["severity_area"] = _mc_block(report.severity_area, "degC*day")
    return out


def _load_train(cfg: RunConfig):
    if cfg.data_path is None:
        raise ConfigError("config has no data.path; cannot build a training sample")
    ds = ingest(cfg.data_path, cfg.data_format)
    if not cfg.train_years:
        raise ConfigError("config has no train_years")
    data, drop_report = build_train_sample(ds, cfg.train_years, cfg.season)
    return ds, data, drop_report


def _fit(cfg: RunConfig, data):
    if cfg.beta_fixed is not None:
        return estimate_2d(
            data, float(cfg.beta_fixed), grid=cfg.grid, opt_cfg=cfg.optimizer,
            workers=cfg.workers,
        )
    return estimate(data, grid=cfg.grid, opt_cfg=cfg.optimizer, workers=cfg.workers)


def _qq_rows(theta: OUParams, data, grid: CdfGrid):
    rows = []
    for lev in QQ_LEVELS:
        theo = sup_cdf_inverse(float(lev), theta, data.h, grid)
        emp = float(np.quantile(data.sup, float(lev)))
        rows.append((float(lev), theo, emp))
    theo_col = [r[1] for r in rows]
    emp_col = [r[2] for r in rows]
    rho = float(spearmanr(theo_col, emp_col).statistic)
    return rows, rho


def _prediction_rows(cfg: RunConfig, theta: OUParams, ds: StationDataset | None):
    """Prediction-interval table; adds observed maxima when test data exists.

    The start value is the mean temperature of the day before the first test
    season (per the validation protocol); without test data it falls back to
    the model mean.
    """
    x0 = theta.mu
    observed = None
    if ds is not None and cfg.test_years:
        year = min(cfg.test_years)
        season_dates = cfg.season.dates_in_year(year)
        by_date = {d: i for i, d in enumerate(ds.dates)}
        i0 = by_date.get(season_dates[0] - np.timedelta64(1, "D"))
        if i0 is not None and ds.valid[i0]:
            x0 = 0.5 * (float(ds.tmax[i0]) + float(ds.tmin[i0]))
        obs = []
        for d in season_dates[: cfg.predict_horizon]:
            i = by_date.get(d)
            obs.append(float(ds.tmax[i]) if i is not None and ds.valid[i] else np.nan)
        observed = obs
    bands = prediction_intervals(
        theta,
        x0,
        cfg.predict_horizon,
        n_sims=cfg.predict_n_sims,
        level=cfg.predict_level,
        dt=cfg.predict_dt,
        seed=cfg.seed,
        workers=cfg.workers,
    )
    rows = []
    for day in range(cfg.predict_horizon):
        row = [day + 1, float(bands.lower[day]), float(bands.upper[day])]
        if observed is not None:
            row.append(observed[day])
        rows.append(row)
    header = ["day", "lower", "upper"] + (["observed_tmax"] if observed is not None else [])
    return header, rows, x0


def write_trajectories(cfg: RunConfig, out_path: Path) -> list[str]:
    """Sample paths for parameter sweeps (one column per labelled setting)."""
    labels = []
    columns = []
    n_steps = int(round(cfg.trajectory_horizon / cfg.trajectory_dt))
    for sweep in cfg.trajectory_sweeps:
        theta = OUParams(float(sweep["beta"]), float(sweep["mu"]), float(sweep["l"]))
        sim = SimConfig(
            dt=cfg.trajectory_dt,
            horizon_days=cfg.trajectory_horizon,
            seed=cfg.seed,
            initial=cfg.trajectory_x0,
        )
        columns.append(simulate_path(theta, sim))
        labels.append(str(sweep.get("label", f"beta={theta.beta}")))
    times = np.arange(n_steps + 1) * cfg.trajectory_dt
    rows = zip(times, *columns)
    _write_csv(out_path, ["time_days"] + labels, ([t, *vals] for t, *vals in rows))
    return labels


def run_study(cfg: RunConfig, out_dir: str | Path) -> dict:
    """Replication study on simulated data; writes replications.csv."""
    outputs = _OutputSet(Path(out_dir))
    try:
        rows = []
        summaries = {}
        for n_days in cfg.study_n_days:
            study = replication_study(
                cfg.study_theta0,
                n_days=n_days,
                n_reps=cfg.study_n_reps,
                grid=cfg.grid,
                opt_cfg=cfg.optimizer,
                seed=cfg.seed,
                beta_fixed=cfg.study_beta_fixed,
                dt=cfg.study_dt,
                workers=cfg.workers,
            )
            for rep in range(study.theta_hats.shape[0]):
                b, m, l_ = study.theta_hats[rep]
                rows.append((n_days, rep, b, m, l_))
            rmse = study.relative_rmse()
            summaries[str(n_days)] = {
                "relative_rmse_beta": float(rmse[0]),
                "relative_rmse_mu": float(rmse[1]),
                "relative_rmse_l": float(rmse[2]),
            }
        _write_csv(
            outputs.path("replications.csv"),
            ["n_days", "replication", "beta_hat", "mu_hat", "l_hat"],
            rows,
        )
        report = {
            "schema_version": SCHEMA_VERSION,
            "study": {
                "theta0": _theta_block(cfg.study_theta0),
                "n_reps": cfg.study_n_reps,
                "relative_rmse": summaries,
            },
            "seed": cfg.seed,
            "workers": cfg.workers,
        }
        _write_report(outputs.path("report.json"), report)
        return report
    except BaseException:
        outputs.discard_all()
        raise


def _write_report(path: Path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _tag_stage(exc: BaseException, stage: str):
    known = (ConfigError, DataError, EstimationError)
    if isinstance(exc, known):
        raise type(exc)(f"[stage: {stage}] {exc}") from exc
    raise RuntimeError(f"[stage: {stage}] {exc}") from exc


def run_pipeline(
    cfg: RunConfig,
    out_dir: str | Path,
    stages: tuple[str, ...] = ("estimate", "risk", "predict", "trajectories"),
) -> dict:
    """Full report bundle: estimation, risk measures, validation, plot data.

    Any stage failure removes this run's partial outputs and re-raises the
    error tagged with the stage name.
    """
    outputs = _OutputSet(Path(out_dir))
    report: dict = {"schema_version": SCHEMA_VERSION, "seed": cfg.seed, "workers": cfg.workers}
    stage = "setup"
    try:
        theta = cfg.params
        ds = None
        data = None
        if "estimate" in stages:
            stage = "ingest"
            ds, data, drop_report = _load_train(cfg)
            stage = "estimate"
            result = _fit(cfg, data)
            report["estimation"] = _estimation_block(result, drop_report)
            theta = result.theta_hat
            stage = "validate"
            qq_rows, rho = _qq_rows(theta, data, cfg.grid)
            _write_csv(
                outputs.path("qq.csv"),
                ["level", "theoretical_quantile", "empirical_quantile"],
                qq_rows,
            )
            report["validation"] = {
                "qq_spearman": rho,
                "qq_levels": [float(v) for v in QQ_LEVELS],
            }
        if theta is None:
            raise ConfigError(
                "no parameters available: provide config 'params' or run the estimate stage"
            )
        report["params_used"] = _theta_block(theta)
        if "risk" in stages:
            stage = "risk"
            risk_report = compute_risk_report(
                theta,
                cfg.heatwave,
                severity_level=cfg.severity_level,
                n_sims=cfg.risk_n_sims,
                seed=cfg.seed,
                dt=cfg.risk_dt,
                workers=cfg.workers,
            )
            report["risk"] = _risk_block(risk_report)
        if "predict" in stages:
            stage = "predict"
            header, rows, x0 = _prediction_rows(cfg, theta, ds)
            _write_csv(outputs.path("prediction.csv"), header, rows)
            report["prediction"] = {
                "x0": {"value": float(x0), "units": "degC"},
                "level": cfg.predict_level,
                "horizon_days": cfg.predict_horizon,
                "n_sims": cfg.predict_n_sims,
            }
        if "trajectories" in stages:
            stage = "trajectories"
            labels = write_trajectories(cfg, outputs.path("trajectories.csv"))
            report["trajectories"] = {
                "labels": labels,
                "dt": cfg.trajectory_dt,
                "horizon_days": cfg.trajectory_horizon,
            }
        stage = "report"
        _write_report(outputs.path("report.json"), report)
        return report
    except BaseException as exc:
        outputs.discard_all()
        _tag_stage(exc, stage)
