"""Monte Carlo harness for the excess-risk experiments.

Each experiment is a pure function of an :class:`ExperimentConfig`. Repeat
``r`` at sweep position ``i`` draws its randomness from the stream
``(master_seed, i, r)``, and per-repeat results are reduced in repeat order,
so output does not depend on how many worker threads ran the repeats.
"""

from __future__ import annotations

import csv
import io
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .advrisk import adv_risk, excess_adv_risk, solve_alpha, two_stage_map
from .asymptotics import theory_clean_excess_risk, theory_two_stage_limits
from .errors import ConfigError, DegenerateContextError, DegenerateLeverageError, PoleError
from .linmodel import GroundTruth, gen_gaussian_dataset, ridge_fit, ridge_path, sample_theta0
from .loocv import (
    DEFAULT_GRID,
    classical_ridge_loo,
    exact_cv_many,
    shortcut_cv,
)
from .vanilla import vanilla_adv_fit

EXPERIMENTS = ("fig-compare", "fig-theory", "fig-ridge", "fig-lambda", "table-cv")
METHODS = ("clean", "vanilla", "two_stage")
LAMBDA_POLICIES = ("zero", "fixed", "best", "cv")
THETA0_MODES = ("spherical", "ones_over_sqrt_d")

#: aspect ratios for the double-descent sweeps, denser around the pole
COMPARE_GAMMAS = (
    0.1, 0.2, 0.3, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 1.05,
    1.1, 1.2, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 4.5, 5.0,
)  # fmt: skip

CSV_COLUMNS = ("x_value", "method", "eps", "lambda", "mean_excess_risk", "std_err", "repeats")


@dataclass(frozen=True)
class ExperimentConfig:
    """Parameters of one experiment.

    ``gamma_grid`` sets ``d = round(gamma * n1)`` for each sweep point; the
    single-dimension experiments (``fig-lambda``, ``table-cv``) use its
    first entry.
    """

    experiment: str = "fig-compare"
    n1: int = 100
    gamma_grid: Tuple[float, ...] = COMPARE_GAMMAS
    eps_list: Tuple[float, ...] = (0.3,)
    lambda_policy: str = "zero"
    lam: float = 0.0
    lambda_grid: Tuple[float, ...] = DEFAULT_GRID
    sigma2: float = 1.0
    theta0_mode: str = "spherical"
    repeats: int = 100
    master_seed: int = 20240607
    methods: Tuple[str, ...] = METHODS
    exact_cv: bool = False

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}", key="experiment")
        if self.n1 < 2:
            raise ConfigError("n1 must be >= 2", key="n1")
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1", key="repeats")
        for key in ("gamma_grid", "eps_list", "lambda_grid", "methods"):
            if len(getattr(self, key)) == 0:
                raise ConfigError(f"{key} must be nonempty", key=key)
        if any(not g > 0 for g in self.gamma_grid):
            raise ConfigError("gamma values must be > 0", key="gamma_grid")
        if any(e < 0 for e in self.eps_list):
            raise ConfigError("eps values must be >= 0", key="eps_list")
        if any(not l > 0 for l in self.lambda_grid):
            raise ConfigError("lambda_grid values must be > 0", key="lambda_grid")
        if self.lam < 0:
            raise ConfigError("lam must be >= 0", key="lam")
        if self.sigma2 < 0:
            raise ConfigError("sigma2 must be >= 0", key="sigma2")
        if self.lambda_policy not in LAMBDA_POLICIES:
            raise ConfigError(f"unknown lambda_policy {self.lambda_policy!r}", key="lambda_policy")
        if self.theta0_mode not in THETA0_MODES:
            raise ConfigError(f"unknown theta0_mode {self.theta0_mode!r}", key="theta0_mode")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}", key="methods")

    def dims(self) -> List[int]:
        return [max(1, int(round(g * self.n1))) for g in self.gamma_grid]


def default_config(experiment: str) -> ExperimentConfig:
    """Reference configuration for ``experiment``."""
    if experiment in ("fig-compare", "fig-theory"):
        return ExperimentConfig(experiment=experiment)
    if experiment == "fig-ridge":
        return ExperimentConfig(experiment=experiment, eps_list=(0.0, 0.3), methods=("two_stage",))
    if experiment in ("fig-lambda", "table-cv"):
        eps = (0.0, 0.3, 0.5) if experiment == "fig-lambda" else (0.3, 0.5, 0.7)
        return ExperimentConfig(
            experiment=experiment,
            n1=50,
            gamma_grid=(4.0,),
            eps_list=eps,
            lambda_policy="best",
            sigma2=0.01,
            theta0_mode="ones_over_sqrt_d",
            repeats=30,
            methods=("two_stage",),
        )
    raise ConfigError(f"unknown experiment {experiment!r}", key="experiment")


@dataclass(frozen=True)
class CurveRow:
    x_value: float
    method: str
    eps: float
    lam: float
    mean: float
    se: float
    median: float
    repeats: int


@dataclass
class AggregateCurve:
    """Aggregated output of one experiment, one row per (x, method, eps).

    For ``table-cv`` the value column carries population adversarial risk
    (or the training CV loss) rather than excess risk.
    """

    experiment: str
    x_label: str
    rows: List[CurveRow] = field(default_factory=list)
    skipped: List[Tuple[float, str, str]] = field(default_factory=list)

    def series(self, method: str, eps: float):
        """``(x, mean, se, lam)`` arrays for one curve, in row order."""
        sel = [r for r in self.rows if r.method == method and r.eps == eps]
        return (
            np.array([r.x_value for r in sel]),
            np.array([r.mean for r in sel]),
            np.array([r.se for r in sel]),
            np.array([r.lam for r in sel]),
        )

    def value(self, x_value, method, eps) -> CurveRow:
        for r in self.rows:
            if r.x_value == x_value and r.method == method and r.eps == eps:
                return r
        raise KeyError((x_value, method, eps))

    def keys(self):
        seen = []
        for r in self.rows:
            if (r.method, r.eps) not in seen:
                seen.append((r.method, r.eps))
        return seen

    def csv_text(self, median: bool = False) -> str:
        """CSV with shortest round-trip floats; ``median`` swaps the mean
        column for the median."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = list(CSV_COLUMNS)
        if median:
            cols[4] = "median_excess_risk"
        w.writerow(cols)
        for r in self.rows:
            w.writerow(
                [
                    _fmt(r.x_value),
                    r.method,
                    _fmt(r.eps),
                    _fmt(r.lam),
                    _fmt(r.median if median else r.mean),
                    _fmt(r.se),
                    r.repeats,
                ]
            )
        return buf.getvalue()

    def write_csv(self, path, median: bool = False) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.csv_text(median=median))


def _fmt(v) -> str:
    return repr(float(v))


def _summary(values: Sequence[float]):
    a = np.asarray(values, dtype=float)
    mean = float(np.mean(a))
    se = float(np.std(a, ddof=1) / math.sqrt(a.size)) if a.size > 1 else 0.0
    return mean, se, float(np.median(a))


def map_repeats(fn: Callable[[int], object], repeats: int, threads: int = 1) -> list:
    """``[fn(0), ..., fn(repeats-1)]``, optionally on a thread pool."""
    if threads <= 1:
        return [fn(r) for r in range(repeats)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(repeats)))


def _truth(cfg: ExperimentConfig, d: int, i: int, r: int) -> GroundTruth:
    return sample_theta0(cfg.theta0_mode, d, seed=(cfg.master_seed, i, r, 0), sigma2=cfg.sigma2)


def _data(cfg, truth, i, r):
    return gen_gaussian_dataset(cfg.n1, truth.d, truth, (cfg.master_seed, i, r, 1))


def _two_stage(theta_hat, sigma2, eps):
    return two_stage_map(theta_hat, solve_alpha(float(np.linalg.norm(theta_hat)), sigma2, eps))


def _candidate_lams(cfg) -> List[float]:
    if cfg.lambda_policy == "zero":
        return [0.0]
    if cfg.lambda_policy == "fixed":
        return [float(cfg.lam)]
    return sorted(float(l) for l in cfg.lambda_grid)


# -- excess risk vs aspect ratio: clean, vanilla, two-stage ----------------


def run_excess_risk_sweep(cfg: ExperimentConfig, threads: int = 1) -> AggregateCurve:
    """Excess adversarial risk versus ``gamma`` for each requested method.

    ``lambda_policy`` picks the penalty: ``zero`` and ``fixed`` use one value,
    ``best`` the grid point minimising the mean excess risk per method, and
    ``cv`` a per-repeat leave-one-out choice (classical for the clean
    estimate, the two-stage shortcut for the two-stage estimate).
    """
    if cfg.lambda_policy == "cv" and "vanilla" in cfg.methods:
        raise ConfigError("cv policy has no selection rule for the vanilla estimator", key="lambda_policy")
    lams = _candidate_lams(cfg)
    curve = AggregateCurve(cfg.experiment, "gamma")
    for i, (g, d) in enumerate(zip(cfg.gamma_grid, cfg.dims())):

        def one(r, i=i, d=d):
            truth = _truth(cfg, d, i, r)
            data = _data(cfg, truth, i, r)
            path = ridge_path(data, lams)
            out = {}
            for eps in cfg.eps_list:
                for m in cfg.methods:
                    if m == "clean":
                        thetas = path
                    elif m == "two_stage":
                        thetas = [_two_stage(th, cfg.sigma2, eps) for th in path]
                    else:
                        thetas = [vanilla_adv_fit(data, eps, lam) for lam in lams]
                    out[(m, eps)] = np.array([excess_adv_risk(th, truth, eps) for th in thetas])
                if cfg.lambda_policy == "cv":
                    out.update(_cv_pick(cfg, data, lams, eps, out))
            return out

        results = map_repeats(one, cfg.repeats, threads)
        for eps in cfg.eps_list:
            for m in cfg.methods:
                vals = np.array([res[(m, eps)] for res in results])
                if cfg.lambda_policy == "cv":
                    picks = np.array([res[("pick", m, eps)] for res in results])
                    chosen = vals[np.arange(vals.shape[0]), picks]
                    lam = float(np.median(np.asarray(lams)[picks]))
                else:
                    k = int(np.argmin(vals.mean(axis=0)))
                    chosen, lam = vals[:, k], lams[k]
                mean, se, med = _summary(chosen)
                curve.rows.append(CurveRow(float(g), m, float(eps), float(lam), mean, se, med, cfg.repeats))
    return curve


def _cv_pick(cfg, data, lams, eps, out):
    clean = [classical_ridge_loo(data, lam) for lam in lams]
    picks = {("pick", "clean", eps): int(np.argmin(clean))}
    if "two_stage" in cfg.methods:
        if eps == 0:
            picks[("pick", "two_stage", eps)] = picks[("pick", "clean", eps)]
        else:
            cv = [shortcut_cv(data, lam, eps, cfg.sigma2) for lam in lams]
            picks[("pick", "two_stage", eps)] = int(np.nanargmin(cv))
    return picks


# -- limiting curves --------------------------------------------------------


def run_theory_curves(cfg: ExperimentConfig) -> AggregateCurve:
    """Limiting excess risk of the clean and two-stage estimates versus
    ``gamma``; ``E|theta0|^2 = 1`` for both truth modes. Poles are skipped
    and listed in ``skipped``."""
    if cfg.lambda_policy == "cv":
        raise ConfigError("the theory curves take a fixed or best penalty", key="lambda_policy")
    lams = _candidate_lams(cfg)
    curve = AggregateCurve(cfg.experiment, "gamma")
    r2 = 1.0
    for g in cfg.gamma_grid:
        for eps in cfg.eps_list:
            for m in cfg.methods:
                if m == "vanilla":
                    continue
                vals = []
                for lam in lams:
                    try:
                        if m == "clean":
                            vals.append(theory_clean_excess_risk(g, lam, r2, cfg.sigma2, eps))
                        else:
                            vals.append(theory_two_stage_limits(g, lam, r2, cfg.sigma2, eps).excess_risk)
                    except PoleError as exc:
                        vals.append(math.nan)
                        curve.skipped.append((float(g), m, str(exc)))
                v = np.asarray(vals)
                if np.all(np.isnan(v)):
                    continue
                k = int(np.nanargmin(v))
                curve.rows.append(CurveRow(float(g), m, float(eps), float(lams[k]), float(v[k]), 0.0, float(v[k]), 0))
    return curve


# -- ridgeless vs tuned penalty --------------------------------------------


def run_ridge_vs_ridgeless(cfg: ExperimentConfig, threads: int = 1) -> AggregateCurve:
    """Two-stage excess risk at ``lambda = 0`` and at the grid penalty with the
    lowest mean excess risk, per ``gamma`` and ``eps``. With ``eps = 0`` the
    two-stage estimate is the clean one. The ridgeless point belongs to the
    candidate set, so the tuned curve never lies above the ridgeless one."""
    lams = [0.0] + sorted(float(l) for l in cfg.lambda_grid)
    curve = AggregateCurve(cfg.experiment, "gamma")
    for i, (g, d) in enumerate(zip(cfg.gamma_grid, cfg.dims())):

        def one(r, i=i, d=d):
            truth = _truth(cfg, d, i, r)
            path = ridge_path(_data(cfg, truth, i, r), lams)
            return {
                eps: np.array([excess_adv_risk(_two_stage(th, cfg.sigma2, eps), truth, eps) for th in path])
                for eps in cfg.eps_list
            }

        results = map_repeats(one, cfg.repeats, threads)
        for eps in cfg.eps_list:
            vals = np.array([res[eps] for res in results])
            k = int(np.argmin(vals.mean(axis=0)))
            for name, idx in (("ridgeless", 0), ("best_lambda", k)):
                mean, se, med = _summary(vals[:, idx])
                curve.rows.append(CurveRow(float(g), name, float(eps), lams[idx], mean, se, med, cfg.repeats))
    return curve


# -- penalty sweep ---------------------------------------------------------


def run_lambda_sweep(cfg: ExperimentConfig, threads: int = 1) -> AggregateCurve:
    """Mean two-stage excess risk versus ``lambda`` at ``d = gamma_grid[0] n1``."""
    lams = sorted(float(l) for l in cfg.lambda_grid)
    d = cfg.dims()[0]

    def one(r):
        truth = _truth(cfg, d, 0, r)
        path = ridge_path(_data(cfg, truth, 0, r), lams)
        return {
            eps: np.array([excess_adv_risk(_two_stage(th, cfg.sigma2, eps), truth, eps) for th in path])
            for eps in cfg.eps_list
        }

    results = map_repeats(one, cfg.repeats, threads)
    curve = AggregateCurve(cfg.experiment, "lambda")
    for eps in cfg.eps_list:
        vals = np.array([res[eps] for res in results])
        for k, lam in enumerate(lams):
            mean, se, med = _summary(vals[:, k])
            curve.rows.append(CurveRow(lam, "two_stage", float(eps), lam, mean, se, med, cfg.repeats))
    return curve


def argmin_lambda(curve: AggregateCurve, eps: float, method: str = "two_stage") -> float:
    """Penalty with the lowest mean in a :func:`run_lambda_sweep` curve."""
    x, mean, _, _ = curve.series(method, eps)
    return float(x[int(np.argmin(mean))])


# -- Table: cross-validated penalty ------------------------------------------


@dataclass(frozen=True)
class CvTableRow:
    """Per-``eps`` averages over repeats.

    ``risk_*`` are population adversarial risks of the two-stage estimate at
    the penalty chosen by: the two-stage shortcut CV (``cv``), classical
    ridge CV (``clean_cv``) and the per-repeat grid oracle (``best``).
    ``lambda_*`` are medians of the chosen penalties.
    """

    eps: float
    cv_loss: float
    risk_cv: float
    risk_clean_cv: float
    risk_best: float
    lambda_cv: float
    lambda_clean_cv: float
    lambda_best: float
    se_risk_cv: float
    se_risk_clean_cv: float
    se_risk_best: float
    repeats: int
    exact_cv_loss: Optional[float] = None
    risk_exact_cv: Optional[float] = None
    lambda_exact_cv: Optional[float] = None


@dataclass
class CvTable:
    rows: List[CvTableRow]
    skipped: List[Tuple[int, str]] = field(default_factory=list)

    def row(self, eps) -> CvTableRow:
        for r in self.rows:
            if r.eps == eps:
                return r
        raise KeyError(eps)

    def to_curve(self) -> AggregateCurve:
        """Long format for the shared CSV layout; ``x_value`` is ``eps``."""
        curve = AggregateCurve("table-cv", "eps", skipped=[(float(r), "cv", m) for r, m in self.skipped])
        for t in self.rows:
            items = [
                ("cv_loss", t.lambda_cv, t.cv_loss, 0.0),
                ("two_stage_cv", t.lambda_cv, t.risk_cv, t.se_risk_cv),
                ("clean_cv", t.lambda_clean_cv, t.risk_clean_cv, t.se_risk_clean_cv),
                ("best_lambda", t.lambda_best, t.risk_best, t.se_risk_best),
            ]
            if t.exact_cv_loss is not None:
                items += [
                    ("exact_cv_loss", t.lambda_exact_cv, t.exact_cv_loss, 0.0),
                    ("two_stage_exact_cv", t.lambda_exact_cv, t.risk_exact_cv, 0.0),
                ]
            for name, lam, val, se in items:
                curve.rows.append(CurveRow(t.eps, name, t.eps, lam, val, se, val, t.repeats))
        return curve


def run_cv_table(cfg: ExperimentConfig, threads: int = 1) -> CvTable:
    """Population risk of the two-stage estimate under three penalty choices."""
    lams = sorted(float(l) for l in cfg.lambda_grid)
    d = cfg.dims()[0]
    eps_list = [float(e) for e in cfg.eps_list]

    def one(r):
        truth = _truth(cfg, d, 0, r)
        data = _data(cfg, truth, 0, r)
        clean_cv, cv, risk, ex = [], {e: [] for e in eps_list}, {e: [] for e in eps_list}, None
        for lam in lams:
            fit = ridge_fit(data, lam)
            try:
                clean_cv.append(classical_ridge_loo(data, lam, fit=fit))
            except DegenerateLeverageError:
                clean_cv.append(math.nan)
            for e in eps_list:
                try:
                    cv[e].append(shortcut_cv(data, lam, e, cfg.sigma2, fit=fit))
                except (DegenerateLeverageError, DegenerateContextError):
                    cv[e].append(math.nan)
                risk[e].append(adv_risk(_two_stage(fit.theta_hat, cfg.sigma2, e), truth.theta0, cfg.sigma2, e))
        if cfg.exact_cv:
            ex = {e: [] for e in eps_list}
            for lam in lams:
                vals = exact_cv_many(data, lam, eps_list, cfg.sigma2)
                for e in eps_list:
                    ex[e].append(vals[e])
        return clean_cv, cv, risk, ex

    results = map_repeats(one, cfg.repeats, threads)
    table = CvTable(rows=[])
    lam_arr = np.asarray(lams)
    kept = []
    for r, (clean_cv, cv, _, _) in enumerate(results):
        if np.all(np.isnan(clean_cv)) or any(np.all(np.isnan(cv[e])) for e in eps_list):
            table.skipped.append((r, "every grid point degenerate"))
            warnings.warn(f"repeat {r}: every grid point degenerate; skipped", RuntimeWarning, stacklevel=2)
        else:
            kept.append(r)
    if not kept:
        raise DegenerateContextError("no repeat produced a usable CV curve")
    for e in eps_list:
        loss, rcv, rclean, rbest, lcv, lclean, lbest = [], [], [], [], [], [], []
        xloss, xrisk, xlam = [], [], []
        for r in kept:
            clean_cv, cv, risk, ex = results[r]
            rk = np.asarray(risk[e])
            i_cv = int(np.nanargmin(cv[e]))
            i_cl = int(np.nanargmin(clean_cv))
            i_b = int(np.argmin(rk))
            loss.append(cv[e][i_cv])
            rcv.append(rk[i_cv])
            rclean.append(rk[i_cl])
            rbest.append(rk[i_b])
            lcv.append(lam_arr[i_cv])
            lclean.append(lam_arr[i_cl])
            lbest.append(lam_arr[i_b])
            if ex is not None:
                i_x = int(np.nanargmin(ex[e]))
                xloss.append(ex[e][i_x])
                xrisk.append(rk[i_x])
                xlam.append(lam_arr[i_x])
        s_cv, s_cl, s_b = _summary(rcv), _summary(rclean), _summary(rbest)
        table.rows.append(
            CvTableRow(
                eps=e,
                cv_loss=float(np.mean(loss)),
                risk_cv=s_cv[0],
                risk_clean_cv=s_cl[0],
                risk_best=s_b[0],
                lambda_cv=float(np.median(lcv)),
                lambda_clean_cv=float(np.median(lclean)),
                lambda_best=float(np.median(lbest)),
                se_risk_cv=s_cv[1],
                se_risk_clean_cv=s_cl[1],
                se_risk_best=s_b[1],
                repeats=len(kept),
                exact_cv_loss=float(np.mean(xloss)) if xloss else None,
                risk_exact_cv=float(np.mean(xrisk)) if xrisk else None,
                lambda_exact_cv=float(np.median(xlam)) if xlam else None,
            )
        )
    return table


def run_experiment(cfg: ExperimentConfig, threads: int = 1) -> AggregateCurve:
    """Dispatch on ``cfg.experiment``; the table is returned in long format."""
    if cfg.experiment == "fig-compare":
        return run_excess_risk_sweep(cfg, threads)
    if cfg.experiment == "fig-theory":
        return run_theory_curves(cfg)
    if cfg.experiment == "fig-ridge":
        return run_ridge_vs_ridgeless(cfg, threads)
    if cfg.experiment == "fig-lambda":
        return run_lambda_sweep(cfg, threads)
    return run_cv_table(cfg, threads).to_curve()


__all__ = [
    "AggregateCurve",
    "CSV_COLUMNS",
    "CurveRow",
    "CvTable",
    "CvTableRow",
    "EXPERIMENTS",
    "ExperimentConfig",
    "COMPARE_GAMMAS",
    "argmin_lambda",
    "map_repeats",
    "default_config",
    "run_cv_table",
    "run_excess_risk_sweep",
    "run_experiment",
    "run_lambda_sweep",
    "run_ridge_vs_ridgeless",
    "run_theory_curves",
]
