"""Replication engine reproducing the paper-style experiment grids at desk
scale, plus the trade-off figure curves.

Every experiment is a pure function of (config, seed): data, releases and
fits all draw from child streams keyed by replication indices, so re-running
writes byte-identical outputs.

Scoring note: the first two experiment families report per-parameter root
mean square errors; the median-regression family reports mean absolute
errors, which is what its reference values turn out to be (see the variance
analysis in the test suite).
"""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from . import __version__ as _pkg_version
from .distributions import NoiseParams, sample_truncated_normal
from .errors import ParameterError
from .estimation import OptimOptions, _deattenuated_start, estimate
from .losses import make_loss
from .mechanism import Dataset, SupportBox, _timestamp, drdp_release
from .rng import GENERATOR_NAME, RngStream
from .tradeoff import (DEFAULT_ALPHA_GRID, PrivacyBudget, TradeoffCurve,
                       beta_c_delta, delta_profile_zil, empirical_tradeoff,
                       f_eps_delta, tradeoff_shrink)

_EXPERIMENTS = ("table1", "table2", "table3", "figure1")

_DEFAULTS = {
    "table1": dict(n=(500, 1000), replications=1000,
                   noise=((0.1, 0.94), (0.05, 1.4)),
                   losses=("mean-relu", "mean-indicator", "mean-abssin")),
    "table2": dict(n=(5000,), replications=200, noise=((0.2, 0.5),),
                   losses=("logistic",)),
    "table3": dict(n=(2500, 7500), replications=200, noise=((0.2, 2.0),),
                   losses=("check:0.5",)),
    "figure1": dict(n=(), replications=1, noise=((0.05, 0.5),), losses=()),
}

RESULT_COLUMNS = ["experiment", "n", "zero_mass", "lambda", "loss", "method",
                  "parameter", "metric", "value", "mc_se", "replications"]


@dataclass
class ExperimentConfig:
    experiment: str
    n: tuple = ()
    replications: int = 0
    noise: tuple = ()
    seed: int = 20240613
    outdir: str = "results"
    rep_scale: float = 1.0
    losses: tuple = ()
    covariate_sigma: float = 0.29
    n_sim: int = 100_000

    def __post_init__(self):
        if self.experiment not in _EXPERIMENTS:
            raise ParameterError(
                f"unknown experiment {self.experiment!r}; pick from {_EXPERIMENTS}")
        d = _DEFAULTS[self.experiment]
        if not self.n:
            self.n = tuple(d["n"])
        if not self.replications:
            self.replications = d["replications"]
        if not self.noise:
            self.noise = tuple(d["noise"])
        if not self.losses:
            self.losses = tuple(d["losses"])
        self.n = tuple(int(v) for v in self.n)
        self.noise = tuple((float(a), float(b)) for a, b in self.noise)
        self.losses = tuple(self.losses)
        self.replications = max(1, int(round(self.replications * self.rep_scale)))
        for zm, lam in self.noise:
            NoiseParams(zm, lam)  # validates

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            raw = json.load(fh)
        raw = {k: (tuple(map(tuple, v)) if k == "noise" and v else
                   tuple(v) if isinstance(v, list) else v)
               for k, v in raw.items()}
        return cls(**raw)


@dataclass
class ResultTable:
    frame: pd.DataFrame

    def cell(self, *, n=None, zero_mass=None, lam=None, method=None,
             loss=None, parameter=None) -> pd.DataFrame:
        f = self.frame
        for col, v in [("n", n), ("zero_mass", zero_mass), ("lambda", lam),
                       ("method", method), ("loss", loss), ("parameter", parameter)]:
            if v is not None:
                f = f[f[col] == v]
        return f

    def value(self, **kw) -> float:
        f = self.cell(**kw)
        if len(f) == 0:
            raise KeyError(f"no result cell matches {kw}")
        return float(f["value"].mean())

    def to_csv(self, path):
        self.frame.to_csv(path, index=False)

    @classmethod
    def from_csv(cls, path) -> "ResultTable":
        return cls(pd.read_csv(path, keep_default_na=False))


def _rmse_rows(errors: np.ndarray, names):
    """Per-parameter RMSE and its delta-method standard error."""
    e2 = errors**2
    m = e2.mean(axis=0)
    rmse = np.sqrt(m)
    se = e2.std(axis=0, ddof=1) / np.sqrt(len(e2)) / (2.0 * np.maximum(rmse, 1e-300))
    return [("rmse", nm, float(v), float(s)) for nm, v, s in zip(names, rmse, se)]


def _mae_rows(errors: np.ndarray, names):
    a = np.abs(errors)
    mae = a.mean(axis=0)
    se = a.std(axis=0, ddof=1) / np.sqrt(len(a))
    return [("mae", nm, float(v), float(s)) for nm, v, s in zip(names, mae, se)]


def _emit(records, config, outdir) -> ResultTable:
    frame = pd.DataFrame.from_records(records, columns=RESULT_COLUMNS)
    os.makedirs(outdir, exist_ok=True)
    frame.to_csv(os.path.join(outdir, "cells.csv"), index=False)
    for (n, zm, lam, loss, method), sub in frame.groupby(
            ["n", "zero_mass", "lambda", "loss", "method"], sort=True):
        name = f"n{n}_zm{zm:g}_lam{lam:g}_{loss.replace(':', '')}_{method}.csv"
        sub.to_csv(os.path.join(outdir, name), index=False)
    return ResultTable(frame)


def _write_manifest(config: ExperimentConfig, outdir, extra=None):
    import scipy

    os.makedirs(outdir, exist_ok=True)
    manifest = {
        "config": asdict(config),
        "seed": config.seed,
        "generator": GENERATOR_NAME,
        "versions": {"zildp": _pkg_version, "numpy": np.__version__,
                     "scipy": scipy.__version__, "pandas": pd.__version__},
        "created_at": _timestamp(),
    }
    if extra:
        manifest.update(extra)
    path = os.path.join(outdir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


_THETA0 = {"mean-relu": 0.5, "mean-indicator": 0.5, "mean-abssin": 2.0 / np.pi}


def run_table1(config: ExperimentConfig) -> ResultTable:
    """Scalar-transform losses on uniform data: oracle, the biased
    one-dataset comparator, and the doubly-random estimator."""
    root = RngStream(config.seed, stream_id=1)
    outdir = os.path.join(config.outdir, "table1")
    support = SupportBox(np.array([0.0]), np.array([1.0]), np.array([True]))
    opts = OptimOptions(max_iters=400)
    records = []
    for si, (zm, lam) in enumerate(config.noise):
        params = NoiseParams(zm, lam)
        for ni, n in enumerate(config.n):
            errs = {(ls, m): [] for ls in config.losses
                    for m in ("oracle", "sl", "drcl")}
            for rep in range(config.replications):
                stream = root.child(si, ni, rep)
                xv = stream.child(0).generator().random(n)
                data = Dataset(xv[:, None], ("x",), support)
                bundle = drdp_release(data, params, stream.child(1))
                x1 = bundle.x1[:, 0]
                x2 = bundle.x2[:, 0]
                for ls in config.losses:
                    loss = make_loss(ls)
                    th0 = _THETA0[ls]
                    ro = estimate("oracle", loss, x=xv, theta0=np.zeros(1),
                                  options=opts, with_covariance=False)
                    rs = estimate("sl", loss, x2=x2, theta0=np.zeros(1),
                                  options=opts, strict=False, with_covariance=False)
                    rd = estimate("drcl", loss, x1=x1, x2=x2, zero_mass=zm,
                                  theta0=np.zeros(1), options=opts,
                                  with_covariance=False)
                    errs[(ls, "oracle")].append(ro.theta_hat[0] - th0)
                    errs[(ls, "sl")].append(rs.theta_hat[0] - th0)
                    errs[(ls, "drcl")].append(rd.theta_hat[0] - th0)
            for ls in config.losses:
                for m in ("oracle", "sl", "drcl"):
                    e = np.asarray(errs[(ls, m)])[:, None]
                    for metric, pname, v, s in _rmse_rows(e, ["theta"]):
                        records.append(("table1", n, zm, lam, ls, m, pname,
                                        metric, v, s, config.replications))
    table = _emit(records, config, outdir)
    _write_manifest(config, outdir, {
        "dp_labels": {
            "(0.1, 0.94)": "(1.5,0.1)-DP",
            "(0.05, 1.4)": "(1,0.05)-DP; table caption prints (1.5,0.05)",
        }})
    return table


def _truncated_covariates(stream, n, d, sigma):
    z = sample_truncated_normal(np.full(d, -1.0 / sigma), np.full(d, 1.0 / sigma),
                                n, stream)
    return sigma * z


def run_table2(config: ExperimentConfig) -> ResultTable:
    """Logistic regression with privatized covariates; five estimators per cell."""
    root = RngStream(config.seed, stream_id=2)
    outdir = os.path.join(config.outdir, "table2")
    d = 6
    beta_star = np.ones(d)
    support = SupportBox(np.concatenate([np.full(d, -1.0), [-np.inf]]),
                         np.concatenate([np.full(d, 1.0), [np.inf]]),
                         np.concatenate([np.full(d, True), [False]]))
    loss = make_loss("logistic")
    opts = OptimOptions(max_iters=800)
    bounds = [(-8.0, 8.0)] * d
    methods = ("oracle", "naive", "sl", "sdrcl", "drcl")
    names = [f"beta{j}" for j in range(1, d + 1)]
    records = []
    for si, (zm, lam) in enumerate(config.noise):
        params = NoiseParams(zm, lam)
        for ni, n in enumerate(config.n):
            errs = {m: [] for m in methods}
            for rep in range(config.replications):
                stream = root.child(si, ni, rep)
                X = _truncated_covariates(stream.child(0), n, d, config.covariate_sigma)
                u = X @ beta_star
                y = (stream.child(1).generator().random(n)
                     < 1.0 / (1.0 + np.exp(-u))).astype(float)
                data = Dataset(np.column_stack([X, y]),
                               tuple(f"x{j}" for j in range(1, d + 1)) + ("y",),
                               support)
                bundle = drdp_release(data, params, stream.child(2))
                X1 = bundle.x1[:, :d]
                X2 = bundle.x2[:, :d]
                pub = y[:, None]
                kw = dict(options=opts, bounds=bounds, with_covariance=False)
                ro = estimate("oracle", loss, x=X, publics=pub,
                              theta0=np.zeros(d), **kw)
                rn = estimate("naive", loss, x1=X1, publics=pub,
                              theta0=np.zeros(d), **kw)
                rs = estimate("sl", loss, x2=X2, publics=pub, scale=lam,
                              theta0=rn.theta_hat, **kw)
                rm = estimate("sdrcl", loss, x1=X1, x2=X2, publics=pub,
                              zero_mass=zm, scale=lam, theta0=rn.theta_hat, **kw)
                rd = estimate("drcl", loss, x1=X1, x2=X2, publics=pub,
                              zero_mass=zm, theta0=rm.theta_hat, **kw)
                for m, r in zip(methods, (ro, rn, rs, rm, rd)):
                    errs[m].append(r.theta_hat - beta_star)
            for m in methods:
                e = np.asarray(errs[m])
                for metric, pname, v, s in _rmse_rows(e, names):
                    records.append(("table2", n, zm, lam, "logistic", m, pname,
                                    metric, v, s, config.replications))
    table = _emit(records, config, outdir)
    _write_manifest(config, outdir,
                    {"covariate_sigma": config.covariate_sigma,
                     "covariate_note": "truncated normal N(0, sigma^2) on [-1,1]"})
    return table


def run_table3(config: ExperimentConfig) -> ResultTable:
    """Median regression with privatized covariates and a public intercept."""
    root = RngStream(config.seed, stream_id=3)
    outdir = os.path.join(config.outdir, "table3")
    d = 6
    beta_star = np.concatenate([np.ones(d), [1.0]])  # [slopes..., intercept]
    support = SupportBox(
        np.concatenate([np.full(d, -1.0), [-np.inf, 1.0 - 1e-9]]),
        np.concatenate([np.full(d, 1.0), [np.inf, 1.0 + 1e-9]]),
        np.concatenate([np.full(d, True), [False, False]]))
    loss = make_loss("check:0.5")
    opts = OptimOptions(max_iters=800)
    bounds = [(-8.0, 8.0)] * (d + 1)
    methods = ("oracle", "naive", "drcl")
    names = [f"beta{j}" for j in range(1, d + 1)] + ["beta0"]
    records = []
    for si, (zm, lam) in enumerate(config.noise):
        params = NoiseParams(zm, lam)
        for ni, n in enumerate(config.n):
            errs = {m: [] for m in methods}
            for rep in range(config.replications):
                stream = root.child(si, ni, rep)
                X = _truncated_covariates(stream.child(0), n, d, 1.0)
                y = 1.0 + X @ np.ones(d) + stream.child(1).generator().standard_normal(n)
                ones = np.ones(n)
                data = Dataset(np.column_stack([X, y, ones]),
                               tuple(f"x{j}" for j in range(1, d + 1)) + ("y", "const"),
                               support)
                bundle = drdp_release(data, params, stream.child(2))
                X1 = bundle.x1[:, :d]
                X2 = bundle.x2[:, :d]
                pub = np.column_stack([y, ones])
                kw = dict(options=opts, bounds=bounds, with_covariance=False)
                ro = estimate("oracle", loss, x=X, publics=pub,
                              theta0=np.zeros(d + 1), **kw)
                rn = estimate("naive", loss, x1=X1, publics=pub,
                              theta0=np.zeros(d + 1), **kw)
                warm = _deattenuated_start(rn.theta_hat, X1, d, zm, lam)
                rd = estimate("drcl", loss, x1=X1, x2=X2, publics=pub,
                              zero_mass=zm, theta0=warm, **kw)
                for m, r in zip(methods, (ro, rn, rd)):
                    errs[m].append(r.theta_hat - beta_star)
            for m in methods:
                e = np.asarray(errs[m])
                for metric, pname, v, s in _mae_rows(e, names):
                    records.append(("table3", n, zm, lam, "check:0.5", m, pname,
                                    metric, v, s, config.replications))
    table = _emit(records, config, outdir)
    _write_manifest(config, outdir, {
        "metric_note": "cells are mean absolute errors; the reference table's "
                       "caption says RMSE but its values are MAEs"})
    return table


FIGURE1_EPSILONS = (0.5, 0.7, 0.9, 1.2, 1.6, 2.1, 2.8)
FIGURE1_CS = (0.2, 0.5, 0.8, 1.0)


def run_figure1(config: ExperimentConfig) -> dict:
    """Emit the trade-off overlay curves as CSV files.

    Curves: the limiting shrunk trade-off at c=0.5, empirical curves for
    d in {2, 4}, the (epsilon, delta) envelope polylines, and the limiting
    curves for four c values.
    """
    root = RngStream(config.seed, stream_id=4)
    outdir = os.path.join(config.outdir, "figure1")
    os.makedirs(outdir, exist_ok=True)
    zm, c_ref = config.noise[0]
    alphas = DEFAULT_ALPHA_GRID
    paths = {}

    def save(curve: TradeoffCurve, name: str):
        path = os.path.join(outdir, name)
        curve.to_csv(path)
        paths[name] = path

    for c in FIGURE1_CS:
        curve = TradeoffCurve(alphas, beta_c_delta(alphas, c, zm),
                              f"beta-c{c:g}-zm{zm:g}")
        save(curve, f"beta_c{c:g}_zm{zm:g}.csv")

    for di, d in enumerate((2, 4)):
        emp = empirical_tradeoff(d, c_ref, config.n_sim, root.child(di))
        save(tradeoff_shrink(emp, zm), f"empirical_T_d{d}_c{c_ref:g}_zm{zm:g}.csv")

    for eps in FIGURE1_EPSILONS:
        dd = delta_profile_zil(c_ref, eps, zm)
        env = f_eps_delta(alphas, PrivacyBudget(eps, dd))
        save(TradeoffCurve(alphas, env, f"envelope-eps{eps:g}"),
             f"envelope_eps{eps:g}.csv")

    _write_manifest(config, outdir, {"epsilons": list(FIGURE1_EPSILONS),
                                     "c_values": list(FIGURE1_CS)})
    return paths


def run_experiment(config: ExperimentConfig):
    runner = {"table1": run_table1, "table2": run_table2,
              "table3": run_table3, "figure1": run_figure1}[config.experiment]
    return runner(config)
