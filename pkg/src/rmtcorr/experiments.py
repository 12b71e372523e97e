"""Seeded Monte Carlo experiments with CSV rows and a JSON summary.

Every replication ``r`` draws its data from the substream seed
``substream_seed(master_seed, r)``, which is written into its CSV row, so a
single row can be reproduced on its own. Results are aggregated in
replication order, which makes the output independent of the worker count.
"""

from __future__ import annotations

import copy
import csv
import io
import json
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .datagen import DataModel, build_A, generate
from .estimators import (
    ThresholdRule,
    estimate_correlation_moments,
    reconstruct_spectrum,
    threshold_estimate,
)
from .lsd import AtomicMeasure, law_from_stieltjes, mp_law, semicircle_law
from .matrix import EmpiricalSpectralDistribution, eigenvalues, kolmogorov_distance, spectral_norm
from .rng import substream_seed
from .spiked import SpikedModel, classify_spikes
from .stats import (
    comparison_report,
    extreme_from_eigenvalues,
    max_offdiag_scaled,
    q_transform,
    sample_correlation,
    sample_covariance,
)

__all__ = [
    "SCHEMA_VERSION",
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "ExperimentResult",
    "load_config",
    "apply_overrides",
    "preflight",
    "run_experiment",
    "write_rows_csv",
    "write_summary_json",
    "default_jobs",
]

SCHEMA_VERSION = 1
BASE_COLUMNS = ["experiment", "rep", "seed", "status"]

PARAM_DEFAULTS: dict[str, dict[str, Any]] = {
    "diag-compare": {"n_grid": None, "expect": None, "seedwise_fraction": None},
    "lsd-check": {"regime": "proportional", "eta": 1e-4, "max_distance": 0.05},
    "extremes": {"matrix": "R"},
    "threshold": {"M": 2.1, "improve_fraction": 1.0, "diagonal_fraction": 0.9},
    "spectrum-estimate": {"ell": 6, "max_l1": 0.15},
    "spiked": {"tol": 0.1},
}
EXPERIMENTS = tuple(PARAM_DEFAULTS)


class ConfigError(ValueError):
    """Invalid experiment configuration; ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass
class ExperimentConfig:
    experiment: str
    model: DataModel
    reps: int = 20
    master_seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)
    bands: dict[str, dict[str, float]] = field(default_factory=dict)
    out: str | None = None

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ExperimentConfig:
        if not isinstance(d, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        unknown = set(d) - {"experiment", "model", "reps", "master_seed", "params", "bands", "out"}
        if unknown:
            raise ConfigError(sorted(unknown)[0], "unknown field")
        exp = d.get("experiment")
        if exp not in PARAM_DEFAULTS:
            raise ConfigError("experiment", f"expected one of {list(EXPERIMENTS)}, got {exp!r}")
        if "model" not in d:
            raise ConfigError("model", "missing")
        try:
            model = DataModel.from_dict(d["model"])
        except (ValueError, TypeError, KeyError) as exc:
            raise ConfigError("model", str(exc)) from None
        reps = d.get("reps", 20)
        if not isinstance(reps, int) or reps < 1:
            raise ConfigError("reps", f"must be a positive integer, got {reps!r}")
        seed = d.get("master_seed", 0)
        if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
            raise ConfigError("master_seed", f"must be a 64-bit nonnegative integer, got {seed!r}")
        params = dict(PARAM_DEFAULTS[exp])
        given = d.get("params", {}) or {}
        if not isinstance(given, dict):
            raise ConfigError("params", "must be an object")
        for k in given:
            if k not in params:
                raise ConfigError(f"params.{k}", f"unknown parameter for {exp}")
        params.update(given)
        bands = d.get("bands", {}) or {}
        if not isinstance(bands, dict):
            raise ConfigError("bands", "must be an object")
        cfg = cls(exp, model, reps, seed, params, {k: dict(v) for k, v in bands.items()}, d.get("out"))
        cfg.validate()
        return cfg

    def to_dict(self) -> dict[str, Any]:
        return {
            "experiment": self.experiment,
            "model": self.model.to_dict(),
            "reps": self.reps,
            "master_seed": self.master_seed,
            "params": self.params,
            "bands": self.bands,
            "out": self.out,
        }

    def validate(self) -> None:
        """Check experiment parameters before any replication starts."""
        p, n, prm = self.model.p, self.model.n, self.params
        if self.experiment == "diag-compare":
            grid = prm["n_grid"]
            if grid is not None and (not isinstance(grid, list) or not grid or any(
                    not isinstance(v, int) or v < 2 for v in grid)):
                raise ConfigError("params.n_grid", "must be a list of integers >= 2")
            if prm["expect"] not in (None, "decreasing", "increasing"):
                raise ConfigError("params.expect", "must be 'decreasing', 'increasing' or null")
            frac = prm["seedwise_fraction"]
            if frac is not None and not 0 < frac <= 1:
                raise ConfigError("params.seedwise_fraction", "must lie in (0, 1]")
            if frac is not None and prm["expect"] is None:
                raise ConfigError("params.seedwise_fraction", "needs params.expect")
        elif self.experiment == "lsd-check":
            if prm["regime"] not in ("proportional", "zero"):
                raise ConfigError("params.regime", "must be 'proportional' or 'zero'")
            if not prm["eta"] > 0:
                raise ConfigError("params.eta", "must be positive")
        elif self.experiment == "extremes":
            if prm["matrix"] not in ("R", "S"):
                raise ConfigError("params.matrix", "must be 'R' or 'S'")
        elif self.experiment == "threshold":
            if not prm["M"] > 0:
                raise ConfigError("params.M", "must be positive")
            if p < 2:
                raise ConfigError("model.p", "thresholding needs p >= 2")
        elif self.experiment == "spectrum-estimate":
            ell = prm["ell"]
            if not isinstance(ell, int) or not 2 <= ell <= 8:
                raise ConfigError("params.ell", "must be an integer in [2, 8]")
            if n < ell:
                raise ConfigError("model.n", f"must be at least ell={ell}")
        elif self.experiment == "spiked":
            if self.model.mixing.kind != "spiked":
                raise ConfigError("model.mixing", "spiked experiment needs a spiked mixing")
            if not prm["tol"] > 0:
                raise ConfigError("params.tol", "must be positive")
        for name, band in self.bands.items():
            keys = set(band)
            if not (keys <= {"lo", "hi"} and keys) and not (keys <= {"target", "tol"} and "tol" in keys):
                raise ConfigError(f"bands.{name}", "use {lo, hi} or {target, tol}")
        try:
            build_A(self.model.mixing)
        except ValueError as exc:
            raise ConfigError("model.mixing_params", str(exc)) from None


def load_config(path: str, overrides: list[str] | None = None) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(path, exc.strerror or str(exc)) from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    if overrides:
        d = apply_overrides(d, overrides)
    return ExperimentConfig.from_dict(d)


def apply_overrides(d: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``key.sub=value`` assignments; values are parsed as JSON when possible."""
    d = copy.deepcopy(d)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "override must look like key=value")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        parts = key.split(".")
        node = d
        for part in parts[:-1]:
            nxt = node.setdefault(part, {})
            if not isinstance(nxt, dict):
                raise ConfigError(key, f"{part} is not an object")
            node = nxt
        node[parts[-1]] = value
    return d


# replications

def _truth_spectrum(model: DataModel) -> np.ndarray:
    return eigenvalues(build_A(model.mixing).gamma)


def _is_identity(model: DataModel) -> bool:
    mix = model.mixing
    return mix.kind in ("identity", "row_scaled") or (mix.kind == "ar1" and mix.rho == 0.0)


def _prepare(cfg: ExperimentConfig) -> dict[str, Any]:
    """Deterministic per-experiment context shared by all replications."""
    model = cfg.model
    ctx: dict[str, Any] = {}
    if cfg.experiment == "diag-compare":
        ctx["n_grid"] = cfg.params["n_grid"] or [model.n]
    elif cfg.experiment == "lsd-check":
        gamma = model.p / model.n
        H = None if _is_identity(model) else AtomicMeasure.from_eigenvalues(_truth_spectrum(model))
        if cfg.params["regime"] == "zero":
            ctx["law"] = semicircle_law() if H is None else law_from_stieltjes(
                "general_zero_gamma", H=H, eta=cfg.params["eta"])
        else:
            ctx["law"] = mp_law(gamma) if H is None else law_from_stieltjes(
                "general", gamma, H, eta=cfg.params["eta"])
    elif cfg.experiment == "spectrum-estimate":
        ctx["truth"] = _truth_spectrum(model)
    elif cfg.experiment == "spiked":
        lam = np.asarray(model.mixing.lam)
        spec = eigenvalues(lam)
        groups: list[list[float]] = []
        for v in spec:
            if groups and abs(groups[-1][0] - v) < 1e-8:
                groups[-1].append(v)
            else:
                groups.append([v])
        spikes = [(float(np.round(np.mean(g), 12)) + 0.0, len(g)) for g in groups]
        sm = SpikedModel(tuple(s for s in spikes if abs(s[0] - 1.0) > 1e-9),
                         gamma=model.p / model.n, p=model.p)
        ctx["predictions"] = classify_spikes(sm)
    return ctx


def columns_for(cfg: ExperimentConfig, ctx: dict[str, Any]) -> list[str]:
    exp = cfg.experiment
    if exp == "diag-compare":
        cols = ["n", "diag_gap", "inv_sqrt_gap", "r_vs_q_gap", "weyl_shift", "weyl_ok"]
    elif exp == "lsd-check":
        cols = ["n", "kolmogorov"]
    elif exp == "extremes":
        cols = ["top_scaled", "bottom_scaled", "lambda_max", "lambda_min"]
    elif exp == "threshold":
        cols = ["t_p", "norm_r", "norm_rhat", "improved", "rhat_diagonal", "offdiag_kept", "max_offdiag_scaled"]
    elif exp == "spectrum-estimate":
        cols = [f"m{k}" for k in range(2, cfg.params["ell"] + 1)] + ["l1_error", "hankel_min", "trace_residual"]
    else:
        cols = [f"lambda_{r}" for pr in ctx["predictions"] if pr.ranks for r in pr.ranks]
    return BASE_COLUMNS + cols + ["error"]


def _correlation_parts(X):
    S = sample_covariance(X)
    return S, sample_correlation(S)


def _replicate(cfg: ExperimentConfig, ctx: dict[str, Any], rep: int) -> list[dict[str, Any]]:
    seed = substream_seed(cfg.master_seed, rep)
    base = {"experiment": cfg.experiment, "rep": rep, "seed": seed}
    model = cfg.model.with_seed(seed)
    p = model.p
    exp = cfg.experiment
    rows = []
    if exp == "diag-compare":
        sigma = build_A(model.mixing).sigma
        for n in ctx["n_grid"]:
            X = generate(model.with_n(n))
            S, R = _correlation_parts(X)
            rep_ = comparison_report(X, sigma, S=S, R=R)
            SQ = q_transform(X, sigma)
            shift = float(np.max(np.abs(eigenvalues(R) - eigenvalues(SQ))))
            bound = rep_.r_vs_q_gap / math.sqrt(n / p)
            rows.append({**base, "n": n, "diag_gap": rep_.diag_gap, "inv_sqrt_gap": rep_.inv_sqrt_gap,
                         "r_vs_q_gap": rep_.r_vs_q_gap, "weyl_shift": shift,
                         "weyl_ok": int(shift <= bound * (1 + 1e-9) + 1e-12)})
        return rows
    X = generate(model)
    n = model.n
    S, R = _correlation_parts(X)
    if exp == "lsd-check":
        if cfg.params["regime"] == "zero":
            gamma_m = build_A(model.mixing).gamma.values
            w = eigenvalues(math.sqrt(n / p) * (R.values - gamma_m))
        else:
            w = eigenvalues(R)
        d = kolmogorov_distance(EmpiricalSpectralDistribution(w), ctx["law"])
        rows.append({**base, "n": n, "kolmogorov": d})
    elif exp == "extremes":
        M = R if cfg.params["matrix"] == "R" else S
        e = extreme_from_eigenvalues(eigenvalues(M), n, p)
        rows.append({**base, "top_scaled": e.top_scaled, "bottom_scaled": e.bottom_scaled,
                     "lambda_max": e.lambda_max, "lambda_min": e.lambda_min})
    elif exp == "threshold":
        rule = ThresholdRule(p, n, cfg.params["M"])
        gamma_m = build_A(model.mixing).gamma.values
        Rh = threshold_estimate(R, rule)
        off = Rh.values - np.diag(np.diag(Rh.values))
        norm_r = spectral_norm(R.values - gamma_m)
        norm_rh = spectral_norm(Rh.values - gamma_m)
        kept = int(np.count_nonzero(np.triu(off, 1)))
        rows.append({**base, "t_p": rule.t, "norm_r": norm_r, "norm_rhat": norm_rh,
                     "improved": int(norm_rh < norm_r), "rhat_diagonal": int(kept == 0),
                     "offdiag_kept": kept, "max_offdiag_scaled": max_offdiag_scaled(R, n, p)})
    elif exp == "spectrum-estimate":
        ell = cfg.params["ell"]
        mv = estimate_correlation_moments(X, ell)
        est = reconstruct_spectrum(mv, strict=False)
        row = {**base, **{f"m{k}": v for k, v in zip(range(2, ell + 1), mv.values)}}
        row.update(l1_error=est.l1_error(ctx["truth"]), hankel_min=est.hankel_min,
                   trace_residual=est.trace_residual)
        rows.append(row)
    elif exp == "spiked":
        w = eigenvalues(R)
        row = dict(base)
        for pr in ctx["predictions"]:
            for r in pr.ranks or []:
                row[f"lambda_{r}"] = float(w[r - 1])
        rows.append(row)
    return rows


def _safe_replicate(args) -> tuple[list[dict[str, Any]], float]:
    cfg, ctx, rep = args
    t0 = time.perf_counter()
    try:
        rows = _replicate(cfg, ctx, rep)
        for r in rows:
            r["status"] = "ok"
            r["error"] = ""
    except Exception as exc:  # recorded per replication, batch continues
        msg = f"{type(exc).__name__}: {exc}".replace("\n", " ")
        rows = [{"experiment": cfg.experiment, "rep": rep, "seed": substream_seed(cfg.master_seed, rep),
                 "status": "failed", "error": msg}]
        if os.environ.get("RMTCORR_TRACEBACK"):
            traceback.print_exc()
    return rows, time.perf_counter() - t0


# aggregation

@dataclass
class ExperimentResult:
    config: ExperimentConfig
    columns: list[str]
    rows: list[dict[str, Any]]
    summary: dict[str, Any]
    wall_times: list[float]

    @property
    def passed(self) -> bool:
        return bool(self.summary["pass"])


def _stat(values) -> dict[str, float]:
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return {"mean": float("nan"), "se": float("nan"), "sd": float("nan"), "count": 0}
    sd = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {"mean": float(np.mean(v)), "se": sd / math.sqrt(v.size), "sd": sd, "count": int(v.size)}


def _check(name: str, value: float, lo: float, hi: float) -> dict[str, Any]:
    ok = bool(lo <= value <= hi)
    return {"name": name, "value": value, "lo": lo, "hi": hi, "pass": ok}


def _band(name: str, spec: dict[str, float], value: float) -> dict[str, Any]:
    if "tol" in spec:
        lo, hi = spec["target"] - spec["tol"], spec["target"] + spec["tol"]
    else:
        lo, hi = spec.get("lo", -math.inf), spec.get("hi", math.inf)
    return _check(f"band:{name}", value, lo, hi)


def _theory(cfg: ExperimentConfig, ctx: dict[str, Any]) -> dict[str, float]:
    """Limit values of the summary means, where the theory gives one."""
    gamma = cfg.model.p / cfg.model.n
    if cfg.experiment == "extremes" and cfg.params["matrix"] == "R" and _is_identity(cfg.model):
        return {"top_scaled": 2.0 + math.sqrt(gamma), "bottom_scaled": -2.0 + math.sqrt(gamma)}
    if cfg.experiment == "threshold":
        return {"max_offdiag_scaled": 2.0}
    if cfg.experiment == "spiked":
        return {f"lambda_{r}": pr.predicted_limit for pr in ctx["predictions"] for r in pr.ranks or []}
    return {}


def _check_bands(cfg: ExperimentConfig, ctx: dict[str, Any], columns: list[str]) -> None:
    theory = _theory(cfg, ctx)
    for name, spec in cfg.bands.items():
        if name not in columns or name in BASE_COLUMNS + ["error", "n"]:
            raise ConfigError(f"bands.{name}", f"not a statistic of {cfg.experiment}")
        if "tol" in spec and "target" not in spec and name not in theory:
            raise ConfigError(f"bands.{name}", "no theoretical target; give 'target'")


def _summarize(cfg: ExperimentConfig, ctx, columns, rows) -> dict[str, Any]:
    ok_rows = [r for r in rows if r["status"] == "ok"]
    failed = sorted({r["rep"] for r in rows if r["status"] != "ok"})
    stat_cols = [c for c in columns if c not in BASE_COLUMNS + ["error", "n"]]
    checks: list[dict[str, Any]] = []
    exp, prm = cfg.experiment, cfg.params
    grouped = exp in ("diag-compare", "lsd-check")
    stats: dict[str, Any] = {}
    if grouped:
        for n in sorted({r["n"] for r in ok_rows}):
            sub = [r for r in ok_rows if r["n"] == n]
            stats[str(n)] = {c: _stat([r[c] for r in sub]) for c in stat_cols}
    else:
        stats = {c: _stat([r[c] for r in ok_rows if c in r]) for c in stat_cols}
    theory = _theory(cfg, ctx)

    def mean_of(col, n=None):
        return (stats[str(n)] if n is not None else stats)[col]["mean"]

    if ok_rows:
        if exp == "diag-compare":
            grid = ctx["n_grid"]
            checks.append(_check("weyl_transfer_all_reps", float(all(r["weyl_ok"] for r in ok_rows)), 1, 1))
            if prm["expect"] is not None and len(grid) > 1:
                means = [mean_of("diag_gap", n) for n in grid]
                sign = -1 if prm["expect"] == "decreasing" else 1
                mono = all(sign * (b - a) > 0 for a, b in zip(means, means[1:]))
                checks.append(_check(f"diag_gap_mean_{prm['expect']}", float(mono), 1, 1))
                if prm["seedwise_fraction"] is not None:
                    by_rep: dict[int, dict[int, float]] = {}
                    for r in ok_rows:
                        by_rep.setdefault(r["rep"], {})[r["n"]] = r["diag_gap"]
                    hits = [sign * (d[grid[-1]] - d[grid[0]]) > 0 for d in by_rep.values()]
                    checks.append(_check(f"diag_gap_seedwise_{prm['expect']}_fraction",
                                         float(np.mean(hits)), prm["seedwise_fraction"], 1.0))
        elif exp == "lsd-check":
            worst = max(r["kolmogorov"] for r in ok_rows)
            checks.append(_check("kolmogorov_max", worst, 0.0, prm["max_distance"]))
        elif exp == "threshold":
            checks.append(_check("improved_fraction", mean_of("improved"), prm["improve_fraction"], 1.0))
            checks.append(_check("rhat_diagonal_fraction", mean_of("rhat_diagonal"), prm["diagonal_fraction"], 1.0))
        elif exp == "spectrum-estimate":
            checks.append(_check("l1_error_mean", mean_of("l1_error"), 0.0, prm["max_l1"]))
        elif exp == "spiked":
            for pr in ctx["predictions"]:
                for r in pr.ranks or []:
                    col = f"lambda_{r}"
                    checks.append(_check(f"spike_{pr.alpha:g}_rank_{r}", mean_of(col),
                                         pr.predicted_limit - prm["tol"], pr.predicted_limit + prm["tol"]))
        for name, spec in cfg.bands.items():
            spec = dict(spec)
            if "tol" in spec and "target" not in spec:
                spec["target"] = theory[name]
            if grouped:
                for n in stats:
                    checks.append(_band(f"{name}@n={n}", spec, stats[n][name]["mean"]))
            else:
                checks.append(_band(name, spec, stats[name]["mean"]))
    return {
        "schema_version": SCHEMA_VERSION,
        "experiment": exp,
        "config": cfg.to_dict(),
        "reps": cfg.reps,
        "failed_reps": failed,
        "stats": stats,
        "theory": theory,
        "checks": checks,
        "pass": bool(ok_rows) and all(c["pass"] for c in checks),
    }


def default_jobs() -> int:
    env = os.environ.get("RMT_CORR_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError("RMT_CORR_JOBS", f"not an integer: {env!r}") from None
        if jobs < 1:
            raise ConfigError("RMT_CORR_JOBS", "must be >= 1")
        return jobs
    return os.cpu_count() or 1


def preflight(cfg: ExperimentConfig) -> list[str]:
    """Everything ``run_experiment`` checks before starting; returns the CSV columns."""
    ctx = _prepare(cfg)
    columns = columns_for(cfg, ctx)
    _check_bands(cfg, ctx, columns)
    return columns


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None,
                   progress: Callable[[int], None] | None = None) -> ExperimentResult:
    """Run all replications (in a process pool when ``jobs > 1``) and summarize."""
    jobs = default_jobs() if jobs is None else jobs
    ctx = _prepare(cfg)
    columns = columns_for(cfg, ctx)
    _check_bands(cfg, ctx, columns)
    tasks = [(cfg, ctx, rep) for rep in range(cfg.reps)]
    if jobs <= 1 or cfg.reps == 1:
        results = []
        for t in tasks:
            results.append(_safe_replicate(t))
            if progress:
                progress(t[2])
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, cfg.reps)) as pool:
            results = list(pool.map(_safe_replicate, tasks))
    rows = [r for rs, _ in results for r in rs]
    times = [t for _, t in results]
    summary = _summarize(cfg, ctx, columns, rows)
    return ExperimentResult(cfg, columns, rows, summary, times)


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (np.floating,)):
        return repr(float(v))
    return str(v)


def write_rows_csv(result: ExperimentResult, path, *, timing: bool = False) -> None:
    """One row per replication (and grid point); wall time only when ``timing``."""
    cols = list(result.columns)
    if timing:
        cols.append("wall_time")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    rep_time = dict(enumerate(result.wall_times))
    for r in result.rows:
        rec = dict(r)
        if timing:
            rec["wall_time"] = rep_time.get(r["rep"], float("nan"))
        w.writerow([_fmt(rec.get(c, "")) for c in cols])
    with open(path, "w", newline="") as fh:
        fh.write(buf.getvalue())


def write_summary_json(result: ExperimentResult, path) -> None:
    with open(path, "w") as fh:
        json.dump(result.summary, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
