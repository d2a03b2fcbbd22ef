"""Reproducible experiment harness for the denoising and forecasting examples.

Every trial derives its random streams from ``SeedSequence([base_seed, trial])``
so results do not depend on execution order, and the same noise realisation
is shared by every method within a trial.
"""
import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .completion import (
    AdmmOptions,
    CompletionProblem,
    WeightScheme,
    forecast_rmse,
    nn_complete_regularized,
)
from .errors import ArgumentError
from .hankel import antidiag_weights
from .signals import DampedSinusoidModel, DampedTerm, NoiseModel, generate_damped, generate_noise
from .slra import ApbrConfig, SlraConfig, apbr, cadzow

EXPERIMENTS = ("example1-white", "example1-deterministic", "example1-red", "example2-cowtemp")
METHODS = ("cadzow", "apbr")
SCHEMA = "hslra.experiment-report/1"

# values printed in the source publication for the deterministic case and the
# Cowtemp forecast; reported next to our numbers, never used in computation
TABLE1_TARGETS = {
    "cadzow": (25.6373, 26.6507, 28.2001, 30.2832),
    "apbr": (25.4312, 26.4329, 28.1950, 30.1874),
}
TABLE1_C = (0.2, 0.4, 0.6, 0.8)
COWTEMP_SSA_RMSE = 5.253602
COWTEMP_BEST_RMSE = 4.9928
COWTEMP_BEST_AL = (0.001, 0.017)


@dataclass
class Example1Settings:
    n: int = 20
    window: int = 10
    rank: int = 3
    damping: float = 0.05
    frequency: float = 0.2
    levels: Sequence[float] = (0.3, 0.6, 0.9)
    c_values: Sequence[float] = TABLE1_C
    alpha: float = 0.5
    trials: int = 1000
    seed: int = 0
    max_iters: int = 500
    stop_tol: float = 1e-9
    trajectories: int = 10
    start_spread: float = 0.1
    backtrack0: float = 0.1
    mutation0: float = 0.1
    decay: float = 0.9
    cutoff: int = 30


@dataclass
class CowtempSettings:
    n_known: int = 61
    horizon: int = 14
    window: int = 28
    gamma: float = 100.0
    loss: str = "unsquared"
    a_grid: Sequence[float] = tuple(float(x) for x in np.logspace(-4, -1, 13))
    l_grid: Sequence[float] = tuple(float(x) for x in np.linspace(0.0, 0.05, 26))
    showcase_a: float = 0.01
    showcase_l: float = 0.01
    max_iters: int = 2000
    tol: float = 1e-7


@dataclass
class ExperimentReport:
    name: str
    config: dict
    records: list = field(default_factory=list)
    aggregates: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def to_json(self):
        payload = {
            "schema": SCHEMA,
            "experiment": self.name,
            "config": self.config,
            "aggregates": self.aggregates,
            "tables": {k: v for k, v in self.tables.items() if not k.endswith("_csv")},
        }
        return json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"

    def write(self, out_dir):
        out = Path(out_dir) / self.name
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json(), encoding="utf-8")
        (out / "records.csv").write_text(_csv_text(self.records), encoding="utf-8")
        for key, rows in self.tables.items():
            if key.endswith("_csv"):
                (out / f"{key[:-4]}.csv").write_text(_csv_text(rows), encoding="utf-8")
        return out


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _csv_text(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    header = list(rows[0])
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in header])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def trial_seeds(base_seed, trial):
    """Independent (noise, solver) seeds for one trial."""
    ss = np.random.SeedSequence([int(base_seed), int(trial)])
    noise_seed, solver_seed = ss.generate_state(2, dtype=np.uint64)
    return int(noise_seed), int(solver_seed)


def test_signal(settings):
    model = DampedSinusoidModel([DampedTerm(1.0, settings.damping, settings.frequency, 0.0)])
    return generate_damped(model, settings.n)


def _configs(settings, solver_seed):
    base = SlraConfig(rank=settings.rank, window=settings.window,
                      max_iters=settings.max_iters, stop_tol=settings.stop_tol)
    ap = ApbrConfig(base=base, trajectories=settings.trajectories,
                    start_spread=settings.start_spread, backtrack0=settings.backtrack0,
                    mutation0=settings.mutation0, decay=settings.decay,
                    cutoff=settings.cutoff, seed=solver_seed)
    return base, ap


def _solve_all(p0, settings, solver_seed):
    base, ap = _configs(settings, solver_seed)
    return {"cadzow": cadzow(p0, base), "apbr": apbr(p0, ap)}


def _stochastic_trial(args):
    settings, kind, level, trial = args
    noise_seed, solver_seed = trial_seeds(settings.seed, trial)
    s = test_signal(settings)
    noise = generate_noise(NoiseModel(kind, sigma=level, alpha=settings.alpha, seed=noise_seed), settings.n)
    p0 = s + noise
    rows = []
    for method, rep in _solve_all(p0, settings, solver_seed).items():
        rows.append({
            "trial": trial,
            "noise": kind,
            "level": float(level),
            "noise_seed": noise_seed,
            "method": method,
            "objective": rep.objective,
            "l2_error": rep.l2_error,
            "log_l2_error": math.log(rep.l2_error) if rep.l2_error > 0 else float("-inf"),
            "iterations": rep.iterations,
            "converged": rep.converged,
        })
    return rows


def _summary(values):
    v = np.asarray(values, dtype=float)
    q1, med, q3 = np.percentile(v, [25, 50, 75])
    iqr = q3 - q1
    inside = v[(v >= q1 - 1.5 * iqr) & (v <= q3 + 1.5 * iqr)]
    return {
        "count": int(v.size),
        "mean": float(v.mean()),
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(v.min()),
        "max": float(v.max()),
        "whisker_low": float(inside.min()),
        "whisker_high": float(inside.max()),
    }


def aggregate(records, metrics=("objective", "l2_error", "log_l2_error")):
    """Box-plot statistics per (level, method), recomputable from the records."""
    out = {}
    keys = sorted({(r["level"], r["method"]) for r in records})
    for level, method in keys:
        sel = [r for r in records if r["level"] == level and r["method"] == method]
        out[f"{method}@{level!r}"] = {
            "level": level,
            "method": method,
            **{m: _summary([r[m] for r in sel]) for m in metrics},
        }
    return out


def _quantile_rows(aggregates, metric="log_l2_error"):
    rows = []
    for key in sorted(aggregates):
        a = aggregates[key]
        st = a[metric]
        rows.append({"level": a["level"], "method": a["method"], "metric": metric,
                     "whisker_low": st["whisker_low"], "q1": st["q1"], "median": st["median"],
                     "q3": st["q3"], "whisker_high": st["whisker_high"]})
    return rows


def run_stochastic(kind, settings, jobs=1):
    """White (``kind='white'``) or red noise study over ``settings.levels``."""
    if kind not in ("white", "red"):
        raise ArgumentError(f"stochastic experiments use white or red noise, not {kind!r}")
    tasks = [(settings, kind, level, t) for level in settings.levels for t in range(settings.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_stochastic_trial, tasks, chunksize=16))
    else:
        chunks = [_stochastic_trial(t) for t in tasks]
    records = [row for chunk in chunks for row in chunk]
    aggs = aggregate(records)
    return ExperimentReport(
        name=f"example1-{kind}",
        config={"noise": kind, **asdict(settings)},
        records=records,
        aggregates=aggs,
        tables={"quantiles_csv": _quantile_rows(aggs) + _quantile_rows(aggs, "objective")},
    )


def residual_norms(p_hat, p0, window):
    """Candidate readings of the reported residual: l2, squared l2 and antidiagonal-weighted."""
    d = np.asarray(p_hat) - np.asarray(p0)
    kappa = antidiag_weights(d.size, window)
    return {
        "l2": float(np.linalg.norm(d)),
        "squared_l2": float(d @ d),
        "hankel_weighted": float(np.sqrt(np.sum(kappa * d * d))),
    }


def run_deterministic(settings):
    """Alternating 'noise' ``c (-1)^j`` for each c, Cadzow vs APBR."""
    s = test_signal(settings)
    records = []
    values = {m: {d: [] for d in ("l2", "squared_l2", "hankel_weighted")} for m in METHODS}
    for idx, c in enumerate(settings.c_values):
        p0 = s + generate_noise(NoiseModel("alternating", c=c), settings.n)
        _, solver_seed = trial_seeds(settings.seed, idx)
        for method, rep in _solve_all(p0, settings, solver_seed).items():
            norms = residual_norms(rep.approximant, p0, settings.window)
            for k, v in norms.items():
                values[method][k].append(v)
            records.append({"c": float(c), "method": method, **norms,
                            "objective": rep.objective, "iterations": rep.iterations,
                            "converged": rep.converged, "rank_residual": rep.rank_residual})
    analysis = table1_analysis(values, settings.c_values)
    table_rows = []
    for method in METHODS:
        for definition in ("l2", "squared_l2", "hankel_weighted"):
            row = {"method": method, "definition": definition}
            row.update({f"c={c!r}": v for c, v in zip(settings.c_values, values[method][definition])})
            table_rows.append(row)
        row = {"method": method, "definition": "published"}
        row.update({f"c={c!r}": v for c, v in zip(TABLE1_C, TABLE1_TARGETS[method])})
        table_rows.append(row)
    return ExperimentReport(
        name="example1-deterministic",
        config={"noise": "alternating", **asdict(settings)},
        records=records,
        aggregates={"analysis": analysis},
        tables={"table1_csv": table_rows, "table1": values},
    )


def table1_analysis(values, c_values, rel_tol=0.005):
    """Match our residuals against the published table under each norm reading.

    ``values[method][definition]`` lists the residuals in the order of ``c_values``.
    """
    matches = {}
    comparable = tuple(c_values) == TABLE1_C
    for definition in ("l2", "squared_l2", "hankel_weighted"):
        ours = np.asarray(values["cadzow"][definition])
        target = np.asarray(TABLE1_TARGETS["cadzow"])
        rel = np.abs(ours - target) / target if comparable else np.full(len(ours), np.inf)
        matches[definition] = {"max_relative_deviation": float(np.max(rel)),
                               "matches": bool(comparable and np.all(rel <= rel_tol))}
    matched = [d for d, m in matches.items() if m["matches"]]
    structure = {}
    for definition in ("l2", "squared_l2", "hankel_weighted"):
        cad = np.asarray(values["cadzow"][definition])
        ap = np.asarray(values["apbr"][definition])
        structure[definition] = {
            "apbr_le_cadzow": bool(np.all(ap <= cad)),
            "cadzow_increasing": bool(np.all(np.diff(cad) > 0)),
            "apbr_increasing": bool(np.all(np.diff(ap) > 0)),
        }
    note = None
    if not matched:
        note = ("no residual definition reproduces the published values; the test series "
                "(damped sinusoid plus alternating sequence) has Hankel rank exactly 3, so "
                "every rank-3 solver can return it unchanged")
    return {"definitions": matches, "matched_definition": matched[0] if matched else None,
            "structure": structure, "note": note,
            "published": {m: list(v) for m, v in TABLE1_TARGETS.items()}}


def load_series(path, column=None):
    """Read a CSV time series: one sample per line, optional header, optional extra columns.

    With several columns, ``column`` selects one by header name or 0-based
    index; by default a column named ``sum`` is used if present, else the last.
    """
    text = Path(path).read_text(encoding="utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(x.strip() for x in r)]
    if not rows:
        raise ArgumentError(f"{path} contains no data")
    header = None
    try:
        [float(x) for x in rows[0]]
    except ValueError:
        header = [h.strip() for h in rows[0]]
        rows = rows[1:]
    if not rows:
        raise ArgumentError(f"{path} contains a header but no data")
    width = len(rows[0])
    if column is None:
        idx = header.index("sum") if header and "sum" in header else width - 1
    elif header and str(column) in header:
        idx = header.index(str(column))
    else:
        try:
            idx = int(column)
        except ValueError:
            raise ArgumentError(f"column {column!r} not found in {path}") from None
    if not 0 <= idx < width:
        raise ArgumentError(f"column index {idx} out of range for {width} columns")
    try:
        values = np.array([float(r[idx]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ArgumentError(f"malformed numeric data in {path}: {exc}") from exc
    if not np.all(np.isfinite(values)):
        raise ArgumentError(f"{path} contains non-finite values")
    return values


def _cowtemp_cell(args):
    series, settings, a, l = args
    problem = CompletionProblem(series[: settings.n_known], settings.horizon, settings.window,
                                WeightScheme.exponential(a, l))
    opts = AdmmOptions(max_iters=settings.max_iters, tol=settings.tol, trace=False)
    rep = nn_complete_regularized(problem, settings.gamma, loss=settings.loss, options=opts)
    truth = series[: settings.n_known + settings.horizon]
    return {"a": float(a), "l": float(l), "gamma": float(settings.gamma),
            "rmse": forecast_rmse(truth, rep.completed, settings.horizon),
            "converged": rep.converged, "iterations": rep.iterations}


def run_cowtemp(series, settings, jobs=1):
    """Exponential-weight sweep plus the unit / Hankel / showcase forecasts."""
    series = np.asarray(series, dtype=float)
    need = settings.n_known + settings.horizon
    if series.size < need:
        raise ArgumentError(f"series has {series.size} samples, need {need}")
    truth = series[:need]
    known = series[: settings.n_known]
    opts = AdmmOptions(max_iters=settings.max_iters, tol=settings.tol, trace=False)
    forecasts = []
    schemes = [("W1", WeightScheme.unit()), ("W2", WeightScheme.hankel()),
               ("W3", WeightScheme.exponential(settings.showcase_a, settings.showcase_l))]
    for label, scheme in schemes:
        problem = CompletionProblem(known, settings.horizon, settings.window, scheme)
        rep = nn_complete_regularized(problem, settings.gamma, loss=settings.loss, options=opts)
        forecasts.append({"weights": label, "rmse": forecast_rmse(truth, rep.completed, settings.horizon),
                          "converged": rep.converged, "forecast": [float(x) for x in rep.forecast]})
    tasks = [(series, settings, a, l) for a in settings.a_grid for l in settings.l_grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            grid = list(pool.map(_cowtemp_cell, tasks, chunksize=4))
    else:
        grid = [_cowtemp_cell(t) for t in tasks]
    best = min(grid, key=lambda r: r["rmse"])
    summary = {
        "best_rmse": best["rmse"], "best_a": best["a"], "best_l": best["l"],
        "published_best_rmse": COWTEMP_BEST_RMSE, "published_best_al": list(COWTEMP_BEST_AL),
        "ssa_reference_rmse": COWTEMP_SSA_RMSE,
        "beats_ssa_reference": best["rmse"] < COWTEMP_SSA_RMSE,
        "weight_schemes": forecasts,
    }
    return ExperimentReport(
        name="example2-cowtemp",
        config=asdict(settings),
        records=grid,
        aggregates=summary,
        tables={"grid_csv": grid},
    )
