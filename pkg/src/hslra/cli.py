"""``hslra`` command-line interface.

Exit codes: 0 success, 1 argument error, 2 I/O error, 3 solver non-convergence.
Every option can also be set through ``HSLRA_<COMMAND>_<OPTION>`` environment
variables or a JSON/YAML ``--config`` file whose keys are option names.
"""
import csv
import io
import json
import sys
import time
from pathlib import Path

import click
import numpy as np
import yaml

from . import __version__
from .completion import (
    AdmmOptions,
    CompletionProblem,
    CompletionReport,
    WeightScheme,
    exact_complete,
    forecast_rmse,
    nn_complete_exactfit,
    nn_complete_regularized,
    nn_complete_tolerance,
)
from .errors import ArgumentError, HslraError, NumericalError
from .experiments import (
    EXPERIMENTS,
    CowtempSettings,
    Example1Settings,
    load_series,
    run_cowtemp,
    run_deterministic,
    run_stochastic,
)
from .hankel import DEFAULT_RANK_TOL, embed, rank_profile
from .linalg import nuclear_norm
from .signals import DampedSinusoidModel, DampedTerm, NoiseModel, generate_damped, generate_noise
from .slra import ApbrConfig, SlraConfig, apbr, cadzow

REPORT_SCHEMA = "hslra.report/1"
EXIT_OK, EXIT_ARGS, EXIT_IO, EXIT_NONCONVERGED = 0, 1, 2, 3


def _load_config(ctx, param, value):
    if value is None:
        return None
    try:
        text = Path(value).read_text(encoding="utf-8")
    except OSError as exc:
        raise click.FileError(str(value), hint=exc.strerror) from exc
    try:
        data = yaml.safe_load(text) if text.strip() else {}
    except yaml.YAMLError as exc:
        raise click.BadParameter(f"cannot parse config: {exc}", ctx=ctx, param=param) from exc
    if isinstance(data, dict) and "config" in data and "schema" in data:
        data = data["config"]  # a report fed back in
        if isinstance(data, dict) and isinstance(data.get("command"), dict):
            data = data["command"]  # experiment reports also carry resolved settings
    if not isinstance(data, dict):
        raise click.BadParameter("config must be a mapping of option names to values", ctx=ctx, param=param)
    known = {p.name for p in ctx.command.params}
    defaults = {}
    for key, val in data.items():
        name = str(key).replace("-", "_")
        if name == "config":
            continue
        if name not in known:
            raise click.BadParameter(f"unknown option {key!r} for '{ctx.command.name}'", ctx=ctx, param=param)
        if isinstance(val, list):
            val = ",".join(repr(float(v)) if isinstance(v, float) else str(v) for v in val)
        defaults[name] = val
    ctx.default_map = {**(ctx.default_map or {}), **defaults}
    return value


def common_options(f):
    f = click.option("--out", type=click.Path(file_okay=False), default=".", show_default=True,
                     help="Output directory.")(f)
    f = click.option("--seed", type=int, default=0, show_default=True, help="Base random seed.")(f)
    f = click.option("--config", type=click.Path(dir_okay=False), callback=_load_config,
                     is_eager=True, expose_value=True, help="JSON or YAML file of option values.")(f)
    return f


def _float_list(ctx, param, value):
    if value is None or value == "":
        return None
    if isinstance(value, (list, tuple)):
        return tuple(float(v) for v in value)
    try:
        return tuple(float(v) for v in str(value).split(",") if v.strip())
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}") from None


_NOT_ECHOED = ("config", "out", "jobs", "timing")


def _effective(params):
    out = {}
    # where and how fast a run executes does not change what it computes
    for k, v in sorted(params.items()):
        if k in _NOT_ECHOED:
            continue
        out[k] = list(v) if isinstance(v, tuple) else v
    return out


def _out_dir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, payload):
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_rows(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _g(x):
    return "%.17g" % x


def _read_input(path, column):
    try:
        return load_series(path, column)
    except FileNotFoundError as exc:
        raise click.FileError(str(path), hint="no such file") from exc


@click.group()
@click.version_option(__version__, prog_name="hslra")
def cli():
    """Hankel structured low-rank approximation and forecasting."""


@cli.command()
@common_options
@click.option("--n", "n", type=click.IntRange(min=1), default=20, show_default=True)
@click.option("--amplitude", type=float, default=1.0, show_default=True)
@click.option("--damping", type=float, default=0.05, show_default=True)
@click.option("--frequency", type=click.FloatRange(0, 0.5), default=0.2, show_default=True)
@click.option("--phase", type=float, default=0.0, show_default=True)
@click.option("--noise", type=click.Choice(["none", "white", "alternating", "red"]), default="white",
              show_default=True)
@click.option("--sigma", type=click.FloatRange(min=0), default=0.3, show_default=True)
@click.option("--c", "c", type=click.FloatRange(min=0), default=0.2, show_default=True)
@click.option("--alpha", type=click.FloatRange(-1, 1, min_open=True, max_open=True), default=0.5,
              show_default=True)
def simulate(config, seed, out, n, amplitude, damping, frequency, phase, noise, sigma, c, alpha):
    """Write a damped sinusoid plus noise as signal,noise,sum columns."""
    model = DampedSinusoidModel([DampedTerm(amplitude, damping, frequency, phase)])
    signal = generate_damped(model, n)
    if noise == "none":
        eps = np.zeros(n)
    else:
        eps = generate_noise(NoiseModel(noise, sigma=sigma, c=c, alpha=alpha, seed=seed), n)
    eps = eps + 0.0  # no negative zeros in the output
    total = signal + eps
    path = _out_dir(out) / "series.csv"
    _write_rows(path, ["signal", "noise", "sum"],
                [[_g(a), _g(b), _g(c)] for a, b, c in zip(signal, eps, total)])
    click.echo(str(path))
    return EXIT_OK


@cli.command()
@common_options
@click.option("--input", "input_file", type=click.Path(dir_okay=False), required=True)
@click.option("--column", default=None, help="Column name or 0-based index (default: 'sum' or last).")
@click.option("--method", type=click.Choice(["cadzow", "apbr", "ssa"]), default="cadzow", show_default=True)
@click.option("--rank", type=int, required=True)
@click.option("--window", type=int, required=True)
@click.option("--max-iters", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--stop-tol", type=click.FloatRange(min=0), default=1e-9, show_default=True)
@click.option("--rank-tol", type=click.FloatRange(min=0), default=1e-6, show_default=True)
@click.option("--final-correction/--no-final-correction", default=False, show_default=True)
@click.option("--trajectories", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--start-spread", type=click.FloatRange(min=0), default=0.1, show_default=True)
@click.option("--backtrack0", type=click.FloatRange(0, 1), default=0.1, show_default=True)
@click.option("--mutation0", type=click.FloatRange(min=0), default=0.1, show_default=True)
@click.option("--decay", type=click.FloatRange(0, 1), default=0.9, show_default=True)
@click.option("--cutoff", type=click.IntRange(min=0), default=30, show_default=True)
@click.option("--perturbation-std", type=click.FloatRange(min=0), default=None)
def approximate(config, seed, out, input_file, column, method, rank, window, max_iters, stop_tol,
                rank_tol, final_correction, trajectories, start_spread, backtrack0, mutation0, decay,
                cutoff, perturbation_std):
    """Nearest rank-constrained Hankel series by Cadzow, APBR or SSA."""
    params = click.get_current_context().params
    p0 = _read_input(input_file, column)
    base = SlraConfig(rank=rank, window=window, max_iters=1 if method == "ssa" else max_iters,
                      stop_tol=stop_tol, rank_tol=rank_tol, apply_final_correction=final_correction)
    base.validate(p0.size)
    if method == "apbr":
        cfg = ApbrConfig(base=base, trajectories=trajectories, start_spread=start_spread,
                         backtrack0=backtrack0, mutation0=mutation0, decay=decay, cutoff=cutoff,
                         perturbation_std=perturbation_std, seed=seed)
        cfg.validate(p0.size)
        rep = apbr(p0, cfg)
    else:
        rep = cadzow(p0, base)
    dest = _out_dir(out)
    _write_rows(dest / "approximant.csv", ["value"], [[_g(x)] for x in rep.approximant])
    _write_json(dest / "report.json", {"schema": REPORT_SCHEMA, "command": "approximate",
                                       "config": _effective(params), "result": rep.to_dict()})
    click.echo(f"objective={rep.objective:.6g} iterations={rep.iterations} converged={rep.converged}")
    if method != "ssa" and not rep.converged:
        return EXIT_NONCONVERGED
    return EXIT_OK


def _scheme(weights, a, l):
    if weights == "unit":
        return WeightScheme.unit()
    if weights == "hankel":
        return WeightScheme.hankel()
    return WeightScheme.exponential(a, l)


@cli.command()
@common_options
@click.option("--input", "input_file", type=click.Path(dir_okay=False), required=True)
@click.option("--column", default=None, help="Column name or 0-based index.")
@click.option("--known", type=click.IntRange(min=1), default=None,
              help="Number of leading samples treated as known (default: all).")
@click.option("--horizon", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--window", type=click.IntRange(min=1), required=True)
@click.option("--mode", type=click.Choice(["exact", "exactfit", "regularized", "tolerance"]),
              default="regularized", show_default=True)
@click.option("--rank", type=click.IntRange(min=1), default=None, help="Rank for exact mode.")
@click.option("--gamma", type=click.FloatRange(min=0, min_open=True), default=100.0, show_default=True)
@click.option("--tau", type=click.FloatRange(min=0), default=None, help="Tolerance for tolerance mode.")
@click.option("--loss", type=click.Choice(["unsquared", "squared"]), default="unsquared", show_default=True)
@click.option("--weights", type=click.Choice(["unit", "hankel", "exponential"]), default="unit",
              show_default=True)
@click.option("--a", "a", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.option("--l", "l", type=float, default=0.0, show_default=True)
@click.option("--a-grid", callback=_float_list, default=None, help="Comma-separated a values to sweep.")
@click.option("--l-grid", callback=_float_list, default=None, help="Comma-separated l values to sweep.")
@click.option("--gamma-grid", callback=_float_list, default=None, help="Comma-separated gamma values.")
@click.option("--rho", type=click.FloatRange(min=0, min_open=True), default=1.0, show_default=True)
@click.option("--max-iters", type=click.IntRange(min=1), default=2000, show_default=True)
@click.option("--tol", type=click.FloatRange(min=0, min_open=True), default=1e-7, show_default=True)
def forecast(config, seed, out, input_file, column, known, horizon, window, mode, rank, gamma, tau, loss,
             weights, a, l, a_grid, l_grid, gamma_grid, rho, max_iters, tol):
    """Complete a Hankel matrix to forecast ``horizon`` samples ahead.

    Samples beyond ``--known`` in the input are used as ground truth for the
    forecast RMSE.
    """
    params = click.get_current_context().params
    series = _read_input(input_file, column)
    n = series.size if known is None else known
    if n > series.size:
        raise ArgumentError(f"--known {n} exceeds the {series.size} samples in {input_file}")
    truth = series[: n + horizon] if series.size >= n + horizon and horizon > 0 else None
    opts = AdmmOptions(rho=rho, max_iters=max_iters, tol=tol, trace=True)
    grid_rows = None

    def problem_for(a, l):
        return CompletionProblem(series[:n], horizon, window, _scheme(weights, a, l))

    def rmse(rep):
        return forecast_rmse(truth, rep.completed, horizon) if truth is not None else None

    if mode == "exact":
        if rank is None:
            raise ArgumentError("exact mode needs --rank")
        p = exact_complete(problem_for(a, l), rank)
        rep = CompletionReport(completed=p, horizon=horizon, converged=True, iterations=0,
                               nuclear_norm=nuclear_norm(embed(p, window)),
                               primal_residual=0.0, dual_residual=0.0)
    elif mode == "exactfit":
        rep = nn_complete_exactfit(problem_for(a, l), opts)
    elif mode == "tolerance":
        if tau is None:
            raise ArgumentError("tolerance mode needs --tau")
        rep = nn_complete_tolerance(problem_for(a, l), tau, opts)
    else:
        sweeping = a_grid or l_grid or gamma_grid
        if not sweeping:
            rep = nn_complete_regularized(problem_for(a, l), gamma, loss, opts)
        else:
            if weights != "exponential" and (a_grid or l_grid):
                raise ArgumentError("--a-grid/--l-grid need --weights exponential")
            if truth is None:
                raise ArgumentError("grid sweeps need ground truth: provide more rows than --known + --horizon")
            grid_rows, best = [], None
            for a in a_grid or (a,):
                for l in l_grid or (l,):
                    for g in gamma_grid or (gamma,):
                        cell = nn_complete_regularized(problem_for(a, l), g, loss,
                                                       AdmmOptions(rho=rho, max_iters=max_iters, tol=tol,
                                                                   trace=False))
                        err = rmse(cell)
                        grid_rows.append([_g(a), _g(l), _g(g), _g(err), str(cell.converged).lower(),
                                          cell.iterations])
                        if best is None or err < best[0]:
                            best = (err, a, l, g, cell)
            rep = best[4]
            params = {**params, "a": best[1], "l": best[2], "gamma": best[3]}
    dest = _out_dir(out)
    _write_rows(dest / "completed.csv", ["index", "value", "known"],
                [[i + 1, _g(x), str(i < n).lower()] for i, x in enumerate(rep.completed)])
    _write_rows(dest / "forecast.csv", ["index", "value"],
                [[n + i + 1, _g(x)] for i, x in enumerate(rep.forecast)])
    if grid_rows is not None:
        _write_rows(dest / "grid.csv", ["a", "l", "gamma", "rmse", "converged", "iterations"], grid_rows)
    result = rep.to_dict()
    result["rmse"] = rmse(rep) if horizon > 0 else None
    config_echo = _effective(click.get_current_context().params)
    payload = {"schema": REPORT_SCHEMA, "command": "forecast", "config": config_echo, "result": result}
    if grid_rows is not None:
        payload["best"] = {"a": params["a"], "l": params["l"], "gamma": params["gamma"],
                           "rmse": result["rmse"]}
    _write_json(dest / "report.json", payload)
    click.echo(f"converged={rep.converged} iterations={rep.iterations}"
               + (f" rmse={result['rmse']:.6g}" if result["rmse"] is not None else ""))
    return EXIT_OK if rep.converged else EXIT_NONCONVERGED


@cli.command()
@common_options
@click.argument("name", type=click.Choice(EXPERIMENTS))
@click.option("--trials", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--jobs", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker processes; results do not depend on this.")
@click.option("--levels", callback=_float_list, default=None,
              help="Noise levels (default 0.3,0.6,0.9).")
@click.option("--c-values", callback=_float_list, default=None,
              help="Alternating amplitudes (default 0.2,0.4,0.6,0.8).")
@click.option("--alpha", type=click.FloatRange(-1, 1, min_open=True, max_open=True), default=0.5,
              show_default=True)
@click.option("--max-iters", type=click.IntRange(min=1), default=500, show_default=True)
@click.option("--trajectories", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--data", "data", type=click.Path(dir_okay=False), default="data/cowtemp.csv",
              show_default=True, help="Cowtemp CSV for example2-cowtemp.")
@click.option("--a-grid", callback=_float_list, default=None)
@click.option("--l-grid", callback=_float_list, default=None)
@click.option("--gamma", type=click.FloatRange(min=0, min_open=True), default=100.0, show_default=True)
@click.option("--loss", type=click.Choice(["unsquared", "squared"]), default="unsquared", show_default=True)
@click.option("--timing/--no-timing", default=False, show_default=True,
              help="Also write wall-clock time to timing.json (not reproducible).")
def experiment(config, seed, out, name, trials, jobs, levels, c_values, alpha, max_iters, trajectories,
               data, a_grid, l_grid, gamma, loss, timing):
    """Run a named experiment and write records, aggregates and tables."""
    params = click.get_current_context().params
    start = time.perf_counter()
    if name.startswith("example1"):
        s = Example1Settings(trials=trials, seed=seed, alpha=alpha, max_iters=max_iters,
                             trajectories=trajectories)
        if levels:
            s.levels = levels
        if c_values:
            s.c_values = c_values
        if name == "example1-deterministic":
            report = run_deterministic(s)
        else:
            report = run_stochastic(name.split("-")[1], s, jobs=jobs)
    else:
        series = _read_input(data, None)
        s = CowtempSettings(gamma=gamma, loss=loss)
        if a_grid:
            s.a_grid = a_grid
        if l_grid:
            s.l_grid = l_grid
        report = run_cowtemp(series, s, jobs=jobs)
    report.config = {"command": _effective(params), "settings": report.config}
    dest = report.write(_out_dir(out))
    if timing:
        _write_json(dest / "timing.json", {"wall_seconds": time.perf_counter() - start})
    click.echo(str(dest))
    if name == "example2-cowtemp":
        a = report.aggregates
        click.echo(f"best_rmse={a['best_rmse']:.6g} at a={a['best_a']:.4g} l={a['best_l']:.4g} "
                   f"(ssa reference {a['ssa_reference_rmse']})")
    return EXIT_OK


def plateau(ranks):
    """Rank value held on the longest run of windows with ``rank < min(L, K)``, if any."""
    n = len(ranks)
    below = [int(r) for L, r in enumerate(ranks, start=1) if r < min(L, n - L + 1)]
    if not below:
        return None
    values, counts = np.unique(below, return_counts=True)
    return int(values[np.argmax(counts)])


@cli.command()
@common_options
@click.option("--input", "input_file", type=click.Path(dir_okay=False), required=True)
@click.option("--column", default=None)
@click.option("--tol", type=click.FloatRange(0, 1, min_open=True, max_open=True), default=DEFAULT_RANK_TOL,
              show_default=True, help="Relative singular value threshold.")
def rankprofile(config, seed, out, input_file, column, tol):
    """Numerical rank of the L-row Hankel matrix for every window L."""
    params = click.get_current_context().params
    p = _read_input(input_file, column)
    ranks = rank_profile(p, tol)
    dest = _out_dir(out)
    _write_rows(dest / "profile.csv", ["L", "rank"], [[L, int(r)] for L, r in enumerate(ranks, start=1)])
    d = plateau(ranks)
    _write_json(dest / "profile.json", {"schema": REPORT_SCHEMA, "command": "rankprofile",
                                        "config": _effective(params), "plateau": d,
                                        "ranks": [int(r) for r in ranks]})
    click.echo(f"plateau={d}")
    return EXIT_OK


def main(argv=None):
    try:
        rv = cli.main(args=argv, prog_name="hslra", standalone_mode=False, auto_envvar_prefix="HSLRA")
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_ARGS
    except click.FileError as exc:
        exc.show()
        return EXIT_IO
    except click.ClickException as exc:
        exc.show()
        return EXIT_ARGS
    except NumericalError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_NONCONVERGED
    except (ArgumentError, HslraError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_ARGS
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_IO
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
