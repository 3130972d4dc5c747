"""Experiment dispatch and structured result files.

run_experiment() takes a validated config, runs the requested computation
and, when an output directory is given, writes the artifact set: a
summary.json with a content digest of the config, a history.csv for trained
runs, per-path trace CSVs on request and a parameter checkpoint.  All floats
are written with repr so files round-trip exactly and repeated runs can be
compared byte for byte.
"""

import csv
import hashlib
import io
import json
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .baselines import EuropeanSpec, bs_price, crr_bermudan, lsm_price
from .config import (build_grid, build_hedge_problem,
                     build_hedge_train_config, build_model, build_payoff,
                     build_seeds, build_stopping_problem, build_train_config)
from .hedging import (_threshold_controls, loss_decomposition,
                      naive_delta_run, roll_portfolio, train_impulse,
                      vanilla_spec, ww_gamma_search, ww_strategy_run,
                      write_hedge_trace)
from .market import dump_paths_csv, simulate_paths
from .nets import save_checkpoint
from .policy import threshold_decisions, write_decision_trace
from .pricer import HistoryRow, train_stopping

# stream index for trace-path simulation, far above any iteration index
TRACE_STREAM = 2 ** 32
DEFAULT_TRACE_PATHS = 100

HISTORY_COLUMNS = ("iteration", "train_objective", "test_objective", "alpha",
                   "elapsed_s")


def config_digest(config: dict) -> str:
    """sha256 of the canonical JSON form; stable under key reordering."""
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def emit_history(history, fileobj) -> None:
    """Write eval-checkpoint rows as CSV with exact (repr) float fields."""
    if not history:
        raise ValueError("history is empty; nothing to emit")
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(HISTORY_COLUMNS)
    for row in history:
        writer.writerow([row.iteration, repr(row.train_objective),
                         repr(row.test_objective), repr(row.alpha),
                         repr(row.elapsed_s)])


def parse_history(text: str) -> list:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != HISTORY_COLUMNS:
        raise ValueError(f"unexpected history header {header}")
    return [HistoryRow(int(r[0]), float(r[1]), float(r[2]), float(r[3]),
                       float(r[4])) for r in reader]


def _summary_results(report) -> dict:
    out = asdict(report)
    del out["history"]
    for key, value in out.items():
        if isinstance(value, np.ndarray):
            out[key] = value.tolist()
        elif isinstance(value, (np.floating, np.integer)):
            out[key] = value.item()
    return out


def _trace_count(config: dict) -> int:
    return config.get("report", {}).get("trace_paths", DEFAULT_TRACE_PATHS)


def _run_simulate(config: dict, out_dir):
    model = build_model(config)
    grid = build_grid(config)
    seeds = build_seeds(config)
    paths = simulate_paths(model, grid, config["n_paths"], seeds.simulation)
    terminal = paths.values[:, -1, :]
    if out_dir is not None:
        with open(out_dir / "paths.csv", "w") as fh:
            dump_paths_csv(paths, fh)
    return {
        "n_paths": paths.n_paths,
        "n_steps": grid.n_steps,
        "terminal_mean": terminal.mean(axis=0).tolist(),
        "terminal_std": terminal.std(axis=0, ddof=1).tolist(),
    }, None, None


def _run_price(config: dict, out_dir, write_traces: bool):
    problem = build_stopping_problem(config)
    train_cfg = build_train_config(config)
    policy, report = train_stopping(problem, train_cfg)
    if out_dir is not None:
        save_checkpoint(out_dir / "checkpoint.npz",
                        {"network": policy.network.to_vec()},
                        {"kind": "price", "widths": list(policy.network.widths),
                         "feature_mean": policy.normalizer.mean.tolist(),
                         "feature_std": policy.normalizer.std.tolist(),
                         "best_iteration": report.best_iteration})
        if write_traces:
            paths = simulate_paths(problem.model, problem.grid,
                                   _trace_count(config),
                                   train_cfg.seeds.simulation, TRACE_STREAM)
            decisions = threshold_decisions(policy, problem.constraints, paths)
            with open(out_dir / "traces.csv", "w") as fh:
                write_decision_trace(fh, paths, decisions)
    results = {"price": report.price, "stderr": report.stderr}
    return results, report.best_iteration, report.history


def _run_hedge(config: dict, out_dir, write_traces: bool):
    problem = build_hedge_problem(config)
    train_cfg = build_hedge_train_config(config)
    policy, report = train_impulse(problem, train_cfg)
    if out_dir is not None:
        meta = {"kind": "hedge",
                "feature_mean": policy.normalizer.mean.tolist(),
                "feature_std": policy.normalizer.std.tolist(),
                "best_iteration": report.best_iteration}
        save_checkpoint(out_dir / "checkpoint.npz",
                        {"net_y": policy.net_y.to_vec(),
                         "net_z": policy.net_z.to_vec(),
                         "premium": np.array([policy.premium]),
                         "first_position": policy.first_position}, meta)
        if write_traces:
            paths = simulate_paths(problem.model, problem.grid,
                                   _trace_count(config),
                                   train_cfg.seeds.simulation, TRACE_STREAM)
            y, z = _threshold_controls(policy, paths)
            outcome = roll_portfolio(y, z, policy.premium,
                                     policy.first_position, paths,
                                     problem.fees, problem.payoff)
            with open(out_dir / "traces.csv", "w") as fh:
                write_hedge_trace(fh, paths, y, outcome)
    return _summary_results(report), report.best_iteration, report.history


def _european_spec(config: dict) -> EuropeanSpec:
    model = build_model(config)
    grid = build_grid(config)
    payoff = build_payoff(config)
    if payoff.kind not in ("call", "put") or model.d != 1:
        raise ValueError("closed-form baselines need a 1-d call or put")
    return EuropeanSpec(payoff.kind, float(model.x0[0]), payoff.strike,
                        model.rate, model.dividend,
                        float(model.vol_factor[0, 0]), grid.horizon)


def _run_baseline(config: dict, out_dir):
    spec = config["baseline"]
    method = spec["method"]
    seeds = build_seeds(config)

    if method == "bs":
        return {"price": bs_price(_european_spec(config))}

    if method == "crr":
        grid = build_grid(config)
        return {"price": crr_bermudan(_european_spec(config), grid.dates,
                                      spec.get("n_tree_steps", 10_000))}

    if method == "lsm":
        model = build_model(config)
        grid = build_grid(config)
        payoff = build_payoff(config)
        fit_paths = simulate_paths(model, grid, config["n_paths"],
                                   seeds.simulation)
        eval_paths = simulate_paths(model, grid, config["n_paths"],
                                    seeds.validation)
        price = lsm_price(fit_paths, payoff, model.rate,
                          spec.get("basis_degree", 3), eval_paths)
        return {"price": price}

    problem = build_hedge_problem(config)
    paths = simulate_paths(problem.model, problem.grid, config["n_paths"],
                           seeds.validation)
    if method == "naive":
        outcome = naive_delta_run(paths, problem)
        results = loss_decomposition(outcome, problem.tradeoff)
        results["premium"] = bs_price(vanilla_spec(problem))
        return results

    # Whalley-Wilmott band strategy, fixed or grid-searched risk aversion
    if "risk_aversion" in spec:
        gamma = spec["risk_aversion"]
        outcome = ww_strategy_run(paths, gamma, problem)
        curve = None
    else:
        gamma, outcome, curve = ww_gamma_search(paths, problem,
                                                spec.get("grid_points", 1000),
                                                spec.get("gamma_max", 30.0))
    results = loss_decomposition(outcome, problem.tradeoff)
    results["risk_aversion"] = gamma
    results["premium"] = bs_price(vanilla_spec(problem))
    if out_dir is not None and curve is not None:
        with open(out_dir / "gamma_curve.csv", "w") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["risk_aversion", "loss"])
            for g, loss in curve:
                writer.writerow([repr(float(g)), repr(float(loss))])
    return results


def run_experiment(config: dict, out_dir=None, profile: str = None,
                   write_traces: bool = False) -> dict:
    """Run one experiment; returns the summary dict (also written to disk)."""
    t_start = time.perf_counter()
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    kind = config["kind"]
    best_iteration = None
    history = None
    if kind == "simulate":
        results, best_iteration, history = _run_simulate(config, out_dir)
    elif kind == "price":
        results, best_iteration, history = _run_price(config, out_dir,
                                                      write_traces)
    elif kind == "hedge":
        results, best_iteration, history = _run_hedge(config, out_dir,
                                                      write_traces)
    else:
        results = _run_baseline(config, out_dir)

    summary = {
        "kind": kind,
        "profile": profile,
        "tool_version": __version__,
        "config_digest": config_digest(config),
        "seeds": asdict(build_seeds(config)),
        "results": results,
        "best_iteration": best_iteration,
        "runtime_seconds": time.perf_counter() - t_start,
    }
    if out_dir is not None:
        with open(out_dir / "summary.json", "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if history:
            with open(out_dir / "history.csv", "w") as fh:
                emit_history(history, fh)
    return summary
