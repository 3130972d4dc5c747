"""Canned experiment profiles.

Each profile is a complete config dict for a published benchmark case, plus
two small smoke profiles for quick end-to-end checks.  Profiles are built
fresh on every request so callers can mutate the result safely.
"""

import copy

from .config import validate_config

SWING_REFRACTION = 0.25 / 12.0


def _swing_put_config(s0: float, n_rights: int) -> dict:
    return {
        "kind": "price",
        "model": {"x0": [s0], "rate": 0.0488, "dividend": 0.0,
                  "vols": [0.25]},
        "grid": {"n_steps": 12, "horizon": 0.25},
        "payoff": {"kind": "put", "strike": 40.0},
        "constraints": {"max_exercises": n_rights,
                        "refraction": SWING_REFRACTION},
        "training": {"n_batch": 2000, "n_iter": 5000, "alpha0": 0.005,
                     "decay_per_100": 0.96, "hidden": [10, 10, 10],
                     "test_size": 500_000, "validation_size": 4_096_000},
    }


def _geometric_put_config(n_rights: int, light: bool) -> dict:
    config = {
        "kind": "price",
        "model": {"x0": [40.0 ** 0.2] * 5, "rate": 0.0488,
                  "dividend": 4.0 * 0.0488 / 5.0,
                  "vols": [0.25 / 5.0 ** 0.5] * 5},
        "grid": {"n_steps": 12, "horizon": 0.25},
        "payoff": {"kind": "geometric_put", "strike": 40.0},
        "constraints": {"max_exercises": n_rights,
                        "refraction": SWING_REFRACTION},
        "training": {"n_batch": 8000, "n_iter": 5000, "alpha0": 0.005,
                     "decay_per_100": 0.96, "hidden": [30, 30, 30],
                     "test_size": 500_000, "validation_size": 4_096_000},
    }
    if light:
        config["training"].update(n_batch=3000, n_iter=2000,
                                  hidden=[20, 20, 20], test_size=0,
                                  validation_size=100_000)
    return config


def _call_hedge_config(horizon: float, n_steps: int, fee: float) -> dict:
    return {
        "kind": "hedge",
        "model": {"x0": [1.0], "rate": 0.0, "dividend": 0.0, "vols": [0.25]},
        "grid": {"n_steps": n_steps, "horizon": horizon},
        "payoff": {"kind": "call", "strike": 1.0},
        "hedge": {"fees": fee, "tradeoff": 0.25},
        "hedge_training": {"n_batch": 5000, "n_iter": 20_000,
                           "alpha0": 0.001, "decay_per_100": 0.98,
                           "units_y": 60, "hidden_y": [20, 20, 20],
                           "units_z": 50, "hidden_z": [10, 10, 10],
                           "test_size": 50_000, "validation_size": 100_000},
    }


def _call_hedge_baseline(horizon, n_steps, fee, method) -> dict:
    config = _call_hedge_config(horizon, n_steps, fee)
    config["kind"] = "baseline"
    del config["hedge_training"]
    config["n_paths"] = 100_000
    config["baseline"] = {"method": method}
    if method == "ww":
        config["baseline"].update(grid_points=1000, gamma_max=30.0)
    return config


def _spread_hedge_config() -> dict:
    return {
        "kind": "hedge",
        "model": {"x0": [1.0, 0.6, 0.6], "rate": 0.0, "dividend": 0.0,
                  "vols": [0.25, 0.1, 0.1],
                  "correlation": [[1.0, 0.3, 0.6],
                                  [0.3, 1.0, 0.2],
                                  [0.6, 0.2, 1.0]]},
        "grid": {"n_steps": 10, "horizon": 1.0},
        "payoff": {"kind": "spread_call", "strike": 0.4},
        "hedge": {"fees": [0.002, 0.001, 0.0], "tradeoff": 0.1},
        "hedge_training": {"n_batch": 8000, "n_iter": 10_000,
                           "alpha0": 0.001, "decay_per_100": 0.98,
                           "units_y": 60, "hidden_y": [30, 30, 30],
                           "units_z": 50, "hidden_z": [10, 10, 10],
                           "test_size": 50_000, "validation_size": 100_000},
    }


def _bermudan_put_config() -> dict:
    return {
        "kind": "price",
        "model": {"x0": [95.0], "rate": 0.02, "dividend": 0.0,
                  "vols": [0.3]},
        "grid": {"n_steps": 10, "horizon": 1.0},
        "payoff": {"kind": "put", "strike": 90.0},
        "training": {"n_batch": 5000, "n_iter": 5000, "alpha0": 0.001,
                     "decay_per_100": 0.98, "hidden": [10, 10, 10],
                     "test_size": 500_000, "validation_size": 4_096_000},
    }


def _max_call_config(d: int) -> dict:
    return {
        "kind": "price",
        "model": {"x0": [100.0] * d, "rate": 0.05, "dividend": 0.1,
                  "vols": [0.2] * d},
        "grid": {"n_steps": 9, "horizon": 3.0},
        "payoff": {"kind": "max_call", "strike": 100.0},
        "training": {"n_batch": 5000 if d == 2 else 12_000, "n_iter": 10_000,
                     "alpha0": 0.001, "decay_per_100": 0.98,
                     "hidden": [30] * 3 if d == 2 else [70] * 3,
                     "test_size": 500_000, "validation_size": 4_096_000},
    }


STRANGLE_VOL_FACTOR = [
    [0.3024, 0.1354, 0.0722, 0.1367, 0.1641],
    [0.1354, 0.2270, 0.0613, 0.1264, 0.1610],
    [0.0722, 0.0613, 0.0717, 0.0884, 0.0699],
    [0.1367, 0.1264, 0.0884, 0.2937, 0.1394],
    [0.1641, 0.1610, 0.0699, 0.1394, 0.2535],
]


def _strangle_config() -> dict:
    return {
        "kind": "price",
        "model": {"x0": [100.0] * 5, "rate": 0.05, "dividend": 0.0,
                  "vol_factor": STRANGLE_VOL_FACTOR},
        "grid": {"n_steps": 48, "horizon": 1.0},
        "payoff": {"kind": "strangle_spread",
                   "strikes": [75.0, 90.0, 110.0, 125.0]},
        "training": {"n_batch": 8000, "n_iter": 10_000, "alpha0": 0.001,
                     "decay_per_100": 0.98, "hidden": [60, 60, 60],
                     "test_size": 500_000, "validation_size": 4_096_000},
    }


def _bermudan_put_baseline(method: str) -> dict:
    config = _bermudan_put_config()
    config["kind"] = "baseline"
    del config["training"]
    if method == "crr":
        config["baseline"] = {"method": "crr", "n_tree_steps": 10_000}
    else:
        config["baseline"] = {"method": "lsm", "basis_degree": 3}
        config["n_paths"] = 500_000
    return config


def _smoke_price_config() -> dict:
    return {
        "kind": "price",
        "model": {"x0": [95.0], "rate": 0.02, "dividend": 0.0,
                  "vols": [0.3]},
        "grid": {"n_steps": 5, "horizon": 1.0},
        "payoff": {"kind": "put", "strike": 90.0},
        "training": {"n_batch": 256, "n_iter": 60, "alpha0": 0.005,
                     "eval_every": 20, "hidden": [5, 5], "test_size": 2000,
                     "validation_size": 10_000, "presim_size": 1000},
    }


def _smoke_hedge_config() -> dict:
    config = _call_hedge_config(1.0, 5, 0.001)
    config["hedge_training"] = {"n_batch": 128, "n_iter": 30,
                                "eval_every": 10, "units_y": 8,
                                "hidden_y": [8], "units_z": 8,
                                "hidden_z": [8], "test_size": 1000,
                                "validation_size": 2000,
                                "presim_size": 500}
    return config


def _smoke_simulate_config() -> dict:
    return {
        "kind": "simulate",
        "model": {"x0": [100.0, 100.0], "rate": 0.05, "dividend": 0.0,
                  "vols": [0.2, 0.3], "correlation": [[1.0, 0.5],
                                                      [0.5, 1.0]]},
        "grid": {"n_steps": 4, "horizon": 1.0},
        "n_paths": 50,
    }


def _build_registry() -> dict:
    registry = {
        "table1_bermudan_put": _bermudan_put_config,
        "table1_maxcall_d2": lambda: _max_call_config(2),
        "table1_maxcall_d10": lambda: _max_call_config(10),
        "table1_strangle_d5": _strangle_config,
        "table1_bermudan_put_crr": lambda: _bermudan_put_baseline("crr"),
        "table1_bermudan_put_lsm": lambda: _bermudan_put_baseline("lsm"),
        "table6_case1_nn": lambda: _call_hedge_config(1.0, 10, 0.001),
        "table6_case2_nn": lambda: _call_hedge_config(2.0, 20, 0.0005),
        "table7_spread_nn": _spread_hedge_config,
        "smoke_price": _smoke_price_config,
        "smoke_hedge": _smoke_hedge_config,
        "smoke_simulate": _smoke_simulate_config,
    }
    for case, (horizon, n_steps, fee) in {"1": (1.0, 10, 0.001),
                                          "2": (2.0, 20, 0.0005)}.items():
        for method in ("naive", "ww"):
            registry[f"table6_case{case}_{method}"] = (
                lambda h=horizon, n=n_steps, c=fee, m=method:
                _call_hedge_baseline(h, n, c, m))
    for s0 in (35, 40, 45):
        for rights in range(1, 7):
            registry[f"table2_l{rights}_s{s0}"] = (
                lambda s=float(s0), r=rights: _swing_put_config(s, r))
    for rights in range(1, 7):
        registry[f"table4_geoput_l{rights}"] = (
            lambda r=rights: _geometric_put_config(r, light=False))
        registry[f"table5_light_l{rights}"] = (
            lambda r=rights: _geometric_put_config(r, light=True))
    return registry


_REGISTRY = _build_registry()


def list_profiles() -> list:
    return sorted(_REGISTRY)


def get_profile(name: str) -> dict:
    """Return a validated, caller-owned copy of a canned profile config."""
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown profile {name!r}; choices: "
                       f"{', '.join(list_profiles())}") from None
    return validate_config(copy.deepcopy(factory()))
