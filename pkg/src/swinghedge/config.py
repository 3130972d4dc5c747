"""Experiment configuration: a strict JSON format with a published schema.

Configs are plain JSON objects.  Validation happens in two layers: the
bundled schema (config_schema.json) rejects unknown keys and out-of-range
numbers with the offending location, then semantic checks enforce the
cross-field rules a schema cannot express (which blocks each run kind needs,
volatility given exactly one way, and so on).  Builders turn a validated
config into the typed objects the engine consumes.
"""

import json
from importlib import resources

import jsonschema
import numpy as np

from .hedging import HedgeProblem, HedgeTrainConfig
from .market import AssetModel, TimeGrid, build_time_grid, factor_covariance
from .nets import decay_per_100
from .policy import ExerciseConstraints
from .pricer import Payoff, Seeds, StoppingProblem, TrainConfig

DEFAULT_SEEDS = {"simulation": 101, "initialization": 202, "test": 303,
                 "validation": 404}


class ConfigError(ValueError):
    """Invalid configuration; `location` points at the offending key."""

    def __init__(self, message: str, location: str = "$"):
        self.location = location
        super().__init__(f"{location}: {message}")


def load_schema() -> dict:
    text = resources.files("swinghedge").joinpath("config_schema.json").read_text()
    return json.loads(text)


_SCHEMA = None


def _schema() -> dict:
    global _SCHEMA
    if _SCHEMA is None:
        _SCHEMA = load_schema()
    return _SCHEMA


_KIND_BLOCKS = {
    "simulate": ("model", "grid", "n_paths"),
    "price": ("model", "grid", "payoff"),
    "hedge": ("model", "grid", "payoff", "hedge"),
    "baseline": ("model", "grid", "payoff", "baseline"),
}
_BASELINE_NEEDS_PATHS = {"lsm", "ww", "naive"}
_BASELINE_NEEDS_HEDGE = {"ww", "naive"}


def validate_config(config: dict) -> dict:
    """Schema plus semantic validation; returns the config unchanged."""
    validator = jsonschema.Draft202012Validator(_schema())
    errors = sorted(validator.iter_errors(config), key=lambda e: e.json_path)
    if errors:
        err = errors[0]
        raise ConfigError(err.message, err.json_path)

    kind = config["kind"]
    for block in _KIND_BLOCKS[kind]:
        if block not in config:
            raise ConfigError(f"run kind {kind!r} requires the {block!r} block",
                              f"$.{block}")

    model = config.get("model")
    if model is not None:
        has_factor = "vol_factor" in model
        has_vols = "vols" in model
        if has_factor == has_vols:
            raise ConfigError("give volatility as exactly one of vol_factor "
                              "or vols (+ optional correlation)", "$.model")
        if has_factor and "correlation" in model:
            raise ConfigError("correlation only combines with vols",
                              "$.model.correlation")
        try:
            build_model(config)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise ConfigError(str(exc), "$.model") from None

    if "payoff" in config:
        try:
            build_payoff(config)
        except ValueError as exc:
            raise ConfigError(str(exc), "$.payoff") from None

    policy = config.get("policy", {})
    cap = policy.get("logit_cap", 10.0)
    penalty = policy.get("penalty", 25.0)
    if penalty <= 2.0 * cap:
        raise ConfigError(
            f"penalty {penalty} must exceed twice the logit cap {cap}",
            "$.policy.penalty")

    training = config.get("training", {})
    if "decay_per_100" in training and "r_alpha" in training:
        raise ConfigError("give at most one of decay_per_100 and r_alpha",
                          "$.training")

    if "hedge" in config and model is not None:
        fees = config["hedge"]["fees"]
        d = len(model["x0"])
        if isinstance(fees, list) and len(fees) not in (1, d):
            raise ConfigError(f"fees must be scalar or one per asset ({d})",
                              "$.hedge.fees")

    if kind == "baseline":
        method = config["baseline"]["method"]
        if method in _BASELINE_NEEDS_PATHS and "n_paths" not in config:
            raise ConfigError(f"baseline {method!r} needs n_paths", "$.n_paths")
        if method in _BASELINE_NEEDS_HEDGE and "hedge" not in config:
            raise ConfigError(f"baseline {method!r} needs the hedge block "
                              "(fees, tradeoff)", "$.hedge")
    return config


def parse_config(text: str) -> dict:
    """Parse and validate a JSON config string."""
    try:
        config = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON at line {exc.lineno}, column "
                          f"{exc.colno}: {exc.msg}") from None
    if not isinstance(config, dict):
        raise ConfigError("top level must be a JSON object")
    return validate_config(config)


# ---------------------------------------------------------------------------
# builders: validated dict -> engine objects
# ---------------------------------------------------------------------------


def build_model(config: dict) -> AssetModel:
    m = config["model"]
    x0 = np.asarray(m["x0"], dtype=np.float64)
    if "vol_factor" in m:
        return AssetModel(x0, m["rate"], m["dividend"],
                          np.asarray(m["vol_factor"], dtype=np.float64))
    vols = np.asarray(m["vols"], dtype=np.float64)
    if vols.shape[0] == 1 and x0.shape[0] > 1:
        vols = np.repeat(vols, x0.shape[0])
    corr = m.get("correlation")
    factor = factor_covariance(vols, np.eye(len(vols)) if corr is None
                               else np.asarray(corr, dtype=np.float64))
    return AssetModel(x0, m["rate"], m["dividend"], factor)


def build_grid(config: dict) -> TimeGrid:
    g = config["grid"]
    return build_time_grid(g["n_steps"], g["horizon"])


def build_payoff(config: dict) -> Payoff:
    p = config["payoff"]
    return Payoff(p["kind"], p.get("strike"),
                  tuple(p["strikes"]) if "strikes" in p else None)


def build_constraints(config: dict) -> ExerciseConstraints:
    c = config.get("constraints", {})
    return ExerciseConstraints(c.get("max_exercises", 1),
                               c.get("refraction", 0.0))


def build_seeds(config: dict) -> Seeds:
    merged = dict(DEFAULT_SEEDS, **config.get("seeds", {}))
    return Seeds(**merged)


def build_stopping_problem(config: dict) -> StoppingProblem:
    return StoppingProblem(build_model(config), build_grid(config),
                           build_payoff(config), build_constraints(config))


def _resolve_decay(sub: dict, key_per100: str, key_direct: str) -> float:
    if key_direct in sub:
        return sub[key_direct]
    if key_per100 in sub:
        return decay_per_100(sub[key_per100])
    return 1.0


def build_train_config(config: dict) -> TrainConfig:
    t = dict(config.get("training", {}))
    policy = config.get("policy", {})
    r_alpha = _resolve_decay(t, "decay_per_100", "r_alpha")
    t.pop("decay_per_100", None)
    t.pop("r_alpha", None)
    if "hidden" in t:
        t["hidden"] = tuple(t["hidden"])
    return TrainConfig(r_alpha=r_alpha, seeds=build_seeds(config),
                       logit_cap=policy.get("logit_cap", 10.0),
                       penalty=policy.get("penalty", 25.0),
                       product_penalty=policy.get("product_penalty", False),
                       min_form_window=policy.get("min_form_window", False),
                       **t)


def build_hedge_problem(config: dict) -> HedgeProblem:
    h = config["hedge"]
    model = build_model(config)
    grid = build_grid(config)
    fees = h["fees"]
    if isinstance(fees, list) and len(fees) == 1 and model.d > 1:
        fees = fees * model.d
    return HedgeProblem(model, grid, build_payoff(config),
                        np.asarray(fees, dtype=np.float64), h["tradeoff"])


def build_hedge_train_config(config: dict) -> HedgeTrainConfig:
    t = dict(config.get("hedge_training", {}))
    r_alpha_y = decay_per_100(t.pop("decay_per_100")) if "decay_per_100" in t \
        else 1.0
    r_alpha_z = decay_per_100(t.pop("decay_per_100_z")) \
        if "decay_per_100_z" in t else 1.0
    if "alpha0" in t:
        t["alpha0_y"] = t.pop("alpha0")
    for key in ("hidden_y", "hidden_z"):
        if key in t:
            t[key] = tuple(t[key])
    return HedgeTrainConfig(r_alpha_y=r_alpha_y, r_alpha_z=r_alpha_z,
                            seeds=build_seeds(config), **t)
