"""Randomized exercise policies with likelihood-ratio gradients.

A policy maps the state (t_j, X_{t_j}) to an exercise probability
expit(C * tanh(net(features)) - penalty * violated).  The capped logit keeps
probabilities inside [expit(-C), expit(C)] when the budget and refraction
constraints hold; an active violation shifts the logit by -penalty, and
penalty > 2C guarantees the shifted logit stays below -C, so thresholding at
0.5 can never pick an infeasible exercise.

Decisions are generated sequentially in time because the violation indicator
at date j depends on the realized decisions before j.  The estimator treats
those indicators as constants: gradients flow only through C * tanh(net).
"""

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kernels import decision_loop
from .market import PathBatch, TimeGrid
from .nets import MlpParams, mlp_forward, mlp_gradient

STD_FLOOR = 1e-12


@dataclass(frozen=True)
class ExerciseConstraints:
    """At most max_exercises exercises, consecutive ones >= refraction apart."""

    max_exercises: int = 1
    refraction: float = 0.0

    def __post_init__(self):
        if self.max_exercises < 1:
            raise ValueError("max_exercises must be >= 1")
        if self.refraction < 0.0:
            raise ValueError("refraction must be >= 0")


def refraction_index(grid: TimeGrid, gamma: float, j: int,
                     min_form: bool = False) -> int:
    """Latest index k <= j with t_j - t_k >= gamma, or -1 when none exists.

    The decisions inside {k+1, ..., j} are the ones that could clash with an
    exercise at t_j.  min_form switches to the legacy rule
    min{i <= j : t_j - t_i > gamma} (with -1 when t_j <= gamma), whose window
    spans nearly the whole past.
    """
    dates = grid.dates
    if not 0 <= j < dates.shape[0]:
        raise ValueError(f"date index {j} outside grid")
    if min_form:
        if dates[j] <= gamma:
            return -1
        hits = np.nonzero(dates[j] - dates[:j + 1] > gamma)[0]
        return int(hits[0])
    hits = np.nonzero(dates[j] - dates[:j + 1] >= gamma)[0]
    return int(hits[-1]) if hits.size else -1


@dataclass(frozen=True)
class Normalizer:
    """Per-feature shift/scale fitted on pooled (t, x) states."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, dates: np.ndarray, values: np.ndarray) -> np.ndarray:
        """(M,) dates + (n, M, d) values -> (n, M, d+1) features."""
        n, m, d = values.shape
        feats = np.empty((n, m, d + 1))
        feats[:, :, 0] = dates[None, :]
        feats[:, :, 1:] = values
        return (feats - self.mean) / self.std

    def transform_state(self, t: float, x) -> np.ndarray:
        row = np.concatenate([[t], np.atleast_1d(x)])
        return (row - self.mean) / self.std


def fit_normalizer(presim: PathBatch) -> Normalizer:
    """Pooled mean/std (population) over all dates and paths of (t, x)."""
    n, m, d = presim.values.shape
    mean = np.empty(d + 1)
    std = np.empty(d + 1)
    mean[0] = presim.grid.dates.mean()
    std[0] = presim.grid.dates.std()
    flat = presim.values.reshape(n * m, d)
    mean[1:] = flat.mean(axis=0)
    std[1:] = flat.std(axis=0)
    degenerate = std < STD_FLOOR
    if degenerate.any():
        warnings.warn(
            f"zero-variance features {np.nonzero(degenerate)[0].tolist()} "
            "clamped to unit scale denominator floor"
        )
        std = np.where(degenerate, STD_FLOOR, std)
    return Normalizer(mean, std)


@dataclass
class PolicyConfig:
    """Exercise policy: capped-logit network plus penalty bookkeeping."""

    network: MlpParams
    normalizer: Normalizer
    logit_cap: float = 10.0
    penalty: float = 25.0
    product_penalty: bool = False   # legacy: violate only when both indicators fire
    min_form_window: bool = False   # legacy refraction window rule

    def __post_init__(self):
        if self.logit_cap <= 0.0:
            raise ValueError("logit_cap must be positive")
        if self.penalty <= 2.0 * self.logit_cap:
            raise ValueError(
                "penalty must exceed 2 * logit_cap so violations push the "
                "logit below -logit_cap"
            )


@dataclass
class DecisionBatch:
    """Exercise decisions with the probabilities that generated them."""

    y: np.ndarray       # (n, M) int8
    prob: np.ndarray    # (n, M) penalized probabilities
    logit: np.ndarray   # (n, M) capped logits before penalty
    _raw: np.ndarray = field(repr=False, default=None)    # network outputs
    _cache: object = field(repr=False, default=None)
    _policy: object = field(repr=False, default=None)

    @property
    def n_paths(self) -> int:
        return self.y.shape[0]

    @property
    def counts(self) -> np.ndarray:
        return self.y.sum(axis=1)


def policy_outputs(policy: PolicyConfig, paths: PathBatch):
    """Raw network outputs on every (path, date) state: (n, M) plus cache."""
    feats = policy.normalizer.transform(paths.grid.dates, paths.values)
    n, m, f = feats.shape
    out, cache = mlp_forward(policy.network, feats.reshape(n * m, f))
    return out.reshape(n, m), cache


def exercise_logit(policy: PolicyConfig, t: float, x) -> float:
    """Capped logit C * tanh(net(t, x)) for a single state."""
    feats = policy.normalizer.transform_state(t, x)[None, :]
    out, _ = mlp_forward(policy.network, feats)
    return float(policy.logit_cap * np.tanh(out[0, 0]))


def penalized_probability(logit, budget_hit, window_hit, penalty=25.0,
                          product_penalty=False):
    """expit(logit - penalty * violated); indicators enter as constants."""
    if product_penalty:
        violated = np.logical_and(budget_hit, window_hit)
    else:
        violated = np.logical_or(budget_hit, window_hit)
    z = np.asarray(logit, dtype=np.float64) - penalty * violated
    return 1.0 / (1.0 + np.exp(-z))


def _decide(policy, constraints, paths, uniforms):
    raw, cache = policy_outputs(policy, paths)
    logits = policy.logit_cap * np.tanh(raw)
    sample = uniforms is not None
    if not sample:
        uniforms = np.empty((0, 0))
    y, prob = decision_loop(
        logits, paths.grid.dates, uniforms,
        constraints.max_exercises, constraints.refraction, policy.penalty,
        sample, policy.product_penalty, policy.min_form_window,
    )
    return DecisionBatch(y, prob, logits, raw, cache, policy)


def sample_decisions(policy: PolicyConfig, constraints: ExerciseConstraints,
                     paths: PathBatch, rng: np.random.Generator) -> DecisionBatch:
    """Draw Y_j ~ Bernoulli(penalized probability), sequentially in time."""
    uniforms = rng.random((paths.n_paths, paths.grid.n_steps + 1))
    return _decide(policy, constraints, paths, uniforms)


def threshold_decisions(policy: PolicyConfig, constraints: ExerciseConstraints,
                        paths: PathBatch) -> DecisionBatch:
    """Deterministic decisions Y_j = 1[p_j > 0.5]; ties resolve to 0.

    Always feasible: an active violation caps p at expit(logit_cap - penalty)
    which lies strictly below 0.5.
    """
    return _decide(policy, constraints, paths, None)


def reinforce_gradient(policy: PolicyConfig, paths: PathBatch,
                       decisions: DecisionBatch, rewards: np.ndarray,
                       use_baseline: bool = False) -> np.ndarray:
    """Likelihood-ratio gradient of the mean reward w.r.t. network params.

    Per path: reward * sum_j grad log P(Y_j).  The per-(path, date) weight
    pushed into backprop is reward * (Y - p) * C * (1 - tanh(raw)^2); the
    optional baseline subtracts the batch-mean reward as a control variate.
    """
    if decisions._policy is policy and decisions._cache is not None \
            and decisions._cache.params is policy.network:
        raw, cache = decisions._raw, decisions._cache
    else:
        raw, cache = policy_outputs(policy, paths)
    rewards = np.asarray(rewards, dtype=np.float64)
    n = rewards.shape[0]
    if use_baseline:
        rewards = rewards - rewards.mean()
    tanh_raw = np.tanh(raw)
    weight = (
        rewards[:, None]
        * (decisions.y - decisions.prob)
        * (policy.logit_cap * (1.0 - tanh_raw * tanh_raw))
        / n
    )
    grads = mlp_gradient(policy.network, cache, weight.reshape(-1, 1))
    return grads.to_vec()


def feasible(decisions: DecisionBatch, grid: TimeGrid,
             constraints: ExerciseConstraints) -> np.ndarray:
    """Per-path check: budget respected and exercises >= refraction apart."""
    y = decisions.y
    ok = decisions.counts <= constraints.max_exercises
    if constraints.refraction > 0.0:
        dates = grid.dates
        for i in range(y.shape[0]):
            taken = dates[y[i].astype(bool)]
            if taken.size > 1 and np.any(np.diff(taken) < constraints.refraction):
                ok[i] = False
    return ok


def extract_stopping_times(decisions: DecisionBatch, grid: TimeGrid,
                           n_times: int = None) -> np.ndarray:
    """First n_times exercise dates per path, padded with +inf."""
    if n_times is None:
        n_times = max(1, int(decisions.counts.max()))
    out = np.full((decisions.n_paths, n_times), np.inf)
    dates = grid.dates
    for i in range(decisions.n_paths):
        taken = dates[decisions.y[i].astype(bool)][:n_times]
        out[i, :taken.size] = taken
    return out


def write_decision_trace(fileobj, paths: PathBatch, decisions: DecisionBatch) -> None:
    """CSV rows (path_id, step, t, x_1..x_d, probability, y)."""
    writer = csv.writer(fileobj, lineterminator="\n")
    d = paths.d
    writer.writerow(
        ["path_id", "step", "t"] + [f"x_{k + 1}" for k in range(d)]
        + ["probability", "y"]
    )
    dates = paths.grid.dates
    for i in range(paths.n_paths):
        for j in range(dates.shape[0]):
            writer.writerow(
                [i, j, repr(float(dates[j]))]
                + [repr(float(v)) for v in paths.values[i, j]]
                + [repr(float(decisions.prob[i, j])), int(decisions.y[i, j])]
            )
