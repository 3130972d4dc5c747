"""Swing/Bermudan pricing by policy-gradient search over exercise rules.

The trainer maximizes E[sum_j Y_j e^{-r t_j} g(X_{t_j})] over randomized
policies by likelihood-ratio gradients and Adam with stepsize decay.  Every
eval_every iterations the thresholded policy is valued on a frozen test set;
the parameters kept are the ones with the best test value, and the reported
price is an independent validation estimate for those parameters (a genuine
lower bound up to Monte Carlo error, since thresholded decisions are always
feasible).
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .market import (AssetModel, PathBatch, TimeGrid, _step_paths,
                     path_generator, simulate_paths)
from .nets import adam_init, adam_step, mlp_forward, mlp_init
from .policy import (DecisionBatch, ExerciseConstraints, PolicyConfig,
                     fit_normalizer, reinforce_gradient, sample_decisions)
from .kernels import decision_loop

PRESIM_STREAM = 0           # normalizer pre-simulation substream
EVAL_CHUNK = 250_000        # paths per evaluation chunk (fixed for determinism)


# ---------------------------------------------------------------------------
# payoffs
# ---------------------------------------------------------------------------

PAYOFF_KINDS = ("put", "call", "max_call", "strangle_spread", "geometric_put",
                "spread_call")


@dataclass(frozen=True)
class Payoff:
    kind: str
    strike: float = None
    strikes: tuple = None

    def __post_init__(self):
        if self.kind not in PAYOFF_KINDS:
            raise ValueError(f"unknown payoff kind {self.kind!r}")
        if self.kind == "strangle_spread":
            if self.strikes is None or len(self.strikes) != 4:
                raise ValueError("strangle_spread needs exactly 4 strikes")
            if list(self.strikes) != sorted(self.strikes):
                raise ValueError("strangle strikes must be increasing")
            object.__setattr__(self, "strikes", tuple(float(k) for k in self.strikes))
        elif self.strike is None:
            raise ValueError(f"{self.kind} needs a strike")


def payoff_eval(payoff: Payoff, x: np.ndarray) -> np.ndarray:
    """Evaluate on states of shape (..., d)."""
    x = np.asarray(x, dtype=np.float64)
    if payoff.kind in ("put", "call"):
        if x.shape[-1] != 1:
            raise ValueError(f"{payoff.kind} payoff needs d = 1")
        s = x[..., 0]
        if payoff.kind == "put":
            return np.maximum(payoff.strike - s, 0.0)
        return np.maximum(s - payoff.strike, 0.0)
    if payoff.kind == "max_call":
        return np.maximum(x.max(axis=-1) - payoff.strike, 0.0)
    if payoff.kind == "geometric_put":
        return np.maximum(payoff.strike - x.prod(axis=-1), 0.0)
    if payoff.kind == "spread_call":
        if x.shape[-1] < 2:
            raise ValueError("spread_call needs d >= 2")
        spread = x[..., 0] - x[..., 1:].mean(axis=-1)
        return np.maximum(spread - payoff.strike, 0.0)
    k1, k2, k3, k4 = payoff.strikes
    m = x.mean(axis=-1)
    return (
        -np.maximum(k1 - m, 0.0)
        + (k2 - m)
        + np.maximum(m - k3, 0.0)
        - np.maximum(m - k4, 0.0)
    )


@dataclass(frozen=True)
class StoppingProblem:
    model: AssetModel
    grid: TimeGrid
    payoff: Payoff
    constraints: ExerciseConstraints
    rate: float = None  # discount rate; defaults to the model's

    def __post_init__(self):
        if self.rate is None:
            object.__setattr__(self, "rate", self.model.rate)


def discounted_payoff_matrix(paths, payoff: Payoff, rate: float) -> np.ndarray:
    """e^{-r t_j} g(X_{t_j}) for every (path, date)."""
    discount = np.exp(-rate * paths.grid.dates)
    return payoff_eval(payoff, paths.values) * discount[None, :]


def discounted_reward(decisions: DecisionBatch, paths, payoff: Payoff,
                      rate: float) -> np.ndarray:
    """Per-path reward sum_j Y_j e^{-r t_j} g(X_{t_j})."""
    return (decisions.y * discounted_payoff_matrix(paths, payoff, rate)).sum(axis=1)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Seeds:
    """The four independent randomness sources of an experiment."""

    simulation: int = 101
    initialization: int = 202
    test: int = 303
    validation: int = 404


@dataclass
class TrainConfig:
    n_batch: int = 5000
    n_iter: int = 5000
    alpha0: float = 0.001
    r_alpha: float = 1.0          # per-step stepsize decay
    eval_every: int = 100
    test_size: int = 500_000      # 0 skips test evals and keeps the last iterate
    validation_size: int = 4_096_000
    hidden: tuple = (10, 10, 10)
    presim_size: int = 10_000
    logit_cap: float = 10.0
    penalty: float = 25.0
    use_baseline: bool = False
    product_penalty: bool = False
    min_form_window: bool = False
    seeds: Seeds = field(default_factory=Seeds)


@dataclass
class HistoryRow:
    iteration: int
    train_objective: float
    test_objective: float
    alpha: float
    elapsed_s: float


@dataclass
class EvalReport:
    price: float
    stderr: float
    best_iteration: int
    runtime_seconds: float
    history: list


def _threshold_value(policy, constraints, dates, features, disc_pay) -> float:
    """Mean thresholded-policy reward on precomputed features/payoffs."""
    n, m, f = features.shape
    total = 0.0
    for lo in range(0, n, EVAL_CHUNK):
        hi = min(lo + EVAL_CHUNK, n)
        out, _ = mlp_forward(policy.network, features[lo:hi].reshape(-1, f))
        logits = policy.logit_cap * np.tanh(out.reshape(hi - lo, m))
        y, _ = decision_loop(
            logits, dates, np.empty((0, 0)),
            constraints.max_exercises, constraints.refraction,
            policy.penalty, False, policy.product_penalty,
            policy.min_form_window,
        )
        total += float((y * disc_pay[lo:hi]).sum())
    return total / n


def evaluate_policy(policy: PolicyConfig, problem: StoppingProblem,
                    n_paths: int, seed: int):
    """Thresholded-policy value on fresh paths: (estimate, standard error).

    Simulation runs in fixed-size chunks on substreams (seed, chunk), so the
    estimate is independent of available memory and bit-reproducible.
    """
    total = 0.0
    total_sq = 0.0
    done = 0
    chunk_idx = 0
    while done < n_paths:
        take = min(EVAL_CHUNK, n_paths - done)
        paths = simulate_paths(problem.model, problem.grid, take, seed,
                               stream=chunk_idx)
        feats = policy.normalizer.transform(problem.grid.dates, paths.values)
        out, _ = mlp_forward(policy.network, feats.reshape(take * feats.shape[1], -1))
        logits = policy.logit_cap * np.tanh(out.reshape(take, -1))
        y, _ = decision_loop(
            logits, problem.grid.dates, np.empty((0, 0)),
            problem.constraints.max_exercises, problem.constraints.refraction,
            policy.penalty, False, policy.product_penalty,
            policy.min_form_window,
        )
        rewards = (y * discounted_payoff_matrix(paths, problem.payoff,
                                                problem.rate)).sum(axis=1)
        total += float(rewards.sum())
        total_sq += float((rewards * rewards).sum())
        done += take
        chunk_idx += 1
    mean = total / n_paths
    var = max(total_sq / n_paths - mean * mean, 0.0) * n_paths / max(n_paths - 1, 1)
    return mean, float(np.sqrt(var / n_paths))


def train_stopping(problem: StoppingProblem, config: TrainConfig):
    """Run the policy-gradient loop; returns (policy, EvalReport)."""
    t_start = time.perf_counter()
    seeds = config.seeds
    d = problem.model.d

    presim = simulate_paths(problem.model, problem.grid, config.presim_size,
                            seeds.simulation, stream=PRESIM_STREAM)
    normalizer = fit_normalizer(presim)
    del presim

    init_rng = path_generator(seeds.initialization, 0)
    widths = (d + 1,) + tuple(config.hidden) + (1,)
    network = mlp_init(widths, init_rng)
    policy = PolicyConfig(network, normalizer, config.logit_cap, config.penalty,
                          config.product_penalty, config.min_form_window)

    test_feats = test_pay = None
    if config.test_size > 0:
        test_paths = simulate_paths(problem.model, problem.grid,
                                    config.test_size, seeds.test, stream=0)
        test_feats = normalizer.transform(problem.grid.dates, test_paths.values)
        test_pay = discounted_payoff_matrix(test_paths, problem.payoff,
                                            problem.rate)
        del test_paths

    vec = network.to_vec()
    state = adam_init(vec.size, config.alpha0, config.r_alpha)
    best_vec = vec.copy()
    best_value = -np.inf
    best_iteration = 0
    history = []

    for it in range(1, config.n_iter + 1):
        # one generator per iteration: path normals first, then decision
        # uniforms, in fixed order
        rng = path_generator(seeds.simulation, it)
        normals = rng.standard_normal((config.n_batch, problem.grid.n_steps, d))
        paths = PathBatch(_step_paths(problem.model, problem.grid, normals),
                          problem.grid, (seeds.simulation, it))
        decisions = sample_decisions(policy, problem.constraints, paths, rng)
        rewards = discounted_reward(decisions, paths, problem.payoff,
                                    problem.rate)
        train_obj = float(rewards.mean())
        if not np.isfinite(train_obj):
            raise RuntimeError(
                f"training diverged at iteration {it}: mean reward {train_obj}"
            )
        grad = reinforce_gradient(policy, paths, decisions, rewards,
                                  config.use_baseline)
        state, vec = adam_step(state, vec, -grad)  # ascent on the reward
        if not np.all(np.isfinite(vec)):
            raise RuntimeError(f"non-finite parameters at iteration {it}")
        policy.network = network.from_vec(vec)

        if config.test_size > 0 and it % config.eval_every == 0:
            test_obj = _threshold_value(policy, problem.constraints,
                                        problem.grid.dates, test_feats, test_pay)
            history.append(HistoryRow(it, train_obj, test_obj, state.alpha,
                                      time.perf_counter() - t_start))
            if test_obj > best_value:
                best_value = test_obj
                best_vec = vec.copy()
                best_iteration = it

    if config.test_size == 0:
        best_vec = vec
        best_iteration = config.n_iter
    policy.network = network.from_vec(best_vec)

    price, stderr = evaluate_policy(policy, problem, config.validation_size,
                                    seeds.validation)
    report = EvalReport(price, stderr, best_iteration,
                        time.perf_counter() - t_start, history)
    return policy, report
