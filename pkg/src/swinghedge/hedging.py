"""Impulse-control hedging under fixed per-trade costs.

A hedge is a premium P0, an initial position, and per-date (trade?, size)
controls.  The objective is beta * E(C_T) + (1 - beta) * E(E_T^2) where C_T
sums the fixed fees of executed trades and E_T is the terminal replication
error of the self-financing portfolio.

Two strategy families live here: closed-form baselines (rebalance to the
Black-Scholes delta every date, or only when outside a no-trade band scaled
by a risk-aversion parameter), and a trained pair of recurrent networks where
trade sizes learn from pathwise gradients and the binary trade decision
learns from likelihood-ratio gradients.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import EuropeanSpec, bs_delta, bs_gamma, bs_price
from .kernels import band_sweep
from .market import (AssetModel, PathBatch, TimeGrid, _step_paths,
                     path_generator, simulate_paths)
from .nets import (adam_init, adam_step, recurrent_forward,
                   recurrent_gradient, recurrent_init)
from .policy import Normalizer, fit_normalizer
from .pricer import EVAL_CHUNK, PRESIM_STREAM, HistoryRow, Payoff, Seeds, payoff_eval

POSITION_EPS = 1e-8  # |initial position| above this charges the date-0 fee


@dataclass(frozen=True)
class HedgeProblem:
    """Hedge g(X_T) on the grid dates; trades happen at dates 0..N-1."""

    model: AssetModel
    grid: TimeGrid
    payoff: Payoff
    fees: np.ndarray          # (N, d) fixed fee per date and asset
    tradeoff: float           # beta in [0, 1]

    def __post_init__(self):
        n, d = self.grid.n_steps, self.model.d
        fees = np.asarray(self.fees, dtype=np.float64)
        if fees.ndim == 0:
            fees = np.full((n, d), float(fees))
        elif fees.ndim == 1:
            if fees.shape[0] != d:
                raise ValueError(f"per-asset fees must have length {d}")
            fees = np.tile(fees, (n, 1))
        if fees.shape != (n, d) or np.any(fees < 0.0):
            raise ValueError(f"fees must be nonnegative with shape ({n}, {d})")
        if not 0.0 <= self.tradeoff <= 1.0:
            raise ValueError("tradeoff must lie in [0, 1]")
        object.__setattr__(self, "fees", fees)


@dataclass
class HedgeOutcome:
    """Per-path results of running a hedge over a path batch."""

    pnl: np.ndarray       # terminal portfolio value Pi_T (premium included)
    cost: np.ndarray      # summed fees C_T
    err: np.ndarray       # replication error E_T = Pi_T - g(X_T)
    trades: np.ndarray    # executed trade count (initial position included)
    deltas: np.ndarray    # (n, N, d) positions held over (t_j, t_{j+1}]

    @property
    def n_paths(self) -> int:
        return self.pnl.shape[0]

    def mean_cost(self) -> float:
        return float(self.cost.mean())

    def mean_squared_error(self) -> float:
        return float(np.mean(self.err * self.err))

    def mean_trades(self) -> float:
        return float(self.trades.mean())


def hedge_loss(outcome: HedgeOutcome, tradeoff: float) -> float:
    """beta * mean(C_T) + (1 - beta) * mean(E_T^2)."""
    return tradeoff * outcome.mean_cost() \
        + (1.0 - tradeoff) * outcome.mean_squared_error()


def hedge_loss_homogeneous(outcome: HedgeOutcome, tradeoff: float) -> float:
    """Display variant with the error term in price units (root mean square)."""
    return tradeoff * outcome.mean_cost() \
        + (1.0 - tradeoff) * np.sqrt(outcome.mean_squared_error())


def loss_decomposition(outcome: HedgeOutcome, tradeoff: float) -> dict:
    return {
        "loss": hedge_loss(outcome, tradeoff),
        "mean_cost": outcome.mean_cost(),
        "mean_squared_error": outcome.mean_squared_error(),
        "homogeneous_loss": float(hedge_loss_homogeneous(outcome, tradeoff)),
        "mean_trades": outcome.mean_trades(),
    }


def roll_portfolio(y: np.ndarray, z: np.ndarray, premium: float,
                   first_position: np.ndarray, paths: PathBatch,
                   fees: np.ndarray, payoff: Payoff) -> HedgeOutcome:
    """Self-financing roll-forward of the hedge portfolio.

    y (n, N) and z (n, N, d) are the per-date controls; column 0 of both is
    ignored because the date-0 position is `first_position` itself, whose fee
    is charged exactly when some component exceeds POSITION_EPS.
    """
    n_steps = paths.grid.n_steps
    prices = paths.values
    n, d = prices.shape[0], prices.shape[2]
    if y.shape != (n, n_steps) or z.shape != (n, n_steps, d):
        raise ValueError("controls must have shapes (n, N) and (n, N, d)")
    first_position = np.asarray(first_position, dtype=np.float64).reshape(d)

    deltas = np.empty((n, n_steps, d))
    deltas[:, 0, :] = first_position
    moves = y[:, :, None] * z
    np.cumsum(moves[:, 1:, :], axis=1, out=deltas[:, 1:, :])
    deltas[:, 1:, :] += first_position

    increments = prices[:, 1:, :] - prices[:, :-1, :]
    pnl = premium + np.einsum("njd,njd->n", deltas, increments)

    fee_per_date = fees.sum(axis=1)
    initial_trade = int(np.any(np.abs(first_position) > POSITION_EPS))
    cost = initial_trade * fee_per_date[0] + y[:, 1:] @ fee_per_date[1:]
    trades = initial_trade + y[:, 1:].sum(axis=1)

    err = pnl - payoff_eval(payoff, prices[:, -1, :])
    return HedgeOutcome(pnl, cost, err, trades, deltas)


# ---------------------------------------------------------------------------
# closed-form baselines
# ---------------------------------------------------------------------------


def vanilla_spec(problem: HedgeProblem) -> EuropeanSpec:
    """European call/put view of a d=1 hedge problem (for delta targets)."""
    if problem.model.d != 1 or problem.payoff.kind not in ("call", "put"):
        raise ValueError("delta baselines need a d=1 vanilla call or put")
    return EuropeanSpec(problem.payoff.kind, float(problem.model.x0[0]),
                        problem.payoff.strike, problem.model.rate,
                        problem.model.dividend,
                        float(problem.model.vol_factor[0, 0]),
                        problem.grid.horizon)


def ww_band(t: float, s, risk_aversion: float, fee: float,
            spec: EuropeanSpec):
    """Half-width of the no-trade band: (12 fee gamma_BS^2 / ra)^(1/4)."""
    if risk_aversion <= 0.0:
        raise ValueError("risk_aversion must be positive")
    gamma = bs_gamma(spec, t, s)
    return (12.0 * fee * gamma * gamma / risk_aversion) ** 0.25


def _delta_targets(problem: HedgeProblem, spec: EuropeanSpec,
                   paths: PathBatch):
    """Per (path, trading date): BS delta and the ra-free band scale."""
    dates = paths.grid.dates
    n, n_steps = paths.n_paths, paths.grid.n_steps
    dbs = np.empty((n, n_steps))
    band_scale = np.empty((n, n_steps))
    for j in range(n_steps):
        s = paths.values[:, j, 0]
        dbs[:, j] = bs_delta(spec, dates[j], s)
        g = bs_gamma(spec, dates[j], s)
        band_scale[:, j] = (12.0 * problem.fees[j, 0] * g * g) ** 0.25
    return dbs, band_scale


def naive_delta_run(paths: PathBatch, problem: HedgeProblem) -> HedgeOutcome:
    """Rebalance to the BS delta at every trading date; premium = BS price."""
    spec = vanilla_spec(problem)
    dbs, _ = _delta_targets(problem, spec, paths)
    n, n_steps = dbs.shape
    y = np.ones((n, n_steps), dtype=np.int8)
    z = np.empty((n, n_steps, 1))
    z[:, :, 0] = np.diff(dbs, axis=1, prepend=0.0)
    first = np.array([dbs[0, 0]])
    return roll_portfolio(y, z, float(bs_price(spec)), first, paths,
                          problem.fees, problem.payoff)


def ww_strategy_run(paths: PathBatch, risk_aversion: float,
                    problem: HedgeProblem) -> HedgeOutcome:
    """Trade to the BS delta only when it drifts out of the no-trade band."""
    if risk_aversion <= 0.0:
        raise ValueError("risk_aversion must be positive")
    spec = vanilla_spec(problem)
    dbs, band_scale = _delta_targets(problem, spec, paths)
    n, n_steps = dbs.shape
    hscale = risk_aversion ** -0.25
    y = np.zeros((n, n_steps), dtype=np.int8)
    z = np.zeros((n, n_steps, 1))
    first = dbs[0, 0] if abs(dbs[0, 0]) >= band_scale[0, 0] * hscale else 0.0
    delta = np.full(n, first)
    for j in range(1, n_steps):
        move = np.abs(dbs[:, j] - delta) >= band_scale[:, j] * hscale
        y[:, j] = move
        z[:, j, 0] = np.where(move, dbs[:, j] - delta, 0.0)
        delta = np.where(move, dbs[:, j], delta)
    return roll_portfolio(y, z, float(bs_price(spec)), np.array([first]),
                          paths, problem.fees, problem.payoff)


def ww_gamma_search(paths: PathBatch, problem: HedgeProblem,
                    n_grid: int = 1000, gamma_max: float = 30.0):
    """Grid-search the band risk aversion; ties resolve to the smaller value.

    Returns (risk_aversion, outcome at the optimum, per-gamma loss table).
    """
    fee_per_date = problem.fees.sum(axis=1)
    if not np.allclose(fee_per_date, fee_per_date[0]):
        raise ValueError("band search expects a uniform per-date fee")
    spec = vanilla_spec(problem)
    dbs, band_scale = _delta_targets(problem, spec, paths)
    gammas = np.linspace(0.0, gamma_max, n_grid)[1:]
    payoff_t = payoff_eval(problem.payoff, paths.values[:, -1, :])
    cost_mean, esq_mean, _ = band_sweep(
        paths.values[:, :, 0], dbs, band_scale, gammas,
        float(fee_per_date[0]), float(bs_price(spec)), payoff_t,
    )
    losses = problem.tradeoff * cost_mean + (1.0 - problem.tradeoff) * esq_mean
    best = int(np.argmin(losses))  # argmin takes the first (smallest) gamma
    gamma_star = float(gammas[best])
    return gamma_star, ww_strategy_run(paths, gamma_star, problem), \
        np.column_stack([gammas, losses])


# ---------------------------------------------------------------------------
# trained impulse policy
# ---------------------------------------------------------------------------


@dataclass
class ImpulsePolicy:
    """Trade/no-trade network, size network, premium and initial position."""

    net_y: object
    net_z: object
    premium: float
    first_position: np.ndarray
    normalizer: Normalizer
    logit_cap: float = 10.0


@dataclass
class HedgeTrainConfig:
    n_batch: int = 5000
    n_iter: int = 20_000
    alpha0_y: float = 0.001
    alpha0_z: float = 0.001
    r_alpha_y: float = 1.0     # per-step decay of the decision stream
    r_alpha_z: float = 1.0
    eval_every: int = 100
    test_size: int = 50_000
    validation_size: int = 100_000
    units_y: int = 60
    hidden_y: tuple = (20, 20, 20)
    units_z: int = 50
    hidden_z: tuple = (10, 10, 10)
    presim_size: int = 10_000
    logit_cap: float = 10.0
    use_baseline: bool = False
    seeds: Seeds = field(default_factory=Seeds)


@dataclass
class HedgeReport:
    loss: float
    mean_cost: float
    mean_squared_error: float
    homogeneous_loss: float
    mean_trades: float
    premium: float
    first_position: np.ndarray
    best_iteration: int
    runtime_seconds: float
    history: list


def _policy_controls(policy: ImpulsePolicy, paths: PathBatch,
                     need_cache: bool):
    """Run both networks over trading dates 0..N-1.

    Returns (raw_y (n, N), z (n, N, d), cache_y, cache_z, features).
    """
    n_steps = paths.grid.n_steps
    feats = policy.normalizer.transform(paths.grid.dates[:n_steps],
                                        paths.values[:, :n_steps, :])
    out_y, cache_y = recurrent_forward(policy.net_y, feats, need_cache)
    out_z, cache_z = recurrent_forward(policy.net_z, feats, need_cache)
    return out_y[:, :, 0], out_z, cache_y, cache_z, feats


def _threshold_controls(policy, paths):
    raw_y, z, _, _, _ = _policy_controls(policy, paths, need_cache=False)
    prob = 1.0 / (1.0 + np.exp(-policy.logit_cap * np.tanh(raw_y)))
    y = (prob > 0.5).astype(np.int8)
    y[:, 0] = 0  # date-0 position comes from first_position
    return y, z


def evaluate_impulse(policy: ImpulsePolicy, problem: HedgeProblem,
                     n_paths: int, seed: int) -> HedgeOutcome:
    """Thresholded-policy outcome on fresh paths (chunked, deterministic)."""
    pieces = []
    done = 0
    chunk_idx = 0
    while done < n_paths:
        take = min(EVAL_CHUNK, n_paths - done)
        paths = simulate_paths(problem.model, problem.grid, take, seed,
                               stream=chunk_idx)
        y, z = _threshold_controls(policy, paths)
        pieces.append(roll_portfolio(y, z, policy.premium,
                                     policy.first_position, paths,
                                     problem.fees, problem.payoff))
        done += take
        chunk_idx += 1
    if len(pieces) == 1:
        return pieces[0]
    return HedgeOutcome(*(np.concatenate([getattr(p, name) for p in pieces])
                          for name in ("pnl", "cost", "err", "trades", "deltas")))


def train_impulse(problem: HedgeProblem, config: HedgeTrainConfig):
    """Algorithm: pathwise gradients for sizes/premium/initial position,
    likelihood-ratio gradients for the trade decision; two Adam streams."""
    t_start = time.perf_counter()
    seeds = config.seeds
    d = problem.model.d
    n_steps = problem.grid.n_steps
    beta = problem.tradeoff

    presim = simulate_paths(problem.model, problem.grid, config.presim_size,
                            seeds.simulation, stream=PRESIM_STREAM)
    normalizer = fit_normalizer(presim)
    del presim

    init_rng = path_generator(seeds.initialization, 0)
    net_y = recurrent_init(d + 1, config.units_y,
                           tuple(config.hidden_y) + (1,), init_rng)
    net_z = recurrent_init(d + 1, config.units_z,
                           tuple(config.hidden_z) + (d,), init_rng)
    policy = ImpulsePolicy(net_y, net_z, 0.0, np.zeros(d), normalizer,
                           config.logit_cap)

    vec_y = net_y.to_vec()
    # decision stream and size stream (sizes + premium + initial position)
    vec_z = np.concatenate([net_z.to_vec(), [0.0], np.zeros(d)])
    n_z = net_z.n_params
    state_y = adam_init(vec_y.size, config.alpha0_y, config.r_alpha_y)
    state_z = adam_init(vec_z.size, config.alpha0_z, config.r_alpha_z)

    best = (np.inf, vec_y.copy(), vec_z.copy(), 0)
    history = []

    def apply_vecs():
        policy.net_y = net_y.from_vec(vec_y)
        policy.net_z = net_z.from_vec(vec_z[:n_z])
        policy.premium = float(vec_z[n_z])
        policy.first_position = vec_z[n_z + 1:].copy()

    for it in range(1, config.n_iter + 1):
        rng = path_generator(seeds.simulation, it)
        normals = rng.standard_normal((config.n_batch, n_steps, d))
        paths = PathBatch(_step_paths(problem.model, problem.grid, normals),
                          problem.grid, (seeds.simulation, it))
        uniforms = rng.random((config.n_batch, n_steps))

        raw_y, z, cache_y, cache_z, _ = _policy_controls(policy, paths, True)
        tanh_y = np.tanh(raw_y)
        prob = 1.0 / (1.0 + np.exp(-policy.logit_cap * tanh_y))
        y = (uniforms < prob).astype(np.int8)
        y[:, 0] = 0

        outcome = roll_portfolio(y, z, policy.premium, policy.first_position,
                                 paths, problem.fees, problem.payoff)
        loss_path = beta * outcome.cost + (1.0 - beta) * outcome.err**2
        train_obj = float(loss_path.mean())
        if not np.isfinite(train_obj):
            raise RuntimeError(
                f"training diverged at iteration {it}: loss {train_obj}"
            )

        n = config.n_batch
        prices = paths.values
        future_move = prices[:, -1:, :] - prices[:, :-1, :]  # X_T - X_{t_j}
        err_w = (1.0 - beta) * 2.0 / n * outcome.err

        up_z = np.zeros((n, n_steps, d))
        up_z[:, 1:, :] = (err_w[:, None] * y[:, 1:])[:, :, None] \
            * future_move[:, 1:, :]
        g_znet = recurrent_gradient(policy.net_z, cache_z, up_z).to_vec()
        g_premium = err_w.sum()
        g_first = err_w @ (prices[:, -1, :] - prices[:, 0, :])
        grad_z = np.concatenate([g_znet, [g_premium], g_first])

        score_w = loss_path - loss_path.mean() if config.use_baseline \
            else loss_path
        up_y = np.zeros((n, n_steps, 1))
        up_y[:, 1:, 0] = (score_w[:, None] / n) * (y[:, 1:] - prob[:, 1:]) \
            * policy.logit_cap * (1.0 - tanh_y[:, 1:]**2)
        grad_y = recurrent_gradient(policy.net_y, cache_y, up_y).to_vec()

        state_y, vec_y = adam_step(state_y, vec_y, grad_y)
        state_z, vec_z = adam_step(state_z, vec_z, grad_z)
        if not (np.all(np.isfinite(vec_y)) and np.all(np.isfinite(vec_z))):
            raise RuntimeError(f"non-finite parameters at iteration {it}")
        apply_vecs()

        if config.test_size > 0 and it % config.eval_every == 0:
            test_out = evaluate_impulse(policy, problem, config.test_size,
                                        seeds.test)
            test_obj = hedge_loss(test_out, beta)
            history.append(HistoryRow(it, train_obj, test_obj, state_y.alpha,
                                      time.perf_counter() - t_start))
            if test_obj < best[0]:
                best = (test_obj, vec_y.copy(), vec_z.copy(), it)

    if config.test_size > 0 and best[3] > 0:
        _, vec_y, vec_z, best_iteration = best
        apply_vecs()
    else:
        best_iteration = config.n_iter

    outcome = evaluate_impulse(policy, problem, config.validation_size,
                               seeds.validation)
    parts = loss_decomposition(outcome, beta)
    report = HedgeReport(parts["loss"], parts["mean_cost"],
                         parts["mean_squared_error"],
                         parts["homogeneous_loss"], parts["mean_trades"],
                         policy.premium, policy.first_position.copy(),
                         best_iteration, time.perf_counter() - t_start,
                         history)
    return policy, report


def write_hedge_trace(fileobj, paths: PathBatch, y: np.ndarray,
                      outcome: HedgeOutcome) -> None:
    """CSV rows (path_id, step, t, x_1..x_d, y, delta_1..delta_d)."""
    writer = csv.writer(fileobj, lineterminator="\n")
    d = paths.d
    writer.writerow(
        ["path_id", "step", "t"] + [f"x_{k + 1}" for k in range(d)]
        + ["y"] + [f"delta_{k + 1}" for k in range(d)]
    )
    dates = paths.grid.dates
    n_steps = paths.grid.n_steps
    for i in range(paths.n_paths):
        for j in range(n_steps):
            writer.writerow(
                [i, j, repr(float(dates[j]))]
                + [repr(float(v)) for v in paths.values[i, j]]
                + [int(y[i, j])]
                + [repr(float(v)) for v in outcome.deltas[i, j]]
            )
