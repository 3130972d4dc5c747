"""Hot per-path loops with numba acceleration and a pure-numpy fallback.

Every kernel exists twice: a scalar-loop version compiled with ``numba.njit``
and a vectorized numpy version.  The public names bind to the numba build
when it is importable and not disabled via the ``SWINGHEDGE_DISABLE_NUMBA``
environment variable.  Both builds consume pre-drawn random numbers, so for a
fixed backend the results are bit-reproducible regardless of how the caller
schedules work.

Dense network algebra is *not* here on purpose: batched matrix products go
through numpy's BLAS either way, which a jit cannot beat.
"""

import math
import os

import numpy as np

DISABLE_ENV = "SWINGHEDGE_DISABLE_NUMBA"


def _numba_disabled() -> bool:
    return os.environ.get(DISABLE_ENV, "").strip().lower() in {"1", "true", "yes", "on"}


try:
    if _numba_disabled():
        raise ImportError(f"numba disabled via {DISABLE_ENV}")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # no-op decorator stand-in
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


# ---------------------------------------------------------------------------
# sequential exercise decisions
#
# Decisions are generated date by date because the penalty for date j depends
# on the decisions realized before j: the exercise budget l and the
# refraction window (no second exercise strictly within gamma of t_j).
# ---------------------------------------------------------------------------


def _decision_loop_py(logits, dates, uniforms, max_exercises, refraction,
                      penalty, sample, product_penalty, min_form_window):
    n, m = logits.shape
    y = np.zeros((n, m), np.int8)
    prob = np.empty((n, m), np.float64)
    for i in range(n):
        count = 0
        first = 0
        last_t = -1.0
        for j in range(m):
            budget_hit = count >= max_exercises
            if min_form_window:
                # legacy window: almost the whole past, except date 0 once
                # t_j has moved past the refraction length
                if dates[j] > refraction:
                    window_hit = (count - first) >= 1
                else:
                    window_hit = count >= 1
            else:
                window_hit = last_t >= 0.0 and (dates[j] - last_t) < refraction
            if product_penalty:
                violated = budget_hit and window_hit
            else:
                violated = budget_hit or window_hit
            z = logits[i, j]
            if violated:
                z = z - penalty
            p = 1.0 / (1.0 + math.exp(-z))
            prob[i, j] = p
            if sample:
                take = uniforms[i, j] < p
            else:
                take = p > 0.5
            if take:
                y[i, j] = 1
                count += 1
                last_t = dates[j]
                if j == 0:
                    first = 1
    return y, prob


_decision_loop_nb = njit(cache=True)(_decision_loop_py)


def _decision_loop_np(logits, dates, uniforms, max_exercises, refraction,
                      penalty, sample, product_penalty, min_form_window):
    n, m = logits.shape
    y = np.zeros((n, m), np.int8)
    prob = np.empty((n, m), np.float64)
    count = np.zeros(n, np.int64)
    first = np.zeros(n, np.int64)
    last_t = np.full(n, -1.0)
    for j in range(m):
        budget_hit = count >= max_exercises
        if min_form_window:
            if dates[j] > refraction:
                window_hit = (count - first) >= 1
            else:
                window_hit = count >= 1
        else:
            window_hit = (last_t >= 0.0) & ((dates[j] - last_t) < refraction)
        if product_penalty:
            violated = budget_hit & window_hit
        else:
            violated = budget_hit | window_hit
        z = logits[:, j] - penalty * violated
        p = 1.0 / (1.0 + np.exp(-z))
        prob[:, j] = p
        if sample:
            take = uniforms[:, j] < p
        else:
            take = p > 0.5
        y[:, j] = take
        count += take
        last_t = np.where(take, dates[j], last_t)
        if j == 0:
            first = take.astype(np.int64)
    return y, prob


decision_loop = _decision_loop_nb if HAVE_NUMBA else _decision_loop_np


# ---------------------------------------------------------------------------
# binomial tree backward induction
# ---------------------------------------------------------------------------

PAYOFF_PUT = 0
PAYOFF_CALL = 1


def _crr_reduce_py(n_steps, s0, log_u, q, disc, exercise_layer, payoff_kind,
                   strike):
    v = np.empty(n_steps + 1, np.float64)
    for j in range(n_steps + 1):
        s = s0 * math.exp((2 * j - n_steps) * log_u)
        if payoff_kind == PAYOFF_PUT:
            pay = strike - s
        else:
            pay = s - strike
        v[j] = pay if pay > 0.0 else 0.0
    for layer in range(n_steps - 1, -1, -1):
        for j in range(layer + 1):
            v[j] = disc * (q * v[j + 1] + (1.0 - q) * v[j])
        if exercise_layer[layer]:
            for j in range(layer + 1):
                s = s0 * math.exp((2 * j - layer) * log_u)
                if payoff_kind == PAYOFF_PUT:
                    pay = strike - s
                else:
                    pay = s - strike
                if pay > v[j]:
                    v[j] = pay
    return v[0]


_crr_reduce_nb = njit(cache=True)(_crr_reduce_py)


def _crr_reduce_np(n_steps, s0, log_u, q, disc, exercise_layer, payoff_kind,
                   strike):
    j = np.arange(n_steps + 1)
    s = s0 * np.exp((2 * j - n_steps) * log_u)
    pay = strike - s if payoff_kind == PAYOFF_PUT else s - strike
    v = np.maximum(pay, 0.0)
    for layer in range(n_steps - 1, -1, -1):
        v = disc * (q * v[1:layer + 2] + (1.0 - q) * v[:layer + 1])
        if exercise_layer[layer]:
            j = np.arange(layer + 1)
            s = s0 * np.exp((2 * j - layer) * log_u)
            pay = strike - s if payoff_kind == PAYOFF_PUT else s - strike
            v = np.maximum(v, np.maximum(pay, 0.0))
    return v[0]


crr_reduce = _crr_reduce_nb if HAVE_NUMBA else _crr_reduce_np


# ---------------------------------------------------------------------------
# move-to-target band strategy, swept over a risk-aversion grid
#
# dbs[i, j] is the target position at date j, band_scale[i, j] the
# gamma-independent part of the half-bandwidth: H = band_scale * gamma**-0.25.
# Trades happen at dates 0..N-1; the position earns pnl over (t_j, t_{j+1}].
# ---------------------------------------------------------------------------


def _band_sweep_py(prices, dbs, band_scale, gammas, fee, premium, payoff_t):
    n, m = prices.shape
    g_count = gammas.shape[0]
    cost_mean = np.empty(g_count, np.float64)
    esq_mean = np.empty(g_count, np.float64)
    trades_mean = np.empty(g_count, np.float64)
    for g in range(g_count):
        hscale = gammas[g] ** -0.25
        cost_sum = 0.0
        esq_sum = 0.0
        trades_sum = 0.0
        for i in range(n):
            cost = 0.0
            trades = 0
            pnl = 0.0
            delta = 0.0
            if abs(dbs[i, 0]) >= band_scale[i, 0] * hscale:
                delta = dbs[i, 0]
                cost += fee
                trades += 1
            for j in range(1, m):
                pnl += delta * (prices[i, j] - prices[i, j - 1])
                if j < m - 1:
                    if abs(dbs[i, j] - delta) >= band_scale[i, j] * hscale:
                        delta = dbs[i, j]
                        cost += fee
                        trades += 1
            err = premium + pnl - payoff_t[i]
            cost_sum += cost
            esq_sum += err * err
            trades_sum += trades
        cost_mean[g] = cost_sum / n
        esq_mean[g] = esq_sum / n
        trades_mean[g] = trades_sum / n
    return cost_mean, esq_mean, trades_mean


_band_sweep_nb = njit(cache=True)(_band_sweep_py)


def _band_sweep_np(prices, dbs, band_scale, gammas, fee, premium, payoff_t):
    n, m = prices.shape
    g_count = gammas.shape[0]
    cost_mean = np.empty(g_count, np.float64)
    esq_mean = np.empty(g_count, np.float64)
    trades_mean = np.empty(g_count, np.float64)
    increments = prices[:, 1:] - prices[:, :-1]
    for g in range(g_count):
        hscale = gammas[g] ** -0.25
        trade0 = np.abs(dbs[:, 0]) >= band_scale[:, 0] * hscale
        delta = np.where(trade0, dbs[:, 0], 0.0)
        trades = trade0.astype(np.int64)
        pnl = np.zeros(n)
        for j in range(1, m):
            pnl += delta * increments[:, j - 1]
            if j < m - 1:
                move = np.abs(dbs[:, j] - delta) >= band_scale[:, j] * hscale
                delta = np.where(move, dbs[:, j], delta)
                trades += move
        err = premium + pnl - payoff_t
        cost_mean[g] = fee * trades.mean()
        esq_mean[g] = np.mean(err * err)
        trades_mean[g] = trades.mean()
    return cost_mean, esq_mean, trades_mean


band_sweep = _band_sweep_nb if HAVE_NUMBA else _band_sweep_np
