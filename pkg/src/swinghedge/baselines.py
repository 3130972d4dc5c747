"""Reference pricers: Black-Scholes closed forms, a CRR binomial tree with
restricted exercise dates, and least-squares Monte Carlo (single exercise).

These are the oracles the trained policies are measured against, so they are
deliberately boring and independent of the policy code paths.
"""

import warnings
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np
from scipy.special import ndtr

from .kernels import PAYOFF_CALL, PAYOFF_PUT, crr_reduce
from .pricer import Payoff, payoff_eval


@dataclass(frozen=True)
class EuropeanSpec:
    """Single-asset vanilla option under Black-Scholes."""

    kind: str  # "call" or "put"
    s0: float
    strike: float
    rate: float
    dividend: float
    sigma: float
    horizon: float

    def __post_init__(self):
        if self.kind not in ("call", "put"):
            raise ValueError(f"kind must be call or put, got {self.kind!r}")
        if min(self.s0, self.strike, self.sigma, self.horizon) <= 0.0:
            raise ValueError("s0, strike, sigma and horizon must be positive")


def _d1(spec: EuropeanSpec, tau, s):
    vol = spec.sigma * np.sqrt(tau)
    return (np.log(s / spec.strike)
            + (spec.rate - spec.dividend + 0.5 * spec.sigma**2) * tau) / vol


def bs_price(spec: EuropeanSpec, t: float = 0.0, s=None):
    """Value at time t and spot s (defaults: t=0, s=s0).  At t = horizon the
    value is the intrinsic payoff."""
    s = spec.s0 if s is None else np.asarray(s, dtype=np.float64)
    tau = spec.horizon - t
    if tau < 0.0:
        raise ValueError("t lies beyond the horizon")
    if tau == 0.0:
        pay = s - spec.strike if spec.kind == "call" else spec.strike - s
        return np.maximum(pay, 0.0)
    d1 = _d1(spec, tau, s)
    d2 = d1 - spec.sigma * np.sqrt(tau)
    df_r = np.exp(-spec.rate * tau)
    df_q = np.exp(-spec.dividend * tau)
    if spec.kind == "call":
        return s * df_q * ndtr(d1) - spec.strike * df_r * ndtr(d2)
    return spec.strike * df_r * ndtr(-d2) - s * df_q * ndtr(-d1)


def bs_delta(spec: EuropeanSpec, t: float = 0.0, s=None):
    s = spec.s0 if s is None else np.asarray(s, dtype=np.float64)
    tau = spec.horizon - t
    if tau <= 0.0:
        raise ValueError("delta needs t strictly before the horizon")
    d1 = _d1(spec, tau, s)
    df_q = np.exp(-spec.dividend * tau)
    if spec.kind == "call":
        return df_q * ndtr(d1)
    return df_q * (ndtr(d1) - 1.0)


def bs_gamma(spec: EuropeanSpec, t: float = 0.0, s=None):
    s = spec.s0 if s is None else np.asarray(s, dtype=np.float64)
    tau = spec.horizon - t
    if tau <= 0.0:
        raise ValueError("gamma needs t strictly before the horizon")
    d1 = _d1(spec, tau, s)
    pdf = np.exp(-0.5 * d1 * d1) / np.sqrt(2.0 * np.pi)
    return np.exp(-spec.dividend * tau) * pdf / (s * spec.sigma * np.sqrt(tau))


def crr_bermudan(spec: EuropeanSpec, exercise_dates, n_tree_steps: int) -> float:
    """Binomial tree price with exercise allowed only on the given dates.

    Every exercise date must sit on a tree layer (n_tree_steps a multiple of
    the date grid); misaligned dates are rejected rather than rounded.
    """
    if n_tree_steps < 1:
        raise ValueError("n_tree_steps must be >= 1")
    dates = np.sort(np.asarray(exercise_dates, dtype=np.float64))
    if dates.size == 0 or dates[0] < 0.0 or dates[-1] > spec.horizon + 1e-12:
        raise ValueError("exercise dates must lie within [0, horizon]")
    dt = spec.horizon / n_tree_steps
    layers = dates / dt
    rounded = np.rint(layers)
    if np.any(np.abs(layers - rounded) > 1e-9):
        raise ValueError(
            "exercise dates do not align with tree layers; choose "
            "n_tree_steps as a multiple of the date grid"
        )
    exercise_layer = np.zeros(n_tree_steps + 1, dtype=np.bool_)
    exercise_layer[rounded.astype(np.int64)] = True
    u = np.exp(spec.sigma * np.sqrt(dt))
    d = 1.0 / u
    growth = np.exp((spec.rate - spec.dividend) * dt)
    q = (growth - d) / (u - d)
    if not 0.0 < q < 1.0:
        raise ValueError(f"tree step too coarse: risk-neutral weight q={q:.4f}")
    kind = PAYOFF_CALL if spec.kind == "call" else PAYOFF_PUT
    return float(crr_reduce(n_tree_steps, spec.s0, np.log(u), q,
                            np.exp(-spec.rate * dt), exercise_layer, kind,
                            spec.strike))


# ---------------------------------------------------------------------------
# least-squares Monte Carlo (single exercise right)
# ---------------------------------------------------------------------------


def _monomials(x: np.ndarray, degree: int) -> np.ndarray:
    """All monomials of total degree <= degree in the columns of x."""
    n, d = x.shape
    cols = [np.ones(n)]
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(d), deg):
            col = np.ones(n)
            for k in combo:
                col = col * x[:, k]
            cols.append(col)
    return np.column_stack(cols)


def _regress(basis: np.ndarray, target: np.ndarray) -> np.ndarray:
    coef, _, rank, _ = np.linalg.lstsq(basis, target, rcond=None)
    if rank < basis.shape[1]:
        scale = np.trace(basis.T @ basis) / basis.shape[1]
        ridge = 1e-10 * max(scale, 1.0)
        warnings.warn(
            f"rank-deficient regression basis (rank {rank} of "
            f"{basis.shape[1]}); falling back to ridge"
        )
        gram = basis.T @ basis + ridge * np.eye(basis.shape[1])
        coef = np.linalg.solve(gram, basis.T @ target)
    return coef


def lsm_price(paths, payoff: Payoff, rate: float, basis_degree: int = 3,
              eval_paths=None) -> float:
    """Longstaff-Schwartz lower bound for a single exercise right.

    The exercise rule (continuation-value regressions on in-the-money paths)
    is fitted backward on `paths`; when `eval_paths` is given the rule is
    then applied to those fresh paths, which makes the estimate a genuine
    lower bound.
    """
    grid = paths.grid
    dates = grid.dates
    m = dates.shape[0]
    pay = payoff_eval(payoff, paths.values)
    step_df = np.exp(-rate * np.diff(dates))

    coefs = [None] * m  # regression per date; None = never exercise here
    cashflow = pay[:, -1].copy()
    for j in range(m - 2, -1, -1):
        cashflow *= step_df[j]
        itm = pay[:, j] > 0.0
        if not np.any(itm):
            continue
        basis = _monomials(paths.values[itm, j, :], basis_degree)
        coefs[j] = _regress(basis, cashflow[itm])
        continuation = basis @ coefs[j]
        exercise = itm.copy()
        exercise[itm] = pay[itm, j] > continuation
        cashflow[exercise] = pay[exercise, j]
    if eval_paths is None:
        return float(cashflow.mean())

    pay = payoff_eval(payoff, eval_paths.values)
    alive = np.ones(pay.shape[0], dtype=bool)
    value = np.zeros(pay.shape[0])
    for j in range(m):
        if j == m - 1:
            take = alive & (pay[:, j] > 0.0)
        elif coefs[j] is None:
            continue
        else:
            take = alive & (pay[:, j] > 0.0)
            idx = np.nonzero(take)[0]
            if idx.size == 0:
                continue
            basis = _monomials(eval_paths.values[idx, j, :], basis_degree)
            take[idx] = pay[idx, j] > basis @ coefs[j]
        value[take] = np.exp(-rate * dates[j]) * pay[take, j]
        alive &= ~take
    return float(value.mean())
