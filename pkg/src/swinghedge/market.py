"""Multi-asset Black-Scholes market with exact log-normal stepping.

Prices follow correlated geometric Brownian motions.  Stepping is exact on
the date grid (the log increments are drawn from their true normal law), so
grid coarseness never biases the marginal distributions.

Randomness is counter-based: every consumer owns a Philox stream keyed by
(seed, stream), and draws happen in one fixed-order vectorized call.  Two
runs with the same key produce bit-identical paths no matter how the
surrounding work is scheduled.
"""

import csv
from dataclasses import dataclass

import numpy as np


def path_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Generator on a Philox substream keyed by (seed, stream)."""
    key = np.array([seed, stream], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def factor_covariance(vols, correlation) -> np.ndarray:
    """Cholesky factor of diag(vols) @ correlation @ diag(vols).

    Fails hard on anything that is not a valid correlation matrix: no
    clipping, no implicit repair.
    """
    vols = np.asarray(vols, dtype=np.float64)
    corr = np.asarray(correlation, dtype=np.float64)
    d = vols.shape[0]
    if vols.ndim != 1 or np.any(vols <= 0.0):
        raise ValueError("vols must be a 1-D array of positive numbers")
    if corr.shape != (d, d):
        raise ValueError(f"correlation must be {d}x{d}, got {corr.shape}")
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise ValueError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise ValueError("correlation matrix diagonal must be 1")
    cov = corr * np.outer(vols, vols)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        eigs = np.linalg.eigvalsh(corr)
        raise ValueError(
            "correlation matrix is not positive definite "
            f"(smallest eigenvalue {eigs.min():.3e})"
        ) from exc


@dataclass(frozen=True)
class AssetModel:
    """d risky assets under geometric Brownian motion.

    vol_factor is a square root of the instantaneous log covariance:
    cov = vol_factor @ vol_factor.T.
    """

    x0: np.ndarray
    rate: float
    dividend: float
    vol_factor: np.ndarray

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=np.float64))
        factor = np.asarray(self.vol_factor, dtype=np.float64)
        if factor.ndim == 0:
            factor = factor.reshape(1, 1)
        d = x0.shape[0]
        if d < 1 or np.any(x0 <= 0.0):
            raise ValueError("x0 must hold at least one positive price")
        if factor.shape != (d, d):
            raise ValueError(f"vol_factor must be {d}x{d}, got {factor.shape}")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "vol_factor", factor)

    @classmethod
    def from_vols(cls, x0, rate, dividend, vols, correlation=None) -> "AssetModel":
        vols = np.atleast_1d(np.asarray(vols, dtype=np.float64))
        if correlation is None:
            correlation = np.eye(vols.shape[0])
        return cls(x0, rate, dividend, factor_covariance(vols, correlation))

    @property
    def d(self) -> int:
        return self.x0.shape[0]

    def log_covariance(self) -> np.ndarray:
        return self.vol_factor @ self.vol_factor.T


@dataclass(frozen=True)
class TimeGrid:
    """Increasing dates t_0 = 0 < t_1 < ... < t_N."""

    dates: np.ndarray

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype=np.float64)
        if dates.ndim != 1 or dates.shape[0] < 2:
            raise ValueError("grid needs at least two dates")
        if dates[0] != 0.0 or np.any(np.diff(dates) <= 0.0):
            raise ValueError("dates must start at 0 and strictly increase")
        object.__setattr__(self, "dates", dates)

    @property
    def n_steps(self) -> int:
        return self.dates.shape[0] - 1

    @property
    def horizon(self) -> float:
        return float(self.dates[-1])


def build_time_grid(n_steps: int, horizon: float) -> TimeGrid:
    """Regular grid t_i = i * horizon / n_steps."""
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    dates = np.arange(n_steps + 1, dtype=np.float64) * (horizon / n_steps)
    return TimeGrid(dates)


@dataclass
class PathBatch:
    """Simulated prices, shape (n_paths, n_steps + 1, d)."""

    values: np.ndarray
    grid: TimeGrid
    seed_info: tuple

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[2]


def _step_paths(model: AssetModel, grid: TimeGrid, normals: np.ndarray) -> np.ndarray:
    """Exact stepping given standard normal increments (n, N, d)."""
    n, n_steps, d = normals.shape
    if n_steps != grid.n_steps or d != model.d:
        raise ValueError("normals shape does not match grid/model")
    dt = np.diff(grid.dates)
    row_var = np.sum(model.vol_factor**2, axis=1)
    drift = model.rate - model.dividend - 0.5 * row_var
    log_inc = drift * dt[None, :, None] + np.sqrt(dt)[None, :, None] * (
        normals @ model.vol_factor.T
    )
    log_x = np.log(model.x0)[None, None, :] + np.cumsum(log_inc, axis=1)
    values = np.empty((n, n_steps + 1, d), dtype=np.float64)
    values[:, 0, :] = model.x0
    np.exp(log_x, out=values[:, 1:, :])
    return values


def simulate_paths(model: AssetModel, grid: TimeGrid, n_paths: int, seed: int,
                   stream: int = 0) -> PathBatch:
    """Draw n_paths exact GBM paths on the grid from substream (seed, stream)."""
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    rng = path_generator(seed, stream)
    normals = rng.standard_normal((n_paths, grid.n_steps, model.d))
    return PathBatch(_step_paths(model, grid, normals), grid, (seed, stream))


def dump_paths_csv(batch: PathBatch, fileobj) -> None:
    """Write one row per (path, date): path_id, step, t, x_1..x_d."""
    writer = csv.writer(fileobj, lineterminator="\n")
    d = batch.d
    writer.writerow(["path_id", "step", "t"] + [f"x_{k + 1}" for k in range(d)])
    dates = batch.grid.dates
    for i in range(batch.n_paths):
        for j in range(dates.shape[0]):
            writer.writerow(
                [i, j, repr(float(dates[j]))]
                + [repr(float(v)) for v in batch.values[i, j]]
            )
