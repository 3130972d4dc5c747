"""Minimal feedforward / recurrent networks with exact reverse-mode gradients.

Everything is plain numpy: parameters are lists of float64 arrays, forward
passes return a cache, and the gradient routines backpropagate an upstream
weight per output row.  mlp_gradient / recurrent_gradient compute the
gradient of sum(upstream * output) with respect to every parameter, which is
the building block both for pathwise losses and for likelihood-ratio
estimators (the caller folds rewards into the upstream weights).

Optimizer state is immutable: adam_step returns fresh (state, params)
snapshots, with the stepsize multiplied by a decay factor after every step.
"""

import json
from dataclasses import dataclass, replace

import numpy as np


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def xavier_uniform(fan_in: int, fan_out: int, rng) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


# ---------------------------------------------------------------------------
# feedforward network: affine / ReLU sandwich, identity output layer
# ---------------------------------------------------------------------------


@dataclass
class MlpParams:
    weights: list  # W_l with shape (fan_in, fan_out)
    biases: list   # b_l with shape (fan_out,)

    @property
    def widths(self) -> tuple:
        return tuple([self.weights[0].shape[0]] + [w.shape[1] for w in self.weights])

    @property
    def n_params(self) -> int:
        return sum(w.size for w in self.weights) + sum(b.size for b in self.biases)

    def to_vec(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts.append(w.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def from_vec(self, vec: np.ndarray) -> "MlpParams":
        weights, biases, pos = [], [], 0
        for w, b in zip(self.weights, self.biases):
            weights.append(vec[pos:pos + w.size].reshape(w.shape).copy())
            pos += w.size
            biases.append(vec[pos:pos + b.size].copy())
            pos += b.size
        if pos != vec.size:
            raise ValueError(f"vector length {vec.size} does not match {pos} params")
        return MlpParams(weights, biases)


def mlp_init(widths, rng) -> MlpParams:
    """Xavier-uniform weights, small normal biases (0.01 * N(0,1))."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2 or any(w < 1 for w in widths):
        raise ValueError("widths needs >= 2 positive entries")
    rng = _as_rng(rng)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        weights.append(xavier_uniform(fan_in, fan_out, rng))
        biases.append(0.01 * rng.standard_normal(fan_out))
    return MlpParams(weights, biases)


@dataclass
class MlpCache:
    inputs: list      # per-layer inputs, inputs[0] is the network input
    pre_acts: list    # per-hidden-layer pre-activations
    params: MlpParams


def mlp_forward(params: MlpParams, x: np.ndarray):
    """Batched forward pass, x of shape (n, d_in).  Returns (out, cache)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.widths[0]:
        raise ValueError(
            f"input must be (n, {params.widths[0]}), got {x.shape}"
        )
    inputs, pre_acts = [x], []
    h = x
    last = len(params.weights) - 1
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        a = h @ w + b
        if layer == last:
            h = a
        else:
            pre_acts.append(a)
            h = np.maximum(a, 0.0)
            inputs.append(h)
    return h, MlpCache(inputs, pre_acts, params)


@dataclass
class MlpGrads:
    d_weights: list
    d_biases: list
    d_input: np.ndarray

    def to_vec(self) -> np.ndarray:
        parts = []
        for dw, db in zip(self.d_weights, self.d_biases):
            parts.append(dw.ravel())
            parts.append(db)
        return np.concatenate(parts)


def mlp_gradient(params: MlpParams, cache: MlpCache, upstream: np.ndarray) -> MlpGrads:
    """Gradient of sum(upstream * output) w.r.t. parameters and input."""
    if cache.params is not params:
        raise ValueError("cache was built for different parameters")
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.ndim == 1:
        upstream = upstream[:, None]
    n_layers = len(params.weights)
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    grad = upstream
    for layer in range(n_layers - 1, -1, -1):
        d_weights[layer] = cache.inputs[layer].T @ grad
        d_biases[layer] = grad.sum(axis=0)
        grad = grad @ params.weights[layer].T
        if layer > 0:
            grad = grad * (cache.pre_acts[layer - 1] > 0.0)
    return MlpGrads(d_weights, d_biases, grad)


# ---------------------------------------------------------------------------
# recurrent network: single LSTM cell plus a feedforward head per step
# ---------------------------------------------------------------------------


@dataclass
class LstmParams:
    kernel: np.ndarray  # (d_in + units, 4 * units), gate order (i, f, g, o)
    bias: np.ndarray    # (4 * units,)

    @property
    def units(self) -> int:
        return self.kernel.shape[1] // 4

    @property
    def input_dim(self) -> int:
        return self.kernel.shape[0] - self.units


@dataclass
class RecurrentParams:
    cell: LstmParams
    head: MlpParams

    @property
    def n_params(self) -> int:
        return self.cell.kernel.size + self.cell.bias.size + self.head.n_params

    def to_vec(self) -> np.ndarray:
        return np.concatenate(
            [self.cell.kernel.ravel(), self.cell.bias, self.head.to_vec()]
        )

    def from_vec(self, vec: np.ndarray) -> "RecurrentParams":
        k = self.cell.kernel.size
        kernel = vec[:k].reshape(self.cell.kernel.shape).copy()
        b = self.cell.bias.size
        bias = vec[k:k + b].copy()
        head = self.head.from_vec(vec[k + b:])
        return RecurrentParams(LstmParams(kernel, bias), head)


def recurrent_init(input_dim: int, units: int, head_widths, rng) -> RecurrentParams:
    """LSTM cell plus head; head_widths excludes the input width (= units)."""
    rng = _as_rng(rng)
    kernel = xavier_uniform(input_dim + units, 4 * units, rng)
    bias = 0.01 * rng.standard_normal(4 * units)
    head = mlp_init((units,) + tuple(head_widths), rng)
    return RecurrentParams(LstmParams(kernel, bias), head)


@dataclass
class RecurrentCache:
    zcat: np.ndarray    # (n, T, d_in + units)
    gate_i: np.ndarray
    gate_f: np.ndarray
    gate_g: np.ndarray  # tanh candidate
    gate_o: np.ndarray
    cell_state: np.ndarray
    tanh_c: np.ndarray
    head_cache: MlpCache
    params: RecurrentParams


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def recurrent_forward(params: RecurrentParams, inputs: np.ndarray,
                      need_cache: bool = True):
    """Run the cell over (n, T, d_in) inputs; head output per step.

    Returns (outputs, cache) with outputs of shape (n, T, d_out); cache is
    None when need_cache is False (cheap evaluation-only mode).
    """
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim != 3:
        raise ValueError(f"inputs must be (n, T, d_in), got {inputs.shape}")
    n, t_len, d_in = inputs.shape
    if t_len < 1:
        raise ValueError("empty sequence")
    if d_in != params.cell.input_dim:
        raise ValueError(f"expected input dim {params.cell.input_dim}, got {d_in}")
    units = params.cell.units
    h = np.zeros((n, units))
    c = np.zeros((n, units))
    h_all = np.empty((n, t_len, units))
    if need_cache:
        zcat_all = np.empty((n, t_len, d_in + units))
        i_all = np.empty((n, t_len, units))
        f_all = np.empty((n, t_len, units))
        g_all = np.empty((n, t_len, units))
        o_all = np.empty((n, t_len, units))
        c_all = np.empty((n, t_len, units))
        tanh_all = np.empty((n, t_len, units))
    for t in range(t_len):
        zcat = np.concatenate([inputs[:, t, :], h], axis=1)
        gates = zcat @ params.cell.kernel + params.cell.bias
        gi = _sigmoid(gates[:, :units])
        gf = _sigmoid(gates[:, units:2 * units])
        gg = np.tanh(gates[:, 2 * units:3 * units])
        go = _sigmoid(gates[:, 3 * units:])
        c = gf * c + gi * gg
        tc = np.tanh(c)
        h = go * tc
        h_all[:, t, :] = h
        if need_cache:
            zcat_all[:, t, :] = zcat
            i_all[:, t, :] = gi
            f_all[:, t, :] = gf
            g_all[:, t, :] = gg
            o_all[:, t, :] = go
            c_all[:, t, :] = c
            tanh_all[:, t, :] = tc
    head_out, head_cache = mlp_forward(params.head, h_all.reshape(n * t_len, units))
    outputs = head_out.reshape(n, t_len, -1)
    if not need_cache:
        return outputs, None
    cache = RecurrentCache(zcat_all, i_all, f_all, g_all, o_all, c_all,
                           tanh_all, head_cache, params)
    return outputs, cache


@dataclass
class RecurrentGrads:
    d_kernel: np.ndarray
    d_bias: np.ndarray
    head: MlpGrads

    def to_vec(self) -> np.ndarray:
        return np.concatenate([self.d_kernel.ravel(), self.d_bias, self.head.to_vec()])


def recurrent_gradient(params: RecurrentParams, cache: RecurrentCache,
                       upstream: np.ndarray) -> RecurrentGrads:
    """Backprop through time for sum(upstream * outputs)."""
    if cache is None or cache.params is not params:
        raise ValueError("cache was built for different parameters")
    upstream = np.asarray(upstream, dtype=np.float64)
    n, t_len = cache.zcat.shape[0], cache.zcat.shape[1]
    units = params.cell.units
    d_in = params.cell.input_dim
    head_grads = mlp_gradient(params.head, cache.head_cache,
                              upstream.reshape(n * t_len, -1))
    d_h_all = head_grads.d_input.reshape(n, t_len, units)
    d_kernel = np.zeros_like(params.cell.kernel)
    d_bias = np.zeros_like(params.cell.bias)
    dh_next = np.zeros((n, units))
    dc_next = np.zeros((n, units))
    dgates = np.empty((n, 4 * units))
    for t in range(t_len - 1, -1, -1):
        dh = d_h_all[:, t, :] + dh_next
        go = cache.gate_o[:, t, :]
        tc = cache.tanh_c[:, t, :]
        dc = dh * go * (1.0 - tc * tc) + dc_next
        gi = cache.gate_i[:, t, :]
        gf = cache.gate_f[:, t, :]
        gg = cache.gate_g[:, t, :]
        c_prev = cache.cell_state[:, t - 1, :] if t > 0 else 0.0
        dgates[:, :units] = dc * gg * gi * (1.0 - gi)
        dgates[:, units:2 * units] = dc * c_prev * gf * (1.0 - gf)
        dgates[:, 2 * units:3 * units] = dc * gi * (1.0 - gg * gg)
        dgates[:, 3 * units:] = dh * tc * go * (1.0 - go)
        zcat = cache.zcat[:, t, :]
        d_kernel += zcat.T @ dgates
        d_bias += dgates.sum(axis=0)
        dzcat = dgates @ params.cell.kernel.T
        dh_next = dzcat[:, d_in:]
        dc_next = dc * gf
    return RecurrentGrads(d_kernel, d_bias, head_grads)


# ---------------------------------------------------------------------------
# Adam with per-step stepsize decay
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step_count: int
    alpha: float
    r_alpha: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8


def adam_init(n_params: int, alpha0: float, r_alpha: float = 1.0,
              beta1: float = 0.9, beta2: float = 0.999,
              epsilon: float = 1e-8) -> AdamState:
    if alpha0 <= 0.0 or not (0.0 < r_alpha <= 1.0):
        raise ValueError("need alpha0 > 0 and 0 < r_alpha <= 1")
    return AdamState(np.zeros(n_params), np.zeros(n_params), 0, alpha0,
                     r_alpha, beta1, beta2, epsilon)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray):
    """One descent step; returns new (state, params). Decay runs after the
    update, so step k uses alpha0 * r_alpha**(k-1)."""
    t = state.step_count + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**t)
    v_hat = v / (1.0 - state.beta2**t)
    new_params = params - state.alpha * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = replace(state, m=m, v=v, step_count=t,
                        alpha=state.alpha * state.r_alpha)
    return new_state, new_params


def decay_per_100(factor: float) -> float:
    """Per-step decay from a per-100-step factor, e.g. 0.98 -> 0.98**0.01."""
    if not (0.0 < factor <= 1.0):
        raise ValueError("per-100-step factor must be in (0, 1]")
    return factor ** (1.0 / 100.0)


# ---------------------------------------------------------------------------
# parameter checkpoints: flat vector plus a json header (format version 1)
# ---------------------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, sections: dict, meta: dict) -> None:
    """Write named flat parameter vectors plus metadata to an .npz file.

    Layout (version 1): key "header" holds a json string with the format
    version, the metadata (widths, cell sizes, seeds, iteration, ...) and the
    section names; each section vector is stored under "sec_<name>".
    """
    header = {
        "format_version": CHECKPOINT_VERSION,
        "sections": list(sections),
        "meta": meta,
    }
    arrays = {f"sec_{name}": np.asarray(vec, dtype=np.float64)
              for name, vec in sections.items()}
    np.savez(path, header=np.array(json.dumps(header)), **arrays)


def load_checkpoint(path):
    """Read back (sections, meta) written by save_checkpoint."""
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(
                f"unsupported checkpoint version {header.get('format_version')}"
            )
        sections = {name: data[f"sec_{name}"] for name in header["sections"]}
    return sections, header["meta"]
