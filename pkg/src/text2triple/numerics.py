"""Dense float64 numerics underneath the triple translator.

Hand-derived building blocks: a matrix product with a reproducible summation
order, stable softmax, weighted cross-entropy fused with its softmax
gradient, an LSTM cell with exact backward, bias-corrected Adam, global-norm
clipping, and a central-difference gradient checker that serves as the
independent oracle for every backward pass in the package.

All public operations work on float64 numpy arrays, validate their inputs,
and are pure functions: identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import expit as sigmoid  # numerically stable logistic

__all__ = [
    "AdamState",
    "LstmCache",
    "LstmWeights",
    "Params",
    "adam_step",
    "clip_global_norm",
    "global_norm",
    "grad_check_fd",
    "lstm_cell",
    "lstm_cell_backward",
    "make_rng",
    "matmul",
    "sigmoid",
    "softmax_rows",
    "uniform_init",
    "weighted_cross_entropy",
]

# A parameter set is a named collection of float64 arrays. Iteration order is
# the canonical order fixed by whoever built the dict; Adam and the gradient
# checker walk it as-is, which keeps every update bit-deterministic.
Params = dict[str, np.ndarray]

LOG_FLOOR = 1e-12  # floor inside ln() so exact zeros stay finite


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator: a given seed yields the same stream on any platform."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def uniform_init(shape, rng: np.random.Generator, scale: float = 0.08) -> np.ndarray:
    """Uniform(-scale, scale) init used for all non-embedding weights."""
    return rng.uniform(-scale, scale, size=shape)


def require_finite(a: np.ndarray, name: str = "array") -> np.ndarray:
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite values")
    return a


def _as_matrix(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-d, got shape {a.shape}")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product accumulated strictly in index order k = 0..K-1.

    Each output element is summed in exactly the order of the naive triple
    loop, so the result is bit-identical to a loop oracle (BLAS reorders the
    accumulation and is not).
    """
    a = _as_matrix(a, "matmul lhs")
    b = _as_matrix(b, "matmul rhs")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    require_finite(a, "matmul lhs")
    require_finite(b, "matmul rhs")
    out = np.zeros((a.shape[0], b.shape[1]))
    for k in range(a.shape[1]):
        out += a[:, k, np.newaxis] * b[np.newaxis, k, :]
    return out


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction; rows sum to 1 within 1e-12."""
    logits = _as_matrix(logits, "logits")
    require_finite(logits, "logits")
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def weighted_cross_entropy(
    probs: np.ndarray, target: int, weight: float
) -> tuple[float, np.ndarray]:
    """Loss -weight*ln(probs[target] + floor) and its logits gradient.

    The returned row is the gradient with respect to the *logits* that
    produced ``probs`` through a softmax, i.e. the fused form
    weight * (probs - onehot(target)). The log floor only matters when the
    target probability is exactly 0; it does not enter the gradient.
    """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise ValueError(f"probs must be 1-d, got shape {probs.shape}")
    require_finite(probs, "probs")
    if not 0 <= target < probs.size:
        raise ValueError(f"target {target} out of range [0, {probs.size})")
    loss = -weight * math.log(probs[target] + LOG_FLOOR)
    grad = weight * probs
    grad[target] -= weight
    return loss, grad


# ---------------------------------------------------------------------------
# LSTM cell
# ---------------------------------------------------------------------------

_GATE_KEYS = ("W_i", "W_f", "W_o", "W_g", "b_i", "b_f", "b_o", "b_g")


@dataclass
class LstmWeights:
    """Standard no-peephole LSTM cell weights.

    Each gate matrix is (hidden_dim, input_dim + hidden_dim) and acts on the
    concatenation [x; h_prev]. The forget-gate bias starts at 1.0 so cells
    remember by default.
    """

    input_dim: int
    hidden_dim: int
    W_i: np.ndarray
    W_f: np.ndarray
    W_o: np.ndarray
    W_g: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_g: np.ndarray

    def __post_init__(self):
        expect = (self.hidden_dim, self.input_dim + self.hidden_dim)
        for key in _GATE_KEYS:
            arr = getattr(self, key)
            want = expect if key.startswith("W") else (self.hidden_dim,)
            if arr.shape != want:
                raise ValueError(f"LstmWeights.{key}: shape {arr.shape}, expected {want}")

    @classmethod
    def init(
        cls,
        input_dim: int,
        hidden_dim: int,
        rng: np.random.Generator,
        scale: float = 0.08,
        forget_bias: float = 1.0,
    ) -> "LstmWeights":
        shape = (hidden_dim, input_dim + hidden_dim)
        ws = {k: uniform_init(shape, rng, scale) for k in _GATE_KEYS[:4]}
        bs = {k: uniform_init(hidden_dim, rng, scale) for k in _GATE_KEYS[4:]}
        bs["b_f"] = np.full(hidden_dim, forget_bias)
        return cls(input_dim, hidden_dim, **ws, **bs)

    @classmethod
    def zeros(cls, input_dim: int, hidden_dim: int) -> "LstmWeights":
        shape = (hidden_dim, input_dim + hidden_dim)
        return cls(
            input_dim,
            hidden_dim,
            **{k: np.zeros(shape) for k in _GATE_KEYS[:4]},
            **{k: np.zeros(hidden_dim) for k in _GATE_KEYS[4:]},
        )

    def to_dict(self, prefix: str) -> Params:
        return {f"{prefix}.{k}": getattr(self, k) for k in _GATE_KEYS}

    @classmethod
    def from_dict(cls, params: Params, prefix: str) -> "LstmWeights":
        arrs = {k: np.asarray(params[f"{prefix}.{k}"], dtype=np.float64) for k in _GATE_KEYS}
        hidden = arrs["b_i"].shape[0]
        input_dim = arrs["W_i"].shape[1] - hidden
        return cls(input_dim, hidden, **arrs)

    def copy(self) -> "LstmWeights":
        return LstmWeights(
            self.input_dim,
            self.hidden_dim,
            **{k: getattr(self, k).copy() for k in _GATE_KEYS},
        )


@dataclass
class LstmCache:
    """Forward intermediates; exactly what the backward pass needs."""

    z: np.ndarray       # [x; h_prev]
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tc: np.ndarray      # tanh(c)


def lstm_cell(
    x: np.ndarray, h_prev: np.ndarray, c_prev: np.ndarray, w: LstmWeights
) -> tuple[np.ndarray, np.ndarray, LstmCache]:
    """One LSTM step: sigmoid input/forget/output gates, tanh candidate.

    c = f*c_prev + i*g,  h = o*tanh(c). Returns (h, c, cache), where the
    cache suffices for exact gradients w.r.t. x, h_prev, c_prev and weights.
    """
    if x.shape != (w.input_dim,):
        raise ValueError(f"lstm_cell: x has shape {x.shape}, expected ({w.input_dim},)")
    if h_prev.shape != (w.hidden_dim,) or c_prev.shape != (w.hidden_dim,):
        raise ValueError(
            f"lstm_cell: state shapes {h_prev.shape}/{c_prev.shape}, "
            f"expected ({w.hidden_dim},)"
        )
    z = np.concatenate([x, h_prev])
    i = sigmoid(w.W_i @ z + w.b_i)
    f = sigmoid(w.W_f @ z + w.b_f)
    o = sigmoid(w.W_o @ z + w.b_o)
    g = np.tanh(w.W_g @ z + w.b_g)
    c = f * c_prev + i * g
    tc = np.tanh(c)
    h = o * tc
    return h, c, LstmCache(z, c_prev, i, f, o, g, c, tc)


def lstm_cell_backward(
    dh: np.ndarray, dc: np.ndarray, cache: LstmCache, w: LstmWeights
) -> tuple[np.ndarray, np.ndarray, np.ndarray, Params]:
    """Exact backward for one lstm_cell step.

    dh, dc are the upstream gradients on the step's h and c outputs.
    Returns (dx, dh_prev, dc_prev, dw) with dw keyed like
    LstmWeights.to_dict("") without the prefix dot.
    """
    i, f, o, g, tc = cache.i, cache.f, cache.o, cache.g, cache.tc
    dc_total = dc + dh * o * (1.0 - tc * tc)
    d_pre_i = (dc_total * g) * i * (1.0 - i)
    d_pre_f = (dc_total * cache.c_prev) * f * (1.0 - f)
    d_pre_o = (dh * tc) * o * (1.0 - o)
    d_pre_g = (dc_total * i) * (1.0 - g * g)
    dz = (
        w.W_i.T @ d_pre_i
        + w.W_f.T @ d_pre_f
        + w.W_o.T @ d_pre_o
        + w.W_g.T @ d_pre_g
    )
    dw = {
        "W_i": np.outer(d_pre_i, cache.z),
        "W_f": np.outer(d_pre_f, cache.z),
        "W_o": np.outer(d_pre_o, cache.z),
        "W_g": np.outer(d_pre_g, cache.z),
        "b_i": d_pre_i,
        "b_f": d_pre_f,
        "b_o": d_pre_o,
        "b_g": d_pre_g,
    }
    n_in = w.input_dim
    return dz[:n_in], dz[n_in:], dc_total * f, dw


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------


@dataclass
class AdamState:
    """Adam moments, step counter and hyperparameters.

    m and v mirror the parameter dict shapes exactly; t increases by one per
    adam_step call.
    """

    m: Params
    v: Params
    t: int
    lr: float
    beta1: float
    beta2: float
    eps: float

    @classmethod
    def init(
        cls,
        params: Params,
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        zeros = lambda: {k: np.zeros_like(v) for k, v in params.items()}  # noqa: E731
        return cls(zeros(), zeros(), 0, lr, beta1, beta2, eps)


def _check_same_shapes(a: Params, b: Params, what: str) -> None:
    if a.keys() != b.keys():
        raise ValueError(f"{what}: key sets differ: {sorted(a)} vs {sorted(b)}")
    for k in a:
        if a[k].shape != b[k].shape:
            raise ValueError(f"{what}: shape mismatch at {k}: {a[k].shape} vs {b[k].shape}")


def adam_step(
    params: Params, grads: Params, state: AdamState
) -> tuple[Params, AdamState]:
    """One bias-corrected Adam update. Pure: inputs are left untouched."""
    _check_same_shapes(params, grads, "adam_step params/grads")
    _check_same_shapes(params, state.m, "adam_step params/state")
    t = state.t + 1
    c1 = 1.0 - state.beta1**t
    c2 = 1.0 - state.beta2**t
    new_params: Params = {}
    new_m: Params = {}
    new_v: Params = {}
    for k, p in params.items():
        g = grads[k]
        m = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        v = state.beta2 * state.v[k] + (1.0 - state.beta2) * (g * g)
        new_params[k] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        new_m[k] = m
        new_v[k] = v
    return new_params, AdamState(new_m, new_v, t, state.lr, state.beta1, state.beta2, state.eps)


def global_norm(grads: Params) -> float:
    """L2 norm over every element of every array in the dict."""
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    return math.sqrt(total)


def clip_global_norm(grads: Params, max_norm: float) -> Params:
    """Scale all gradients by max_norm/norm when the global norm exceeds it."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = global_norm(grads)
    if norm <= max_norm:
        return dict(grads)
    scale = max_norm / norm
    return {k: g * scale for k, g in grads.items()}


# ---------------------------------------------------------------------------
# Finite-difference oracle
# ---------------------------------------------------------------------------


def grad_check_fd(loss_and_grad, params, eps: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences.

    ``loss_and_grad(params) -> (loss, grads)`` must be deterministic; params
    is either one float64 array or a dict of named arrays, and grads mirrors
    it. Every coordinate is perturbed by +/-eps and the relative error
    |a - n| / max(|a|, |n|, 1e-8) is returned at its maximum.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    single = isinstance(params, np.ndarray)
    pdict: Params = {"param": params} if single else dict(params)

    def call(p: Params):
        loss, grads = loss_and_grad(p["param"] if single else p)
        if not np.isfinite(loss):
            raise ValueError("loss_and_grad returned a non-finite loss")
        return float(loss), ({"param": grads} if single else grads)

    _, analytic = call(pdict)
    worst = 0.0
    for name, base in pdict.items():
        base = np.asarray(base, dtype=np.float64)
        grad = np.asarray(analytic[name], dtype=np.float64)
        for idx in range(base.size):
            bumped = dict(pdict)
            plus = base.copy()
            plus.flat[idx] += eps
            bumped[name] = plus
            loss_plus, _ = call(bumped)
            minus = base.copy()
            minus.flat[idx] -= eps
            bumped[name] = minus
            loss_minus, _ = call(bumped)
            numeric = (loss_plus - loss_minus) / (2.0 * eps)
            a = float(grad.flat[idx])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, rel)
    return worst
