"""Neural building blocks: windowed embedding, LSTM cell, softmax, dropout."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import DTYPE, Rng, sample_uniform, sigmoid

# gate order inside the fused weight blocks
GATES = ("i", "f", "o", "g")


def glorot_init(fan_in: int, fan_out: int, rng: Rng) -> np.ndarray:
    """(fan_out x fan_in) matrix, uniform in +-sqrt(6 / (fan_in + fan_out))."""
    if fan_in < 1 or fan_out < 1:
        raise ValueError(f"fans must be >= 1, got fan_in={fan_in}, fan_out={fan_out}")
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return sample_uniform(rng, -bound, bound, fan_out, fan_in)


@dataclass
class LstmCellParams:
    """Peephole-free LSTM cell.

    The four gate blocks are stored fused in (i, f, o, g) order:
    ``W`` is (4 d_h x d_in), ``U`` is (4 d_h x d_h), ``b`` has length 4 d_h.
    The per-gate matrices are exposed as views (``W_i``, ``U_f``, ``b_g``...).
    """

    W: np.ndarray
    U: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        h4, d_in = self.W.shape
        if h4 % 4:
            raise ValueError(f"fused W needs 4*d_h rows, got {h4}")
        h = h4 // 4
        if self.U.shape != (h4, h) or self.b.shape != (h4,):
            raise ValueError(
                f"inconsistent LSTM shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}"
            )

    @property
    def d_in(self) -> int:
        return self.W.shape[1]

    @property
    def d_h(self) -> int:
        return self.U.shape[1]

    @classmethod
    def init(cls, d_in: int, d_h: int, rng: Rng, forget_bias: float = 1.0):
        W = np.vstack([glorot_init(d_in, d_h, rng) for _ in GATES])
        U = np.vstack([glorot_init(d_h, d_h, rng) for _ in GATES])
        b = np.zeros(4 * d_h, dtype=DTYPE)
        b[d_h:2 * d_h] = forget_bias
        return cls(W, U, b)

    @classmethod
    def zeros(cls, d_in: int, d_h: int):
        return cls(np.zeros((4 * d_h, d_in)), np.zeros((4 * d_h, d_h)), np.zeros(4 * d_h))

    def _block(self, arr, gate):
        h = self.d_h
        j = GATES.index(gate)
        return arr[j * h:(j + 1) * h]

    def __getattr__(self, name):
        # W_i, U_f, b_o, ... as views into the fused storage
        if len(name) == 3 and name[1] == "_" and name[0] in "WUb" and name[2] in GATES:
            return self._block(object.__getattribute__(self, name[0]), name[2])
        raise AttributeError(name)


@dataclass
class LstmStepCache:
    x: np.ndarray
    h_prev: np.ndarray
    c_prev: np.ndarray
    i: np.ndarray
    f: np.ndarray
    o: np.ndarray
    g: np.ndarray
    c: np.ndarray
    tanh_c: np.ndarray
    h: np.ndarray


@dataclass
class LstmGrads:
    W: np.ndarray
    U: np.ndarray
    b: np.ndarray


def lstm_step_forward(x, h_prev, c_prev, p: LstmCellParams):
    """One timestep; returns ``(h, c, cache)``."""
    if x.shape != (p.d_in,) or h_prev.shape != (p.d_h,) or c_prev.shape != (p.d_h,):
        raise ValueError(
            f"lstm_step_forward: got x{x.shape} h{h_prev.shape} c{c_prev.shape} "
            f"for a cell with d_in={p.d_in}, d_h={p.d_h}"
        )
    h = p.d_h
    z = p.W @ x + p.U @ h_prev + p.b
    ifo = sigmoid(z[:3 * h])
    i, f, o = ifo[:h], ifo[h:2 * h], ifo[2 * h:]
    g = np.tanh(z[3 * h:])
    c = f * c_prev + i * g
    tanh_c = np.tanh(c)
    h_new = o * tanh_c
    return h_new, c, LstmStepCache(x, h_prev, c_prev, i, f, o, g, c, tanh_c, h_new)


def lstm_step_backward(cache: LstmStepCache, dh, dc, p: LstmCellParams, grads: LstmGrads = None):
    """Backprop one timestep.

    ``dh``/``dc`` are the loss gradients w.r.t. this step's outputs.  Parameter
    gradients are accumulated into ``grads`` (allocated when omitted) so that
    looping over timesteps yields full BPTT gradients.

    Returns ``(dx, dh_prev, dc_prev, grads)``.
    """
    if dh.shape != cache.c.shape or dc.shape != cache.c.shape:
        raise ValueError(f"lstm_step_backward: dh{dh.shape}/dc{dc.shape} vs cache {cache.c.shape}")
    if grads is None:
        grads = LstmGrads(np.zeros_like(p.W), np.zeros_like(p.U), np.zeros_like(p.b))
    i, f, o, g = cache.i, cache.f, cache.o, cache.g
    do = dh * cache.tanh_c
    dc_total = dc + dh * o * (1.0 - cache.tanh_c ** 2)
    di = dc_total * g
    dg = dc_total * i
    df = dc_total * cache.c_prev
    dz = np.concatenate([
        di * i * (1.0 - i),
        df * f * (1.0 - f),
        do * o * (1.0 - o),
        dg * (1.0 - g ** 2),
    ])
    grads.W += np.outer(dz, cache.x)
    grads.U += np.outer(dz, cache.h_prev)
    grads.b += dz
    dx = p.W.T @ dz
    dh_prev = p.U.T @ dz
    dc_prev = dc_total * f
    return dx, dh_prev, dc_prev, grads


def window_indices(tokens, k: int, pad_index: int) -> np.ndarray:
    """(T x 2k+1) token indices of each position's context window."""
    tokens = np.asarray(tokens, dtype=np.int64)
    T = len(tokens)
    padded = np.concatenate([np.full(k, pad_index), tokens, np.full(k, pad_index)])
    return np.stack([padded[t:t + 2 * k + 1] for t in range(T)]).astype(np.int64)


def embed_window(sentence, E: np.ndarray, k: int, pad_index: int = 0):
    """Context-window embeddings.

    Position t gets the concatenated embedding columns of tokens t-k..t+k;
    positions falling outside the sentence use the padding token's column.
    Returns a (T x d_e(2k+1)) array whose rows are the per-position vectors.
    """
    if k < 0:
        raise ValueError(f"context size k must be >= 0, got {k}")
    V = E.shape[1]
    tokens = np.asarray(sentence, dtype=np.int64)
    if not 0 <= pad_index < V:
        raise ValueError(f"pad index {pad_index} outside vocabulary of size {V}")
    bad = (tokens < 0) | (tokens >= V)
    if bad.any():
        pos = int(np.flatnonzero(bad)[0])
        raise ValueError(f"token index {tokens[pos]} at position {pos} outside vocabulary of size {V}")
    idx = window_indices(tokens, k, pad_index)
    # E[:, idx] is (d_e, T, 2k+1); reorder so each row is [E_{t-k}; ...; E_{t+k}]
    return E[:, idx].transpose(1, 2, 0).reshape(len(tokens), -1)


@dataclass
class SoftmaxParams:
    W: np.ndarray  # (L x d_h)
    b: np.ndarray  # (L,)


def softmax(z) -> np.ndarray:
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def softmax_xent(h, p: SoftmaxParams, gold: int, grads: bool = False):
    """Softmax posteriors over labels and the NLL of ``gold``.

    With ``grads=True`` also returns ``(dh, dW, db)``.
    """
    L = p.W.shape[0]
    if not 0 <= gold < L:
        raise ValueError(f"gold label {gold} outside 0..{L - 1}")
    probs = softmax(p.W @ h + p.b)
    loss = -np.log(probs[gold])
    if not grads:
        return probs, loss
    dz = probs.copy()
    dz[gold] -= 1.0
    return probs, loss, (p.W.T @ dz, np.outer(dz, h), dz)


def dropout_mask(dim: int, rate: float, rng: Rng) -> np.ndarray:
    """Inverted-dropout mask: 0 with probability ``rate``, else 1/(1-rate)."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    if rate == 0.0:
        return np.ones(dim, dtype=DTYPE)
    keep = rng.random(dim) >= rate
    return keep / (1.0 - rate)
