import numpy as np
import pytest

from slotlstm.architectures import Arch, init_model
from slotlstm.numerics import Rng


def rel_error(a, b, floor=1e-6):
    """Elementwise relative error; the floor keeps near-zero entries from dividing by ~0."""
    a, b = np.asarray(a), np.asarray(b)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)


def numeric_grads(loss_fn, params, h=1e-5):
    """Central finite differences of loss_fn() w.r.t. every entry of every array in params."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up = loss_fn()
            p[idx] = old - h
            down = loss_fn()
            p[idx] = old
            g[idx] = (up - down) / (2 * h)
        out[name] = g
    return out


def tiny_model(arch, depth=1, seed=0, V=7, n_labels=5, d_e=4, d_h=5, k=1, jitter=0.3):
    """Small random model; ``n_labels`` includes <B>, so L = n_labels - 1."""
    rng = Rng(seed)
    m = init_model(arch, V, n_labels, d_e, [d_h] * depth, k, rng)
    if jitter:
        for v in m.params.values():
            v += jitter * rng.uniform(-1, 1, v.shape)
    return m


def random_sentence(rng, T, V=7, n_labels=5):
    return rng.integers(0, V, T), rng.integers(1, n_labels, T)


@pytest.fixture
def rng():
    return Rng(1234)


ALL_ARCHS = list(Arch)
