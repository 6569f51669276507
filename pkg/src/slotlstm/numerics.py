"""Dense linear algebra helpers and a portable seeded random stream.

Every numeric container in the package is a float64 ``numpy.ndarray``.  The
checked helpers here (``matmul``, ``add``, ...) validate shapes and raise
``ValueError`` with a readable message; hot loops in :mod:`slotlstm.layers`
call numpy directly once shapes are known to be consistent.

Random numbers come from :class:`Rng`, a thin wrapper around numpy's PCG64
bit generator (PCG XSL RR 128/64).  PCG64's integer stream and the derived
``random()`` doubles are specified by numpy independently of platform, so a
fixed seed gives bit-identical samples everywhere.
"""
from __future__ import annotations

import numpy as np

DTYPE = np.float64


class Rng:
    """Seeded PCG64 stream.

    ``Rng(seed).spawn(i)`` derives an independent child stream from
    ``(seed, i)`` so parallel trials never share state.
    """

    def __init__(self, seed: int = 0):
        if seed < 0:
            raise ValueError(f"seed must be a non-negative integer, got {seed}")
        self.seed = int(seed)
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def random(self, size=None):
        return self._gen.random(size)

    def uniform(self, lo: float, hi: float, size=None):
        return lo + (hi - lo) * self._gen.random(size)

    def integers(self, lo: int, hi: int, size=None):
        return self._gen.integers(lo, hi, size=size)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, options):
        return options[int(self._gen.integers(0, len(options)))]

    def spawn(self, index: int) -> "Rng":
        ss = np.random.SeedSequence(self.seed, spawn_key=(int(index),))
        return Rng(int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1)))

    def __repr__(self):
        return f"Rng(seed={self.seed})"


def _check_same_shape(a, b, op):
    if a.shape != b.shape:
        raise ValueError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-D float64 array; 1-D input becomes a column."""
    arr = np.asarray(a, dtype=DTYPE)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got {arr.ndim} dims")
    return arr


def matmul(a, b) -> np.ndarray:
    a, b = as_matrix(a), as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul: inner dimensions differ ({a.shape[0]}x{a.shape[1]} "
            f"times {b.shape[0]}x{b.shape[1]})"
        )
    return a @ b


def add(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=DTYPE), np.asarray(b, dtype=DTYPE)
    _check_same_shape(a, b, "add")
    return a + b


def hadamard(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=DTYPE), np.asarray(b, dtype=DTYPE)
    _check_same_shape(a, b, "hadamard")
    return a * b


def sigmoid(a) -> np.ndarray:
    a = np.asarray(a, dtype=DTYPE)
    # split by sign so exp never overflows
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


def tanh(a) -> np.ndarray:
    return np.tanh(np.asarray(a, dtype=DTYPE))


map_sigmoid = sigmoid
map_tanh = tanh


def sample_uniform(rng: Rng, lo: float, hi: float, rows: int, cols: int) -> np.ndarray:
    """Matrix of i.i.d. draws from [lo, hi)."""
    if not lo < hi:
        raise ValueError(f"sample_uniform needs lo < hi, got lo={lo}, hi={hi}")
    if rows < 1 or cols < 1:
        raise ValueError(f"invalid shape ({rows}, {cols})")
    out = rng.uniform(lo, hi, (rows, cols))
    # lo + (hi-lo)*u can round up to hi for u just below 1
    return np.minimum(out, np.nextafter(hi, lo))
