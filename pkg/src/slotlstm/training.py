"""Adam, the per-sentence training loop, heldout model selection and random search."""
from __future__ import annotations

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .architectures import Arch, ModelParams, backward, forward, init_model
from .corpus import Corpus, split_train_heldout
from .decoding import decode
from .evaluation import f1_score
from .numerics import Rng

log = logging.getLogger(__name__)

WORKERS_ENV = "SLOTLSTM_WORKERS"


@dataclass
class Hyperparams:
    arch: str = "enc-labeler-w"
    d_e: int = 30
    d_h: tuple = (100,)
    k: int = 1
    lr: float = 0.001
    dropout: float = 0.5
    epochs: int = 100
    beam: int = 1
    seed: int = 0
    heldout_ratio: float = 0.2
    d_label: int = None
    clip: float = 5.0

    def __post_init__(self):
        self.arch = Arch.parse(self.arch).value
        self.d_h = tuple(int(h) for h in np.atleast_1d(self.d_h))
        if self.d_e < 1 or not self.d_h or min(self.d_h) < 1 or self.k < 0:
            raise ValueError(f"invalid dimensions d_e={self.d_e} d_h={self.d_h} k={self.k}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 < self.heldout_ratio < 1.0:
            raise ValueError(f"heldout_ratio must lie in (0, 1), got {self.heldout_ratio}")
        if self.lr < 0 or self.epochs < 0 or self.beam < 1:
            raise ValueError(f"invalid lr={self.lr} epochs={self.epochs} beam={self.beam}")

    @property
    def depth(self):
        return len(self.d_h)


class AdamState:
    def __init__(self, params: dict, beta1=0.9, beta2=0.999, eps=1e-8):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps


def adam_step(params: dict, grads: dict, state: AdamState, lr: float):
    """In-place bias-corrected Adam update of every tensor in ``params``."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, g in grads.items():
        p = params[name]
        if g.shape != p.shape:
            raise ValueError(f"adam_step: gradient for {name} has shape {g.shape}, param {p.shape}")
        m, v = state.m[name], state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return params, state


def clip_gradients(grads: dict, limit: float):
    if limit:
        for g in grads.values():
            np.clip(g, -limit, limit, out=g)
    return grads


def train_epoch(model: ModelParams, sentences, hyper: Hyperparams, rng: Rng,
                adam: AdamState = None) -> float:
    """One pass over ``sentences`` in a seeded random order; returns mean per-token NLL."""
    if len(sentences) == 0:
        raise ValueError("empty training set")
    if adam is None:
        adam = AdamState(model.params)
    total, n_tokens = 0.0, 0
    for i in rng.permutation(len(sentences)):
        tokens, labels = sentences[i]
        trace = forward(model, tokens, labels, mode="train", dropout=hyper.dropout, rng=rng)
        grads = clip_gradients(backward(model, trace), hyper.clip)
        adam_step(model.params, grads, adam, hyper.lr)
        total += trace.nll
        n_tokens += len(tokens)
    return total / n_tokens


def corpus_f1(model: ModelParams, corpus: Corpus, beam: int = 1):
    gold, pred = [], []
    for s in corpus.sentences:
        gold.append(corpus.labels.decode(s.labels))
        pred.append(corpus.labels.decode(decode(model, s.tokens, beam)))
    return f1_score(gold, pred)


@dataclass
class TrainingHistory:
    train_nll: list = field(default_factory=list)
    heldout_f1: list = field(default_factory=list)
    eval_f1: list = field(default_factory=list)
    best_epoch: int = -1

    @property
    def best_heldout_f1(self):
        return self.heldout_f1[self.best_epoch] if self.best_epoch >= 0 else float("nan")

    @property
    def best_eval_f1(self):
        return self.eval_f1[self.best_epoch] if self.eval_f1 and self.best_epoch >= 0 else None


def new_model(hyper: Hyperparams, corpus: Corpus, rng: Rng) -> ModelParams:
    return init_model(hyper.arch, len(corpus.words), len(corpus.labels), hyper.d_e,
                      hyper.d_h, hyper.k, rng, d_label=hyper.d_label)


def fit(corpus: Corpus, hyper: Hyperparams, eval_corpus: Corpus = None, callback=None):
    """Train with heldout-F1 model selection.

    The corpus is split into train/heldout by ``hyper.heldout_ratio`` (seeded by
    ``hyper.seed``), the model trained for ``hyper.epochs`` epochs and the
    snapshot from the epoch with the best heldout F1 returned (first such epoch
    on ties) together with the :class:`TrainingHistory`.
    """
    if eval_corpus is not None and (eval_corpus.words != corpus.words
                                    or eval_corpus.labels != corpus.labels):
        raise ValueError("evaluation corpus must share the training vocabularies")
    train, heldout = split_train_heldout(corpus, hyper.heldout_ratio, hyper.seed)
    rng = Rng(hyper.seed)
    model = new_model(hyper, corpus, rng.spawn(0))
    train_rng = rng.spawn(1)
    adam = AdamState(model.params)
    history = TrainingHistory()
    best = model.copy()
    for epoch in range(hyper.epochs):
        nll = train_epoch(model, train.sentences, hyper, train_rng, adam)
        held = corpus_f1(model, heldout, hyper.beam).f1
        history.train_nll.append(nll)
        history.heldout_f1.append(held)
        if eval_corpus is not None:
            history.eval_f1.append(corpus_f1(model, eval_corpus, hyper.beam).f1)
        if history.best_epoch < 0 or held > history.best_heldout_f1:
            history.best_epoch = epoch
            best = model.copy()
        log.info("epoch %d nll %.4f heldout F1 %.2f", epoch + 1, nll, 100 * held)
        if callback is not None:
            callback(epoch, history)
    return best, history


@dataclass
class SearchSpace:
    """Random-search space; defaults are the grid used for the published search."""

    d_e: tuple = (30, 50, 75)
    d_h: tuple = (100, 150, 200, 250, 300)
    k: tuple = (0, 1, 2)
    lr: tuple = (0.0001, 0.01)
    depth: tuple = (1,)
    arch: tuple = ("enc-labeler-w",)

    def __post_init__(self):
        for name in ("d_e", "d_h", "k", "depth", "arch"):
            if len(getattr(self, name)) == 0:
                raise ValueError(f"search dimension {name!r} is empty")
        if len(self.lr) != 2 or not 0 < self.lr[0] <= self.lr[1]:
            raise ValueError(f"lr range must be (lo, hi) with 0 < lo <= hi, got {self.lr}")

    def sample(self, rng: Rng, base: Hyperparams, seed: int) -> Hyperparams:
        depth = int(rng.choice(self.depth))
        d_h = tuple(int(rng.choice(self.d_h)) for _ in range(depth))
        lo, hi = self.lr
        return replace(
            base,
            arch=rng.choice(self.arch),
            d_e=int(rng.choice(self.d_e)),
            d_h=d_h,
            k=int(rng.choice(self.k)),
            lr=float(rng.uniform(lo, hi)) if hi > lo else lo,
            seed=seed,
        )


@dataclass
class Trial:
    index: int
    hyper: Hyperparams
    heldout_f1: float
    eval_f1: float
    best_epoch: int
    model: ModelParams = field(default=None, repr=False)


def _run_trial(args):
    index, hyper, corpus, eval_corpus = args
    model, history = fit(corpus, hyper, eval_corpus)
    return Trial(index, hyper, history.best_heldout_f1, history.best_eval_f1,
                 history.best_epoch, model)


def default_workers() -> int:
    return max(1, int(os.environ.get(WORKERS_ENV, "1")))


def random_search(corpus: Corpus, space: SearchSpace, budget: int, master_seed: int,
                  base: Hyperparams = None, eval_corpus: Corpus = None, workers: int = None):
    """Sample ``budget`` configurations, fit each, rank by heldout F1 (best first).

    Trial ``i`` uses seed ``Rng(master_seed).spawn(i)``, so results do not
    depend on the worker count.
    """
    if budget < 1:
        raise ValueError(f"budget must be >= 1, got {budget}")
    base = base or Hyperparams()
    master = Rng(master_seed)
    sampler = master.spawn(0)
    hypers = [space.sample(sampler, base, master.spawn(i + 1).seed) for i in range(budget)]
    jobs = [(i, h, corpus, eval_corpus) for i, h in enumerate(hypers)]
    workers = workers or default_workers()
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_run_trial, jobs))
    else:
        trials = [_run_trial(j) for j in jobs]
    return sorted(trials, key=lambda t: (-t.heldout_f1, t.index))


def hyper_dict(hyper: Hyperparams) -> dict:
    return asdict(hyper)
