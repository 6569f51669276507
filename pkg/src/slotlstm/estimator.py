"""scikit-learn style estimator around the training and decoding code."""
from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import modelfile
from .architectures import Arch
from .corpus import build_vocab, encode_corpus
from .decoding import decode
from .evaluation import f1_score
from .training import Hyperparams, fit


def check_sequences(X, y=None):
    """Validate a batch of token sequences (and optional label sequences).

    Returns lists of lists of strings.
    """
    if isinstance(X, str) or not hasattr(X, "__len__"):
        raise TypeError("X must be a sequence of token sequences")
    X = [list(x) for x in X]
    if not X:
        raise ValueError("X is empty")
    for i, x in enumerate(X):
        if not x:
            raise ValueError(f"sequence {i} is empty")
        if not all(isinstance(t, str) for t in x):
            raise TypeError(f"sequence {i} contains non-string tokens")
    if y is None:
        return X
    y = [list(s) for s in y]
    if len(y) != len(X):
        raise ValueError(f"X has {len(X)} sequences but y has {len(y)}")
    for i, (x, s) in enumerate(zip(X, y)):
        if len(x) != len(s):
            raise ValueError(f"sequence {i}: {len(x)} tokens but {len(s)} labels")
    return X, y


class SlotTagger(BaseEstimator):
    """Sequence labeler over the LSTM family (labeler / encoder-labeler / enc-dec).

    ``fit`` takes lists of token lists and IOB label lists, holds out
    ``heldout_ratio`` of them for epoch selection and keeps the best model.
    """

    def __init__(self, arch="enc-labeler-w", depth=1, d_e=30, d_h=100, k=1, lr=0.001,
                 dropout=0.5, epochs=100, beam=1, seed=0, heldout_ratio=0.2,
                 min_count=1, d_label=None, clip=5.0):
        self.arch = arch
        self.depth = depth
        self.d_e = d_e
        self.d_h = d_h
        self.k = k
        self.lr = lr
        self.dropout = dropout
        self.epochs = epochs
        self.beam = beam
        self.seed = seed
        self.heldout_ratio = heldout_ratio
        self.min_count = min_count
        self.d_label = d_label
        self.clip = clip

    def _hyper(self) -> Hyperparams:
        d_h = (self.d_h,) * self.depth if isinstance(self.d_h, int) else tuple(self.d_h)
        if len(d_h) != self.depth:
            raise ValueError(f"d_h has {len(d_h)} entries for depth {self.depth}")
        return Hyperparams(
            arch=Arch.parse(self.arch).value, d_e=self.d_e, d_h=d_h, k=self.k, lr=self.lr,
            dropout=self.dropout, epochs=self.epochs, beam=self.beam, seed=self.seed,
            heldout_ratio=self.heldout_ratio, d_label=self.d_label, clip=self.clip,
        )

    def fit(self, X, y, X_eval=None, y_eval=None):
        X, y = check_sequences(X, y)
        hyper = self._hyper()
        corpus = build_vocab(list(zip(X, y)), self.min_count)
        eval_corpus = None
        if X_eval is not None:
            X_eval, y_eval = check_sequences(X_eval, y_eval)
            eval_corpus = encode_corpus(list(zip(X_eval, y_eval)), corpus.words, corpus.labels)
        self.model_, self.history_ = fit(corpus, hyper, eval_corpus)
        self.words_, self.labels_ = corpus.words, corpus.labels
        return self

    def predict(self, X, beam=None):
        check_is_fitted(self, "model_")
        X = check_sequences(X)
        beam = self.beam if beam is None else beam
        out = []
        for x in X:
            idx = decode(self.model_, self.words_.encode(x, unk=True), beam)
            out.append(self.labels_.decode(idx))
        return out

    def score(self, X, y):
        """Segment-level F1 of the predictions."""
        X, y = check_sequences(X, y)
        return f1_score(y, self.predict(X)).f1

    def save(self, path):
        check_is_fitted(self, "model_")
        modelfile.save_model(self.model_, self.words_, self.labels_, path)

    @classmethod
    def load(cls, path) -> "SlotTagger":
        model, words, labels = modelfile.load_model(path)
        est = cls(arch=model.arch.value, depth=model.depth, d_e=model.d_e,
                  d_h=model.d_h, k=model.k, d_label=model.d_label)
        est.model_, est.words_, est.labels_ = model, words, labels
        return est
