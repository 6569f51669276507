"""The five LSTM slot-filling architectures with forward and BPTT passes.

Label indices follow the label vocabulary: index 0 is the ``<B>`` start symbol
and real slot labels are ``1..L``.  The softmax only ranges over the real
labels, so posterior vectors have length ``L`` and entry ``j`` is the
probability of label ``j + 1``.
"""
from __future__ import annotations

import copy
import enum
from dataclasses import dataclass, field

import numpy as np

from .layers import (
    LstmCellParams,
    LstmGrads,
    dropout_mask,
    glorot_init,
    lstm_step_backward,
    lstm_step_forward,
    softmax,
    window_indices,
)
from .numerics import DTYPE, Rng

START = 0  # <B> in label space
PAD = 0  # padding token in word space


class Arch(str, enum.Enum):
    LABELER_W = "labeler-w"
    LABELER_WL = "labeler-wl"
    ENC_DEC = "enc-dec"
    ENC_LABELER_W = "enc-labeler-w"
    ENC_LABELER_WL = "enc-labeler-wl"

    @property
    def has_encoder(self) -> bool:
        return self in (Arch.ENC_DEC, Arch.ENC_LABELER_W, Arch.ENC_LABELER_WL)

    @property
    def label_feedback(self) -> bool:
        return self in (Arch.LABELER_WL, Arch.ENC_DEC, Arch.ENC_LABELER_WL)

    @property
    def word_input(self) -> bool:
        return self is not Arch.ENC_DEC

    @classmethod
    def parse(cls, name) -> "Arch":
        if isinstance(name, Arch):
            return name
        key = str(name).strip().lower().replace("_", "-")
        for a in cls:
            if key in (a.value, a.name.lower().replace("_", "-")):
                return a
        raise ValueError(f"unknown architecture {name!r}; expected one of {[a.value for a in cls]}")


@dataclass
class ModelParams:
    """All trainable tensors of one model plus its shape metadata.

    ``params`` maps names to float64 arrays:

    - ``E``: word embeddings, (d_e x n_words), shared by encoder and labeler
    - ``enc.{l}.W/U/b`` and ``lab.{l}.W/U/b``: fused LSTM blocks per layer
    - ``softmax.W`` (L x d_h[-1]), ``softmax.b`` (L,)
    - ``label_emb``: (d_label x n_labels), present for label-fed architectures
    """

    arch: Arch
    d_e: int
    d_h: tuple
    k: int
    n_words: int
    n_labels: int
    d_label: int
    params: dict = field(default_factory=dict)

    @property
    def depth(self) -> int:
        return len(self.d_h)

    @property
    def n_classes(self) -> int:
        return self.n_labels - 1

    @property
    def d_window(self) -> int:
        return self.d_e * (2 * self.k + 1)

    @property
    def d_labeler_in(self) -> int:
        d = self.d_window if self.arch.word_input else 0
        return d + (self.d_label if self.arch.label_feedback else 0)

    def cell(self, side: str, layer: int) -> LstmCellParams:
        p = self.params
        return LstmCellParams(p[f"{side}.{layer}.W"], p[f"{side}.{layer}.U"], p[f"{side}.{layer}.b"])

    def cells(self, side: str) -> list:
        return [self.cell(side, l) for l in range(self.depth)]

    def copy(self) -> "ModelParams":
        return copy.deepcopy(self)

    def n_parameters(self) -> int:
        return sum(a.size for a in self.params.values())


def init_model(arch, n_words: int, n_labels: int, d_e: int, d_h, k: int,
               rng: Rng, d_label: int = None, forget_bias: float = 1.0) -> ModelParams:
    """Randomly initialised model (Glorot weights, forget-gate bias +1).

    ``n_labels`` counts the whole label vocabulary including ``<B>``.
    """
    arch = Arch.parse(arch)
    d_h = tuple(int(h) for h in np.atleast_1d(d_h))
    if n_labels < 2:
        raise ValueError("need at least one real label besides <B>")
    if not d_h or min(d_h) < 1 or d_e < 1 or k < 0 or n_words < 1:
        raise ValueError(f"invalid dimensions d_e={d_e} d_h={d_h} k={k} n_words={n_words}")
    d_label = d_e if d_label is None else int(d_label)
    model = ModelParams(arch, d_e, d_h, k, n_words, n_labels, d_label)
    p = model.params
    p["E"] = glorot_init(n_words, d_e, rng)
    if arch.has_encoder:
        d_in = model.d_window
        for l, h in enumerate(d_h):
            c = LstmCellParams.init(d_in, h, rng, forget_bias)
            p[f"enc.{l}.W"], p[f"enc.{l}.U"], p[f"enc.{l}.b"] = c.W, c.U, c.b
            d_in = h
    d_in = model.d_labeler_in
    for l, h in enumerate(d_h):
        c = LstmCellParams.init(d_in, h, rng, forget_bias)
        p[f"lab.{l}.W"], p[f"lab.{l}.U"], p[f"lab.{l}.b"] = c.W, c.U, c.b
        d_in = h
    p["softmax.W"] = glorot_init(d_h[-1], model.n_classes, rng)
    p["softmax.b"] = np.zeros(model.n_classes, dtype=DTYPE)
    if arch.label_feedback:
        p["label_emb"] = glorot_init(n_labels, d_label, rng)
    return model


@dataclass
class StepRecord:
    caches: list
    in_masks: list
    window: np.ndarray = None
    prev_label: int = None
    out_mask: np.ndarray = None
    probs: np.ndarray = None
    gold: int = None


@dataclass
class ForwardTrace:
    """Everything backward() needs, plus the posteriors and total NLL."""

    steps: list
    enc_steps: list
    nll: float
    predicted: list
    mode: str
    dropout: float

    @property
    def probs(self) -> np.ndarray:
        return np.stack([s.probs for s in self.steps])


def _stack_step(cells, x, states, masks):
    new_states, caches = [], []
    for l, cell in enumerate(cells):
        if masks is not None:
            x = x * masks[l]
        h, c, cache = lstm_step_forward(x, states[l][0], states[l][1], cell)
        new_states.append((h, c))
        caches.append(cache)
        x = h
    return new_states, caches


def _masks(model, dims, mode, dropout, rng):
    if mode != "train" or dropout == 0.0:
        return None
    return [dropout_mask(d, dropout, rng) for d in dims]


def _zero_state(model):
    return [(np.zeros(h, dtype=DTYPE), np.zeros(h, dtype=DTYPE)) for h in model.d_h]


def _check_mode(mode, dropout, rng):
    if mode not in ("train", "infer"):
        raise ValueError(f"mode must be 'train' or 'infer', got {mode!r}")
    if mode == "train" and dropout > 0.0 and rng is None:
        raise ValueError("train mode with dropout needs an Rng")


def _check_tokens(model, tokens):
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.ndim != 1 or len(tokens) == 0:
        raise ValueError("sentence must be a non-empty 1-D token sequence")
    if tokens.min() < 0 or tokens.max() >= model.n_words:
        raise ValueError(f"token index outside vocabulary of size {model.n_words}")
    return tokens


def _check_labels(model, labels, T):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (T,):
        raise ValueError(f"expected {T} labels, got shape {labels.shape}")
    if labels.min() < 1 or labels.max() >= model.n_labels:
        raise ValueError(f"labels must lie in 1..{model.n_labels - 1} (0 is <B>)")
    return labels


def encode(model: ModelParams, tokens, mode: str = "infer", dropout: float = 0.0, rng: Rng = None):
    """Run the encoder stack over the sentence in reverse token order.

    Returns ``(states, enc_steps)`` where ``states`` is the per-layer final
    ``(h, c)`` and ``enc_steps`` the per-step records in processing order.
    """
    if not model.arch.has_encoder:
        raise ValueError(f"architecture {model.arch.value} has no encoder")
    _check_mode(mode, dropout, rng)
    tokens = _check_tokens(model, tokens)
    E = model.params["E"]
    windows = window_indices(tokens, model.k, PAD)
    cells = model.cells("enc")
    dims = [model.d_window] + list(model.d_h[:-1])
    states = _zero_state(model)
    steps = []
    for t in reversed(range(len(tokens))):
        x = E[:, windows[t]].T.reshape(-1)
        masks = _masks(model, dims, mode, dropout, rng)
        states, caches = _stack_step(cells, x, states, masks)
        steps.append(StepRecord(caches, masks, window=windows[t]))
    return states, steps


def _run_labeler(model, tokens, init_state, labels, teacher, mode, dropout, rng):
    T = len(tokens)
    arch = model.arch
    E = model.params["E"]
    Ws, bs = model.params["softmax.W"], model.params["softmax.b"]
    lab_emb = model.params.get("label_emb")
    windows = window_indices(tokens, model.k, PAD) if arch.word_input else None
    cells = model.cells("lab")
    dims = [model.d_labeler_in] + list(model.d_h[:-1])
    states = _zero_state(model) if init_state is None else list(init_state)
    steps, predicted = [], []
    nll = 0.0
    prev = START
    for t in range(T):
        parts = []
        if arch.word_input:
            parts.append(E[:, windows[t]].T.reshape(-1))
        if arch.label_feedback:
            parts.append(lab_emb[:, prev])
        x = parts[0] if len(parts) == 1 else np.concatenate(parts)
        masks = _masks(model, dims, mode, dropout, rng)
        states, caches = _stack_step(cells, x, states, masks)
        h_top = states[-1][0]
        out_mask = None
        if mode == "train" and dropout > 0.0:
            out_mask = dropout_mask(len(h_top), dropout, rng)
            h_top = h_top * out_mask
        probs = softmax(Ws @ h_top + bs)
        guess = int(np.argmax(probs)) + 1
        predicted.append(guess)
        gold = None
        if labels is not None:
            gold = int(labels[t])
            nll -= np.log(probs[gold - 1])
        steps.append(StepRecord(
            caches, masks,
            window=windows[t] if windows is not None else None,
            prev_label=prev if arch.label_feedback else None,
            out_mask=out_mask, probs=probs, gold=gold,
        ))
        prev = gold if teacher else guess
    return steps, predicted, (nll if labels is not None else float("nan"))


def forward(model: ModelParams, tokens, labels=None, mode: str = "infer",
            teacher_forcing: bool = None, dropout: float = 0.0, rng: Rng = None) -> ForwardTrace:
    """Full forward pass for any architecture.

    ``labels`` are gold labels (1..L).  When given, the trace carries the
    total NLL.  Label-fed models consume the gold previous label when
    ``teacher_forcing`` is true (the default in train mode) and their own
    argmax prediction otherwise.  Dropout is only applied in train mode.
    """
    _check_mode(mode, dropout, rng)
    tokens = _check_tokens(model, tokens)
    T = len(tokens)
    if labels is not None:
        labels = _check_labels(model, labels, T)
    if teacher_forcing is None:
        teacher_forcing = mode == "train"
    if mode == "train" and labels is None:
        raise ValueError("train mode needs gold labels")
    if teacher_forcing and model.arch.label_feedback and labels is None:
        raise ValueError("teacher forcing needs gold labels")
    enc_steps = []
    init_state = None
    if model.arch.has_encoder:
        init_state, enc_steps = encode(model, tokens, mode, dropout, rng)
    steps, predicted, nll = _run_labeler(
        model, tokens, init_state, labels, teacher_forcing, mode, dropout, rng)
    return ForwardTrace(steps, enc_steps, nll, predicted, mode, dropout)


def forward_labeler(model: ModelParams, tokens, init_state=None, teacher_labels=None,
                    mode: str = "infer", dropout: float = 0.0, rng: Rng = None) -> ForwardTrace:
    """Labeler pass on its own, starting from ``init_state`` (zeros if None)."""
    if model.arch is Arch.ENC_DEC:
        raise ValueError("enc-dec uses forward_encoder_decoder")
    if model.arch.has_encoder and init_state is None:
        raise ValueError(f"{model.arch.value} needs the encoder's final state as init_state")
    _check_mode(mode, dropout, rng)
    tokens = _check_tokens(model, tokens)
    labels = None
    if teacher_labels is not None:
        labels = _check_labels(model, teacher_labels, len(tokens))
    elif mode == "train":
        raise ValueError("train mode needs teacher labels")
    steps, predicted, nll = _run_labeler(
        model, tokens, init_state, labels, labels is not None, mode, dropout, rng)
    return ForwardTrace(steps, [], nll, predicted, mode, dropout)


def forward_encoder_decoder(model: ModelParams, tokens, teacher_labels=None,
                            mode: str = "infer", dropout: float = 0.0, rng: Rng = None) -> ForwardTrace:
    if model.arch is not Arch.ENC_DEC:
        raise ValueError(f"forward_encoder_decoder needs enc-dec, got {model.arch.value}")
    return forward(model, tokens, teacher_labels, mode, teacher_labels is not None, dropout, rng)


def _backprop_stack(cells, grads, steps, dh_next, dc_next, top_grads):
    """BPTT through one stack; returns input-vector gradients per step (reversed)."""
    depth = len(cells)
    d_inputs = []
    for idx in reversed(range(len(steps))):
        s = steps[idx]
        dup = top_grads[idx] if top_grads is not None else None
        for l in reversed(range(depth)):
            dh = dh_next[l] if dup is None else dh_next[l] + dup
            dx, dh_next[l], dc_next[l], _ = lstm_step_backward(
                s.caches[l], dh, dc_next[l], cells[l], grads[l])
            if s.in_masks is not None:
                dx = dx * s.in_masks[l]
            dup = dx
        d_inputs.append((idx, dup))
    return d_inputs


def backward(model: ModelParams, trace: ForwardTrace, detach_encoder: bool = False) -> dict:
    """Exact gradients of ``trace.nll`` w.r.t. every tensor in ``model.params``.

    With ``detach_encoder`` the gradient flowing from the labeler's initial
    state into the encoder is dropped.
    """
    if not trace.steps or trace.steps[0].gold is None:
        raise ValueError("backward needs a trace computed with gold labels")
    if bool(trace.enc_steps) != model.arch.has_encoder:
        raise ValueError("trace does not match the model architecture")
    if len(trace.steps[0].caches) != model.depth:
        raise ValueError("trace depth does not match the model")
    P = model.params
    G = {name: np.zeros_like(a) for name, a in P.items()}
    depth = model.depth
    arch = model.arch
    dEt = G["E"].T  # (V x d_e) view for row scatter

    # softmax layer
    Ws = P["softmax.W"]
    top_grads = []
    for s in trace.steps:
        dz = s.probs.copy()
        dz[s.gold - 1] -= 1.0
        h_top = s.caches[-1].h
        if s.out_mask is not None:
            h_top = h_top * s.out_mask
        G["softmax.W"] += np.outer(dz, h_top)
        G["softmax.b"] += dz
        dh = Ws.T @ dz
        if s.out_mask is not None:
            dh = dh * s.out_mask
        top_grads.append(dh)

    # labeler stack
    lab_cells = model.cells("lab")
    lab_grads = [LstmGrads(G[f"lab.{l}.W"], G[f"lab.{l}.U"], G[f"lab.{l}.b"]) for l in range(depth)]
    dh_next = [np.zeros(h) for h in model.d_h]
    dc_next = [np.zeros(h) for h in model.d_h]
    d_win = model.d_window
    for idx, dx in _backprop_stack(lab_cells, lab_grads, trace.steps, dh_next, dc_next, top_grads):
        s = trace.steps[idx]
        off = 0
        if arch.word_input:
            np.add.at(dEt, s.window, dx[:d_win].reshape(-1, model.d_e))
            off = d_win
        if arch.label_feedback:
            G["label_emb"][:, s.prev_label] += dx[off:]

    # encoder stack, seeded with the hand-off gradients
    if arch.has_encoder and not detach_encoder:
        enc_cells = model.cells("enc")
        enc_grads = [LstmGrads(G[f"enc.{l}.W"], G[f"enc.{l}.U"], G[f"enc.{l}.b"]) for l in range(depth)]
        for idx, dx in _backprop_stack(enc_cells, enc_grads, trace.enc_steps, dh_next, dc_next, None):
            np.add.at(dEt, trace.enc_steps[idx].window, dx.reshape(-1, model.d_e))
    return G


# step-wise inference, used by the decoders

@dataclass
class DecodeContext:
    model: ModelParams
    tokens: np.ndarray
    word_inputs: np.ndarray
    cells: list


def start_decoding(model: ModelParams, tokens):
    """Prepare step-wise inference; returns ``(context, initial_state)``."""
    tokens = _check_tokens(model, tokens)
    word_inputs = None
    if model.arch.word_input:
        windows = window_indices(tokens, model.k, PAD)
        word_inputs = model.params["E"][:, windows].transpose(1, 2, 0).reshape(len(tokens), -1)
    state = encode(model, tokens)[0] if model.arch.has_encoder else _zero_state(model)
    return DecodeContext(model, tokens, word_inputs, model.cells("lab")), state


def decode_step(ctx: DecodeContext, t: int, state, prev_label: int):
    """Advance one labeler step; returns ``(new_state, log_posteriors)``."""
    model = ctx.model
    parts = []
    if model.arch.word_input:
        parts.append(ctx.word_inputs[t])
    if model.arch.label_feedback:
        parts.append(model.params["label_emb"][:, prev_label])
    x = parts[0] if len(parts) == 1 else np.concatenate(parts)
    state, _ = _stack_step(ctx.cells, x, state, None)
    z = model.params["softmax.W"] @ state[-1][0] + model.params["softmax.b"]
    z = z - z.max()
    return state, z - np.log(np.exp(z).sum())
