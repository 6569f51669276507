"""Greedy, beam and exhaustive decoding.

All decoders work in label-vocabulary indices (1..L, 0 being ``<B>``) and
share one tie-break rule: among equal scores the lexicographically smaller
label sequence wins.  Scores are sums of natural-log posteriors with no
length normalisation, since output length is always the input length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .architectures import START, ModelParams, decode_step, forward, start_decoding


@dataclass
class BeamHypothesis:
    prefix: tuple
    score: float
    state: list


def _check_sentence(tokens):
    if len(tokens) == 0:
        raise ValueError("cannot decode an empty sentence")


def greedy_decode(model: ModelParams, tokens) -> list:
    _check_sentence(tokens)
    ctx, state = start_decoding(model, tokens)
    out = []
    prev = START
    for t in range(len(tokens)):
        state, logp = decode_step(ctx, t, state, prev)
        prev = int(np.argmax(logp)) + 1  # argmax picks the lowest index on ties
        out.append(prev)
    return out


def beam_search(model: ModelParams, tokens, beam: int, return_score: bool = False):
    """Left-to-right beam search keeping the ``beam`` best prefixes per step."""
    if beam < 1:
        raise ValueError(f"beam size must be >= 1, got {beam}")
    _check_sentence(tokens)
    ctx, state = start_decoding(model, tokens)
    hyps = [BeamHypothesis((), 0.0, state)]
    L = model.n_classes
    for t in range(len(tokens)):
        expanded = []
        for hyp in hyps:
            prev = hyp.prefix[-1] if hyp.prefix else START
            new_state, logp = decode_step(ctx, t, hyp.state, prev)
            for j in range(L):
                expanded.append((hyp.score + logp[j], hyp.prefix + (j + 1,), new_state))
        expanded.sort(key=lambda e: (-e[0], e[1]))
        hyps = [BeamHypothesis(p, s, st) for s, p, st in expanded[:beam]]
    best = hyps[0]
    if return_score:
        return list(best.prefix), best.score
    return list(best.prefix)


def exhaustive_decode(model: ModelParams, tokens, max_states: int = 100_000,
                      return_score: bool = False):
    """Exact sequence argmax by depth-first enumeration of all L^T label sequences."""
    _check_sentence(tokens)
    T, L = len(tokens), model.n_classes
    if L ** T > max_states:
        raise ValueError(f"{L}^{T} label sequences exceed max_states={max_states}")
    ctx, state0 = start_decoding(model, tokens)
    best_seq, best_score = None, -np.inf

    def visit(t, state, prefix, score):
        nonlocal best_seq, best_score
        if t == T:
            # lexicographic visiting order + strict '>' keeps the smallest tied sequence
            if score > best_score:
                best_seq, best_score = list(prefix), score
            return
        prev = prefix[-1] if prefix else START
        new_state, logp = decode_step(ctx, t, state, prev)
        for j in range(L):
            visit(t + 1, new_state, prefix + [j + 1], score + logp[j])

    visit(0, state0, [], 0.0)
    if return_score:
        return best_seq, best_score
    return best_seq


def sequence_log_prob(model: ModelParams, tokens, labels) -> float:
    """log p(labels | tokens) from an independent full forward pass."""
    trace = forward(model, tokens, labels, mode="infer", teacher_forcing=True)
    return -trace.nll


def decode(model: ModelParams, tokens, beam: int = 1) -> list:
    """Greedy for feedback-free models, beam search otherwise."""
    if beam <= 1 or not model.arch.label_feedback:
        return greedy_decode(model, tokens)
    return beam_search(model, tokens, beam)
