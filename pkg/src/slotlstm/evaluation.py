"""Segment-level precision/recall/F1 over IOB label sequences."""
from __future__ import annotations

from dataclasses import dataclass

START_SYMBOL = "<B>"


class IOBFormatError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Segment:
    label_type: str
    start: int
    end: int  # inclusive


@dataclass
class PrfReport:
    precision: float
    recall: float
    f1: float
    n_pred: int
    n_gold: int
    n_correct: int

    def as_lines(self) -> list:
        """Key=value lines for scripting, percentages with two decimals."""
        return [
            f"precision={100 * self.precision:.2f}",
            f"recall={100 * self.recall:.2f}",
            f"f1={100 * self.f1:.2f}",
            f"pred_segments={self.n_pred}",
            f"gold_segments={self.n_gold}",
            f"correct_segments={self.n_correct}",
        ]

    def __str__(self):
        return (f"precision {100 * self.precision:6.2f}%  recall {100 * self.recall:6.2f}%  "
                f"F1 {100 * self.f1:6.2f}%  ({self.n_correct} correct / {self.n_pred} predicted "
                f"/ {self.n_gold} gold)")


def _split(label: str, pos: int):
    if label == "O":
        return "O", None
    if len(label) > 2 and label[1] == "-" and label[0] in "BI":
        return label[0], label[2:]
    raise IOBFormatError(f"malformed IOB label {label!r} at position {pos}")


def extract_segments(labels) -> list:
    """Maximal slot spans from an IOB label sequence.

    An ``I-X`` that does not continue an ``X`` span opens a new segment
    (CoNLL-style tolerance for malformed predictions).
    """
    segments = []
    cur_type, cur_start = None, None
    for pos, label in enumerate(labels):
        tag, typ = _split(label, pos)
        if tag == "I" and typ == cur_type:
            continue
        if cur_type is not None:
            segments.append(Segment(cur_type, cur_start, pos - 1))
            cur_type = None
        if tag in ("B", "I"):
            cur_type, cur_start = typ, pos
    if cur_type is not None:
        segments.append(Segment(cur_type, cur_start, len(labels) - 1))
    return segments


def segments_to_iob(segments, length: int) -> list:
    labels = ["O"] * length
    for seg in segments:
        labels[seg.start] = f"B-{seg.label_type}"
        for i in range(seg.start + 1, seg.end + 1):
            labels[i] = f"I-{seg.label_type}"
    return labels


def prf(n_correct: int, n_pred: int, n_gold: int) -> PrfReport:
    p = n_correct / n_pred if n_pred else 0.0
    r = n_correct / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return PrfReport(p, r, f, n_pred, n_gold, n_correct)


def f1_score(gold, pred) -> PrfReport:
    """Micro-averaged segment F1 over a corpus of label-string sequences."""
    if len(gold) != len(pred):
        raise ValueError(f"corpus sizes differ: {len(gold)} gold vs {len(pred)} predicted")
    n_correct = n_pred = n_gold = 0
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ValueError(f"sentence {i}: {len(g)} gold labels vs {len(p)} predicted")
        gs, ps = set(extract_segments(g)), set(extract_segments(p))
        n_gold += len(gs)
        n_pred += len(ps)
        n_correct += len(gs & ps)
    return prf(n_correct, n_pred, n_gold)


def after_first_error_counts(gold, pred):
    """(correct, total) over positions strictly after the first mismatch."""
    for t, (g, p) in enumerate(zip(gold, pred)):
        if g != p:
            tail_g, tail_p = gold[t + 1:], pred[t + 1:]
            return sum(a == b for a, b in zip(tail_g, tail_p)), len(tail_g)
    return 0, 0


def accuracy_after_first_error(model, sentences, beam: int = 1):
    """Token accuracy after each sentence's first mislabelled position.

    ``sentences`` is a sequence of (tokens, labels) index pairs.  Sentences
    decoded without error contribute nothing; returns None when no sentence
    has an error (and so the metric is undefined).
    """
    from .decoding import decode

    if len(sentences) == 0:
        raise ValueError("empty corpus")
    correct = total = 0
    for tokens, labels in sentences:
        pred = decode(model, tokens, beam)
        c, n = after_first_error_counts(list(labels), pred)
        correct += c
        total += n
    return correct / total if total else None
