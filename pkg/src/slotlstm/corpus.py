"""IOB corpus ingestion, vocabularies, splitting, merging and synthetic data.

File format: UTF-8, one ``token label`` pair per line separated by a run of
spaces or a single tab, blank lines between sentences.
"""
from __future__ import annotations

import io
import re
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .evaluation import START_SYMBOL
from .numerics import Rng

PAD_TOKEN = "<PAD>"
UNK_TOKEN = "<UNK>"

_FIELD_SEP = re.compile(r" +|\t")


class Vocabulary:
    """Bijective string <-> index map with reserved entries at the low indices."""

    def __init__(self, reserved=(), items=()):
        self.itos = []
        self.stoi = {}
        self.n_reserved = len(reserved)
        for s in list(reserved) + list(items):
            self.add(s)

    @classmethod
    def words(cls, items=()):
        return cls((PAD_TOKEN, UNK_TOKEN), items)

    @classmethod
    def labels(cls, items=()):
        return cls((START_SYMBOL,), items)

    def add(self, s: str) -> int:
        if s not in self.stoi:
            self.stoi[s] = len(self.itos)
            self.itos.append(s)
        return self.stoi[s]

    def __len__(self):
        return len(self.itos)

    def __contains__(self, s):
        return s in self.stoi

    def __eq__(self, other):
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def __repr__(self):
        return f"Vocabulary(size={len(self)})"

    @property
    def unk_index(self):
        return self.stoi.get(UNK_TOKEN)

    def encode(self, seq, unk: bool = False) -> np.ndarray:
        out = []
        for s in seq:
            idx = self.stoi.get(s)
            if idx is None:
                if not unk or self.unk_index is None:
                    raise KeyError(f"unknown entry {s!r}")
                idx = self.unk_index
            out.append(idx)
        return np.asarray(out, dtype=np.int64)

    def decode(self, idx) -> list:
        return [self.itos[int(i)] for i in idx]


@dataclass
class LabeledSentence:
    tokens: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.tokens) != len(self.labels) or len(self.tokens) == 0:
            raise ValueError(
                f"sentence needs equal, non-zero token/label lengths "
                f"(got {len(self.tokens)}/{len(self.labels)})"
            )

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        # lets a sentence unpack as (tokens, labels)
        return iter((self.tokens, self.labels))


@dataclass
class Corpus:
    sentences: list
    words: Vocabulary
    labels: Vocabulary
    raw: list = field(default=None, repr=False)

    def __len__(self):
        return len(self.sentences)

    def label_strings(self) -> list:
        return [self.labels.decode(s.labels) for s in self.sentences]

    def subset(self, indices) -> "Corpus":
        raw = [self.raw[i] for i in indices] if self.raw is not None else None
        return Corpus([self.sentences[i] for i in indices], self.words, self.labels, raw)


def read_iob(source) -> list:
    """Parse IOB text into a list of ``(tokens, labels)`` string-list pairs.

    ``source`` is a path or a text stream.  CRLF and LF line endings parse
    identically.
    """
    if hasattr(source, "read"):
        text = source.read()
    else:
        with open(source, encoding="utf-8", newline="") as fh:
            text = fh.read()
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    sentences, toks, labs = [], [], []
    for lineno, line in enumerate(text.split("\n"), 1):
        if line.strip() == "":
            if toks:
                sentences.append((toks, labs))
                toks, labs = [], []
            continue
        fields = _FIELD_SEP.split(line)
        if len(fields) != 2 or not all(fields):
            raise ValueError(f"line {lineno}: expected 'token label', got {line!r}")
        toks.append(fields[0])
        labs.append(fields[1])
    if toks:
        sentences.append((toks, labs))
    if not sentences:
        raise ValueError("IOB input contains no sentences")
    return sentences


def format_iob(raw_sentences, sep: str = " ") -> str:
    return "".join(
        "".join(f"{t}{sep}{l}\n" for t, l in zip(toks, labs)) + "\n"
        for toks, labs in raw_sentences
    )


def write_iob(raw_sentences, dest, sep: str = " "):
    text = format_iob(raw_sentences, sep)
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def build_vocab(raw_sentences, min_count: int = 1) -> Corpus:
    """Index a raw corpus; tokens seen fewer than ``min_count`` times become UNK."""
    if not raw_sentences:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counts = Counter(t for toks, _ in raw_sentences for t in toks)
    words = Vocabulary.words(t for toks, _ in raw_sentences for t in toks if counts[t] >= min_count)
    labels = Vocabulary.labels(l for _, labs in raw_sentences for l in labs)
    return encode_corpus(raw_sentences, words, labels)


def encode_corpus(raw_sentences, words: Vocabulary, labels: Vocabulary) -> Corpus:
    """Index ``raw_sentences`` with existing vocabularies (OOV words -> UNK).

    Labels missing from ``labels`` are rejected.
    """
    sentences = []
    for i, (toks, labs) in enumerate(raw_sentences):
        try:
            y = labels.encode(labs)
        except KeyError as exc:
            raise ValueError(f"sentence {i}: label {exc.args[0]} not in the label vocabulary") from None
        sentences.append(LabeledSentence(words.encode(toks, unk=True), y))
    return Corpus(sentences, words, labels, list(raw_sentences))


def split_train_heldout(corpus: Corpus, ratio: float, seed: int):
    """Seeded shuffle, then the last ``round(ratio * n)`` sentences are heldout."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"heldout ratio must lie in (0, 1), got {ratio}")
    n = len(corpus)
    n_held = int(round(ratio * n))
    if n < 2 or n_held == 0 or n_held == n:
        raise ValueError(f"cannot split {n} sentences with heldout ratio {ratio}")
    order = Rng(seed).permutation(n)
    return corpus.subset(order[:n - n_held]), corpus.subset(order[n - n_held:])


def merge_corpora(raw_corpora, min_count: int = 1) -> Corpus:
    """Concatenate raw corpora and index them with unified vocabularies."""
    if not raw_corpora:
        raise ValueError("nothing to merge")
    merged = [s for raw in raw_corpora for s in raw]
    return build_vocab(merged, min_count)


def synth_global_task(n: int, seed: int, vocab_size: int = 30, num_types: int = 2,
                      min_len: int = 4, max_len: int = 10) -> Corpus:
    """Synthetic corpus whose labels depend on the sentence's last token.

    Each sentence ends with a mode token ``mode{j}``; every earlier marked span
    (one or two ``mark*`` tokens) is labelled with slot type ``T{j}``.  With
    k=0 a left-to-right labeler sees the mode only at the final step, so the
    slot type of earlier spans is a coin flip for it; a backward encoder reads
    the mode first.
    """
    n_marks = 3
    n_fill = vocab_size - num_types - n_marks
    if n < 2 or num_types < 2 or n_fill < 1 or not 2 <= min_len <= max_len:
        raise ValueError(
            f"invalid synthetic task sizes n={n} vocab_size={vocab_size} num_types={num_types}")
    rng = Rng(seed)
    modes = [f"mode{j}" for j in range(num_types)]
    marks = [f"mark{j}" for j in range(n_marks)]
    fillers = [f"w{j}" for j in range(n_fill)]
    raw = []
    for _ in range(n):
        T = int(rng.integers(min_len, max_len + 1))
        j = int(rng.integers(0, num_types))
        toks = [rng.choice(fillers) for _ in range(T - 1)]
        labs = ["O"] * (T - 1)
        n_spans = int(rng.integers(1, 3))
        for _ in range(n_spans):
            start = int(rng.integers(0, T - 1))
            width = 2 if start + 1 < T - 1 and rng.random() < 0.3 else 1
            if any(l != "O" for l in labs[max(0, start - 1):start + width + 1]):
                continue
            for w in range(width):
                toks[start + w] = rng.choice(marks)
                labs[start + w] = ("B-" if w == 0 else "I-") + f"T{j}"
        toks.append(modes[j])
        labs.append("O")
        raw.append((toks, labs))
    # fixed vocab order so every seed shares the same index map
    words = Vocabulary.words(modes + marks + fillers)
    labels = Vocabulary.labels(["O"] + [f"{p}-T{j}" for j in range(num_types) for p in "BI"])
    return encode_corpus(raw, words, labels)


def raw_from_text(text: str) -> list:
    return read_iob(io.StringIO(text))
