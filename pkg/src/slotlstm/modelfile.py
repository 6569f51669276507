"""Portable text model format.

Layout::

    slotlstm-model 1
    arch enc-labeler-w
    depth 1
    d_e 30
    d_h 100
    k 1
    d_label 30
    words <n>            followed by n lines, one token each
    labels <n>           followed by n lines, one label each
    tensors <n>
    tensor <name>        repeated n times:
    <rows> <cols>
    <row values>         rows lines of cols '%.17g' values
    end

Values carry 17 significant digits so float64 parameters round-trip exactly.
"""
from __future__ import annotations

import numpy as np

from .architectures import Arch, ModelParams
from .corpus import Vocabulary

MAGIC = "slotlstm-model"
VERSION = 1


class ModelFileError(ValueError):
    pass


def _fmt(x: float) -> str:
    return "%.17g" % x


def dumps(model: ModelParams, words: Vocabulary, labels: Vocabulary) -> str:
    if len(words) != model.n_words or len(labels) != model.n_labels:
        raise ValueError("vocabulary sizes do not match the model")
    out = [
        f"{MAGIC} {VERSION}",
        f"arch {model.arch.value}",
        f"depth {model.depth}",
        f"d_e {model.d_e}",
        "d_h " + " ".join(str(h) for h in model.d_h),
        f"k {model.k}",
        f"d_label {model.d_label}",
        f"words {len(words)}",
        *words.itos,
        f"labels {len(labels)}",
        *labels.itos,
        f"tensors {len(model.params)}",
    ]
    for name, arr in model.params.items():
        mat = arr.reshape(arr.shape[0], -1) if arr.ndim == 2 else arr.reshape(1, -1)
        out.append(f"tensor {name}")
        out.append(f"{mat.shape[0]} {mat.shape[1]}")
        out.extend(" ".join(_fmt(v) for v in row) for row in mat)
    out.append("end")
    return "\n".join(out) + "\n"


def save_model(model: ModelParams, words: Vocabulary, labels: Vocabulary, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model, words, labels))


class _Lines:
    def __init__(self, text):
        self.lines = text.split("\n")
        if self.lines and self.lines[-1] == "":
            self.lines.pop()
        self.pos = 0

    def next(self, what):
        if self.pos >= len(self.lines):
            raise ModelFileError(f"truncated model file: expected {what} at line {self.pos + 1}")
        line = self.lines[self.pos]
        self.pos += 1
        return line

    def keyed(self, key):
        line = self.next(key)
        parts = line.split(" ")
        if parts[0] != key or len(parts) < 2:
            raise ModelFileError(f"line {self.pos}: expected '{key} ...', got {line!r}")
        return parts[1:]

    def ints(self, key):
        try:
            return [int(v) for v in self.keyed(key)]
        except ValueError:
            raise ModelFileError(f"line {self.pos}: non-integer value for {key}") from None


def loads(text: str):
    """Parse a model file body; returns ``(model, words, labels)``."""
    r = _Lines(text)
    header = r.next("header").split(" ")
    if len(header) != 2 or header[0] != MAGIC:
        raise ModelFileError("not a slotlstm model file")
    if header[1] != str(VERSION):
        raise ModelFileError(f"unsupported model format version {header[1]} (expected {VERSION})")
    try:
        arch = Arch.parse(r.keyed("arch")[0])
    except ValueError as exc:
        raise ModelFileError(str(exc)) from None
    (depth,) = r.ints("depth")
    (d_e,) = r.ints("d_e")
    d_h = tuple(r.ints("d_h"))
    (k,) = r.ints("k")
    (d_label,) = r.ints("d_label")
    if len(d_h) != depth:
        raise ModelFileError(f"d_h lists {len(d_h)} layers but depth is {depth}")
    vocabs = []
    for key, reserved in (("words", 2), ("labels", 1)):
        (n,) = r.ints(key)
        items = [r.next(f"{key} entry") for _ in range(n)]
        voc = Vocabulary(items[:reserved], items[reserved:])
        if len(voc) != n:
            raise ModelFileError(f"duplicate entries in {key} listing")
        vocabs.append(voc)
    words, labels = vocabs
    model = ModelParams(arch, d_e, d_h, k, len(words), len(labels), d_label)
    (n_tensors,) = r.ints("tensors")
    for _ in range(n_tensors):
        name = " ".join(r.keyed("tensor"))
        dims = r.next("tensor shape").split(" ")
        try:
            rows, cols = (int(v) for v in dims)
        except ValueError:
            raise ModelFileError(f"line {r.pos}: bad shape line for tensor {name}: {' '.join(dims)!r}") from None
        data = []
        for i in range(rows):
            vals = r.next(f"row {i} of tensor {name}").split(" ")
            if len(vals) != cols:
                raise ModelFileError(f"line {r.pos}: tensor {name} row {i} has {len(vals)} values, expected {cols}")
            try:
                data.append([float(v) for v in vals])
            except ValueError:
                raise ModelFileError(f"line {r.pos}: non-numeric value in tensor {name}") from None
        arr = np.array(data, dtype=np.float64).reshape(rows, cols)
        model.params[name] = arr.reshape(-1) if name.endswith(".b") and rows == 1 else arr
    if r.next("end marker") != "end":
        raise ModelFileError(f"line {r.pos}: expected 'end'")
    _check_shapes(model)
    return model, words, labels


def _check_shapes(model: ModelParams):
    expected = {"E": (model.d_e, model.n_words)}
    sides = (["enc"] if model.arch.has_encoder else []) + ["lab"]
    for side in sides:
        d_in = model.d_window if side == "enc" else model.d_labeler_in
        for l, h in enumerate(model.d_h):
            expected[f"{side}.{l}.W"] = (4 * h, d_in)
            expected[f"{side}.{l}.U"] = (4 * h, h)
            expected[f"{side}.{l}.b"] = (4 * h,)
            d_in = h
    expected["softmax.W"] = (model.n_classes, model.d_h[-1])
    expected["softmax.b"] = (model.n_classes,)
    if model.arch.label_feedback:
        expected["label_emb"] = (model.d_label, model.n_labels)
    if set(expected) != set(model.params):
        missing = sorted(set(expected) - set(model.params))
        extra = sorted(set(model.params) - set(expected))
        raise ModelFileError(f"tensor set mismatch: missing {missing}, unexpected {extra}")
    for name, shape in expected.items():
        if model.params[name].shape != shape:
            raise ModelFileError(f"tensor {name} has shape {model.params[name].shape}, header implies {shape}")
    # keep the canonical tensor order so save -> load -> save is byte-identical
    model.params = {name: model.params[name] for name in expected}


def load_model(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return loads(fh.read().replace("\r\n", "\n"))
