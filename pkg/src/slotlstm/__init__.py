"""LSTM sequence labelers for slot filling, including encoder-labeler models."""
from .architectures import Arch, ModelParams, backward, encode, forward, init_model
from .corpus import (
    Corpus,
    LabeledSentence,
    Vocabulary,
    build_vocab,
    merge_corpora,
    read_iob,
    split_train_heldout,
    synth_global_task,
    write_iob,
)
from .decoding import beam_search, decode, exhaustive_decode, greedy_decode
from .estimator import SlotTagger
from .evaluation import accuracy_after_first_error, extract_segments, f1_score
from .modelfile import load_model, save_model
from .numerics import Rng
from .training import Hyperparams, SearchSpace, fit, random_search

__version__ = "0.1.0"

__all__ = [
    "Arch", "ModelParams", "backward", "encode", "forward", "init_model",
    "Corpus", "LabeledSentence", "Vocabulary", "build_vocab", "merge_corpora", "read_iob",
    "split_train_heldout", "synth_global_task", "write_iob",
    "beam_search", "decode", "exhaustive_decode", "greedy_decode",
    "SlotTagger", "accuracy_after_first_error", "extract_segments", "f1_score",
    "load_model", "save_model", "Rng", "Hyperparams", "SearchSpace", "fit", "random_search",
]
