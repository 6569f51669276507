"""Exit criteria for the toolkit, one test per criterion.

Each test prints a single ``[criterion N] PASS|FAIL ...`` line.  Criterion 8
needs the licensed ATIS corpus and only runs when ``SLOTLSTM_ATIS_TRAIN`` and
``SLOTLSTM_ATIS_TEST`` point at IOB files.
"""
import io
import os
import time

import numpy as np
import pytest

from conftest import numeric_grads, rel_error, tiny_model
from test_evaluation import CRAFTED, brute_f1
from slotlstm.architectures import Arch, backward, forward
from slotlstm.cli import main
from slotlstm.corpus import build_vocab, encode_corpus, read_iob, synth_global_task, write_iob
from slotlstm.decoding import beam_search, exhaustive_decode, greedy_decode, sequence_log_prob
from slotlstm.evaluation import accuracy_after_first_error, f1_score
from slotlstm.modelfile import load_model
from slotlstm.numerics import Rng
from slotlstm.training import AdamState, Hyperparams, corpus_f1, fit, new_model, train_epoch


@pytest.fixture
def report(capsys):
    def _report(n, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"criterion {n}: {detail}"
    return _report


def test_criterion_1_gradient_check(report):
    configs = [(a, 1) for a in Arch] + [(Arch.LABELER_W, 2), (Arch.ENC_LABELER_W, 2)]
    start = time.perf_counter()
    worst = 0.0
    for ci, (arch, depth) in enumerate(configs):
        for T in (1, 3, 4):
            r = Rng(1000 * ci + T)
            model = tiny_model(arch, depth, seed=int(r.integers(0, 2**31)), V=7, n_labels=5, d_e=4, d_h=5, k=1)
            toks, labs = r.integers(0, 7, T), r.integers(1, 5, T)
            analytic = backward(model, forward(model, toks, labs, mode="train"))
            num = numeric_grads(lambda: forward(model, toks, labs, mode="train").nll, model.params, h=1e-5)
            worst = max(worst, max(rel_error(analytic[k], num[k]).max() for k in num))
    elapsed = time.perf_counter() - start
    report(1, worst < 1e-4 and elapsed < 30,
           f"max relative error {worst:.2e} (< 1e-4), {elapsed:.1f}s (< 30s)")


def test_criterion_2_zero_encoder_equivalence(report):
    worst = 0.0
    r = Rng(2)
    enc = tiny_model(Arch.ENC_LABELER_W, seed=21, jitter=1.0)
    for name, v in enc.params.items():
        if name.startswith("enc."):
            v[...] = 0.0
    lab = enc.copy()
    lab.arch = Arch.LABELER_W
    lab.params = {k: v for k, v in lab.params.items() if not k.startswith("enc.")}
    for _ in range(100):
        toks = r.integers(0, 7, int(r.integers(1, 12)))
        worst = max(worst, np.abs(forward(enc, toks).probs - forward(lab, toks).probs).max())
    report(2, worst <= 1e-12, f"max |posterior difference| {worst:.1e} over 100 sentences (<= 1e-12)")


def test_criterion_3_decoding_oracles(report):
    feedback = [a for a in Arch if a.label_feedback]
    mismatches = {"beam81": 0, "beam1": 0}
    worst_rescore = 0.0
    for i in range(100):
        r = Rng(300 + i)
        model = tiny_model(feedback[i % len(feedback)], seed=i, n_labels=4, jitter=1.0)
        toks = r.integers(0, 7, 4)
        seq, score = beam_search(model, toks, 81, return_score=True)
        mismatches["beam81"] += seq != exhaustive_decode(model, toks)
        mismatches["beam1"] += beam_search(model, toks, 1) != greedy_decode(model, toks)
        worst_rescore = max(worst_rescore, abs(score - sequence_log_prob(model, toks, seq)))
    ok = not any(mismatches.values()) and worst_rescore < 1e-9
    report(3, ok, f"100 models: beam81!=exhaustive {mismatches['beam81']}, "
                  f"beam1!=greedy {mismatches['beam1']}, rescoring error {worst_rescore:.1e} (< 1e-9)")


def test_criterion_4_f1_oracle(report):
    bad = 0
    for gold, pred, P, R, F in CRAFTED:
        rep = f1_score(gold, pred)
        bad += (rep.precision, rep.recall, rep.f1) != brute_f1(gold, pred)
    r = Rng(4)
    labels = ["O", "O", "B-A", "I-A", "B-B", "I-B", "B-C", "I-C"]
    for _ in range(1000):
        gold, pred = [], []
        for _ in range(int(r.integers(1, 6))):
            T = int(r.integers(1, 10))
            gold.append([labels[j] for j in r.integers(0, len(labels), T)])
            pred.append([labels[j] for j in r.integers(0, len(labels), T)])
        rep = f1_score(gold, pred)
        bad += (rep.precision, rep.recall, rep.f1) != brute_f1(gold, pred)
    report(4, bad == 0 and len(CRAFTED) >= 10,
           f"{len(CRAFTED)} crafted + 1000 random corpora, {bad} disagreements with brute force")


def test_criterion_5_overfit(report):
    corpus = synth_global_task(30, seed=5)
    hyper = Hyperparams(arch="enc-labeler-w", d_e=16, d_h=(50,), k=1, lr=0.001, dropout=0.0, seed=0)
    rng = Rng(0)
    model = new_model(hyper, corpus, rng.spawn(0))
    adam, train_rng = AdamState(model.params), rng.spawn(1)
    start = time.perf_counter()
    f1, epoch = 0.0, 0
    for epoch in range(1, 151):
        train_epoch(model, corpus.sentences, hyper, train_rng, adam)
        f1 = corpus_f1(model, corpus).f1
        if f1 >= 0.99:
            break
    elapsed = time.perf_counter() - start
    report(5, f1 >= 0.99 and elapsed < 120,
           f"training F1 {100 * f1:.2f}% at epoch {epoch} (>= 99% within 150), {elapsed:.1f}s (< 120s)")


def test_criterion_6_sentence_level_information(report):
    scores = {"enc-labeler-w": [], "labeler-w": []}
    for seed in (0, 1, 2):
        train = synth_global_task(500, seed=100 + seed)
        test = encode_corpus(synth_global_task(100, seed=200 + seed).raw, train.words, train.labels)
        for arch in scores:
            hyper = Hyperparams(arch=arch, d_e=16, d_h=(32,), k=0, lr=0.005, dropout=0.0,
                                epochs=10, seed=seed)
            _, hist = fit(train, hyper, test)
            scores[arch].append(hist.best_eval_f1)
    enc, lab = np.mean(scores["enc-labeler-w"]), np.mean(scores["labeler-w"])
    report(6, enc >= 0.90 and lab <= 0.70,
           f"mean eval F1 encoder-labeler {100 * enc:.2f}% (>= 90), labeler {100 * lab:.2f}% (<= 70)")


def test_criterion_7_determinism_and_serialization(report, tmp_path):
    data = tmp_path / "train.iob"
    write_iob(synth_global_task(40, seed=7).raw, data)
    flags = ["--arch", "enc-labeler-wl", "--d-e", "6", "--d-h", "8", "--depth", "2", "--k", "1",
             "--epochs", "2", "--dropout", "0.5", "--seed", "7", "--data", str(data)]
    paths = []
    for run in range(2):
        paths.append(tmp_path / f"m{run}.slf")
        assert main(["train", *flags, "--out", str(paths[-1])], out=io.StringIO()) == 0
    identical = paths[0].read_bytes() == paths[1].read_bytes()

    # the same run in-process, compared against the reloaded file
    corpus = build_vocab(read_iob(data))
    hyper = Hyperparams(arch="enc-labeler-wl", d_e=6, d_h=(8, 8), k=1, epochs=2, dropout=0.5, seed=7)
    model, _ = fit(corpus, hyper)
    loaded, _, _ = load_model(paths[0])
    r = Rng(77)
    same = 0
    for _ in range(50):
        toks = r.integers(0, len(corpus.words), int(r.integers(1, 12)))
        same += (greedy_decode(model, toks) == greedy_decode(loaded, toks)
                 and beam_search(model, toks, 4) == beam_search(loaded, toks, 4))
    report(7, identical and same == 50,
           f"repeat training byte-identical: {identical}; reloaded predictions equal on {same}/50")


ATIS_TRAIN = os.environ.get("SLOTLSTM_ATIS_TRAIN")
ATIS_TEST = os.environ.get("SLOTLSTM_ATIS_TEST")


@pytest.mark.skipif(not (ATIS_TRAIN and ATIS_TEST), reason="ATIS corpus not supplied (data-gated)")
def test_criterion_8_atis_reproduction(report):
    train = build_vocab(read_iob(ATIS_TRAIN))
    test = encode_corpus(read_iob(ATIS_TEST), train.words, train.labels)
    epochs = int(os.environ.get("SLOTLSTM_ATIS_EPOCHS", "100"))
    results = {}
    for arch in ("labeler-w", "enc-labeler-w"):
        hyper = Hyperparams(arch=arch, d_e=30, d_h=(100,), k=1, lr=0.001, dropout=0.5,
                            epochs=epochs, seed=0)
        _, hist = fit(train, hyper, test)
        results[arch] = (hist.best_heldout_f1, hist.best_eval_f1)
    lab, enc = results["labeler-w"], results["enc-labeler-w"]
    ok = lab[1] >= 0.940 and enc[1] >= 0.945 and enc[0] > lab[0]
    report(8, ok, f"labeler F1 {100 * lab[1]:.2f} (>= 94.0), encoder-labeler {100 * enc[1]:.2f} (>= 94.5), "
                  f"heldout {100 * enc[0]:.2f} vs {100 * lab[0]:.2f}")


def test_criterion_9_error_propagation(report):
    train = synth_global_task(120, seed=9)
    test = encode_corpus(synth_global_task(20, seed=10).raw, train.words, train.labels)
    hyper = Hyperparams(arch="labeler-wl", d_e=8, d_h=(16,), k=0, lr=0.01, dropout=0.0, epochs=3, seed=9)
    model, _ = fit(train, hyper)
    sentences = [(s.tokens, s.labels) for s in test.sentences]
    got = accuracy_after_first_error(model, sentences, beam=2)
    correct = total = 0
    for toks, gold in sentences:
        pred = beam_search(model, toks, 2)
        first = next((i for i in range(len(gold)) if pred[i] != gold[i]), None)
        if first is not None:
            for j in range(first + 1, len(gold)):
                total += 1
                correct += pred[j] == gold[j]
    expected = correct / total if total else None
    report(9, got == expected and total > 0,
           f"accuracy after first error {got} vs brute-force recount {expected} ({total} positions)")
