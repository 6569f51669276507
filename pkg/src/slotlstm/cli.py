"""Command-line interface: ``slotlstm {train,eval,predict,search,synth}``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import fields

from . import modelfile
from .architectures import Arch
from .corpus import build_vocab, encode_corpus, read_iob, synth_global_task, write_iob
from .decoding import decode
from .evaluation import f1_score
from .training import Hyperparams, SearchSpace, default_workers, fit, random_search

log = logging.getLogger("slotlstm")

HYPER_KEYS = {f.name for f in fields(Hyperparams)}
CONFIG_KEYS = HYPER_KEYS | {"depth", "min_count", "data", "eval_data", "out"}
INT_KEYS = {"d_e", "k", "epochs", "beam", "seed", "depth", "min_count", "d_label"}
FLOAT_KEYS = {"lr", "dropout", "heldout_ratio", "clip"}


class UsageError(Exception):
    pass


def parse_kv_file(path, allowed) -> dict:
    """Read ``key=value`` lines; ``#`` starts a comment, unknown keys are errors."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in allowed:
                raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
            out[key] = value
    return out


def _coerce(key, value):
    if value is None:
        return None
    try:
        if key in INT_KEYS:
            return int(value)
        if key in FLOAT_KEYS:
            return float(value)
        if key == "d_h":
            if isinstance(value, (tuple, list)):
                return tuple(int(v) for v in value)
            return tuple(int(v) for v in str(value).split(","))
    except ValueError:
        raise UsageError(f"invalid value for {key}: {value!r}") from None
    return value


def resolve_config(args) -> dict:
    """Defaults, then the --config file, then explicit flags."""
    cfg = {"depth": 1, "min_count": 1, "data": None, "eval_data": None, "out": None}
    if getattr(args, "config", None):
        cfg.update({k: _coerce(k, v) for k, v in parse_kv_file(args.config, CONFIG_KEYS).items()})
    for key in CONFIG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = _coerce(key, val)
    return cfg


def hyper_from_config(cfg) -> Hyperparams:
    kw = {k: v for k, v in cfg.items() if k in HYPER_KEYS and v is not None}
    depth = cfg.get("depth", 1)
    d_h = kw.get("d_h", (100,))
    if len(d_h) == 1 and depth > 1:
        d_h = d_h * depth
    if len(d_h) != depth:
        raise UsageError(f"d_h lists {len(d_h)} sizes but depth is {depth}")
    kw["d_h"] = d_h
    try:
        return Hyperparams(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def parse_space_file(path) -> SearchSpace:
    allowed = {"d_e", "d_h", "k", "lr", "depth", "arch"}
    raw = parse_kv_file(path, allowed)
    kw = {}
    for key, value in raw.items():
        items = [v.strip() for v in value.split(",") if v.strip()]
        if not items:
            raise UsageError(f"{path}: search dimension {key!r} is empty")
        if key == "arch":
            kw[key] = tuple(Arch.parse(v).value for v in items)
        elif key == "lr":
            if len(items) != 2:
                raise UsageError(f"{path}: lr needs 'lo,hi'")
            kw[key] = (float(items[0]), float(items[1]))
        else:
            kw[key] = tuple(int(v) for v in items)
    try:
        return SearchSpace(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _load_corpus_for_model(path, words, labels):
    raw = read_iob(path)
    for i, (_, labs) in enumerate(raw):
        for lab in labs:
            if lab not in labels:
                raise UsageError(f"{path}: sentence {i + 1} uses label {lab!r} unknown to the model")
    return encode_corpus(raw, words, labels)


def cmd_train(args, out):
    cfg = resolve_config(args)
    if not cfg.get("data"):
        raise UsageError("train needs --data")
    if not cfg.get("out"):
        raise UsageError("train needs --out")
    hyper = hyper_from_config(cfg)
    corpus = build_vocab(read_iob(cfg["data"]), cfg["min_count"])
    eval_corpus = None
    if cfg.get("eval_data"):
        eval_corpus = _load_corpus_for_model(cfg["eval_data"], corpus.words, corpus.labels)
    header = f"{'epoch':>5} {'train_nll':>10} {'heldout_f1':>10}" + (f" {'eval_f1':>8}" if eval_corpus else "")
    print(header, file=out)

    def report(epoch, hist):
        row = f"{epoch + 1:>5} {hist.train_nll[-1]:>10.4f} {100 * hist.heldout_f1[-1]:>10.2f}"
        if hist.eval_f1:
            row += f" {100 * hist.eval_f1[-1]:>8.2f}"
        print(row, file=out, flush=True)

    model, hist = fit(corpus, hyper, eval_corpus, callback=report)
    modelfile.save_model(model, corpus.words, corpus.labels, cfg["out"])
    print(f"selected epoch {hist.best_epoch + 1} (heldout F1 {100 * hist.best_heldout_f1:.2f}%)", file=out)
    print(f"best_epoch={hist.best_epoch + 1}", file=out)
    print(f"heldout_f1={100 * hist.best_heldout_f1:.2f}", file=out)
    if hist.best_eval_f1 is not None:
        print(f"eval_f1={100 * hist.best_eval_f1:.2f}", file=out)
    print(f"model={cfg['out']}", file=out)
    return 0


def cmd_eval(args, out):
    model, words, labels = modelfile.load_model(args.model)
    corpus = _load_corpus_for_model(args.data, words, labels)
    beam = args.beam
    if beam > 1 and not model.arch.label_feedback:
        log.warning("--beam ignored: %s has no label feedback, using greedy decoding", model.arch.value)
        beam = 1
    pred = [labels.decode(decode(model, s.tokens, beam)) for s in corpus.sentences]
    report = f1_score(corpus.label_strings(), pred)
    print(report, file=out)
    for line in report.as_lines():
        print(line, file=out)
    return 0


def cmd_predict(args, out):
    model, words, labels = modelfile.load_model(args.model)
    src = open(args.input, encoding="utf-8") if args.input and args.input != "-" else sys.stdin
    try:
        results = []
        for lineno, line in enumerate(src, 1):
            toks = line.split()
            if not toks:
                log.warning("line %d: empty sentence skipped", lineno)
                continue
            pred = decode(model, words.encode(toks, unk=True), args.beam)
            results.append((toks, labels.decode(pred)))
    finally:
        if src is not sys.stdin:
            src.close()
    write_iob(results, out)
    return 0


def cmd_search(args, out):
    cfg = resolve_config(args)
    if not cfg.get("data"):
        raise UsageError("search needs --data")
    space = parse_space_file(args.space) if args.space else SearchSpace()
    base = hyper_from_config({**cfg, "depth": 1, "d_h": (100,)})
    corpus = build_vocab(read_iob(cfg["data"]), cfg["min_count"])
    eval_corpus = None
    if cfg.get("eval_data"):
        eval_corpus = _load_corpus_for_model(cfg["eval_data"], corpus.words, corpus.labels)
    trials = random_search(corpus, space, args.budget, args.search_seed, base, eval_corpus,
                           workers=args.workers or default_workers())
    print(f"{'rank':>4} {'trial':>5} {'heldout_f1':>10} {'eval_f1':>8} {'arch':>15} "
          f"{'d_e':>4} {'d_h':>9} {'k':>2} {'lr':>10} {'epoch':>5}", file=out)
    for rank, t in enumerate(trials, 1):
        ev = f"{100 * t.eval_f1:.2f}" if t.eval_f1 is not None else "-"
        d_h = ",".join(str(h) for h in t.hyper.d_h)
        print(f"{rank:>4} {t.index:>5} {100 * t.heldout_f1:>10.2f} {ev:>8} {t.hyper.arch:>15} "
              f"{t.hyper.d_e:>4} {d_h:>9} {t.hyper.k:>2} {t.hyper.lr:>10.6f} {t.best_epoch + 1:>5}",
              file=out)
    best = trials[0]
    print(f"best_trial={best.index}", file=out)
    print(f"heldout_f1={100 * best.heldout_f1:.2f}", file=out)
    if cfg.get("out"):
        modelfile.save_model(best.model, corpus.words, corpus.labels, cfg["out"])
        print(f"model={cfg['out']}", file=out)
    return 0


def cmd_synth(args, out):
    corpus = synth_global_task(args.n, args.seed, args.vocab_size, args.num_types)
    if args.out and args.out != "-":
        write_iob(corpus.raw, args.out)
    else:
        write_iob(corpus.raw, out)
    return 0


def _add_hyper_flags(p):
    p.add_argument("--config", help="key=value run configuration file")
    p.add_argument("--arch", choices=[a.value for a in Arch])
    p.add_argument("--depth", type=int, choices=(1, 2))
    p.add_argument("--d-e", dest="d_e", type=int)
    p.add_argument("--d-h", dest="d_h", help="hidden size, or comma list per layer")
    p.add_argument("--k", type=int, help="context window half-width")
    p.add_argument("--lr", type=float)
    p.add_argument("--dropout", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--beam", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--heldout-ratio", dest="heldout_ratio", type=float)
    p.add_argument("--d-label", dest="d_label", type=int)
    p.add_argument("--clip", type=float)
    p.add_argument("--min-count", dest="min_count", type=int)
    p.add_argument("--data")
    p.add_argument("--eval-data", dest="eval_data")
    p.add_argument("--out")


def build_parser():
    parser = argparse.ArgumentParser(prog="slotlstm", description="LSTM slot filling toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model with heldout epoch selection")
    _add_hyper_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="segment F1 of a model on an IOB file")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--beam", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="label one whitespace-tokenized sentence per line")
    p.add_argument("--model", required=True)
    p.add_argument("--input", default="-")
    p.add_argument("--beam", type=int, default=1)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("search", help="random hyper-parameter search")
    _add_hyper_flags(p)
    p.add_argument("--space", help="key=value search-space file")
    p.add_argument("--budget", type=int, required=True)
    p.add_argument("--search-seed", dest="search_seed", type=int, default=0)
    p.add_argument("--workers", type=int, help="parallel trials (default $SLOTLSTM_WORKERS or 1)")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("synth", help="write the synthetic global-information task as IOB")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--vocab-size", dest="vocab_size", type=int, default=30)
    p.add_argument("--num-types", dest="num_types", type=int, default=2)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None, out=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    out = out or sys.stdout
    try:
        return args.func(args, out)
    except (UsageError, ValueError, KeyError, OSError) as exc:
        print(f"slotlstm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
