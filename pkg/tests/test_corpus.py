import io

import pytest

from slotlstm.corpus import (
    PAD_TOKEN,
    UNK_TOKEN,
    Vocabulary,
    build_vocab,
    encode_corpus,
    format_iob,
    merge_corpora,
    read_iob,
    split_train_heldout,
    synth_global_task,
    write_iob,
)
from slotlstm.evaluation import START_SYMBOL, extract_segments

SEATTLE = "I O\nneed O\na O\nticket O\nto O\nSeattle B-ToCity\n\n"


def parse(text):
    return read_iob(io.StringIO(text))


def test_read_example_sentence():
    (sent,) = parse(SEATTLE)
    assert sent[0] == ["I", "need", "a", "ticket", "to", "Seattle"]
    assert sent[1][-1] == "B-ToCity" and len(sent[1]) == 6


def test_read_two_sentences_and_trailing_blanks():
    raw = parse("a O\nb B-X\n\nc O\n\n\n")
    assert len(raw) == 2


def test_read_without_final_blank_line():
    assert parse("a O\nb O") == [(["a", "b"], ["O", "O"])]


def test_crlf_equals_lf():
    assert parse(SEATTLE.replace("\n", "\r\n")) == parse(SEATTLE)


def test_tab_and_space_runs():
    assert parse("a\tO\nb    B-X\n") == [(["a", "b"], ["O", "B-X"])]


@pytest.mark.parametrize("bad", ["a O extra\n", "lonely\n", "a  \tO\n"])
def test_read_rejects_bad_lines(bad):
    with pytest.raises(ValueError, match="line 2"):
        parse("x O\n" + bad)


def test_read_rejects_empty():
    with pytest.raises(ValueError):
        parse("\n\n")


def test_write_read_roundtrip(tmp_path):
    raw = parse(SEATTLE + "b O\nc B-X\n")
    path = tmp_path / "c.iob"
    write_iob(raw, path)
    assert path.read_text(encoding="utf-8") == format_iob(raw)
    assert read_iob(path) == raw
    # canonical text re-serializes byte-identically
    text = path.read_bytes()
    write_iob(read_iob(path), path)
    assert path.read_bytes() == text


def test_vocab_reserved_indices():
    corpus = build_vocab(parse(SEATTLE))
    assert corpus.words.itos[:2] == [PAD_TOKEN, UNK_TOKEN]
    assert corpus.labels.itos[0] == START_SYMBOL
    assert len(corpus.words) == 6 + 2


def test_vocab_deterministic_first_occurrence():
    corpus = build_vocab(parse("b O\na O\n\na O\nc O\n"))
    assert corpus.words.itos[2:] == ["b", "a", "c"]


def test_min_count_unks_singletons():
    corpus = build_vocab(parse("a O\nb O\n\na O\n"), min_count=2)
    assert "b" not in corpus.words
    assert corpus.sentences[0].tokens[1] == corpus.words.unk_index


def test_roundtrip_except_unk():
    raw = parse("a O\nb O\nc B-X\n\na O\nc O\n")
    corpus = build_vocab(raw, min_count=2)
    for (toks, labs), s in zip(raw, corpus.sentences):
        back = corpus.words.decode(s.tokens)
        assert [t if t in corpus.words else UNK_TOKEN for t in toks] == back
        assert corpus.labels.decode(s.labels) == labs


def test_unseen_label_rejected():
    corpus = build_vocab(parse(SEATTLE))
    with pytest.raises(ValueError, match="B-FromCity"):
        encode_corpus(parse("Boston B-FromCity\n"), corpus.words, corpus.labels)


def test_unseen_word_maps_to_unk():
    corpus = build_vocab(parse(SEATTLE))
    enc = encode_corpus(parse("Paris O\n"), corpus.words, corpus.labels)
    assert enc.sentences[0].tokens[0] == corpus.words.unk_index


def ten_sentences():
    return build_vocab([([f"w{i}"], ["O"]) for i in range(10)])


def test_split_sizes():
    train, held = split_train_heldout(ten_sentences(), 0.2, seed=1)
    assert (len(train), len(held)) == (8, 2)
    c = build_vocab([([f"w{i}"], ["O"]) for i in range(100)])
    assert tuple(map(len, split_train_heldout(c, 0.2, 0))) == (80, 20)


def test_split_deterministic_partition():
    c = ten_sentences()
    a = split_train_heldout(c, 0.2, seed=4)
    b = split_train_heldout(c, 0.2, seed=4)
    assert [s.tokens.tolist() for s in a[1].sentences] == [s.tokens.tolist() for s in b[1].sentences]
    union = sorted(int(s.tokens[0]) for part in a for s in part.sentences)
    assert union == sorted(int(s.tokens[0]) for s in c.sentences)
    assert a[0].words is c.words and a[1].labels is c.labels


@pytest.mark.parametrize("ratio", [0.0, 1.0, 0.01])
def test_split_rejects_degenerate(ratio):
    with pytest.raises(ValueError):
        split_train_heldout(ten_sentences(), ratio, 0)


def test_merge_with_itself():
    raw = parse(SEATTLE)
    single = build_vocab(raw)
    merged = merge_corpora([raw, raw])
    assert len(merged) == 2 * len(single)
    assert merged.words == single.words and merged.labels == single.labels


def test_merge_disjoint_labels():
    a = parse("x B-A\ny I-A\n")
    b = parse("z B-B\n")
    merged = merge_corpora([a, b])
    n_a = len(build_vocab(a).labels) - 1
    n_b = len(build_vocab(b).labels) - 1
    assert len(merged.labels) - 1 == n_a + n_b


def test_merge_roundtrip():
    a, b = parse(SEATTLE), parse("Boston B-FromCity\nflights O\n")
    merged = merge_corpora([a, b])
    for (toks, labs), s in zip(a + b, merged.sentences):
        assert merged.words.decode(s.tokens) == toks
        assert merged.labels.decode(s.labels) == labs


def test_synth_mode_controls_type():
    corpus = synth_global_task(200, seed=0)
    for toks, labs in corpus.raw:
        mode = toks[-1]
        assert mode.startswith("mode") and labs[-1] == "O"
        types = {seg.label_type for seg in extract_segments(labs)}
        assert types == {"T" + mode[4:]}


def test_synth_prefix_does_not_reveal_mode():
    # marked tokens and fillers are drawn identically for every mode
    corpus = synth_global_task(400, seed=1)
    by_mode = {}
    for toks, _ in corpus.raw:
        by_mode.setdefault(toks[-1], set()).update(toks[:-1])
    assert by_mode["mode0"] == by_mode["mode1"]


def test_synth_deterministic():
    a, b = synth_global_task(20, seed=3), synth_global_task(20, seed=3)
    assert a.raw == b.raw
    assert synth_global_task(20, seed=4).raw != a.raw


def test_synth_rejects_bad_sizes():
    with pytest.raises(ValueError):
        synth_global_task(1, 0)
    with pytest.raises(ValueError):
        synth_global_task(10, 0, vocab_size=4)


def test_vocabulary_bijection():
    v = Vocabulary.words(["a", "b", "a"])
    assert [v.stoi[s] for s in v.itos] == list(range(len(v)))
