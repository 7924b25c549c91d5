import numpy as np
import pytest
from scipy import stats

from privmark.errors import DuplicateWordError, FormatError, SizeError, ZeroRowError
from privmark.numeric import Ring, encode_array
from privmark.sectable import (
    EmbeddingSet,
    Vocabulary,
    build_sectable,
    load_embeddings,
    load_index,
    load_share,
    load_vocabulary,
    permutation_prefix,
    save_embeddings,
    save_index,
    save_share,
)
from privmark.sharing import PartyId, reconstruct

from conftest import run3


def test_vocabulary_rules(tmp_path):
    v = Vocabulary.from_words(["Apple ", "pear"])
    assert v.words == ("apple", "pear") and v.word2idx["pear"] == 1 and v.idx2word(0) == "apple"
    with pytest.raises(DuplicateWordError):
        Vocabulary.from_words(["a", "A"])
    for bad in ["two words", "comma,word", "", "!!"]:
        with pytest.raises(FormatError):
            Vocabulary.from_words([bad])
    p = tmp_path / "v.txt"
    p.write_text("alpha\n\nbeta\n", encoding="utf-8")
    assert load_vocabulary(p).words == ("alpha", "beta")
    with pytest.raises(FormatError):
        load_vocabulary(tmp_path / "missing.txt")


@pytest.mark.parametrize("binary", [False, True])
def test_embeddings_roundtrip(tmp_path, binary):
    rows = np.random.default_rng(0).standard_normal((7, 5))
    p = tmp_path / "e"
    save_embeddings(p, rows, binary=binary)
    e = load_embeddings(p)
    assert e.n == 7 and e.dim == 5
    assert np.allclose(e.rows, rows / np.linalg.norm(rows, axis=1, keepdims=True))


def test_embeddings_errors(tmp_path):
    with pytest.raises(ZeroRowError):
        EmbeddingSet.from_rows([[1.0, 0.0], [0.0, 0.0]])
    p = tmp_path / "bad.txt"
    p.write_text("3 2\n1 0\n0 1\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_embeddings(p)
    with pytest.raises(FormatError):
        EmbeddingSet.from_rows(np.zeros((0, 3)))


def test_permutation_prefix():
    p = permutation_prefix(123, 10, 10)
    assert sorted(p) == list(range(10))
    assert np.array_equal(permutation_prefix(123, 10, 4), p[:4])
    with pytest.raises(SizeError):
        permutation_prefix(1, 3, 4)


def test_permutation_first_slot_uniform():
    first = [int(permutation_prefix(s, 16, 1)[0]) for s in range(4000)]
    counts = np.bincount(first, minlength=16)
    assert stats.chisquare(counts).pvalue > 1e-3


def _build(vocab, emb, **kw):
    def prog(party, _):
        return build_sectable(party, vocab if party.id == PartyId.P1 else None,
                              emb if party.id == PartyId.P2 else None)

    return run3(prog, **kw)


def test_build_sectable_contents():
    rng = np.random.default_rng(4)
    emb = EmbeddingSet.from_rows(rng.standard_normal((30, 6)))
    vocab = Vocabulary.from_words([f"w{i}" for i in range(12)])
    res = _build(vocab, emb)
    tables = res.outputs
    assert all(np.array_equal(t.rows, tables[0].rows) for t in tables)
    assert len(set(tables[0].rows.tolist())) == 12
    assert tables[0].vocabulary is vocab and tables[1].vocabulary is None
    secret = reconstruct(*(t.table for t in tables))
    assert np.array_equal(secret, encode_array(emb.rows[tables[0].rows], 18, Ring(64)))
    # P2 deals M x d elements to both peers; the rest is public metadata
    # announces: M to two peers, (N, d) to two peers; seeds: 16 bytes on each of 6 links
    assert res.stats.bytes("SecTable") == 2 * 12 * 6 * 8 + 2 * 8 + 2 * 16 + 6 * 16
    assert {e.kind for e in res.transcript() if e.phase == "SecTable" and e.src != "P2"} == {"public"}


def test_build_sectable_seed_dependence():
    rng = np.random.default_rng(5)
    emb = EmbeddingSet.from_rows(rng.standard_normal((50, 4)))
    vocab = Vocabulary.from_words([f"w{i}" for i in range(10)])
    a = _build(vocab, emb, seed=1).outputs[0].rows
    b = _build(vocab, emb, seed=1).outputs[0].rows
    c = _build(vocab, emb, seed=2).outputs[0].rows
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_build_sectable_too_small():
    emb = EmbeddingSet.from_rows(np.eye(3))
    with pytest.raises(SizeError):
        _build(Vocabulary.from_words(["a", "b", "c", "d"]), emb)


def test_share_and_index_persistence(tmp_path):
    emb = EmbeddingSet.from_rows(np.random.default_rng(6).standard_normal((20, 3)))
    vocab = Vocabulary.from_words([f"w{i}" for i in range(5)])
    tables = _build(vocab, emb).outputs
    for t in tables:
        save_share(tmp_path / f"{t.table.owner.label}.bin", t, 9)
    save_index(tmp_path / "index.json", vocab)
    loaded = [load_share(tmp_path / f"{p.label}.bin") for p in PartyId]
    assert np.array_equal(reconstruct(*(t.table for t in loaded)), reconstruct(*(t.table for t in tables)))
    assert np.array_equal(loaded[0].rows, tables[0].rows)
    assert loaded[2].table.owner == PartyId.P3 and loaded[0].frac_bits == 18
    assert load_index(tmp_path / "index.json").words == vocab.words
    data = (tmp_path / "P1.bin").read_bytes()
    (tmp_path / "cut.bin").write_bytes(data[:-3])
    with pytest.raises(FormatError):
        load_share(tmp_path / "cut.bin")
    (tmp_path / "bad.json").write_text('{"idx2word": ["a"], "word2idx": {"a": 3}}')
    with pytest.raises(FormatError):
        load_index(tmp_path / "bad.json")
