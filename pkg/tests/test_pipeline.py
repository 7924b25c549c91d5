import json
import threading
from fractions import Fraction
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from privmark.errors import EmptyTextError, FormatError, InserterError, SizeError
from privmark.numeric import decode_array
from privmark.pipeline import (
    DefaultInserter,
    EmbedderParams,
    HttpInserter,
    PlaintextPipeline,
    Tokenizer,
    WatermarkParams,
    WatermarkRecord,
    build_prompt,
    deal_embedder,
    derive_counts,
    detect,
    load_embedder,
    mark_insert,
    save_embedder,
    secure_embed_words,
    splice_words,
    tokenize,
)
from privmark.pipeline.embedder import embed_text_sum, plaintext_embed_text, secure_embed_text
from privmark.pipeline.inserter import prompt_words
from privmark.sectable import build_sectable
from privmark.sharing import PartyId, reveal_to

from conftest import run3


def test_tokenize():
    assert tokenize("Hello, World!  It's “fine”—really...") == ["hello", "world", "it's", "fine”—really"]
    assert tokenize("  ... ") == []
    tok = Tokenizer(["b", "a"])
    assert tok.tokens[0] == "<unk>" and tok.ids("A b zzz") == [2, 1, 0]
    assert list(tok.counts("a a b")) == [0, 1, 2]
    with pytest.raises(ValueError):
        Tokenizer(["<unk>", "a", "a"])


def test_embedder_file_roundtrip(tmp_path, small_world):
    p = tmp_path / "emb.txt"
    save_embedder(p, small_world.embedder)
    e = load_embedder(p)
    assert e.tokenizer.tokens == small_world.embedder.tokenizer.tokens
    assert np.allclose(e.matrix, small_world.embedder.matrix, atol=1e-8)
    p.write_text("2 3\na 1 2 3\n", encoding="utf-8")
    with pytest.raises(FormatError):
        load_embedder(p)
    with pytest.raises(FormatError):
        EmbedderParams(Tokenizer(["a"]), np.ones((2, 2)))


def test_secure_text_embeddings(small_world):
    params = small_world.embedder
    text = small_world.random_text(np.random.default_rng(0), 40) + " unknownword"

    def prog(party, _):
        emb = deal_embedder(party, params if party.id == PartyId.P2 else None)
        tok = params.tokenizer if party.id == PartyId.P1 else None
        s, n = embed_text_sum(party, emb, tok, text if party.id == PartyId.P1 else None)
        mean = secure_embed_text(party, emb, tok, text if party.id == PartyId.P1 else None)
        words = ["v005x0001", "v005x0002 v005x0003"] if party.id == PartyId.P1 else None
        w = secure_embed_words(party, emb, tok, words, 2)
        return n, reveal_to(party, s, PartyId.P1), reveal_to(party, mean, PartyId.P1), reveal_to(party, w, PartyId.P1)

    n, s, mean, w = run3(prog).outputs[0]
    assert n == 41
    ref = plaintext_embed_text(params, text)
    assert np.allclose(decode_array(s, 18) / n, ref, atol=1e-5)
    assert np.allclose(decode_array(mean, 18), ref, atol=1e-4)
    wm = params.word_matrix
    ids = params.tokenizer.ids
    assert np.allclose(decode_array(w[0], 18), wm[ids("v005x0001")[0]], atol=1e-5)
    assert np.allclose(decode_array(w[1], 18), wm[ids("v005x0002 v005x0003")].mean(axis=0), atol=1e-4)


def test_empty_text_rejected(small_world):
    params = small_world.embedder

    def prog(party, _):
        emb = deal_embedder(party, params if party.id == PartyId.P2 else None)
        embed_text_sum(party, emb, params.tokenizer if party.id == PartyId.P1 else None,
                       "?!" if party.id == PartyId.P1 else None)

    with pytest.raises(EmptyTextError):
        run3(prog)


def test_inserter_splices_every_word():
    text = "One two. Three four! Five six? Seven."
    out = splice_words(text, ["alpha", "beta"])
    assert out == "One two, and alpha. Three four! Five six, and beta? Seven."
    assert splice_words("no end", ["x", "y"]) == "no end, and x, and y."
    assert splice_words(text, []) == text
    words = [f"w{i}" for i in range(9)]
    out = DefaultInserter().rewrite(build_prompt(words, text), text)
    assert set(words) <= set(tokenize(out))
    assert prompt_words(build_prompt(words, text)) == words
    with pytest.raises(InserterError):
        prompt_words("nothing here")


class _Handler(BaseHTTPRequestHandler):
    def do_POST(self):  # noqa: N802
        doc = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        body = json.dumps({"text": doc["text"].upper()} if "bad" not in doc["text"] else {"nope": 1}).encode()
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *a):
        pass


def test_http_inserter():
    srv = HTTPServer(("127.0.0.1", 0), _Handler)
    threading.Thread(target=srv.serve_forever, daemon=True).start()
    try:
        ins = HttpInserter(f"http://127.0.0.1:{srv.server_port}/", timeout=5)
        assert ins.rewrite(build_prompt(["a"], "hi"), "hi") == "HI"
        with pytest.raises(InserterError):
            ins.rewrite("p", "bad")
    finally:
        srv.shutdown()
    with pytest.raises(InserterError):
        HttpInserter(f"http://127.0.0.1:{srv.server_port}/", timeout=1).rewrite("p", "t")


def test_derive_counts():
    assert derive_counts(105) == (12, 36)
    assert derive_counts(102) == (12, 36)
    assert derive_counts(5) == (1, 3)
    assert derive_counts(100, vocab_size=20) == (12, 20)
    with pytest.raises(SizeError):
        derive_counts(100, vocab_size=5)
    with pytest.raises(EmptyTextError):
        derive_counts(0)


def test_params():
    p = WatermarkParams()
    assert p.detection_fraction() == Fraction(9, 20)
    assert WatermarkParams.from_dict(p.to_dict()) == p
    with pytest.raises(ValueError):
        WatermarkParams(theta_sim=1.5)
    with pytest.raises(ValueError):
        WatermarkParams(candidate_factor=0)


def test_record_roundtrip(tmp_path):
    r = WatermarkRecord.create("text", ["a", "b"], WatermarkParams(), "id1")
    r.save(tmp_path / "r.json")
    back = WatermarkRecord.load(tmp_path / "r.json")
    assert back == r and back.matches("text") and not back.matches("text!")
    (tmp_path / "x.json").write_text("{}")
    with pytest.raises(FormatError):
        WatermarkRecord.load(tmp_path / "x.json")


def _world_program(world, text, params, words_for_detect=None, verbose=True):
    def prog(party, _):
        p1, p2 = party.id == PartyId.P1, party.id == PartyId.P2
        table = build_sectable(party, world.vocabulary if p1 else None, world.embeddings if p2 else None)
        emb = deal_embedder(party, world.embedder if p2 else None)
        tok = world.embedder.tokenizer if p1 else None
        out = mark_insert(party, table, emb, tok, text if p1 else None, params)
        words = words_for_detect or (out.words if p1 else None)
        res = detect(party, emb, tok, out.text if p1 else None, words if p1 else None, params, verbose)
        return (table.rows, out, res) if p1 else (out, res)

    return prog


def test_insert_and_detect_match_oracle(small_world):
    params = WatermarkParams()
    text = small_world.random_text(np.random.default_rng(7), 60)
    res = run3(_world_program(small_world, text, params), seed=3)
    rows, out, det = res.outputs[0]
    assert res.outputs[1] == (None, None) and res.outputs[2] == (None, None)
    oracle = PlaintextPipeline(small_world.embedder, small_world.embeddings.rows[rows], small_world.vocabulary)
    ref = oracle.insert(text, params, record_id=out.record.id)
    assert out.candidates == ref.candidates and out.filtered == ref.filtered
    assert out.text == ref.text and out.record == ref.record
    assert len(out.words) == 7 and len(out.candidates) == 21
    assert det.detected and det.count == 7
    assert oracle.detect(out.text, out.words, params) == det
    for w in out.words:
        assert w in tokenize(out.text)


def test_detect_rejects_unrelated_words(small_world):
    params = WatermarkParams()
    text = small_world.random_text(np.random.default_rng(8), 30)
    unrelated = [small_world.filler[i] for i in range(6) if small_world.filler[i] not in tokenize(text)]
    res = run3(_world_program(small_world, text, params, unrelated, verbose=False), seed=4)
    _, _, det = res.outputs[0]
    assert det.count is None and det.num_watermark_words == len(unrelated)
    oracle = PlaintextPipeline(small_world.embedder, None, small_world.vocabulary)
    assert det.detected == oracle.detect(res.outputs[0][1].text, unrelated, params).detected


def test_small_ring_rejected(small_world):
    def prog(party, _):
        emb = deal_embedder(party, small_world.embedder if party.id == PartyId.P2 else None)
        detect(party, emb, None, None, None)

    with pytest.raises(ValueError):
        run3(prog, ring_bits=32)
