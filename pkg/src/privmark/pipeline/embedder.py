"""Mean-of-token-embeddings model, in plaintext and under secret sharing.

A text embeds to the mean of its token rows. Words embed through a second,
row-normalised copy of the same matrix ("word mode"), so that the inner
product of two single-token word embeddings is their cosine similarity.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import EmptyTextError, FormatError
from ..numeric import encode_array
from ..ops import matmul, secure_matmul
from ..sharing import PartyId, ReplicatedShare, announce, deal
from .tokenizer import UNKNOWN, Tokenizer, tokenize


@dataclass
class EmbedderParams:
    """Plaintext parameters (held by P2). Row 0 is the zero unknown-word row."""

    tokenizer: Tokenizer
    matrix: np.ndarray  # T x d

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.shape[0] != len(self.tokenizer):
            raise FormatError("embedding matrix rows do not match the token list")
        if np.any(self.matrix[0]):
            raise FormatError("the unknown-word row must be zero")
        norms = np.linalg.norm(self.matrix, axis=1)
        safe = np.where(norms > 0, norms, 1.0)
        self.word_matrix = self.matrix / safe[:, None]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def encoded(self, frac_bits: int, ring) -> tuple[np.ndarray, np.ndarray]:
        return encode_array(self.matrix, frac_bits, ring), encode_array(self.word_matrix, frac_bits, ring)


def load_embedder(path) -> EmbedderParams:
    """word2vec text format: "T d" header, then "token v1 ... vd" per line."""
    try:
        lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines() if ln.strip()]
        t, d = (int(v) for v in lines[0].split())
    except (OSError, UnicodeDecodeError, ValueError, IndexError) as exc:
        raise FormatError(f"cannot read embedder {path}: {exc}") from exc
    tokens, rows = [], []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != d + 1:
            raise FormatError(f"embedder line for {parts[0]!r} has {len(parts) - 1} values, expected {d}")
        tokens.append(parts[0])
        try:
            rows.append([float(v) for v in parts[1:]])
        except ValueError as exc:
            raise FormatError(f"bad number in embedder row {parts[0]!r}") from exc
    if len(tokens) != t:
        raise FormatError(f"embedder header says {t} tokens, found {len(tokens)}")
    if UNKNOWN in tokens:
        raise FormatError(f"{UNKNOWN} is reserved")
    if len(set(tokens)) != len(tokens):
        raise FormatError("duplicate tokens in embedder file")
    matrix = np.vstack([np.zeros((1, d)), np.array(rows, dtype=np.float64).reshape(t, d)])
    return EmbedderParams(Tokenizer([UNKNOWN] + tokens), matrix)


def save_embedder(path, params: EmbedderParams) -> None:
    toks = params.tokenizer.tokens[1:]
    lines = [f"{len(toks)} {params.dim}"]
    lines += [t + " " + " ".join(f"{v:.8f}" for v in row) for t, row in zip(toks, params.matrix[1:])]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class SecretEmbedder:
    matrix: ReplicatedShare  # T x d
    word_matrix: ReplicatedShare  # T x d, normalised rows

    @property
    def vocab_size(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


def deal_embedder(party, params: EmbedderParams | None) -> SecretEmbedder:
    """P2 secret-shares both copies of its token matrix."""
    with party.phase("Model"):
        mine = party.id == PartyId.P2
        t, d = announce(party, PartyId.P2, [len(params.tokenizer), params.dim] if mine else None, 2)
        plain, word = params.encoded(party.frac_bits, party.ring) if mine else (None, None)
        m = deal(party, plain, PartyId.P2, (t, d), frac_bits=party.frac_bits)
        w = deal(party, word, PartyId.P2, (t, d), frac_bits=party.frac_bits)
    return SecretEmbedder(m, w)


def embed_text_sum(party, emb: SecretEmbedder, tokenizer: Tokenizer | None, text: str | None):
    """Sum of the token rows of ``text`` (scale f, exact) and the public token count.

    P1 deals its integer token-count vector; ids never leave P1.
    """
    is_holder = party.id == PartyId.P1
    counts = tokenizer.counts(text) if is_holder else None
    (n,) = announce(party, PartyId.P1, [int(counts.sum())] if is_holder else None, 1)
    if n <= 0:
        raise EmptyTextError("text has no tokens")
    c = deal(party, counts, PartyId.P1, (1, emb.vocab_size))
    return matmul(party, c, emb.matrix).reshape(emb.dim), n


def secure_embed_text(party, emb: SecretEmbedder, tokenizer: Tokenizer | None, text: str | None) -> ReplicatedShare:
    """Mean of the token rows (fixed point, one truncation)."""
    is_holder = party.id == PartyId.P1
    counts = tokenizer.counts(text) if is_holder else None
    (n,) = announce(party, PartyId.P1, [int(counts.sum())] if is_holder else None, 1)
    if n <= 0:
        raise EmptyTextError("text has no tokens")
    weights = encode_array(counts / n, party.frac_bits, party.ring) if is_holder else None
    w = deal(party, weights, PartyId.P1, (1, emb.vocab_size), frac_bits=party.frac_bits)
    return secure_matmul(party, w, emb.matrix).reshape(emb.dim)


def _word_counts(tokenizer: Tokenizer, words) -> tuple[np.ndarray, list[int]]:
    rows = np.zeros((len(words), len(tokenizer)), dtype=np.int64)
    lens = []
    for i, w in enumerate(words):
        ids = tokenizer.ids(w)
        lens.append(len(ids))
        np.add.at(rows[i], np.asarray(ids, dtype=np.int64), 1)
    return rows, lens


def embed_word_sums(party, emb: SecretEmbedder, tokenizer: Tokenizer | None, words, count: int):
    """Per word, the sum of its normalised token rows (scale f, exact).

    ``count`` must be public. Returns the share and the public token lengths.
    """
    is_holder = party.id == PartyId.P1
    if count == 0:
        return _empty(party, emb), []
    rows, lens = _word_counts(tokenizer, words) if is_holder else (None, None)
    lens = announce(party, PartyId.P1, lens, count)
    if min(lens) <= 0:
        raise EmptyTextError("a word has no tokens")
    sel = deal(party, rows, PartyId.P1, (count, emb.vocab_size))
    return matmul(party, sel, emb.word_matrix), lens


def secure_embed_words(party, emb: SecretEmbedder, tokenizer: Tokenizer | None, words, count: int) -> ReplicatedShare:
    """Word-mode embeddings: a unit row per single-token word, the mean otherwise."""
    is_holder = party.id == PartyId.P1
    if count == 0:
        return _empty(party, emb)
    rows, lens = _word_counts(tokenizer, words) if is_holder else (None, None)
    lens = announce(party, PartyId.P1, lens, count)
    if min(lens) <= 0:
        raise EmptyTextError("a word has no tokens")
    if max(lens) == 1:
        sel = deal(party, rows, PartyId.P1, (count, emb.vocab_size))
        return matmul(party, sel, emb.word_matrix).with_frac_bits(party.frac_bits)
    weights = encode_array(rows / np.asarray(lens)[:, None], party.frac_bits, party.ring) if is_holder else None
    w = deal(party, weights, PartyId.P1, (count, emb.vocab_size), frac_bits=party.frac_bits)
    return secure_matmul(party, w, emb.word_matrix)


def _empty(party, emb: SecretEmbedder) -> ReplicatedShare:
    z = np.zeros((0, emb.dim), dtype=np.uint64)
    return ReplicatedShare(z, z.copy(), party.id, party.frac_bits, party.ring)


def plaintext_embed_text(params: EmbedderParams, text: str) -> np.ndarray:
    """Float reference: mean of token rows."""
    ids = params.tokenizer.ids(text)
    if not ids:
        raise EmptyTextError("text has no tokens")
    return params.matrix[ids].mean(axis=0)


def plaintext_embed_word(params: EmbedderParams, word: str) -> np.ndarray:
    ids = params.tokenizer.ids(word)
    if not ids:
        raise EmptyTextError(f"word {word!r} has no tokens")
    return params.word_matrix[ids].mean(axis=0)


__all__ = [
    "EmbedderParams",
    "SecretEmbedder",
    "deal_embedder",
    "embed_text_sum",
    "embed_word_sums",
    "load_embedder",
    "plaintext_embed_text",
    "plaintext_embed_word",
    "save_embedder",
    "secure_embed_text",
    "secure_embed_words",
    "tokenize",
]
