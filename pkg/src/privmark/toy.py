"""Desk-scale worlds: a synthetic embedder, document embeddings and vocabulary.

Groups of near-synonyms get nearby vectors (pairwise cosine around 0.96);
all other tokens get independent random directions, whose pairwise cosines
in 64 dimensions stay far below the 0.85 similarity threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .pipeline.embedder import EmbedderParams
from .pipeline.tokenizer import UNKNOWN, Tokenizer, tokenize
from .sectable import EmbeddingSet, Vocabulary

GROUP_NOISE = 0.2


@dataclass
class ToyWorld:
    embedder: EmbedderParams
    vocabulary: Vocabulary
    embeddings: EmbeddingSet
    filler: list

    def random_text(self, rng: np.random.Generator, n_words: int) -> str:
        """Sentences of 6 to 14 random tokens drawn from the whole token list."""
        pool = self.embedder.tokenizer.tokens[1:]
        words = [pool[i] for i in rng.integers(0, len(pool), size=n_words)]
        out, i = [], 0
        while i < n_words:
            j = min(n_words, i + int(rng.integers(6, 15)))
            sentence = " ".join(words[i:j])
            out.append(sentence[0].upper() + sentence[1:] + ".")
            i = j
        return " ".join(out)


def read_groups(lines) -> list[list[str]]:
    groups = []
    for ln in lines:
        ln = ln.strip()
        if ln and not ln.startswith("#"):
            groups.append([w.strip().lower() for w in ln.split(",") if w.strip()])
    return groups


def build_embedder(tokens, groups=(), dim: int = 64, seed: int = 0) -> EmbedderParams:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xE3B]))
    tokens = list(dict.fromkeys(tokens))
    index = {t: i for i, t in enumerate(tokens)}
    rows = rng.standard_normal((len(tokens), dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    for group in groups:
        base = rng.standard_normal(dim)
        base /= np.linalg.norm(base)
        for w in group:
            if w in index:
                rows[index[w]] = base + GROUP_NOISE * rng.standard_normal(dim) / np.sqrt(dim)
    # unnormalised magnitudes make text means differ from word-mode rows
    rows *= rng.uniform(0.5, 1.5, size=(len(tokens), 1))
    matrix = np.vstack([np.zeros((1, dim)), rows])
    return EmbedderParams(Tokenizer([UNKNOWN] + tokens), matrix)


def document_embeddings(embedder: EmbedderParams, n_docs: int, doc_len: int = 40, seed: int = 0) -> EmbeddingSet:
    """Each document embedding is the mean of ``doc_len`` random token rows."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD0C]))
    t = len(embedder.tokenizer)
    ids = rng.integers(1, t, size=(n_docs, doc_len))
    return EmbeddingSet.from_rows(embedder.matrix[ids].mean(axis=1))


def random_world(seed: int = 0, vocab_size: int = 500, filler_size: int = 300, dim: int = 64,
                 n_docs: int | None = None) -> ToyWorld:
    """Synthetic lexicon: vocabulary words plus filler words, no synonym structure."""
    vocab = [f"v{seed % 1000:03d}x{i:04d}" for i in range(vocab_size)]
    filler = [f"f{seed % 1000:03d}x{i:04d}" for i in range(filler_size)]
    emb = build_embedder(vocab + filler, (), dim, seed)
    docs = document_embeddings(emb, n_docs or 2 * vocab_size, seed=seed)
    return ToyWorld(emb, Vocabulary.from_words(vocab), docs, filler)


def _data_text(name: str) -> str:
    return resources.files("privmark").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def shipped_corpus() -> list:
    return json.loads(_data_text("corpus.json"))


def shipped_vocabulary() -> Vocabulary:
    return Vocabulary.from_words([w for w in _data_text("vocab.txt").splitlines() if w.strip()])


def shipped_groups() -> list[list[str]]:
    return read_groups(_data_text("synonyms.txt").splitlines())


def corpus_world(seed: int = 0, dim: int = 64, n_docs: int | None = None) -> ToyWorld:
    """Embedder covering the shipped vocabulary, synonym groups and corpus texts."""
    vocab = shipped_vocabulary()
    groups = shipped_groups()
    tokens = set(vocab.words)
    tokens.update(w for g in groups for w in g)
    for rec in shipped_corpus():
        for key in ("candidate_text", "removing_attack", "paraphrase_attack"):
            tokens.update(tokenize(rec.get(key, "")))
    ordered = sorted(tokens)
    emb = build_embedder(ordered, groups, dim, seed)
    docs = document_embeddings(emb, n_docs or 2 * len(vocab), seed=seed)
    filler = [t for t in ordered if t not in vocab.word2idx]
    return ToyWorld(emb, vocab, docs, filler)
