"""Single-machine reference for the watermark protocols.

Uses the same fixed-point encodings and the same integer scores as the
secure protocols, so its outputs must match them exactly.
"""

from __future__ import annotations

import numpy as np

from ..errors import EmptyTextError, FormatError
from ..numeric import DEFAULT_FRAC_BITS, Ring, encode_array
from .embedder import EmbedderParams
from .inserter import DefaultInserter, Inserter, build_prompt
from .watermark import (
    DetectionResult,
    InsertOutcome,
    WatermarkParams,
    WatermarkRecord,
    derive_counts,
    similarity_threshold_raw,
    unique_words,
)


def topk_indices(scores, k: int) -> list[int]:
    """Positions of the k largest scores, ties toward the smaller index."""
    scores = [int(s) for s in scores]
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]


class PlaintextPipeline:
    def __init__(self, embedder: EmbedderParams, table_rows: np.ndarray | None = None, vocabulary=None,
                 frac_bits: int = DEFAULT_FRAC_BITS, ring: Ring = Ring(64)):
        self.embedder = embedder
        self.tokenizer = embedder.tokenizer
        self.vocabulary = vocabulary
        self.frac_bits = frac_bits
        self.ring = ring
        enc = lambda a: ring.signed(encode_array(a, frac_bits, ring)).astype(np.int64)  # noqa: E731
        self.matrix = enc(embedder.matrix)
        self.word_matrix = enc(embedder.word_matrix)
        self.table = None if table_rows is None else enc(table_rows)

    def text_sum(self, text: str) -> tuple[np.ndarray, int]:
        counts = self.tokenizer.counts(text)
        n = int(counts.sum())
        if n == 0:
            raise EmptyTextError("text has no tokens")
        return counts @ self.matrix, n

    def word_sums(self, words) -> tuple[np.ndarray, list[int]]:
        rows, lens = [], []
        for w in words:
            ids = self.tokenizer.ids(w)
            if not ids:
                raise EmptyTextError("a word has no tokens")
            rows.append(self.word_matrix[ids].sum(axis=0))
            lens.append(len(ids))
        return np.array(rows, dtype=np.int64).reshape(len(words), -1), lens

    def select(self, text: str, params: WatermarkParams = WatermarkParams()) -> tuple[list, list]:
        e, n = self.text_sum(text)
        k, k_cand = derive_counts(n, params, self.table.shape[0])
        cand = topk_indices(self.table @ e, k_cand)
        e_cand, lens = self.word_sums([self.vocabulary.idx2word(i) for i in cand])
        if max(lens) != 1:
            raise FormatError("vocabulary words must be single tokens")
        pos = topk_indices(e_cand @ e, k)
        return cand, [cand[p] for p in pos]

    def insert(self, text: str, params: WatermarkParams = WatermarkParams(), inserter: Inserter | None = None,
               record_id: str = "plaintext") -> InsertOutcome:
        cand, filtered = self.select(text, params)
        words = [self.vocabulary.idx2word(i) for i in filtered]
        new_text = (inserter or DefaultInserter()).rewrite(build_prompt(words, text), text)
        return InsertOutcome(new_text, WatermarkRecord.create(new_text, words, params, record_id), cand, filtered, words)

    def count(self, text: str, words, params: WatermarkParams = WatermarkParams()) -> int:
        if not words:
            raise EmptyTextError("no watermark words given")
        cand = unique_words(text)
        if not cand:
            raise EmptyTextError("text has no words")
        e_wm, l_wm = self.word_sums(words)
        e_c, l_c = self.word_sums(cand)
        theta = similarity_threshold_raw(params.theta_sim, self.frac_bits, self.ring)
        hits = (e_wm @ e_c.T) >= theta * np.outer(l_wm, l_c)
        return int(hits.any(axis=1).sum())

    def detect(self, text: str, words, params: WatermarkParams = WatermarkParams(), verbose: bool = True) -> DetectionResult:
        c = self.count(text, words, params)
        frac = params.detection_fraction()
        detected = frac.denominator * c > frac.numerator * len(words)
        return DetectionResult(detected, c if verbose else None, len(words))
