"""Public word tokenizer shared by every party and by the plaintext oracle."""

from __future__ import annotations

import string

import numpy as np

UNKNOWN = "<unk>"
UNKNOWN_ID = 0
# ASCII punctuation plus the typographic quotes and dashes common in prose
PUNCTUATION = string.punctuation + "‘’“”–—…«»"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, strip punctuation at both ends."""
    out = []
    for piece in text.lower().split():
        tok = piece.strip(PUNCTUATION)
        if tok:
            out.append(tok)
    return out


class Tokenizer:
    """Maps words to ids of an embedding vocabulary; id 0 is the unknown word."""

    def __init__(self, tokens):
        tokens = list(tokens)
        if not tokens or tokens[0] != UNKNOWN:
            tokens = [UNKNOWN] + [t for t in tokens if t != UNKNOWN]
        self.tokens = tuple(tokens)
        self.token2id = {t: i for i, t in enumerate(self.tokens)}
        if len(self.token2id) != len(self.tokens):
            raise ValueError("duplicate tokens in embedder vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def ids(self, text: str) -> list[int]:
        return [self.token2id.get(t, UNKNOWN_ID) for t in tokenize(text)]

    def counts(self, text: str) -> np.ndarray:
        return np.bincount(np.asarray(self.ids(text), dtype=np.int64), minlength=len(self)).astype(np.int64)
