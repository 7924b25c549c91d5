"""Watermark insertion and detection protocols.

Both protocols rank and threshold on exact integer inner products: text
embeddings are carried as sums of token rows and word embeddings as sums of
unit rows, so no truncation happens before a comparison. Dividing a sum by
its public token count rescales every score of one ranking by the same
positive factor, which leaves every ranking unchanged; for thresholds the
public factor is moved to the other side of the inequality instead.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from ..errors import EmptyTextError, FormatError, SizeError
from ..numeric import encode_array
from ..ops import b2a, less_than, matmul, not_bit, or_reduce, secure_topk
from ..sharing import PartyId, announce, public_share, reveal_to
from .embedder import SecretEmbedder, embed_text_sum, embed_word_sums
from .inserter import DefaultInserter, Inserter, build_prompt
from .tokenizer import Tokenizer, tokenize

if TYPE_CHECKING:
    from ..sectable import SecTable

MAX_THRESHOLD_DENOMINATOR = 1000


@dataclass(frozen=True)
class WatermarkParams:
    ratio: float = 0.12
    theta_sim: float = 0.85
    theta_det: float = 0.45
    candidate_factor: int = 3

    def __post_init__(self):
        for name in ("ratio", "theta_sim", "theta_det"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie strictly between 0 and 1, got {v}")
        if self.candidate_factor < 1:
            raise ValueError("candidate_factor must be at least 1")

    def detection_fraction(self) -> Fraction:
        """theta_det as num/den with den <= 1000 (0.45 -> 9/20)."""
        return Fraction(self.theta_det).limit_denominator(MAX_THRESHOLD_DENOMINATOR)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "WatermarkParams":
        return cls(**{k: d[k] for k in ("ratio", "theta_sim", "theta_det", "candidate_factor") if k in d})


def derive_counts(n: int, params: WatermarkParams = WatermarkParams(), vocab_size: int | None = None) -> tuple[int, int]:
    """(k, k') for an n-word text: k = max(1, floor(r n)), k' = factor * k capped at M."""
    if n < 1:
        raise EmptyTextError("text has no words")
    ratio = Fraction(params.ratio).limit_denominator(10**9)
    k = max(1, math.floor(ratio * n))
    k_cand = params.candidate_factor * k
    if vocab_size is not None:
        if k > vocab_size:
            raise SizeError(f"need {k} watermark words but the vocabulary has only {vocab_size}")
        k_cand = min(k_cand, vocab_size)
    return k, k_cand


def similarity_threshold_raw(theta: float, frac_bits: int, ring) -> int:
    """theta encoded at the scale of a product of two fixed-point values."""
    return int(ring.signed(encode_array(theta, 2 * frac_bits, ring)))


# -- records and results -------------------------------------------------------


@dataclass(frozen=True)
class WatermarkRecord:
    id: str
    watermark_words: list
    params: dict
    text_sha256: str

    @classmethod
    def create(cls, text: str, words, params: WatermarkParams, record_id: str) -> "WatermarkRecord":
        digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
        return cls(record_id, list(words), params.to_dict(), digest)

    def matches(self, text: str) -> bool:
        return hashlib.sha256(text.encode("utf-8")).hexdigest() == self.text_sha256

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json() + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "WatermarkRecord":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
            return cls(str(doc["id"]), list(doc["watermark_words"]), dict(doc["params"]), str(doc["text_sha256"]))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise FormatError(f"bad watermark record {path}: {exc}") from exc


@dataclass
class InsertOutcome:
    text: str
    record: WatermarkRecord
    candidates: list  # vocabulary indices, best first
    filtered: list  # vocabulary indices, best first
    words: list = field(default_factory=list)


@dataclass(frozen=True)
class DetectionResult:
    detected: bool
    count: int | None
    num_watermark_words: int

    @property
    def score(self) -> float | None:
        return None if self.count is None else self.count / self.num_watermark_words

    def to_dict(self) -> dict:
        d = {"detected": self.detected, "num_watermark_words": self.num_watermark_words}
        if self.count is not None:
            d["count"] = self.count
        return d


def _check_ring(party) -> None:
    if party.ring.bits < 2 * party.frac_bits + 16:
        raise ValueError(f"watermark protocols need a ring of at least {2 * party.frac_bits + 16} bits")


# -- insertion -----------------------------------------------------------------


def select_words(party, table: "SecTable", emb: SecretEmbedder, tokenizer: Tokenizer | None,
                 text: str | None, params: WatermarkParams):
    """Secure candidate and final word selection; P1 gets (candidates, filtered) indices."""
    _check_ring(party)
    is_holder = party.id == PartyId.P1
    with party.phase("Embed"):
        e_sum, n = embed_text_sum(party, emb, tokenizer, text)
    k, k_cand = derive_counts(n, params, table.size)
    with party.phase("Cosine"):
        sims = matmul(party, table.table, e_sum)
    with party.phase("Topk"):
        cand_share, _ = secure_topk(party, sims, k_cand)
        cand = reveal_to(party, cand_share, PartyId.P1)
    with party.phase("Insert"):
        cand = [int(i) for i in cand] if is_holder else None
        words = [table.vocabulary.idx2word(i) for i in cand] if is_holder else None
        e_cand, lens = embed_word_sums(party, emb, tokenizer, words, k_cand)
        if max(lens) != 1:
            raise FormatError("vocabulary words must be single tokens")
        filtered_sims = matmul(party, e_cand, e_sum)
        pos_share, _ = secure_topk(party, filtered_sims, k)
        pos = reveal_to(party, pos_share, PartyId.P1)
    if not is_holder:
        return None
    return cand, [cand[int(p)] for p in pos]


def mark_insert(party, table: "SecTable", emb: SecretEmbedder, tokenizer: Tokenizer | None, text: str | None,
                params: WatermarkParams = WatermarkParams(), inserter: Inserter | None = None,
                record_id: str | None = None) -> InsertOutcome | None:
    """Select k watermark words for ``text`` and rewrite it at P1."""
    chosen = select_words(party, table, emb, tokenizer, text, params)
    if chosen is None:
        return None
    cand, filtered = chosen
    words = [table.vocabulary.idx2word(i) for i in filtered]
    inserter = inserter or DefaultInserter()
    new_text = inserter.rewrite(build_prompt(words, text), text)
    rid = record_id or f"{party.session_id:016x}"
    record = WatermarkRecord.create(new_text, words, params, rid)
    return InsertOutcome(new_text, record, cand, filtered, words)


# -- detection -----------------------------------------------------------------


def unique_words(text: str) -> list[str]:
    return list(dict.fromkeys(tokenize(text)))


def detect(party, emb: SecretEmbedder, tokenizer: Tokenizer | None, text: str | None, words,
           params: WatermarkParams = WatermarkParams(), verbose: bool = False) -> DetectionResult | None:
    """Decide whether ``text`` carries the watermark ``words``; P1 learns the bit."""
    _check_ring(party)
    is_holder = party.id == PartyId.P1
    ring = party.ring
    with party.phase("Detect"):
        cand = unique_words(text) if is_holder else None
        n_wm, n_cand = announce(party, PartyId.P1, [len(words), len(cand)] if is_holder else None, 2)
        if n_wm == 0:
            raise EmptyTextError("no watermark words given")
        if n_cand == 0:
            raise EmptyTextError("text has no words")
        both, lens = embed_word_sums(party, emb, tokenizer, list(words) + cand if is_holder else None, n_wm + n_cand)
        e_wm, e_cand = both[:n_wm], both[n_wm:]
        dots = matmul(party, e_wm, e_cand.T)
        theta = similarity_threshold_raw(params.theta_sim, party.frac_bits, ring)
        scale = np.outer(lens[:n_wm], lens[n_wm:]).astype(np.int64)
        thr = public_share(party.id, theta * scale, ring, dots.frac_bits)
        hits = not_bit(less_than(party, dots, thr))
        present = b2a(party, or_reduce(party, hits))
        count = present._with(ring.reduce(present.first.sum(dtype=np.uint64)), ring.reduce(present.second.sum(dtype=np.uint64)))
        frac = params.detection_fraction()
        bound = public_share(party.id, frac.numerator * n_wm, ring)
        decision = less_than(party, bound, count.scale(frac.denominator))
        bit = reveal_to(party, decision, PartyId.P1)
        c = reveal_to(party, count, PartyId.P1) if verbose else None
    if not is_holder:
        return None
    return DetectionResult(bool(int(bit) & 1), None if c is None else int(ring.signed(c)), n_wm)
