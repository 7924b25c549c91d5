"""The secret word-embedding table.

The text holder (P1) owns a vocabulary of M words and the embedding holder
(P2) owns N >= M document embeddings. Building the table maps every word to
a distinct, randomly chosen embedding row; the rows are secret-shared and
only P1 can translate between words and row numbers.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateWordError, FormatError, SizeError, ZeroRowError
from .numeric import Ring, encode_array
from .pipeline.tokenizer import tokenize
from .runtime.frames import Frame, HEADER, HEADER_SIZE, pack_elements, phase_tag, unpack_elements
from .runtime.party import KEY_BITS, elements_to_int, int_to_elements
from .sharing import PartyId, ReplicatedShare, announce, deal

BINARY_MAGIC = b"PMEMB\x00\x01\x00"
BINARY_HEADER = struct.Struct("<8sII")  # magic, N, d (16 bytes)


# -- plaintext inputs --------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    words: tuple
    word2idx: dict = field(repr=False, compare=False)

    @classmethod
    def from_words(cls, words) -> "Vocabulary":
        seen: dict = {}
        for i, raw in enumerate(words):
            w = raw.strip().lower()
            if tokenize(w) != [w] or "," in w:
                raise FormatError(f"vocabulary entry {i + 1} is not a single clean word: {raw!r}")
            if w in seen:
                raise DuplicateWordError(f"duplicate vocabulary word {w!r} (entries {seen[w] + 1} and {i + 1})")
            seen[w] = i
        return cls(tuple(seen), seen)

    def __len__(self) -> int:
        return len(self.words)

    def idx2word(self, i: int) -> str:
        return self.words[i]


def load_vocabulary(path) -> Vocabulary:
    """One word per line (UTF-8); blank lines are ignored."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except (OSError, UnicodeDecodeError) as exc:
        raise FormatError(f"cannot read vocabulary {path}: {exc}") from exc
    return Vocabulary.from_words([ln for ln in lines if ln.strip()])


def normalize_rows(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=np.float64)
    norms = np.linalg.norm(rows, axis=1)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise ZeroRowError(f"embedding row {int(zero[0])} is all zeros")
    return rows / norms[:, None]


@dataclass(frozen=True)
class EmbeddingSet:
    rows: np.ndarray  # unit-norm, N x d

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    @classmethod
    def from_rows(cls, rows) -> "EmbeddingSet":
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[0] == 0 or rows.shape[1] == 0:
            raise FormatError(f"embeddings must be a non-empty N x d matrix, got shape {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise FormatError("embeddings contain non-finite values")
        return cls(normalize_rows(rows))


def load_embeddings(path) -> EmbeddingSet:
    """Text ("N d" header, then N rows) or binary (16-byte header, float64 LE)."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read embeddings {path}: {exc}") from exc
    if data[:8] == BINARY_MAGIC:
        if len(data) < BINARY_HEADER.size:
            raise FormatError("truncated binary embedding header")
        _, n, d = BINARY_HEADER.unpack_from(data)
        body = data[BINARY_HEADER.size:]
        if len(body) != n * d * 8:
            raise FormatError(f"binary embeddings: expected {n * d * 8} bytes of data, got {len(body)}")
        rows = np.frombuffer(body, dtype="<f8").reshape(n, d)
        return EmbeddingSet.from_rows(rows)
    try:
        lines = [ln for ln in data.decode("utf-8").splitlines() if ln.strip()]
        n, d = (int(v) for v in lines[0].split())
        rows = np.array([[float(v) for v in ln.split()] for ln in lines[1:]], dtype=np.float64)
    except (UnicodeDecodeError, ValueError, IndexError) as exc:
        raise FormatError(f"malformed embedding file {path}: {exc}") from exc
    if rows.shape != (n, d):
        raise FormatError(f"header says {n} x {d} but found {rows.shape}")
    return EmbeddingSet.from_rows(rows)


def save_embeddings(path, rows: np.ndarray, binary: bool = False) -> None:
    rows = np.asarray(rows, dtype=np.float64)
    n, d = rows.shape
    if binary:
        Path(path).write_bytes(BINARY_HEADER.pack(BINARY_MAGIC, n, d) + rows.astype("<f8").tobytes())
        return
    lines = [f"{n} {d}"] + [" ".join(repr(float(v)) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- the table -----------------------------------------------------------------


@dataclass
class SecTable:
    table: ReplicatedShare  # M x d, fixed point
    rows: np.ndarray  # public: embedding row chosen for each word index
    vocabulary: Vocabulary | None = None  # only at P1

    @property
    def size(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    @property
    def frac_bits(self) -> int:
        return self.table.frac_bits


def permutation_prefix(seed: int, n: int, m: int) -> np.ndarray:
    """First m entries of a seeded uniform permutation of range(n)."""
    if m > n:
        raise SizeError(f"vocabulary of {m} words needs at least {m} embeddings, have {n}")
    gen = np.random.Generator(np.random.Philox(key=seed))
    return gen.permutation(n)[:m]


SEED_STREAM = 0x5EC7


def seed_contribution(rng: np.random.Generator) -> int:
    return int.from_bytes(rng.bytes(KEY_BITS // 8), "little")


def joint_seed(party) -> int:
    """XOR of a 128-bit contribution from each party, exchanged with both peers."""
    mine = seed_contribution(party.derived_rng(SEED_STREAM))
    elems = int_to_elements(mine, party.ring)
    for peer in (party.id.next, party.id.prev):
        party.send(peer, elems, kind="public")
    seed = mine
    for peer in (party.id.next, party.id.prev):
        seed ^= elements_to_int(party.recv(peer, elems.shape), party.ring)
    return seed


def build_sectable(party, vocabulary: Vocabulary | None = None, embeddings: EmbeddingSet | None = None) -> SecTable:
    """Build the table; P1 passes the vocabulary, P2 the embeddings."""
    pid = party.id
    with party.phase("SecTable"):
        (m,) = announce(party, PartyId.P1, [len(vocabulary)] if pid == PartyId.P1 else None, 1)
        n, d = announce(party, PartyId.P2, [embeddings.n, embeddings.dim] if pid == PartyId.P2 else None, 2)
        if m > n:
            raise SizeError(f"vocabulary of {m} words needs at least {m} embeddings, have {n}")
        seed = joint_seed(party)
        chosen = permutation_prefix(seed, n, m)
        value = None
        if pid == PartyId.P2:
            value = encode_array(embeddings.rows[chosen], party.frac_bits, party.ring)
        table = deal(party, value, PartyId.P2, (m, d), frac_bits=party.frac_bits)
    return SecTable(table, chosen, vocabulary if pid == PartyId.P1 else None)


# -- persistence ---------------------------------------------------------------

_META = struct.Struct("<5Q")  # M, d, frac bits, ring bits, party


def save_share(path, sectable: SecTable, session_id: int = 0) -> None:
    """Three frames: metadata with the public row map, first components, second components."""
    sh = sectable.table
    ring = sh.ring
    m, d = sh.shape
    tag = phase_tag("SecTable")
    meta = _META.pack(m, d, sh.frac_bits, ring.bits, int(sh.owner)) + pack_elements(sectable.rows, Ring(64))
    frames = [
        Frame(session_id, tag, 0, meta),
        Frame(session_id, tag, 1, pack_elements(sh.first, ring)),
        Frame(session_id, tag, 2, pack_elements(sh.second, ring)),
    ]
    Path(path).write_bytes(b"".join(f.encode() for f in frames))


def _read_frames(data: bytes, count: int) -> list:
    frames, off = [], 0
    for _ in range(count):
        if len(data) - off < HEADER_SIZE:
            raise FormatError("truncated share file")
        length = HEADER.unpack_from(data, off)[3]
        frames.append(Frame.decode(data[off : off + HEADER_SIZE + length]))
        off += HEADER_SIZE + length
    if off != len(data):
        raise FormatError("trailing bytes in share file")
    return frames


def load_share(path, vocabulary: Vocabulary | None = None) -> SecTable:
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise FormatError(f"cannot read table share {path}: {exc}") from exc
    meta, first, second = _read_frames(data, 3)
    if len(meta.payload) < _META.size:
        raise FormatError("share file metadata too short")
    m, d, frac, bits, owner = _META.unpack_from(meta.payload)
    ring = Ring(bits)
    rows = unpack_elements(meta.payload[_META.size:], Ring(64)).astype(np.int64)
    if rows.shape != (m,):
        raise FormatError("row map length does not match table size")
    share = ReplicatedShare(
        unpack_elements(first.payload, ring, (m, d)),
        unpack_elements(second.payload, ring, (m, d)),
        PartyId(owner),
        int(frac),
        ring,
    )
    return SecTable(share, rows, vocabulary)


def save_index(path, vocabulary: Vocabulary) -> None:
    """P1-side maps: word -> row index of the table and back."""
    doc = {"idx2word": list(vocabulary.words), "word2idx": dict(vocabulary.word2idx)}
    Path(path).write_text(json.dumps(doc, indent=1), encoding="utf-8")


def load_index(path) -> Vocabulary:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        vocab = Vocabulary.from_words(doc["idx2word"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"bad index map {path}: {exc}") from exc
    if doc.get("word2idx") and any(vocab.word2idx.get(w) != i for w, i in doc["word2idx"].items()):
        raise FormatError("index map: word2idx and idx2word disagree")
    return vocab
