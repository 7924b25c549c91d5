"""Orchestration: configuration, resources and whole-protocol runners.

A session configuration is a JSON file; relative paths inside it resolve
against the file's directory. Without resource paths the shipped toy world
is used, so every command works out of the box.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError
from .numeric import DEFAULT_FRAC_BITS, DEFAULT_RING_BITS, Ring
from .pipeline.embedder import EmbedderParams, deal_embedder, load_embedder
from .pipeline.inserter import DefaultInserter, HttpInserter
from .pipeline.oracle import PlaintextPipeline
from .pipeline.watermark import WatermarkParams, detect, mark_insert
from .runtime.party import derived_rng
from .runtime.profiles import NetworkProfile, get_profile
from .runtime.session import SessionResult, run_session, session_id_from_seed
from .sectable import (
    EmbeddingSet,
    SEED_STREAM,
    SecTable,
    Vocabulary,
    build_sectable,
    load_embeddings,
    load_index,
    load_share,
    load_vocabulary,
    permutation_prefix,
    save_index,
    save_share,
    seed_contribution,
)
from .sharing import PartyId
from .toy import corpus_world

CONFIG_ENV = "PRIVMARK_CONFIG"


@dataclass
class Config:
    base: Path = field(default_factory=Path.cwd)
    party: int | None = None  # 1..3 for TCP nodes
    listen: str | None = None
    peers: dict = field(default_factory=dict)  # "1".."3" -> host:port
    ring_bits: int = DEFAULT_RING_BITS
    frac_bits: int = DEFAULT_FRAC_BITS
    seed: int = 0
    session_id: int | None = None
    profile: str = "localhost"
    timeout: float = 30.0
    vocabulary: str | None = None
    embeddings: str | None = None
    embedder: str | None = None
    table_dir: str | None = None
    inserter_url: str | None = None
    inserter_timeout: float = 30.0
    toy_seed: int = 0
    params: dict = field(default_factory=dict)

    def path(self, rel: str | None) -> Path | None:
        if rel is None:
            return None
        p = Path(rel)
        return p if p.is_absolute() else self.base / p

    @property
    def watermark_params(self) -> WatermarkParams:
        return WatermarkParams.from_dict(self.params)

    def network_profile(self) -> NetworkProfile:
        return get_profile(self.profile)

    def resolved_session_id(self) -> int:
        return self.session_id if self.session_id is not None else session_id_from_seed(self.seed)


_FIELDS = set(Config.__dataclass_fields__) - {"base"}


def load_config(path=None) -> Config:
    """Read a config file; falls back to $PRIVMARK_CONFIG, then defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return Config()
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise FormatError(f"cannot read config {p}: {exc}") from exc
    if not isinstance(doc, dict):
        raise FormatError("config must be a JSON object")
    unknown = set(doc) - _FIELDS
    if unknown:
        raise FormatError(f"unknown config keys: {sorted(unknown)}")
    try:
        cfg = Config(base=p.resolve().parent, **doc)
        cfg.ring_bits, cfg.frac_bits, cfg.seed = int(cfg.ring_bits), int(cfg.frac_bits), int(cfg.seed)
        if cfg.party is not None and cfg.party not in (1, 2, 3):
            raise ValueError("party must be 1, 2 or 3")
        cfg.watermark_params  # validates params
    except (TypeError, ValueError) as exc:
        raise FormatError(f"invalid config {p}: {exc}") from exc
    return cfg


@dataclass
class World:
    """Plaintext resources; in a TCP deployment each party loads only its own."""

    embedder: EmbedderParams | None = None
    vocabulary: Vocabulary | None = None
    embeddings: EmbeddingSet | None = None

    @property
    def tokenizer(self):
        return self.embedder.tokenizer


def load_world(cfg: Config, party: PartyId | None = None) -> World:
    """Resources for ``party`` (or all of them when None)."""
    if not (cfg.vocabulary or cfg.embeddings or cfg.embedder):
        toy = corpus_world(cfg.toy_seed)
        return World(toy.embedder, toy.vocabulary, toy.embeddings)
    want_p1 = party in (None, PartyId.P1)
    want_p2 = party in (None, PartyId.P2)
    # the tokenizer is public, so P1 reads the token list from the embedder file too
    emb = load_embedder(cfg.path(cfg.embedder)) if (want_p1 or want_p2) and cfg.embedder else None
    vocab = load_vocabulary(cfg.path(cfg.vocabulary)) if want_p1 and cfg.vocabulary else None
    docs = load_embeddings(cfg.path(cfg.embeddings)) if want_p2 and cfg.embeddings else None
    return World(emb, vocab, docs)


def make_inserter(cfg: Config):
    if cfg.inserter_url:
        return HttpInserter(cfg.inserter_url, cfg.inserter_timeout)
    return DefaultInserter()


# -- table files ---------------------------------------------------------------


def table_paths(directory) -> dict:
    d = Path(directory)
    out = {pid: d / f"share_{pid.label}.bin" for pid in PartyId}
    out["index"] = d / "index.json"
    return out


def save_table(directory, party_id: PartyId, table: SecTable, session_id: int = 0) -> None:
    paths = table_paths(directory)
    Path(directory).mkdir(parents=True, exist_ok=True)
    save_share(paths[party_id], table, session_id)
    if party_id == PartyId.P1:
        save_index(paths["index"], table.vocabulary)


def load_table(directory, party_id: PartyId) -> SecTable:
    paths = table_paths(directory)
    vocab = load_index(paths["index"]) if party_id == PartyId.P1 else None
    table = load_share(paths[party_id], vocab)
    if table.table.owner != party_id:
        raise FormatError(f"{paths[party_id]} belongs to {table.table.owner.label}, not {party_id.label}")
    return table


def has_table(cfg: Config) -> bool:
    """A configured table directory must hold the files; none means build one per session."""
    return bool(cfg.table_dir)


# -- per-party building blocks -------------------------------------------------


def _role(world: World, pid: PartyId):
    p1, p2 = pid == PartyId.P1, pid == PartyId.P2
    return (
        world.vocabulary if p1 else None,
        world.embeddings if p2 else None,
        world.embedder if p2 else None,
        world.tokenizer if p1 and world.embedder else None,
    )


def obtain_table(party, world: World, cfg: Config) -> SecTable:
    if has_table(cfg):
        return load_table(cfg.path(cfg.table_dir), party.id)
    vocab, docs, _, _ = _role(world, party.id)
    return build_sectable(party, vocab, docs)


def insert_program(world: World, cfg: Config, text: str, inserter=None, detect_after: bool = False):
    params = cfg.watermark_params

    def program(party, _):
        _, _, emb_params, tok = _role(world, party.id)
        is_p1 = party.id == PartyId.P1
        table = obtain_table(party, world, cfg)
        emb = deal_embedder(party, emb_params)
        out = mark_insert(party, table, emb, tok, text if is_p1 else None, params, inserter or make_inserter(cfg))
        if detect_after:
            res = detect(party, emb, tok, out.text if is_p1 else None, out.words if is_p1 else None, params, True)
            return out, res
        return out

    return program


def detect_program(world: World, cfg: Config, text: str, words, verbose: bool = False):
    params = cfg.watermark_params

    def program(party, _):
        _, _, emb_params, tok = _role(world, party.id)
        is_p1 = party.id == PartyId.P1
        emb = deal_embedder(party, emb_params)
        return detect(party, emb, tok, text if is_p1 else None, list(words) if is_p1 else None, params, verbose)

    return program


def sectable_program(world: World, out_dir=None):
    def program(party, _):
        vocab, docs, _, _ = _role(world, party.id)
        table = build_sectable(party, vocab, docs)
        if out_dir is not None:
            save_table(out_dir, party.id, table, party.session_id)
        return table

    return program


def run_memory(program, cfg: Config, keep_transcript: bool = True, profile: NetworkProfile | None = None) -> SessionResult:
    return run_session(program, profile=profile, ring_bits=cfg.ring_bits, frac_bits=cfg.frac_bits, seed=cfg.seed,
                       timeout=cfg.timeout, keep_transcript=keep_transcript)


def plaintext_table_rows(world: World, cfg: Config):
    """Row map an in-memory secure build with this config selects.

    Each party's seed contribution comes from a stream derived from the
    session seed, so the single-machine engine can recompute the public
    permutation without running the protocol.
    """
    if has_table(cfg):
        return load_table(cfg.path(cfg.table_dir), PartyId.P1).rows
    seed = 0
    for pid in PartyId:
        seed ^= seed_contribution(derived_rng(cfg.seed, pid, SEED_STREAM))
    return permutation_prefix(seed, world.embeddings.n, len(world.vocabulary))


def plaintext_pipeline(world: World, cfg: Config) -> PlaintextPipeline:
    rows = world.embeddings.rows[plaintext_table_rows(world, cfg)]
    return PlaintextPipeline(world.embedder, rows, world.vocabulary, cfg.frac_bits, Ring(cfg.ring_bits))


def detection_oracle(world: World, cfg: Config) -> PlaintextPipeline:
    """Plaintext detection needs no table, so none is derived."""
    return PlaintextPipeline(world.embedder, None, world.vocabulary, cfg.frac_bits, Ring(cfg.ring_bits))
