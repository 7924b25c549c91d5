from .embedder import (
    EmbedderParams,
    SecretEmbedder,
    deal_embedder,
    load_embedder,
    save_embedder,
    secure_embed_text,
    secure_embed_words,
)
from .inserter import DefaultInserter, HttpInserter, Inserter, build_prompt, splice_words
from .oracle import PlaintextPipeline, topk_indices
from .tokenizer import Tokenizer, tokenize
from .watermark import (
    DetectionResult,
    InsertOutcome,
    WatermarkParams,
    WatermarkRecord,
    derive_counts,
    detect,
    mark_insert,
    select_words,
)

__all__ = [
    "DefaultInserter",
    "DetectionResult",
    "EmbedderParams",
    "HttpInserter",
    "InsertOutcome",
    "Inserter",
    "PlaintextPipeline",
    "SecretEmbedder",
    "Tokenizer",
    "WatermarkParams",
    "WatermarkRecord",
    "build_prompt",
    "deal_embedder",
    "derive_counts",
    "detect",
    "load_embedder",
    "mark_insert",
    "save_embedder",
    "secure_embed_text",
    "secure_embed_words",
    "select_words",
    "splice_words",
    "tokenize",
    "topk_indices",
]
