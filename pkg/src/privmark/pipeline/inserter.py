"""Rewriting a text so that it contains the chosen watermark words."""

from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from typing import Protocol

from ..errors import InserterError

WORDS_PREFIX = "Watermark words: "
TEXT_PREFIX = "Text:\n"

_SENTENCE_END = re.compile(r"[.!?]+[\"')\]’”]*(?=\s|$)")


def build_prompt(words, text: str) -> str:
    return (
        "Rewrite the text below so that it naturally uses every one of the listed words, "
        "keeping its meaning and length close to the original.\n"
        f"{WORDS_PREFIX}{', '.join(words)}\n"
        f"{TEXT_PREFIX}{text}"
    )


def prompt_words(prompt: str) -> list[str]:
    for line in prompt.splitlines():
        if line.startswith(WORDS_PREFIX):
            body = line[len(WORDS_PREFIX):].strip()
            return [w.strip() for w in body.split(",") if w.strip()]
    raise InserterError("prompt has no watermark word list")


class Inserter(Protocol):
    def rewrite(self, prompt: str, text: str) -> str: ...


def _sentence_ends(text: str) -> list[int]:
    """Offsets where a sentence's final punctuation starts."""
    return [m.start() for m in _SENTENCE_END.finditer(text)]


class DefaultInserter:
    """Deterministic splicer: appends ", and <word>" to evenly spaced sentences.

    Word i goes to sentence floor(i * S / k) of S sentences, just before the
    sentence's closing punctuation; a text without closing punctuation gets
    everything appended at its end. Every word is therefore present in the
    output as its own token.
    """

    def rewrite(self, prompt: str, text: str) -> str:
        words = prompt_words(prompt)
        return splice_words(text, words)


def splice_words(text: str, words) -> str:
    words = list(words)
    if not words:
        return text
    ends = _sentence_ends(text)
    body = text.rstrip()
    if not ends:
        return body + "".join(f", and {w}" for w in words) + "."
    per_sentence: dict = {}
    for i, w in enumerate(words):
        per_sentence.setdefault(i * len(ends) // len(words), []).append(w)
    out, prev = [], 0
    for s, pos in enumerate(ends):
        out.append(text[prev:pos])
        out.extend(f", and {w}" for w in per_sentence.get(s, []))
        prev = pos
    out.append(text[prev:])
    return "".join(out)


class HttpInserter:
    """Client for an external generator: POST {prompt, text} -> {text}."""

    def __init__(self, url: str, timeout: float = 30.0):
        self.url = url
        self.timeout = timeout

    def rewrite(self, prompt: str, text: str) -> str:
        body = json.dumps({"prompt": prompt, "text": text}).encode("utf-8")
        req = urllib.request.Request(self.url, data=body, headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise InserterError(f"inserter request to {self.url} failed: {exc}") from exc
        if not isinstance(doc, dict) or not isinstance(doc.get("text"), str):
            raise InserterError("inserter response lacks a 'text' string")
        return doc["text"]
