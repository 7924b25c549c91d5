"""Detection rates over an attack corpus.

A corpus record carries an original watermarked text, a paraphrased and a
word-removing rewrite of it, and the watermark words. Each record is run
through detection in four scenarios: the original text, both attacks, and an
unrelated-text false-positive check that pairs the record's word list with
every text from a different domain.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FormatError
from .pipeline.embedder import deal_embedder
from .pipeline.tokenizer import tokenize
from .pipeline.watermark import detect, mark_insert
from .service import Config, World, _role, detection_oracle, obtain_table, plaintext_pipeline, run_memory
from .sharing import PartyId, announce

SCENARIOS = ("original", "paraphrase", "removal", "unrelated_fp")
WORD_COUNT_SLACK = 2


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    word_count: int
    watermark_count: int
    watermark_words: list
    candidate_text: str
    removing_attack: str
    paraphrase_attack: str
    domain: str

    @classmethod
    def from_dict(cls, d) -> "CorpusRecord":
        if not isinstance(d, dict):
            raise FormatError("record is not an object")
        try:
            words = d["watermark_words"]
            if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
                raise FormatError("watermark_words must be a list of strings")
            rec = cls(
                id=str(d["id"]),
                word_count=int(d.get("word_count", len(tokenize(str(d["candidate_text"]))))),
                watermark_count=int(d.get("watermark_count", len(words))),
                watermark_words=list(words),
                candidate_text=str(d["candidate_text"]),
                removing_attack=str(d["removing_attack"]),
                paraphrase_attack=str(d["paraphrase_attack"]),
                domain=str(d.get("domain", "")),
            )
        except KeyError as exc:
            raise FormatError(f"record lacks field {exc}") from exc
        except (TypeError, ValueError) as exc:
            raise FormatError(f"bad record field: {exc}") from exc
        if not rec.watermark_words:
            raise FormatError(f"record {rec.id}: no watermark words")
        if rec.watermark_count != len(rec.watermark_words):
            raise FormatError(f"record {rec.id}: watermark_count {rec.watermark_count} != {len(rec.watermark_words)} words")
        if not tokenize(rec.candidate_text):
            raise FormatError(f"record {rec.id}: empty candidate_text")
        return rec

    def word_count_ok(self) -> bool:
        return abs(len(tokenize(self.candidate_text)) - self.word_count) <= WORD_COUNT_SLACK


@dataclass
class Corpus:
    records: list
    skipped: list = field(default_factory=list)  # (position, message)


def parse_corpus(doc) -> Corpus:
    if isinstance(doc, dict):
        doc = doc.get("records", [doc])
    if not isinstance(doc, list):
        raise FormatError("corpus must be a JSON array of records")
    out = Corpus([])
    for i, item in enumerate(doc):
        try:
            out.records.append(CorpusRecord.from_dict(item))
        except FormatError as exc:
            out.skipped.append((i, str(exc)))
    return out


def load_corpus(path) -> Corpus:
    """A JSON array of records, a {"records": [...]} object, or JSON lines."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise FormatError(f"cannot read corpus {path}: {exc}") from exc
    if not text.strip():
        return Corpus([])
    try:
        return parse_corpus(json.loads(text))
    except json.JSONDecodeError:
        pass
    items, bad = [], []
    for i, line in enumerate(ln for ln in text.splitlines() if ln.strip()):
        try:
            items.append(json.loads(line))
        except json.JSONDecodeError:
            items.append(None)
            bad.append(i)
    if len(bad) == len(items):
        raise FormatError(f"corpus {path} is neither JSON nor JSON lines")
    return parse_corpus(items)


# -- jobs ----------------------------------------------------------------------


@dataclass(frozen=True)
class Job:
    scenario: str
    record: str
    text_record: str
    text: str | None  # None: detect on this record's own inserted text
    words: tuple | None  # None: use the words this system inserted


def plan_jobs(records, word_source: str = "corpus") -> list[Job]:
    jobs = []
    for r in records:
        own = None if word_source == "self" else tuple(r.watermark_words)
        jobs.append(Job("original", r.id, r.id, None if word_source == "self" else r.candidate_text, own))
        jobs.append(Job("paraphrase", r.id, r.id, r.paraphrase_attack, tuple(r.watermark_words)))
        jobs.append(Job("removal", r.id, r.id, r.removing_attack, tuple(r.watermark_words)))
    for r in records:
        for other in records:
            if other.domain != r.domain:
                jobs.append(Job("unrelated_fp", r.id, other.id, other.candidate_text, tuple(r.watermark_words)))
    return jobs


@dataclass
class EvalReport:
    word_source: str
    engine: str
    records: int
    skipped: list
    decisions: dict  # scenario -> list of {record, text_record, detected, count}

    def rate(self, scenario: str) -> tuple[int, int]:
        ds = self.decisions.get(scenario, [])
        return sum(d["detected"] for d in ds), len(ds)

    def decision_vector(self, scenario: str) -> list[bool]:
        return [d["detected"] for d in self.decisions.get(scenario, [])]

    def to_dict(self) -> dict:
        rates = {}
        for sc in SCENARIOS:
            hit, total = self.rate(sc)
            rates[sc] = {"detected": hit, "total": total, "percent": 100.0 * hit / total if total else None}
        return {
            "word_source": self.word_source,
            "engine": self.engine,
            "records": self.records,
            "skipped": [{"position": i, "error": msg} for i, msg in self.skipped],
            "rates": rates,
            "decisions": self.decisions,
        }

    def table(self) -> str:
        lines = [f"{'Scenario':<14}{'Detected':>10}{'Total':>8}{'Rate':>9}"]
        for sc in SCENARIOS:
            hit, total = self.rate(sc)
            pct = f"{100.0 * hit / total:.1f}%" if total else "n/a"
            lines.append(f"{sc:<14}{hit:>10}{total:>8}{pct:>9}")
        return "\n".join(lines)


def _mpc_outcomes(world: World, cfg: Config, records, jobs, verbose: bool):
    params = cfg.watermark_params
    by_id = {r.id: r for r in records}
    inserts = [by_id[rid] for rid in dict.fromkeys(j.record for j in jobs if j.text is None)]

    def program(party, _):
        _, _, emb_params, tok = _role(world, party.id)
        is_p1 = party.id == PartyId.P1
        n_ins, n_jobs = announce(party, PartyId.P1, [len(inserts), len(jobs)] if is_p1 else None, 2)
        emb = deal_embedder(party, emb_params)
        inserted = {}
        if n_ins:
            table = obtain_table(party, world, cfg)
            for i in range(n_ins):
                rec = inserts[i] if is_p1 else None
                out = mark_insert(party, table, emb, tok, rec.candidate_text if is_p1 else None, params,
                                  record_id=rec.id if is_p1 else None)
                if is_p1:
                    inserted[rec.id] = out
        results = []
        for i in range(n_jobs):
            job = jobs[i] if is_p1 else None
            text = words = None
            if is_p1:
                text = job.text if job.text is not None else inserted[job.record].text
                words = list(job.words) if job.words is not None else inserted[job.record].words
            results.append(detect(party, emb, tok, text, words, params, verbose))
        return results

    return run_memory(program, cfg, keep_transcript=False).outputs[0]


def _plaintext_outcomes(world: World, cfg: Config, records, jobs, verbose: bool):
    params = cfg.watermark_params
    by_id = {r.id: r for r in records}
    needs_table = any(j.text is None for j in jobs)
    oracle = plaintext_pipeline(world, cfg) if needs_table else detection_oracle(world, cfg)
    inserted = {}
    results = []
    for job in jobs:
        if job.text is None and job.record not in inserted:
            inserted[job.record] = oracle.insert(by_id[job.record].candidate_text, params, record_id=job.record)
        text = job.text if job.text is not None else inserted[job.record].text
        words = list(job.words) if job.words is not None else inserted[job.record].words
        results.append(oracle.detect(text, words, params, verbose))
    return results


def evaluate(world: World, cfg: Config, corpus: Corpus, engine: str = "mpc", word_source: str = "corpus",
             verbose: bool = True) -> EvalReport:
    if engine not in ("mpc", "plaintext"):
        raise ValueError(f"unknown engine {engine!r}")
    if word_source not in ("corpus", "self"):
        raise ValueError(f"unknown word source {word_source!r}")
    jobs = plan_jobs(corpus.records, word_source)
    run = _mpc_outcomes if engine == "mpc" else _plaintext_outcomes
    results = run(world, cfg, corpus.records, jobs, verbose) if jobs else []
    decisions = {sc: [] for sc in SCENARIOS}
    for job, res in zip(jobs, results):
        decisions[job.scenario].append({
            "record": job.record,
            "text_record": job.text_record,
            "detected": bool(res.detected),
            "count": res.count,
            "num_watermark_words": res.num_watermark_words,
        })
    return EvalReport(word_source, engine, len(corpus.records), corpus.skipped, decisions)


def empty_report(corpus: Corpus, engine: str = "mpc", word_source: str = "corpus") -> EvalReport:
    return EvalReport(word_source, engine, 0, corpus.skipped, {sc: [] for sc in SCENARIOS})
