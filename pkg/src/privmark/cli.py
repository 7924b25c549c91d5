"""Command-line interface: ``privmark <command> [options]``.

Exit codes: 0 success (for ``detect``: watermark detected), 1 not detected
or empty evaluation corpus, 2 configuration, format or handshake error,
3 transport error or timeout.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .bench import BENCH_PHASES, DEFAULT_PROFILES, run_bench
from .errors import FormatError, PrivMarkError, TransportError
from .evaluation import empty_report, evaluate, load_corpus, parse_corpus
from .pipeline.embedder import save_embedder
from .pipeline.watermark import WatermarkRecord
from .runtime.profiles import get_profile
from .runtime.session import make_party, run_party, session_id_from_seed
from .runtime.tcp import TcpTransport
from .sectable import save_embeddings
from .service import (
    Config,
    detect_program,
    detection_oracle,
    insert_program,
    load_config,
    load_world,
    make_inserter,
    plaintext_pipeline,
    run_memory,
    sectable_program,
)
from .sharing import PartyId
from .toy import corpus_world, shipped_corpus

EXIT_OK, EXIT_NOT_DETECTED, EXIT_CONFIG, EXIT_TRANSPORT = 0, 1, 2, 3


def _emit(obj, out: str | None = None) -> None:
    text = json.dumps(obj, indent=1)
    print(text)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")


def _config(args) -> Config:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if getattr(args, "table", None):
        cfg.table_dir = str(Path(args.table).resolve())
    return cfg


def _profile(args):
    if args.profile is None:
        return None
    return get_profile(args.profile, args.bandwidth, args.latency)


def _text(args) -> str:
    if args.text is not None:
        return args.text
    if args.text_file:
        try:
            return Path(args.text_file).read_text(encoding="utf-8")
        except OSError as exc:
            raise FormatError(f"cannot read {args.text_file}: {exc}") from exc
    raise FormatError("give the text with --text or --text-file")


def _words(args) -> list[str]:
    if args.record:
        return WatermarkRecord.load(args.record).watermark_words
    if args.words:
        return [w.strip() for w in args.words.split(",") if w.strip()]
    raise FormatError("give the watermark words with --record or --words")


def _session_summary(res, profile) -> dict:
    out = {
        "comm": {"bytes": res.stats.bytes(), "messages": res.stats.messages(), "rounds": res.stats.rounds()},
        "phases": {ph: v for ph, v in res.stats.to_dict().items() if any(any(c.values()) for c in v.values())},
        "transcript_sha256": res.transcript_digest(),
    }
    if profile is not None:
        out["simulated_seconds"] = {"profile": profile.name, **res.simulated_times(profile)}
    return out


# -- commands ------------------------------------------------------------------


def cmd_insert(args) -> int:
    cfg = _config(args)
    text = _text(args)
    world = load_world(cfg)
    inserter = make_inserter(cfg)
    if args.mode == "plaintext":
        outcome = plaintext_pipeline(world, cfg).insert(
            text, cfg.watermark_params, inserter, record_id=f"{session_id_from_seed(cfg.seed):016x}")
        extra = {}
    else:
        res = run_memory(insert_program(world, cfg, text, inserter), cfg)
        outcome = res.outputs[0]
        extra = _session_summary(res, _profile(args))
    if args.out:
        outcome.record.save(args.out)
    _emit({
        "text": outcome.text,
        "record_path": args.out,
        "record": json.loads(outcome.record.to_json()),
        "mode": args.mode,
        **extra,
    })
    return EXIT_OK


def cmd_detect(args) -> int:
    cfg = _config(args)
    text, words = _text(args), _words(args)
    world = load_world(cfg)
    if args.mode == "plaintext":
        result = detection_oracle(world, cfg).detect(text, words, cfg.watermark_params, args.verbose_count)
        extra = {}
    else:
        res = run_memory(detect_program(world, cfg, text, words, args.verbose_count), cfg)
        result = res.outputs[0]
        extra = _session_summary(res, _profile(args))
    _emit({**result.to_dict(), "mode": args.mode, **extra}, args.out)
    return EXIT_OK if result.detected else EXIT_NOT_DETECTED


def cmd_sectable(args) -> int:
    cfg = _config(args)
    out = args.out or (cfg.path(cfg.table_dir) if cfg.table_dir else None)
    if out is None:
        raise FormatError("give an output directory with --out or table_dir in the config")
    cfg.table_dir = None  # build, never load
    res = run_memory(sectable_program(load_world(cfg), out), cfg)
    table = res.outputs[0]
    _emit({"table_dir": str(out), "size": table.size, "dim": table.dim, **_session_summary(res, _profile(args))})
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = _config(args)
    world = load_world(cfg)
    text = args.text if args.text is not None else (
        _text(args) if args.text_file else shipped_corpus()[0]["candidate_text"])
    profiles = [_profile(args)] if args.profile else list(DEFAULT_PROFILES)
    phases = args.phases.split(",") if args.phases else BENCH_PHASES
    report = run_bench(world, cfg, text, profiles, args.repetitions, phases, realtime=args.realtime)
    print(report.table())
    _emit(report.to_dict(), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    corpus = load_corpus(args.corpus) if args.corpus else parse_corpus(shipped_corpus())
    report = evaluate(load_world(cfg), cfg, corpus, args.mode, args.words_from, verbose=True) \
        if corpus.records else empty_report(corpus, args.mode, args.words_from)
    print(report.table())
    _emit(report.to_dict(), args.out)
    return EXIT_OK if corpus.records else EXIT_NOT_DETECTED


def cmd_toy(args) -> int:
    """Write the shipped toy world as resource files plus configs for three loopback nodes."""
    out = Path(args.out or "toy")
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed or 0
    world = corpus_world(seed)
    (out / "vocab.txt").write_text("\n".join(world.vocabulary.words) + "\n", encoding="utf-8")
    save_embeddings(out / "embeddings.bin", world.embeddings.rows, binary=True)
    save_embedder(out / "embedder.txt", world.embedder)
    (out / "corpus.json").write_text(json.dumps(shipped_corpus(), indent=1) + "\n", encoding="utf-8")
    base = {"vocabulary": "vocab.txt", "embeddings": "embeddings.bin", "embedder": "embedder.txt", "seed": seed}
    (out / "config.json").write_text(json.dumps(base, indent=1) + "\n", encoding="utf-8")
    peers = {str(i + 1): f"127.0.0.1:{args.port_base + i + 1}" for i in range(3)}
    for i in range(3):
        node = {**base, "party": i + 1, "listen": peers[str(i + 1)], "peers": peers, "table_dir": "table"}
        (out / f"party{i + 1}.json").write_text(json.dumps(node, indent=1) + "\n", encoding="utf-8")
    _emit({"dir": str(out), "files": sorted(p.name for p in out.iterdir())})
    return EXIT_OK


def cmd_party(args) -> int:
    """One TCP node running a single job, then exiting."""
    cfg = _config(args)
    if cfg.party is None or not cfg.listen:
        raise FormatError("a party config needs 'party' and 'listen'")
    pid = PartyId(cfg.party - 1)
    peers = {PartyId(int(k) - 1): v for k, v in cfg.peers.items() if int(k) != cfg.party}
    if set(peers) != {pid.next, pid.prev}:
        raise FormatError("'peers' must give addresses for both other parties")
    world = load_world(cfg, pid)
    is_p1 = pid == PartyId.P1
    job = args.job
    if job == "echo":
        program = _echo
    elif job == "sectable":
        out = args.out or cfg.table_dir
        if not out:
            raise FormatError("sectable job needs --out or table_dir")
        out = cfg.path(out) if not Path(out).is_absolute() else Path(out)
        cfg.table_dir = None
        program = sectable_program(world, out)
    elif job == "insert":
        program = insert_program(world, cfg, _text(args) if is_p1 else None)
    elif job == "detect":
        program = detect_program(world, cfg, _text(args) if is_p1 else None,
                                 _words(args) if is_p1 else None, args.verbose_count)
    else:
        raise FormatError(f"unknown job {job!r}")
    transport = TcpTransport(pid, cfg.listen, {pid: cfg.listen, **peers}, session_id=cfg.resolved_session_id(),
                             ring_bits=cfg.ring_bits, frac_bits=cfg.frac_bits, timeout=cfg.timeout)
    try:
        transport.connect()
        party = make_party(pid, transport.endpoints(pid), ring_bits=cfg.ring_bits, frac_bits=cfg.frac_bits,
                           seed=cfg.seed, session_id=cfg.resolved_session_id(), timeout=cfg.timeout)
        result = run_party(program, party)
    finally:
        transport.close()
    summary = {"party": pid.label, "job": job, "status": "ok", "bytes_sent": party.stats.bytes()}
    if is_p1 and job == "insert":
        if args.out:
            result.record.save(args.out)
        summary.update(text=result.text, record_path=args.out, record=json.loads(result.record.to_json()))
    elif is_p1 and job == "detect":
        summary.update(result.to_dict())
    elif job == "echo":
        summary["echo"] = result
    _emit(summary)
    if job == "detect" and is_p1 and not result.detected:
        return EXIT_NOT_DETECTED
    return EXIT_OK


def _echo(party, _):
    """Pass each party's id to the next one; returns what arrived from the previous."""
    party.send(party.id.next, np.array([int(party.id) + 1], dtype=np.uint64), kind="public")
    return int(party.recv(party.id.prev, (1,))[0])


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="session config JSON (default: $PRIVMARK_CONFIG)")
    common.add_argument("--seed", type=int, help="session seed (overrides the config)")
    common.add_argument("--profile", choices=["localhost", "lan", "wan", "custom"])
    common.add_argument("--bandwidth", type=float, help="custom profile bandwidth, bits/s")
    common.add_argument("--latency", type=float, help="custom profile one-way latency, seconds")
    common.add_argument("--mode", choices=["mpc", "plaintext"], default="mpc")
    common.add_argument("--verbose-count", action="store_true", help="also reveal the match count c")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--table", help="directory with a prebuilt table (overrides the config)")

    text = argparse.ArgumentParser(add_help=False)
    text.add_argument("--text")
    text.add_argument("--text-file")

    words = argparse.ArgumentParser(add_help=False)
    words.add_argument("--record", help="watermark record JSON written by insert")
    words.add_argument("--words", help="comma-separated watermark words")

    p = argparse.ArgumentParser(prog="privmark", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("party", parents=[common, text, words], help="run one TCP party node for one job")
    sp.add_argument("--job", choices=["echo", "sectable", "insert", "detect"], default="echo")
    sp.set_defaults(func=cmd_party)

    sp = sub.add_parser("sectable", parents=[common], help="build and store the secret table")
    sp.add_argument("action", choices=["build"])
    sp.set_defaults(func=cmd_sectable)

    sp = sub.add_parser("insert", parents=[common, text], help="select watermark words and rewrite a text")
    sp.set_defaults(func=cmd_insert)

    sp = sub.add_parser("detect", parents=[common, text, words], help="decide whether a text carries a watermark")
    sp.set_defaults(func=cmd_detect)

    sp = sub.add_parser("bench", parents=[common, text], help="per-phase time and communication")
    sp.add_argument("--phases", help=f"comma-separated subset of {','.join(BENCH_PHASES)}")
    sp.add_argument("--repetitions", type=int, default=1)
    sp.add_argument("--realtime", action="store_true", help="delay messages in real time instead of replaying")
    sp.set_defaults(func=cmd_bench)

    sp = sub.add_parser("eval", parents=[common], help="detection rates over an attack corpus")
    sp.add_argument("corpus", nargs="?", help="corpus JSON (default: the shipped toy corpus)")
    sp.add_argument("--words-from", choices=["corpus", "self"], default="corpus",
                    help="take original-text watermark words from the corpus or insert them here")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("toy", parents=[common], help="write toy resource files and loopback configs")
    sp.add_argument("--port-base", type=int, default=7100)
    sp.set_defaults(func=cmd_toy)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (TransportError, TimeoutError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (PrivMarkError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
