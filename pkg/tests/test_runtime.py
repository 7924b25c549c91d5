import socket
import threading
import time

import numpy as np
import pytest

from privmark.errors import DesyncError, FormatError, HandshakeError, TransportError
from privmark.numeric import Ring
from privmark.runtime import (
    HEADER_SIZE,
    IDEAL,
    LAN,
    LOCALHOST,
    WAN,
    CommStats,
    Frame,
    NetworkProfile,
    get_profile,
    make_party,
    phase_tag,
    phase_times,
    replay,
    run_party,
    run_session,
)
from privmark.runtime.frames import SequenceChecker, pack_elements, unpack_elements
from privmark.runtime.party import elements_to_int, int_to_elements
from privmark.runtime.tcp import TcpTransport
from privmark.sharing import PartyId, reveal_to
from privmark.ops import mul

from conftest import dealt, run3


def test_frame_roundtrip():
    f = Frame(0xABC, phase_tag("Topk"), 7, b"\x01\x02")
    data = f.encode()
    assert len(data) == HEADER_SIZE + 2 == 24
    assert Frame.decode(data) == f
    with pytest.raises(FormatError):
        Frame.decode(data[:-1])
    with pytest.raises(FormatError):
        Frame.decode(data[:10])


def test_phase_tags_distinct_for_named_phases():
    names = ["Setup", "Embed", "Cosine", "Topk", "Insert", "Detect", "SecTable", "Default", "Model"]
    assert len({phase_tag(n) for n in names}) == len(names)


@pytest.mark.parametrize("bits", [8, 16, 32, 64])
def test_pack_elements_width(bits):
    ring = Ring(bits)
    v = ring.random(np.random.default_rng(0), (3, 4))
    payload = pack_elements(v, ring)
    assert len(payload) == 12 * bits // 8
    assert np.array_equal(unpack_elements(payload, ring, (3, 4)), v)


def test_sequence_checker():
    chk = SequenceChecker(5)
    chk.check(Frame(5, 0, 0, b""))
    with pytest.raises(DesyncError):
        chk.check(Frame(5, 0, 2, b""))
    with pytest.raises(DesyncError):
        SequenceChecker(5).check(Frame(6, 0, 0, b""))


def test_key_elements_roundtrip():
    for bits in (16, 64):
        ring = Ring(bits)
        k = (1 << 127) + 12345
        assert elements_to_int(int_to_elements(k, ring), ring) == k


def test_echo_counts():
    def prog(party, _):
        with party.phase("echo"):
            if party.id == PartyId.P1:
                party.send(PartyId.P2, np.array([42], dtype=np.uint64))
            elif party.id == PartyId.P2:
                return int(party.recv(PartyId.P1, (1,))[0])

    res = run3(prog)
    assert res.outputs[1] == 42
    assert res.stats.messages("echo") == 1
    assert res.stats.bytes("echo") == 8
    assert res.stats.rounds("echo") == 1


def test_rounds_follow_dependency_chain():
    def prog(party, _):
        with party.phase("chain"):
            v = np.array([1], dtype=np.uint64)
            for _ in range(3):  # P1 -> P2 -> P3 -> P1 three times
                if party.id != PartyId.P1:
                    v = party.recv(party.id.prev, (1,))
                party.send(party.id.next, v)
                if party.id == PartyId.P1:
                    v = party.recv(party.id.prev, (1,))
        with party.phase("parallel"):
            for _ in range(4):
                party.send(party.id.next, np.zeros(2, dtype=np.uint64))
            for _ in range(4):
                party.recv(party.id.prev, (2,))

    res = run3(prog)
    assert res.stats.rounds("chain") == 9
    assert res.stats.rounds("parallel") == 1
    assert res.stats.bytes("parallel") == 3 * 4 * 16


def test_phase_mismatch_is_desync():
    def prog(party, _):
        with party.phase("Embed" if party.id == PartyId.P1 else "Cosine"):
            if party.id == PartyId.P1:
                party.send(PartyId.P2, np.zeros(1, dtype=np.uint64))
            elif party.id == PartyId.P2:
                party.recv(PartyId.P1, (1,))

    with pytest.raises(DesyncError):
        run3(prog)


def test_error_in_one_party_aborts_all():
    def prog(party, _):
        if party.id == PartyId.P3:
            raise RuntimeError("boom")
        party.recv(party.id.next if party.id == PartyId.P2 else party.id.prev, (1,))

    t0 = time.perf_counter()
    with pytest.raises(RuntimeError, match="boom"):
        run3(prog, timeout=30)
    assert time.perf_counter() - t0 < 5


def test_recv_timeout():
    def prog(party, _):
        if party.id == PartyId.P1:
            party.recv(PartyId.P2, (1,))

    with pytest.raises((TransportError, TimeoutError)):
        run3(prog, timeout=0.2)


def test_session_determinism():
    def prog(party, _):
        x = dealt(party, np.arange(6).reshape(2, 3))
        y = mul(party, x, x)
        return reveal_to(party, y, PartyId.P1)

    a, b = run3(prog, seed=9), run3(prog, seed=9)
    c = run3(prog, seed=10)
    assert a.transcript() == b.transcript()
    assert a.stats == b.stats
    assert np.array_equal(a.outputs[0], b.outputs[0])
    assert a.transcript_digest() == b.transcript_digest() != c.transcript_digest()
    assert np.array_equal(a.outputs[0], c.outputs[0])


def test_profiles():
    assert get_profile("lan") is LAN
    assert get_profile("custom", 1e6, 0.01).latency == 0.01
    with pytest.raises(ValueError):
        get_profile("moon")
    with pytest.raises(ValueError):
        get_profile("custom")
    with pytest.raises(ValueError):
        NetworkProfile("x", 0, 0)
    assert LAN.delay(1000) == pytest.approx(1.5e-3 + 8000 / 1.5e9)


def test_shaped_transport_waits_in_real_time():
    prof = NetworkProfile("slow", 1e9, 0.01)

    def prog(party, _):
        with party.phase("chain"):
            for _ in range(3):
                if party.id == PartyId.P1:
                    party.send(PartyId.P2, np.zeros(1, dtype=np.uint64))
                    party.recv(PartyId.P2, (1,))
                elif party.id == PartyId.P2:
                    party.recv(PartyId.P1, (1,))
                    party.send(PartyId.P1, np.zeros(1, dtype=np.uint64))

    res = run_session(prog, profile=prof, seed=0)
    # setup is one more latency
    assert res.elapsed >= 7 * 0.01
    assert max(p.wall["chain"] for p in res.parties) >= 6 * 0.01


def test_replay_matches_closed_form():
    # P1 sends 1000 bytes to P2, P2 replies; no compute
    traces = [[("s", 1, 1000), ("r", 1)], [("r", 0), ("s", 0, 1000)], []]
    prof = NetworkProfile("p", 8e6, 0.005)
    assert replay(traces, prof, 0.0) == pytest.approx(2 * (0.005 + 1000 * 8 / 8e6))
    with pytest.raises(ValueError):
        replay([[("r", 1)], [], []], prof)


def test_replay_monotone_in_profile():
    def prog(party, _):
        with party.phase("Work"):
            x = dealt(party, np.ones((50, 8)))
            for _ in range(4):
                x = mul(party, x, x)

    res = run3(prog)
    times = [res.simulated_times(p)["Work"] for p in (IDEAL, LOCALHOST, LAN, WAN)]
    assert times == sorted(times)
    assert phase_times(res.traces, WAN)["Work"] >= 5 * WAN.latency


def test_comm_stats_merge_and_eq():
    a = CommStats()
    a.record_send("X", "P1", 8)
    a.add_rounds("X", "P1", 2)
    b = CommStats().merge(a)
    assert a == b and b.bytes() == 8 and b.rounds("X") == 2
    assert b.without("X").bytes() == 0
    assert '"X"' in b.to_json()


# -- TCP -----------------------------------------------------------------------


def _free_ports(n):
    socks = [socket.socket() for _ in range(n)]
    for s in socks:
        s.bind(("127.0.0.1", 0))
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def _tcp_session(program, frac=(18, 18, 18), timeout=10.0, seed=4):
    ports = _free_ports(3)
    addrs = {PartyId(i): f"127.0.0.1:{ports[i]}" for i in range(3)}
    outputs, errors, parties = [None] * 3, [None] * 3, [None] * 3

    def node(i):
        pid = PartyId(i)
        t = TcpTransport(pid, addrs[pid], addrs, session_id=77, ring_bits=64, frac_bits=frac[i], timeout=timeout)
        try:
            t.connect()
            parties[i] = make_party(pid, t.endpoints(pid), ring_bits=64, frac_bits=frac[i], seed=seed,
                                    session_id=77, timeout=timeout)
            outputs[i] = run_party(program, parties[i])
        except Exception as exc:  # noqa: BLE001
            errors[i] = exc
        finally:
            t.close()

    threads = [threading.Thread(target=node, args=(i,)) for i in range(3)]
    for t in threads:
        t.start()
    for t in threads:
        t.join(timeout + 5)
    return outputs, errors, parties


def _mul_program(party, _):
    with party.phase("Work"):
        x = dealt(party, np.arange(-4, 4))
        y = mul(party, x, x)
        return reveal_to(party, y, PartyId.P1)


def test_tcp_matches_in_memory():
    outputs, errors, parties = _tcp_session(_mul_program)
    assert errors == [None] * 3
    mem = run3(_mul_program, seed=4)
    assert np.array_equal(outputs[0], mem.outputs[0])
    assert list(Ring(64).signed(outputs[0])) == [v * v for v in range(-4, 4)]
    tcp_stats = CommStats()
    for p in parties:
        tcp_stats.merge(p.stats)
    assert tcp_stats.to_dict()["Work"] == mem.stats.to_dict()["Work"]
    assert [e.payload for e in parties[1].transcript] == [e.payload for e in mem.transcripts["P2"]]


def test_tcp_handshake_rejects_mismatched_frac_bits():
    _, errors, _ = _tcp_session(_mul_program, frac=(18, 16, 18), timeout=3.0)
    assert any(isinstance(e, HandshakeError) for e in errors)


def test_tcp_unreachable_peer():
    port = _free_ports(2)
    t = TcpTransport(PartyId.P1, f"127.0.0.1:{port[0]}",
                     {PartyId.P2: f"127.0.0.1:{port[1]}", PartyId.P3: f"127.0.0.1:{port[1]}"},
                     session_id=1, ring_bits=64, frac_bits=18, timeout=0.5)
    with pytest.raises(TransportError):
        t.connect()
    t.close()
