"""Replicated 3-of-3 secret sharing.

A secret x is split as x = x1 + x2 + x3 (mod 2^l). Party p holds the pair
(x_p, x_next(p)): P1 holds (x1, x2), P2 holds (x2, x3), P3 holds (x3, x1).
Boolean shares use the same layout with XOR in place of addition.

Local (dealer-side) helpers live at the top of this module; the networked
protocols (dealing an input, revealing, announcing public values) take a
``Party`` runtime as their first argument.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .errors import ConsistencyError, DesyncError, ShapeError
from .numeric import Ring

RING64 = Ring(64)


class PartyId(enum.IntEnum):
    P1 = 0
    P2 = 1
    P3 = 2

    @property
    def next(self) -> "PartyId":
        return PartyId((self + 1) % 3)

    @property
    def prev(self) -> "PartyId":
        return PartyId((self + 2) % 3)

    @property
    def label(self) -> str:
        return self.name


@dataclass(frozen=True, eq=False)
class ReplicatedShare:
    """One party's view of a secret-shared tensor.

    ``first`` is x_owner and ``second`` is x_next(owner). ``frac_bits`` is the
    fixed-point scale of the underlying value (0 for plain ring integers).
    """

    first: np.ndarray
    second: np.ndarray
    owner: PartyId
    frac_bits: int = 0
    ring: Ring = RING64
    boolean: bool = False

    @property
    def shape(self) -> tuple:
        return self.first.shape

    @property
    def size(self) -> int:
        return int(self.first.size)

    def __len__(self) -> int:
        return self.shape[0]

    def _check(self, other: "ReplicatedShare") -> None:
        if not isinstance(other, ReplicatedShare):
            raise TypeError(f"expected ReplicatedShare, got {type(other).__name__}")
        if other.owner != self.owner or other.boolean != self.boolean:
            raise ValueError("shares belong to different parties or sharing types")
        if other.ring != self.ring:
            raise ValueError("ring mismatch")

    def _with(self, first, second, frac_bits=None) -> "ReplicatedShare":
        return replace(
            self,
            first=first,
            second=second,
            frac_bits=self.frac_bits if frac_bits is None else frac_bits,
        )

    def __add__(self, other: "ReplicatedShare") -> "ReplicatedShare":
        self._check(other)
        if self.boolean:
            raise TypeError("use ^ for boolean shares")
        if np.broadcast_shapes(self.shape, other.shape) != self.shape and self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        if self.frac_bits != other.frac_bits:
            raise ShapeError(f"frac_bits mismatch {self.frac_bits} vs {other.frac_bits}")
        r = self.ring
        return self._with(r.add(self.first, other.first), r.add(self.second, other.second))

    def __sub__(self, other: "ReplicatedShare") -> "ReplicatedShare":
        self._check(other)
        if self.boolean:
            raise TypeError("use ^ for boolean shares")
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        if self.frac_bits != other.frac_bits:
            raise ShapeError(f"frac_bits mismatch {self.frac_bits} vs {other.frac_bits}")
        r = self.ring
        return self._with(r.sub(self.first, other.first), r.sub(self.second, other.second))

    def __neg__(self) -> "ReplicatedShare":
        r = self.ring
        return self._with(r.neg(self.first), r.neg(self.second))

    def __xor__(self, other: "ReplicatedShare") -> "ReplicatedShare":
        self._check(other)
        if not self.boolean:
            raise TypeError("^ is only defined for boolean shares")
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch {self.shape} vs {other.shape}")
        return self._with(self.first ^ other.first, self.second ^ other.second)

    def scale(self, c) -> "ReplicatedShare":
        """Multiply by a public integer (scalar or broadcastable array)."""
        r = self.ring
        c = r.element(c)
        return self._with(r.mul(self.first, c), r.mul(self.second, c))

    def add_public(self, c) -> "ReplicatedShare":
        """Add a public constant, folded into component x1."""
        r = self.ring
        c = np.broadcast_to(r.element(c), self.shape)
        first, second = self.first, self.second
        if self.boolean:
            if self.owner == PartyId.P1:
                first = first ^ c
            elif self.owner == PartyId.P3:
                second = second ^ c
        else:
            if self.owner == PartyId.P1:
                first = r.add(first, c)
            elif self.owner == PartyId.P3:
                second = r.add(second, c)
        return self._with(np.ascontiguousarray(first), np.ascontiguousarray(second))

    def and_public(self, c) -> "ReplicatedShare":
        c = self.ring.element(c)
        return self._with(self.first & c, self.second & c)

    def lshift(self, bits: int) -> "ReplicatedShare":
        r = self.ring
        b = np.uint64(bits)
        return self._with(r.reduce(self.first << b), r.reduce(self.second << b))

    def rshift(self, bits: int) -> "ReplicatedShare":
        """Logical shift; only meaningful for boolean shares."""
        b = np.uint64(bits)
        return self._with(self.first >> b, self.second >> b)

    def __getitem__(self, idx) -> "ReplicatedShare":
        return self._with(self.first[idx], self.second[idx])

    def reshape(self, *shape) -> "ReplicatedShare":
        return self._with(self.first.reshape(*shape), self.second.reshape(*shape))

    @property
    def T(self) -> "ReplicatedShare":
        return self._with(self.first.T, self.second.T)

    def with_frac_bits(self, frac_bits: int) -> "ReplicatedShare":
        return self._with(self.first, self.second, frac_bits)


# Alias names used throughout the pipeline: a share object carries its own shape.
SecretVector = ReplicatedShare
SecretMatrix = ReplicatedShare
SecretBit = ReplicatedShare


def concat(shares: Sequence[ReplicatedShare], axis: int = 0) -> ReplicatedShare:
    head = shares[0]
    first = np.concatenate([s.first for s in shares], axis=axis)
    second = np.concatenate([s.second for s in shares], axis=axis)
    return replace(head, first=first, second=second)


def public_share(party_id: PartyId, value, ring: Ring = RING64, frac_bits: int = 0, boolean=False) -> ReplicatedShare:
    """Trivial sharing of a public value: (value, 0, 0)."""
    v = ring.element(value)
    zero = np.zeros_like(v)
    first = v if party_id == PartyId.P1 else zero
    second = v if party_id == PartyId.P3 else zero
    return ReplicatedShare(first.copy(), second.copy(), party_id, frac_bits, ring, boolean)


def component_share(party_id: PartyId, component: int, value, ring: Ring = RING64, boolean=False) -> ReplicatedShare:
    """Sharing whose only nonzero component is x_{component+1} = value.

    Only the two holders of that component pass the real value; the third
    party passes anything of the right shape (it is ignored).
    """
    v = ring.element(value)
    zero = np.zeros_like(v)
    first = v if party_id == component else zero
    second = v if party_id.next == component else zero
    return ReplicatedShare(first.copy(), second.copy(), party_id, 0, ring, boolean)


def share(secret, rng: np.random.Generator, ring: Ring = RING64, frac_bits: int = 0, boolean: bool = False):
    """Split ``secret`` into three replicated shares (dealer-side, no network)."""
    s = ring.element(secret)
    x1 = ring.random(rng, s.shape)
    x2 = ring.random(rng, s.shape)
    if boolean:
        x3 = s ^ x1 ^ x2
    else:
        x3 = ring.sub(ring.sub(s, x1), x2)
    comps = (x1, x2, x3)
    return tuple(
        ReplicatedShare(comps[p], comps[(p + 1) % 3], PartyId(p), frac_bits, ring, boolean)
        for p in range(3)
    )


def reconstruct(*shares: ReplicatedShare) -> np.ndarray:
    """Rebuild the secret from the shares of at least two distinct parties."""
    if len(shares) < 2:
        raise ValueError("need shares from at least two parties")
    comps: dict[int, np.ndarray] = {}
    for sh in shares:
        for idx, val in ((int(sh.owner), sh.first), ((int(sh.owner) + 1) % 3, sh.second)):
            if idx in comps:
                if comps[idx].shape != val.shape or not np.array_equal(comps[idx], val):
                    raise ConsistencyError(f"component x{idx + 1} differs between parties")
            else:
                comps[idx] = val
    if len(comps) < 3:
        raise ValueError("shares from two distinct parties are required")
    ring = shares[0].ring
    if shares[0].boolean:
        return comps[0] ^ comps[1] ^ comps[2]
    return ring.add(ring.add(comps[0], comps[1]), comps[2])


def verify_consistency(shares: Sequence[ReplicatedShare]) -> None:
    """Debug-only check that each party's ``second`` equals next party's ``first``."""
    by_owner = {s.owner: s for s in shares}
    for p, s in by_owner.items():
        nxt = by_owner.get(p.next)
        if nxt is not None and not np.array_equal(s.second, nxt.first):
            raise ConsistencyError(f"{p.label}.second != {p.next.label}.first")


class PrfStream:
    """Counter-mode PRF: Philox4x64 keyed with a 128-bit key, 64-bit output blocks.

    ``counter`` is the number of 64-bit blocks produced so far; both holders of
    a key must consume the stream in lockstep.
    """

    def __init__(self, key: int):
        if not 0 <= key < 1 << 128:
            raise ValueError("PRF key must be a 128-bit integer")
        self.key = key
        self._gen = np.random.Philox(key=key)
        self.counter = 0

    def draw(self, n: int) -> np.ndarray:
        self.counter += n
        return self._gen.random_raw(n).astype(np.uint64, copy=False)


class ZeroShareContext:
    """Per-party correlated randomness from the two pairwise PRF keys.

    ``key_prev`` is shared with prev(p), ``key_next`` with next(p).
    """

    def __init__(self, owner: PartyId, key_prev: int, key_next: int, ring: Ring = RING64):
        self.owner = owner
        self.ring = ring
        self.with_prev = PrfStream(key_prev)
        self.with_next = PrfStream(key_next)

    @property
    def counters(self) -> tuple[int, int]:
        return self.with_prev.counter, self.with_next.counter

    def _blocks(self, shape) -> tuple[np.ndarray, np.ndarray]:
        n = int(np.prod(shape, dtype=np.int64))
        a = self.with_prev.draw(n).reshape(shape)
        b = self.with_next.draw(n).reshape(shape)
        return a, b

    def next_zero_shares(self, shape=()) -> np.ndarray:
        """alpha_p = PRF(k_prev,p) - PRF(k_p,next); the three masks sum to zero."""
        a, b = self._blocks(shape)
        return self.ring.sub(self.ring.reduce(a), self.ring.reduce(b))

    def next_zero_xor(self, shape=()) -> np.ndarray:
        a, b = self._blocks(shape)
        return self.ring.reduce(a ^ b)

    def shared_with_prev(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        return self.ring.reduce(self.with_prev.draw(n).reshape(shape))

    def shared_with_next(self, shape) -> np.ndarray:
        n = int(np.prod(shape, dtype=np.int64))
        return self.ring.reduce(self.with_next.draw(n).reshape(shape))

    def check_peer(self, peer: PartyId, peer_counter: int) -> None:
        """Compare our counter on the key shared with ``peer`` to theirs."""
        mine = self.with_next.counter if peer == self.owner.next else self.with_prev.counter
        # counters travel as ring elements, so compare modulo the ring size
        modulus = 1 << self.ring.bits
        if mine % modulus != peer_counter % modulus:
            raise DesyncError(
                f"{self.owner.label}/{peer.label} PRF counters diverged: {mine} != {peer_counter}"
            )


def zero_share_contexts(keys: Sequence[int], ring: Ring = RING64) -> list[ZeroShareContext]:
    """Build the three contexts from keys k12, k23, k31 (local testing helper)."""
    k = list(keys)
    return [ZeroShareContext(PartyId(p), k[(p + 2) % 3], k[p], ring) for p in range(3)]


# --- networked sharing protocols -------------------------------------------


def deal(party, value, dealer: PartyId, shape, frac_bits: int = 0, boolean: bool = False) -> ReplicatedShare:
    """Secret-share ``value`` held by ``dealer``; every party must call this.

    x_dealer and x_next(dealer) come from the dealer's two pairwise PRF
    streams; the dealer sends the remaining component to both other parties.
    """
    ring = party.ring
    shape = tuple(shape)
    pid = party.id
    zs = party.zero
    if pid == dealer:
        s = ring.element(value).reshape(shape)
        mine = zs.shared_with_prev(shape)
        nxt = zs.shared_with_next(shape)
        if boolean:
            last = s ^ mine ^ nxt
        else:
            last = ring.sub(ring.sub(s, mine), nxt)
        party.send(pid.next, last)
        party.send(pid.prev, last)
        return ReplicatedShare(mine, nxt, pid, frac_bits, ring, boolean)
    if pid == dealer.next:
        x_mine = zs.shared_with_prev(shape)
        last = party.recv(dealer, shape)
        return ReplicatedShare(x_mine, last, pid, frac_bits, ring, boolean)
    x_dealer = zs.shared_with_next(shape)
    last = party.recv(dealer, shape)
    return ReplicatedShare(last, x_dealer, pid, frac_bits, ring, boolean)


def reveal_to(party, x: ReplicatedShare, target: PartyId) -> np.ndarray | None:
    """Open ``x`` to ``target`` only; both other parties send the missing component.

    Returns the plaintext ring elements at the target and ``None`` elsewhere.
    """
    pid = party.id
    if pid == target:
        a = party.recv(pid.next, x.shape)
        b = party.recv(pid.prev, x.shape)
        if not np.array_equal(a, b):
            raise ConsistencyError(f"reveal to {target.label}: senders disagree")
        ring = x.ring
        if x.boolean:
            return x.first ^ x.second ^ a
        return ring.add(ring.add(x.first, x.second), a)
    # missing component for target is x_{target+2}
    missing = x.second if pid == target.next else x.first
    party.send(target, missing)
    return None


def open_all(party, x: ReplicatedShare) -> np.ndarray:
    """Reveal to every party: each sends its first component to next(p)."""
    party.send(party.id.next, x.first)
    missing = party.recv(party.id.prev, x.shape)
    if x.boolean:
        return x.first ^ x.second ^ missing
    return x.ring.add(x.ring.add(x.first, x.second), missing)


def announce(party, source: PartyId, values: Sequence[int] | None, count: int) -> list[int]:
    """Broadcast ``count`` public integers from ``source`` (not secret; kind='public')."""
    ring = party.ring
    if party.id == source:
        arr = ring.element(list(values)).reshape(count)
        party.send(source.next, arr, kind="public")
        party.send(source.prev, arr, kind="public")
    else:
        arr = party.recv(source, (count,))
    return [int(v) for v in ring.signed(arr)]


def sync_check(party) -> None:
    """Exchange PRF counters with both neighbours; raises DesyncError on mismatch."""
    zs = party.zero
    party.send(party.id.next, np.array([zs.with_next.counter], dtype=np.uint64), kind="public")
    party.send(party.id.prev, np.array([zs.with_prev.counter], dtype=np.uint64), kind="public")
    from_next = int(party.recv(party.id.next, (1,))[0])
    from_prev = int(party.recv(party.id.prev, (1,))[0])
    zs.check_peer(party.id.next, from_next)
    zs.check_peer(party.id.prev, from_prev)
