"""Interactive three-party primitives on replicated shares.

Every function takes the local :class:`~privmark.runtime.Party` first and
must be called by all three parties in the same order with same-shaped
arguments. Shapes, fraction bits and the ring travel with the shares.

Costs (total over the three parties, n = number of output elements):

===================  ======  ==================
operation            rounds  ring elements sent
===================  ======  ==================
mul / and_bits       1       3n
matmul               1       3n
truncate             1       n
fixed_mul, dot       2       3n
less_than            2+log2 l  n + 6n log2 l
b2a                  2       6n
===================  ======  ==================
"""

from __future__ import annotations

import numpy as np

from .errors import ConsistencyError, RangeError, ShapeError
from .sharing import PartyId, ReplicatedShare, concat, public_share

# -- helpers ---------------------------------------------------------------


def _same_shape(x: ReplicatedShare, y: ReplicatedShare) -> None:
    if x.shape != y.shape:
        raise ShapeError(f"shape mismatch {x.shape} vs {y.shape}")


def _pair_stream(party, other: PartyId, shape) -> np.ndarray:
    """Randomness shared by this party and ``other`` only."""
    if other == party.id.next:
        return party.zero.shared_with_next(shape)
    return party.zero.shared_with_prev(shape)


def _reshare(party, z: np.ndarray, template: ReplicatedShare, frac_bits: int) -> ReplicatedShare:
    """Turn a 3-out-of-3 sharing (z_p at party p) into a replicated one."""
    party.send(party.id.prev, z)
    z_next = party.recv(party.id.next, z.shape)
    return ReplicatedShare(z, z_next, party.id, frac_bits, template.ring, template.boolean)


def _component(x: ReplicatedShare, j: int, boolean: bool = False) -> ReplicatedShare:
    """Sharing that keeps only component j of ``x`` (no communication)."""
    zero = np.zeros_like(x.first)
    first = x.first if x.owner == j else zero
    second = x.second if x.owner.next == j else zero
    return ReplicatedShare(first, second, x.owner, 0, x.ring, boolean)


def _cross_terms(party, x: ReplicatedShare, y: ReplicatedShare, op) -> np.ndarray:
    r = x.ring
    t = r.add(op(x.first, y.first), op(x.first, y.second))
    return r.add(t, op(x.second, y.first))


# -- multiplication --------------------------------------------------------


def mul(party, x: ReplicatedShare, y: ReplicatedShare) -> ReplicatedShare:
    """Elementwise product without truncation (frac bits add up)."""
    if x.boolean or y.boolean:
        raise TypeError("mul expects arithmetic shares; use and_bits")
    _same_shape(x, y)
    r = x.ring
    z = r.add(_cross_terms(party, x, y, r.mul), party.zero.next_zero_shares(x.shape))
    return _reshare(party, z, x, x.frac_bits + y.frac_bits)


def matmul(party, a: ReplicatedShare, b: ReplicatedShare) -> ReplicatedShare:
    """Matrix product without truncation."""
    if a.shape[-1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    r = a.ring
    t = _cross_terms(party, a, b, r.matmul)
    z = r.add(t, party.zero.next_zero_shares(t.shape))
    return _reshare(party, z, a, a.frac_bits + b.frac_bits)


def and_bits(party, x: ReplicatedShare, y: ReplicatedShare) -> ReplicatedShare:
    """Bitwise AND of boolean shares (packed words)."""
    if not (x.boolean and y.boolean):
        raise TypeError("and_bits expects boolean shares")
    _same_shape(x, y)
    a, b = x.first, x.second
    c, d = y.first, y.second
    z = (a & c) ^ (a & d) ^ (b & c) ^ party.zero.next_zero_xor(x.shape)
    return _reshare(party, z, x, 0)


# -- truncation --------------------------------------------------------------


def _truncate_additive(party, z: np.ndarray, bits: int, template: ReplicatedShare, frac_bits: int,
                       z_ready: bool) -> ReplicatedShare:
    """Truncate a value held as a 3-out-of-3 sharing (z_p at party p).

    P1 ends up with A = z1 + z2 and P2, P3 with B = z3. The output sharing is
    (asr(A) - r, r, asr(B)) with r known to P1 and P2; P1 sends its first
    component to P3. Error is at most one unit in the last place unless
    |value| is close to 2^(l-1).
    """
    ring = template.ring
    pid = party.id
    p1, p2, p3 = PartyId.P1, PartyId.P2, PartyId.P3
    shape = z.shape
    # gather A at P1 and B at P2/P3
    if not z_ready:
        if pid == p2:
            party.send(p1, z)
        elif pid == p3:
            party.send(p2, z)
        if pid == p1:
            a = ring.add(z, party.recv(p2, shape))
        elif pid == p2:
            b = party.recv(p3, shape)
        else:
            b = z
    else:
        # caller already holds (A at P1, B at P2 and P3) in z
        a = z if pid == p1 else None
        b = z if pid != p1 else None
    if pid == p1:
        rr = _pair_stream(party, p2, shape)
        y0 = ring.sub(ring.shift_right_arith(a, bits), rr)
        party.send(p3, y0)
        return ReplicatedShare(y0, rr, pid, frac_bits, ring)
    if pid == p2:
        rr = _pair_stream(party, p1, shape)
        return ReplicatedShare(rr, ring.shift_right_arith(b, bits), pid, frac_bits, ring)
    y0 = party.recv(p1, shape)
    return ReplicatedShare(ring.shift_right_arith(b, bits), y0, pid, frac_bits, ring)


def truncate(party, x: ReplicatedShare, bits: int | None = None) -> ReplicatedShare:
    """Divide by 2^bits (default: the party's fraction bits); 1 round, n elements."""
    bits = party.frac_bits if bits is None else bits
    ring = x.ring
    pid = party.id
    # P1 knows x1 + x2; P2 and P3 both know x3
    if pid == PartyId.P1:
        z = ring.add(x.first, x.second)
    elif pid == PartyId.P2:
        z = x.second
    else:
        z = x.first
    return _truncate_additive(party, z, bits, x, x.frac_bits - bits, z_ready=True)


def _fused(party, z_local: np.ndarray, template: ReplicatedShare, frac_bits: int) -> ReplicatedShare:
    ring = template.ring
    z = ring.add(z_local, party.zero.next_zero_shares(z_local.shape))
    bits = party.frac_bits
    return _truncate_additive(party, z, bits, template, frac_bits - bits, z_ready=False)


def fixed_mul(party, x: ReplicatedShare, y: ReplicatedShare) -> ReplicatedShare:
    """Elementwise fixed-point product, truncated by f bits (+-1 ulp)."""
    _same_shape(x, y)
    r = x.ring
    return _fused(party, _cross_terms(party, x, y, r.mul), x, x.frac_bits + y.frac_bits)


def secure_dot(party, x: ReplicatedShare, y: ReplicatedShare) -> ReplicatedShare:
    """Fixed-point inner product along the last axis; one truncation per output."""
    if x.shape[-1] != y.shape[-1]:
        raise ShapeError(f"dot of {x.shape} and {y.shape}")
    r = x.ring

    def rowdot(a, b):
        return r.reduce(np.sum(np.multiply(a, b, dtype=np.uint64), axis=-1, dtype=np.uint64))

    return _fused(party, _cross_terms(party, x, y, rowdot), x, x.frac_bits + y.frac_bits)


def secure_matmul(party, a: ReplicatedShare, x: ReplicatedShare, truncate_result: bool = True) -> ReplicatedShare:
    """``a @ x`` for a matrix and a vector (or matrix); 3 elements per output.

    With ``truncate_result=False`` the product keeps scale f_a + f_x and costs
    a single round; ranking code uses this form because it is exact.
    """
    if a.shape[-1] != x.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {x.shape}")
    if not truncate_result:
        return matmul(party, a, x)
    r = a.ring
    return _fused(party, _cross_terms(party, a, x, r.matmul), a, a.frac_bits + x.frac_bits)


# -- comparison --------------------------------------------------------------


def _boolean_operands(party, x: ReplicatedShare) -> tuple[ReplicatedShare, ReplicatedShare]:
    """Boolean shares of A = x1 + x2 and B = x3 with A + B = x (1 round)."""
    ring = x.ring
    pid = party.id
    shape = x.shape
    zero = np.zeros(shape, dtype=np.uint64)
    p1, p2, p3 = PartyId.P1, PartyId.P2, PartyId.P3
    # A is reshared by P1 as (A ^ r, r, 0), with r known to P1 and P2
    if pid == p1:
        rr = _pair_stream(party, p2, shape)
        c = ring.reduce(ring.add(x.first, x.second) ^ rr)
        party.send(p3, c)
        a = ReplicatedShare(c, rr, pid, 0, ring, True)
        b = ReplicatedShare(zero, zero.copy(), pid, 0, ring, True)
    elif pid == p2:
        rr = _pair_stream(party, p1, shape)
        a = ReplicatedShare(rr, zero, pid, 0, ring, True)
        b = ReplicatedShare(zero.copy(), x.second, pid, 0, ring, True)
    else:
        c = party.recv(p1, shape)
        a = ReplicatedShare(zero, c, pid, 0, ring, True)
        b = ReplicatedShare(x.first, zero.copy(), pid, 0, ring, True)
    return a, b


def msb(party, x: ReplicatedShare) -> ReplicatedShare:
    """Boolean share of the sign bit of ``x`` (in bit 0 of each word).

    The two boolean operands are added with a Kogge-Stone parallel-prefix
    carry network; all AND gates of one level go out in a single message.
    """
    if x.boolean:
        raise TypeError("msb expects an arithmetic share")
    ring = x.ring
    shape = x.shape
    x = x.reshape(-1)
    n = x.shape[0]
    a, b = _boolean_operands(party, x)
    g = and_bits(party, a, b)
    p = a ^ b
    propagate = p
    d = 1
    bits = ring.bits
    while d < bits:
        if 2 * d >= bits:
            # the final level only needs the generate signal
            g = g ^ and_bits(party, p, g.lshift(d))
        else:
            both = and_bits(party, concat([p, p]), concat([g.lshift(d), p.lshift(d)]))
            g = g ^ both[:n]
            p = both[n:]
        d *= 2
    total = propagate ^ g.lshift(1)
    return total.rshift(bits - 1).and_public(1).reshape(shape)


def _stack(shares: list) -> ReplicatedShare:
    return concat([s.reshape((1,) + s.shape) for s in shares])


def less_than(party, x: ReplicatedShare, y: ReplicatedShare) -> ReplicatedShare:
    """Boolean bit [x < y] under two's-complement interpretation."""
    _same_shape(x, y)
    if x.frac_bits != y.frac_bits:
        raise ShapeError(f"frac_bits mismatch {x.frac_bits} vs {y.frac_bits}")
    return msb(party, x - y)


def not_bit(b: ReplicatedShare) -> ReplicatedShare:
    return b.add_public(1)


def or_bits(party, x: ReplicatedShare, y: ReplicatedShare) -> ReplicatedShare:
    return x ^ y ^ and_bits(party, x, y)


def or_reduce(party, bits: ReplicatedShare) -> ReplicatedShare:
    """OR over the last axis with a log-depth tree."""
    cur = bits
    while cur.shape[-1] > 1:
        m = cur.shape[-1]
        half = m // 2
        left = cur[..., 0 : 2 * half : 2]
        right = cur[..., 1 : 2 * half : 2]
        merged = or_bits(party, _contiguous(left), _contiguous(right))
        if m % 2:
            merged = concat([merged, cur[..., m - 1 : m]], axis=-1)
        cur = merged
    return cur[..., 0]


def _contiguous(x: ReplicatedShare) -> ReplicatedShare:
    return x._with(np.ascontiguousarray(x.first), np.ascontiguousarray(x.second))


def b2a(party, b: ReplicatedShare) -> ReplicatedShare:
    """Arithmetic share of a boolean-shared bit (bit 0 of each word)."""
    if not b.boolean:
        raise TypeError("b2a expects a boolean share")
    bit = b.and_public(1)
    c0, c1, c2 = (_component(bit, j) for j in range(3))
    u = c0 + c1 - mul(party, c0, c1).scale(2)
    return u + c2 - mul(party, u, c2).scale(2)


def oblivious_select(party, bit: ReplicatedShare, x: ReplicatedShare, y: ReplicatedShare) -> ReplicatedShare:
    """x where bit = 1, y where bit = 0; ``bit`` is an arithmetic 0/1 share."""
    _same_shape(x, y)
    if bit.boolean:
        raise TypeError("convert the bit with b2a first")
    if bit.shape != x.shape:
        bit = bit._with(
            np.ascontiguousarray(np.broadcast_to(bit.first, x.shape)),
            np.ascontiguousarray(np.broadcast_to(bit.second, x.shape)),
        )
    return y + mul(party, bit.with_frac_bits(0), x - y).with_frac_bits(x.frac_bits)


# -- argmax / top-k ----------------------------------------------------------


def sentinel_raw(ring) -> int:
    """Masking value written over a selected score (below any legal score)."""
    return -(1 << (ring.bits - 2)) + 1


def _broadcast_bit(bit: ReplicatedShare, width: int) -> ReplicatedShare:
    first = np.repeat(bit.first[:, None], width, axis=1)
    second = np.repeat(bit.second[:, None], width, axis=1)
    return bit._with(first, second, 0)


def argmax_onehot(party, scores: ReplicatedShare) -> tuple[ReplicatedShare, ReplicatedShare]:
    """Secret one-hot position and value of the maximum (ties -> smaller index).

    A tournament over a power-of-two padded vector. Each candidate carries
    its one-hot position inside its subtree, so a level costs O(n) elements.
    """
    ring = scores.ring
    n = scores.shape[0]
    size = 1 << max(0, (n - 1).bit_length())
    pid = party.id
    vals = scores
    if size > n:
        pad = public_share(pid, np.full(size - n, sentinel_raw(ring), dtype=np.int64), ring, scores.frac_bits)
        vals = concat([scores, pad])
    onehot = public_share(pid, np.ones((size, 1), dtype=np.uint64), ring)
    while vals.shape[0] > 1:
        left, right = _contiguous(vals[0::2]), _contiguous(vals[1::2])
        h_left, h_right = _contiguous(onehot[0::2]), _contiguous(onehot[1::2])
        pairs, width = h_left.shape
        take_right = b2a(party, less_than(party, left, right))
        operand = concat([(right - left).reshape(pairs, 1).with_frac_bits(0), h_left, h_right], axis=1)
        prod = mul(party, _broadcast_bit(take_right, 1 + 2 * width), operand)
        vals = left + prod[:, 0].with_frac_bits(left.frac_bits)
        onehot = concat([h_left - prod[:, 1 : 1 + width], prod[:, 1 + width :]], axis=1)
    return onehot.reshape(size)[:n], vals[0]


def secure_topk(party, scores: ReplicatedShare, k: int) -> tuple[ReplicatedShare, ReplicatedShare]:
    """Secret indices and values of the k largest scores, in decreasing order.

    k sequential argmax passes; after each pass the winner is overwritten
    with the sentinel so the next pass finds the runner-up.
    """
    n = scores.shape[0] if scores.shape else 0
    if not 1 <= k <= n:
        raise RangeError(f"top-k needs 1 <= k <= n, got k={k}, n={n}")
    ring = scores.ring
    pid = party.id
    sentinel = public_share(pid, np.full(n, sentinel_raw(ring), dtype=np.int64), ring, scores.frac_bits)
    indices, values = [], []
    cur = scores
    for i in range(k):
        onehot, best = argmax_onehot(party, cur)
        idx = _public_weighted_sum(onehot, np.arange(n, dtype=np.uint64))
        indices.append(idx)
        values.append(best)
        if i + 1 < k:
            cur = cur + mul(party, onehot, sentinel - cur).with_frac_bits(cur.frac_bits)
    return _stack(indices), _stack(values)


def _public_weighted_sum(onehot: ReplicatedShare, weights: np.ndarray) -> ReplicatedShare:
    """Local sum_i w_i * h_i for a public weight vector."""
    r = onehot.ring
    w = r.element(weights)
    first = r.reduce(np.sum(r.mul(onehot.first, w), dtype=np.uint64))
    second = r.reduce(np.sum(r.mul(onehot.second, w), dtype=np.uint64))
    return onehot._with(first, second, 0)


def debug_verify(party, x: ReplicatedShare) -> None:
    """Debug-only replication check; leaks shares to neighbours, tests only."""
    party.send(party.id.prev, x.first, kind="debug")
    theirs = party.recv(party.id.next, x.shape)
    if not np.array_equal(theirs, x.second):
        raise ConsistencyError(f"{party.id.label}: second component differs from {party.id.next.label}.first")
