"""Commitment-weighted sortition for leaders and committees.

The VRF is stood in for by SipHash-2-4, a keyed pseudorandom function. It is
evaluated over whole (epoch x validator) grids with numpy so that a full run's
sortition values cost one vectorized pass instead of one hash call per cell.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

LEADER_DOMAIN = 1
COMMITTEE_DOMAIN = 2
RESOLUTIONS = ("normalized", "lowest_r")

_MASK = (1 << 64) - 1
_U64 = np.uint64
_HASH_ROWS = 256


# -- SipHash-2-4 ----------------------------------------------------------

def _rotl(x: int, b: int) -> int:
    return ((x << b) | (x >> (64 - b))) & _MASK


def siphash24(key: bytes, data: bytes) -> int:
    """Reference SipHash-2-4 over arbitrary bytes (16-byte key)."""
    if len(key) != 16:
        raise ValueError("SipHash key must be 16 bytes")
    k0, k1 = struct.unpack("<QQ", key)
    v = [k0 ^ 0x736F6D6570736575, k1 ^ 0x646F72616E646F6D,
         k0 ^ 0x6C7967656E657261, k1 ^ 0x7465646279746573]

    def rounds(n: int) -> None:
        for _ in range(n):
            v[0] = (v[0] + v[1]) & _MASK; v[1] = _rotl(v[1], 13); v[1] ^= v[0]
            v[0] = _rotl(v[0], 32)
            v[2] = (v[2] + v[3]) & _MASK; v[3] = _rotl(v[3], 16); v[3] ^= v[2]
            v[0] = (v[0] + v[3]) & _MASK; v[3] = _rotl(v[3], 21); v[3] ^= v[0]
            v[2] = (v[2] + v[1]) & _MASK; v[1] = _rotl(v[1], 17); v[1] ^= v[2]
            v[2] = _rotl(v[2], 32)

    tail = len(data) % 8
    for i in range(0, len(data) - tail, 8):
        (m,) = struct.unpack_from("<Q", data, i)
        v[3] ^= m
        rounds(2)
        v[0] ^= m
    last = (len(data) & 0xFF) << 56
    for j, byte in enumerate(data[len(data) - tail:]):
        last |= byte << (8 * j)
    v[3] ^= last
    rounds(2)
    v[0] ^= last
    v[2] ^= 0xFF
    rounds(4)
    return v[0] ^ v[1] ^ v[2] ^ v[3]


def _vrotl(x: np.ndarray, b: int, scratch: np.ndarray) -> None:
    """Rotate ``x`` left by ``b`` bits in place."""
    np.right_shift(x, _U64(64 - b), out=scratch)
    np.left_shift(x, _U64(b), out=x)
    x |= scratch


def siphash24_words(k0: np.ndarray, k1: np.ndarray, words: Sequence[np.ndarray]) -> np.ndarray:
    """SipHash-2-4 of a message of whole little-endian 64-bit words.

    ``k0``, ``k1`` and every entry of ``words`` are uint64 arrays that
    broadcast together; the result has their broadcast shape.
    """
    k0 = np.asarray(k0, dtype=_U64)
    k1 = np.asarray(k1, dtype=_U64)
    words = [np.asarray(w, dtype=_U64) for w in words]
    shape = np.broadcast_shapes(k0.shape, k1.shape, *(w.shape for w in words))
    v0 = np.broadcast_to(k0 ^ _U64(0x736F6D6570736575), shape).copy()
    v1 = np.broadcast_to(k1 ^ _U64(0x646F72616E646F6D), shape).copy()
    v2 = np.broadcast_to(k0 ^ _U64(0x6C7967656E657261), shape).copy()
    v3 = np.broadcast_to(k1 ^ _U64(0x7465646279746573), shape).copy()
    tmp = np.empty(shape, dtype=_U64)

    add, xor = np.add, np.bitwise_xor

    def rounds(n: int) -> None:
        # every update is in place, so v0..v3 keep their buffers
        for _ in range(n):
            add(v0, v1, out=v0); _vrotl(v1, 13, tmp); xor(v1, v0, out=v1); _vrotl(v0, 32, tmp)
            add(v2, v3, out=v2); _vrotl(v3, 16, tmp); xor(v3, v2, out=v3)
            add(v0, v3, out=v0); _vrotl(v3, 21, tmp); xor(v3, v0, out=v3)
            add(v2, v1, out=v2); _vrotl(v1, 17, tmp); xor(v1, v2, out=v1); _vrotl(v2, 32, tmp)

    for m in [*words, _U64((8 * len(words) & 0xFF) << 56)]:
        v3 ^= m
        rounds(2)
        v0 ^= m
    v2 ^= _U64(0xFF)
    rounds(4)
    v0 ^= v1
    v0 ^= v2
    v0 ^= v3
    return v0


def to_unit(x) -> np.ndarray:
    """Map uint64 hash outputs to [0, 1) using their top 53 bits."""
    return (np.asarray(x, dtype=_U64) >> _U64(11)).astype(np.float64) * 2.0 ** -53


# -- keys and beacon ------------------------------------------------------

@dataclass(frozen=True)
class SortitionKey:
    validator: int
    secret: bytes

    def __post_init__(self) -> None:
        if len(self.secret) != 16:
            raise ValueError("sortition secret must be 16 bytes")

    @property
    def words(self) -> tuple[int, int]:
        return struct.unpack("<QQ", self.secret)


@dataclass(frozen=True)
class EpochRandomness:
    epoch: int
    beacon: bytes

    @property
    def word(self) -> int:
        return struct.unpack("<Q", self.beacon[:8])[0]


def _seed_bytes(seed: int) -> bytes:
    return (seed & _MASK).to_bytes(8, "little")


def derive_keys(seed: int, count: int) -> list[SortitionKey]:
    """One secret per validator, derived from the run seed."""
    return [SortitionKey(v, hashlib.blake2b(b"sortition-key" + struct.pack("<Q", v),
                                            key=_seed_bytes(seed), digest_size=16).digest())
            for v in range(count)]


def beacon(seed: int, epoch: int, tag: bytes = b"beacon") -> EpochRandomness:
    """rand(t): keyed hash of (run seed, tag, epoch)."""
    digest = hashlib.blake2b(tag + b"|" + struct.pack("<Q", epoch),
                             key=_seed_bytes(seed), digest_size=8).digest()
    return EpochRandomness(epoch, digest)


def _key_arrays(keys: Sequence[SortitionKey]) -> tuple[np.ndarray, np.ndarray]:
    pairs = np.array([k.words for k in keys], dtype=_U64).reshape(-1, 2)
    return pairs[:, 0], pairs[:, 1]


def sortition_value(key: SortitionKey, epoch: int, rand: EpochRandomness,
                    domain: int = LEADER_DOMAIN) -> float:
    """r_v(t) in [0, 1) for one validator."""
    if rand.epoch != epoch:
        raise ValueError(f"beacon for epoch {rand.epoch} used at epoch {epoch}")
    data = struct.pack("<QQQ", domain, epoch, rand.word)
    return float(to_unit(siphash24(key.secret, data)))


def sortition_values(keys: Sequence[SortitionKey], epoch: int, rand: EpochRandomness,
                     domain: int = LEADER_DOMAIN) -> np.ndarray:
    """:func:`sortition_value` for many keys at one epoch."""
    if rand.epoch != epoch:
        raise ValueError(f"beacon for epoch {rand.epoch} used at epoch {epoch}")
    return sortition_matrix(keys, [rand], domain)[0]


def sortition_matrix(keys: Sequence[SortitionKey], beacons: Sequence[EpochRandomness],
                     domain: int = LEADER_DOMAIN) -> np.ndarray:
    """Sortition values for every (epoch, validator); shape (len(beacons), len(keys))."""
    k0, k1 = _key_arrays(keys)
    epochs = np.array([b.epoch for b in beacons], dtype=_U64)[:, None]
    words = np.array([b.word for b in beacons], dtype=_U64)[:, None]
    dom = np.full((1, 1), domain, dtype=_U64)
    out = np.empty((len(beacons), len(keys)))
    # row blocks keep the working arrays cache-sized
    for lo in range(0, len(beacons), _HASH_ROWS):
        hi = lo + _HASH_ROWS
        out[lo:hi] = to_unit(siphash24_words(k0[None, :], k1[None, :],
                                             [dom, epochs[lo:hi], words[lo:hi]]))
    return out


# -- thresholds and election ----------------------------------------------

def leader_threshold(score: float, total_score: float, theta: float) -> float:
    if total_score <= 0:
        raise ZeroDivisionError("total score is zero; use the bootstrap rule")
    if not 0 <= score <= total_score * (1 + 1e-12):
        raise ValueError("score must lie in [0, total_score]")
    return min(1.0, theta * score / total_score)


def thresholds(scores: np.ndarray, theta: float) -> np.ndarray:
    total = scores.sum()
    return np.minimum(1.0, theta * scores / total)


def bootstrap_index(rand: EpochRandomness, n: int) -> int:
    """Uniform validator index drawn from the beacon when every score is zero."""
    digest = hashlib.blake2b(b"bootstrap|" + rand.beacon, digest_size=8).digest()
    return int.from_bytes(digest, "little") % n


def resolve_leaders(scores: np.ndarray, values: np.ndarray, theta: float,
                    resolution: str = "normalized") -> np.ndarray:
    """Leader index per row of (epochs, validators) scores and sortition values.

    Eligible validators have ``r < tau``. With several eligible, the winner is
    the one with the smallest ``r / tau`` (``normalized``) or smallest ``r``
    (``lowest_r``); remaining ties go to the lowest index. Rows with no
    eligible validator, including all-zero rows, give -1.
    """
    if resolution not in RESOLUTIONS:
        raise ValueError(f"unknown leader resolution {resolution!r}")
    scores = np.atleast_2d(scores)
    values = np.atleast_2d(values)
    totals = scores.sum(axis=1)
    live = totals > 0
    tau = np.minimum(1.0, theta * scores / np.where(live, totals, 1.0)[:, None])
    eligible = (values < tau) & live[:, None]
    if resolution == "normalized":
        key = np.where(eligible, values / np.where(eligible, tau, 1.0), np.inf)
    else:
        key = np.where(eligible, values, np.inf)
    out = np.argmin(key, axis=1)
    out[~eligible.any(axis=1)] = -1
    return out


def resolve_leader(scores: np.ndarray, values: np.ndarray, theta: float,
                   resolution: str = "normalized") -> int | None:
    """Single-epoch :func:`resolve_leaders`; None for an empty epoch.

    The caller handles the zero-total bootstrap case.
    """
    if scores.sum() <= 0:
        raise ZeroDivisionError("total score is zero; use the bootstrap rule")
    winner = int(resolve_leaders(scores, values, theta, resolution)[0])
    return None if winner < 0 else winner


def elect_leader(scores: Mapping[int, float], epoch: int, rand: EpochRandomness,
                 keys: Mapping[int, SortitionKey], theta: float = 1.0,
                 resolution: str = "normalized") -> int | None:
    ids = sorted(scores)
    s = np.array([scores[v] for v in ids], dtype=float)
    if s.min(initial=0.0) < 0:
        raise ValueError("scores must be non-negative")
    if s.sum() <= 0:
        return ids[bootstrap_index(rand, len(ids))]
    r = sortition_values([keys[v] for v in ids], epoch, rand)
    winner = resolve_leader(s, r, theta, resolution)
    return None if winner is None else ids[winner]


def sample_committee(scores: Mapping[int, float], epoch: int, rand: EpochRandomness,
                     keys: Mapping[int, SortitionKey], committee_scale: float) -> frozenset[int]:
    """Independent inclusion with probability min(1, c * CS_v / total)."""
    ids = sorted(scores)
    s = np.array([scores[v] for v in ids], dtype=float)
    if s.sum() <= 0:
        return frozenset(ids)
    p = np.minimum(1.0, committee_scale * s / s.sum())
    r = sortition_values([keys[v] for v in ids], epoch, rand, COMMITTEE_DOMAIN)
    return frozenset(v for v, keep in zip(ids, r < p) if keep)


# -- exact win probabilities ------------------------------------------------

def win_probabilities(tau, resolution: str = "normalized") -> np.ndarray:
    """Exact probability each validator leads one epoch given thresholds ``tau``.

    ``1 - sum(result)`` is the empty-epoch probability. A 2-D input of shape
    (epochs, validators) is evaluated row by row.
    """
    tau = np.asarray(tau, dtype=float)
    rows = np.minimum(np.atleast_2d(tau), 1.0)
    if resolution == "normalized":
        out = np.concatenate([_win_normalized(rows[i:i + 256])
                              for i in range(0, len(rows), 256)])
    elif resolution == "lowest_r":
        out = _win_lowest_r(rows)
    else:
        raise ValueError(f"unknown leader resolution {resolution!r}")
    return out[0] if tau.ndim == 1 else out


def _win_normalized(tau: np.ndarray) -> np.ndarray:
    # P(v) = tau_v * integral_0^1 prod_{u != v} (1 - tau_u x) dx. The integrand is
    # a polynomial of degree n-1, so n//2 + 1 Gauss-Legendre nodes are exact.
    # Nodes lie strictly inside (0, 1) and tau <= 1, so no factor vanishes.
    n = tau.shape[1]
    x, w = np.polynomial.legendre.leggauss(n // 2 + 1)
    x = (x + 1) / 2
    w = w / 2
    logf = np.log1p(-tau[:, None, :] * x[None, :, None])     # (T, nodes, N)
    others = np.exp(logf.sum(axis=2, keepdims=True) - logf)
    return tau * np.einsum("k,tkn->tn", w, others)


def _win_lowest_r(tau: np.ndarray) -> np.ndarray:
    # P(v) = integral_0^tau_v prod_{u != v} (1 - min(r, tau_u)) dr, piecewise exact.
    order = np.argsort(tau, axis=1, kind="stable")
    ts = np.take_along_axis(tau, order, axis=1)
    n = ts.shape[1]
    lo = np.concatenate([np.zeros((ts.shape[0], 1)), ts[:, :-1]], axis=1)
    alive = n - np.arange(n)
    carried = np.concatenate([np.ones((ts.shape[0], 1)),
                              np.cumprod(1.0 - ts[:, :-1], axis=1)], axis=1)
    seg = carried * ((1.0 - lo) ** alive - (1.0 - ts) ** alive) / alive
    out = np.empty_like(tau)
    np.put_along_axis(out, order, np.cumsum(seg, axis=1), axis=1)
    return out
