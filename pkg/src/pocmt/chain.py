"""Blocks, weighted longest-chain fork choice, equivocation evidence and
weighted BFT finality."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement, product
from typing import Iterable, Sequence

GENESIS = "0" * 32


class ChainError(ValueError):
    pass


def block_id(parent: str, epoch: int, leader: int, payload_tag: str) -> str:
    data = f"{parent}|{epoch}|{leader}|{payload_tag}".encode()
    return hashlib.blake2b(data, digest_size=16).hexdigest()


@dataclass(frozen=True)
class Block:
    parent: str
    epoch: int
    leader: int
    leader_score_snapshot: float
    sortition_value: float = 0.0
    payload_tag: str = ""
    id: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.leader_score_snapshot < 0:
            raise ChainError("leader score snapshot must be non-negative")
        object.__setattr__(self, "id",
                           block_id(self.parent, self.epoch, self.leader, self.payload_tag))


@dataclass(frozen=True)
class EquivocationEvidence:
    leader: int
    epoch: int
    block_a: str
    block_b: str


@dataclass(frozen=True)
class FinalityVote:
    voter: int
    block: str
    weight: float


def chain_weight(chain: Sequence[Block]) -> float:
    """Sum of leader score snapshots along a genesis-rooted block sequence."""
    parent, last_epoch = GENESIS, -1
    total = 0.0
    for b in chain:
        if b.parent != parent:
            raise ChainError(f"block {b.id} does not link to {parent}")
        if b.epoch <= last_epoch:
            raise ChainError(f"block {b.id} epoch {b.epoch} not after parent epoch {last_epoch}")
        total += b.leader_score_snapshot
        parent, last_epoch = b.id, b.epoch
    return total


class BlockStore:
    """Append-only block tree rooted at genesis.

    Cumulative weight and length are cached per block at insertion, from the
    frozen leader snapshots, so later score changes never affect fork choice.
    """

    def __init__(self) -> None:
        self.blocks: dict[str, Block] = {}
        self.weight: dict[str, float] = {GENESIS: 0.0}
        self.length: dict[str, int] = {GENESIS: 0}
        self.children: dict[str, list[str]] = {GENESIS: []}
        self._by_slot: dict[tuple[int, int], list[str]] = {}
        self._reported: set[tuple[int, int]] = set()

    def __contains__(self, bid: str) -> bool:
        return bid in self.blocks or bid == GENESIS

    def __len__(self) -> int:
        return len(self.blocks)

    def epoch_of(self, bid: str) -> int:
        return -1 if bid == GENESIS else self.blocks[bid].epoch

    def add(self, block: Block) -> bool:
        """Insert ``block``; returns False if it was already present."""
        if block.id in self.blocks:
            return False
        if block.parent not in self:
            raise ChainError(f"unknown parent {block.parent} for block {block.id}")
        if block.epoch <= self.epoch_of(block.parent):
            raise ChainError(f"block {block.id} epoch does not exceed its parent's")
        self.blocks[block.id] = block
        self.weight[block.id] = self.weight[block.parent] + block.leader_score_snapshot
        self.length[block.id] = self.length[block.parent] + 1
        self.children[block.id] = []
        self.children[block.parent].append(block.id)
        self._by_slot.setdefault((block.leader, block.epoch), []).append(block.id)
        return True

    def tips(self) -> list[str]:
        return [b for b, kids in self.children.items() if not kids]

    def chain(self, tip: str) -> list[Block]:
        out = []
        while tip != GENESIS:
            b = self.blocks[tip]
            out.append(b)
            tip = b.parent
        out.reverse()
        return out

    def ancestor_at(self, tip: str, length: int) -> str:
        while self.length[tip] > length:
            tip = self.blocks[tip].parent
        return tip

    def common_ancestor(self, a: str, b: str) -> str:
        while self.length[a] > self.length[b]:
            a = self.blocks[a].parent
        while self.length[b] > self.length[a]:
            b = self.blocks[b].parent
        while a != b:
            a, b = self.blocks[a].parent, self.blocks[b].parent
        return a

    def rank(self, tip: str) -> tuple:
        """Sort key: heavier, then longer, then lower id wins (max)."""
        return (self.weight[tip], self.length[tip], _Desc(tip))

    def conflicting(self, block: Block) -> list[str]:
        return [b for b in self._by_slot.get((block.leader, block.epoch), ()) if b != block.id]


class _Desc(str):
    """String ordered in reverse, so max() prefers the lexicographically lower id."""

    def __lt__(self, other: str) -> bool:  # type: ignore[override]
        return str.__gt__(self, other)

    def __gt__(self, other: str) -> bool:  # type: ignore[override]
        return str.__lt__(self, other)


def fork_choice(tips: Iterable[str], store: BlockStore) -> str:
    tips = list(tips)
    if not tips:
        raise ChainError("fork choice over an empty tip set")
    return max(tips, key=store.rank)


def prefers(store: BlockStore, a: str, b: str) -> bool:
    """True when fork choice picks ``a`` over ``b``."""
    return store.rank(a) > store.rank(b)


def detect_equivocation(block: Block, store: BlockStore) -> EquivocationEvidence | None:
    """Evidence if ``store`` already holds another block for (leader, epoch).

    At most one piece of evidence is returned per (leader, epoch) offense.
    Call before ``store.add(block)``.
    """
    slot = (block.leader, block.epoch)
    if slot in store._reported:
        return None
    others = store.conflicting(block)
    if not others:
        return None
    store._reported.add(slot)
    return EquivocationEvidence(block.leader, block.epoch, others[0], block.id)


def finalize(votes: Iterable[FinalityVote], total_weight: float) -> bool:
    """Strictly more than two thirds of ``total_weight`` voted."""
    if total_weight <= 0:
        raise ValueError("total_weight must be positive")
    votes = list(votes)
    if len({v.block for v in votes}) > 1:
        raise ValueError("votes reference more than one block")
    seen: dict[int, float] = {}
    for v in votes:
        seen[v.voter] = v.weight
    tally = sum(seen.values())
    if isinstance(tally, Fraction) or isinstance(total_weight, Fraction):
        return Fraction(tally) * 3 > Fraction(total_weight) * 2
    return 3 * tally > 2 * total_weight


# -- exhaustive quorum checks ---------------------------------------------

def quorum_intersection_holds(weights: Sequence[Fraction]) -> bool:
    """Any two >2/3 voter sets share weight >1/3 (all subset pairs)."""
    n = len(weights)
    total = sum(weights, Fraction(0))
    masks = range(1 << n)
    w = [sum((weights[i] for i in range(n) if m >> i & 1), Fraction(0)) for m in masks]
    quorums = [m for m in masks if 3 * w[m] > 2 * total]
    return all(3 * w[a & b] > total for a in quorums for b in quorums)


@dataclass
class BftEnumeration:
    instances: int = 0
    vote_patterns: int = 0
    conflicting_finalizations: int = 0


def enumerate_double_voting(max_validators: int = 5,
                            weight_values: Sequence[int] = (1, 2, 3),
                            adversary_bound: Fraction = Fraction(1, 3)) -> BftEnumeration:
    """Exhaust vote patterns for two conflicting blocks A and B.

    For each validator count up to ``max_validators``, each multiset of integer
    weights and each adversarial subset whose weight is below
    ``adversary_bound`` of the total: honest validators vote A, B or abstain
    (never both), adversarial validators vote any subset of {A, B}. Counts
    patterns finalizing both.
    """
    bound = Fraction(adversary_bound)
    report = BftEnumeration()
    for n in range(1, max_validators + 1):
        for weights in combinations_with_replacement(weight_values, n):
            total = sum(weights)
            for mask in range(1 << n):
                adv = [i for i in range(n) if mask >> i & 1]
                if sum(weights[i] for i in adv) * bound.denominator >= bound.numerator * total:
                    continue
                report.instances += 1
                honest = [i for i in range(n) if not mask >> i & 1]
                adv_w = [weights[i] for i in adv]
                # adversary choice per validator: 0 none, 1 A, 2 B, 3 both
                adv_tallies = []
                for choice in product(range(4), repeat=len(adv)):
                    a = sum(w for w, c in zip(adv_w, choice) if c & 1)
                    b = sum(w for w, c in zip(adv_w, choice) if c & 2)
                    adv_tallies.append((a, b))
                for choice in product(range(3), repeat=len(honest)):
                    ha = sum(weights[i] for i, c in zip(honest, choice) if c == 1)
                    hb = sum(weights[i] for i, c in zip(honest, choice) if c == 2)
                    for a, b in adv_tallies:
                        report.vote_patterns += 1
                        # integer weights are rationals over a common denominator
                        if 3 * (ha + a) > 2 * total and 3 * (hb + b) > 2 * total:
                            report.conflicting_finalizations += 1
    return report
