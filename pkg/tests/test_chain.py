from fractions import Fraction
from itertools import product

import pytest
from hypothesis import given, settings, strategies as st

from pocmt.chain import (GENESIS, Block, BlockStore, ChainError, FinalityVote, chain_weight,
                         detect_equivocation, enumerate_double_voting, finalize, fork_choice,
                         prefers, quorum_intersection_holds)


def build(store, parent, specs):
    """Append (epoch, leader, weight) blocks in a line; returns their ids."""
    ids = []
    for epoch, leader, w in specs:
        b = Block(parent, epoch, leader, w)
        store.add(b)
        ids.append(b.id)
        parent = b.id
    return ids


def test_chain_weight_sums_snapshots():
    s = BlockStore()
    ids = build(s, GENESIS, [(0, 1, 2.0), (3, 2, 0.5), (4, 1, 1.5)])
    chain = s.chain(ids[-1])
    assert chain_weight(chain) == 4.0 == s.weight[ids[-1]]
    assert s.length[ids[-1]] == 3
    assert chain_weight([]) == 0.0


def test_chain_weight_rejects_broken_links():
    a = Block(GENESIS, 1, 0, 1.0)
    b = Block(a.id, 1, 1, 1.0)
    with pytest.raises(ChainError):
        chain_weight([a, b])
    with pytest.raises(ChainError):
        chain_weight([Block("f" * 32, 2, 0, 1.0)])


def test_store_validates_parent_and_epoch():
    s = BlockStore()
    a = Block(GENESIS, 5, 0, 1.0)
    s.add(a)
    assert not s.add(a)
    with pytest.raises(ChainError):
        s.add(Block(a.id, 5, 1, 1.0))
    with pytest.raises(ChainError):
        s.add(Block("e" * 32, 9, 1, 1.0))
    with pytest.raises(ChainError):
        Block(GENESIS, 1, 0, -1.0)


def test_heavier_beats_longer():
    s = BlockStore()
    light = build(s, GENESIS, [(1, 0, 1.0), (2, 0, 1.0), (3, 0, 1.0)])
    heavy = build(s, GENESIS, [(1, 1, 5.0)])
    assert fork_choice(s.tips(), s) == heavy[-1]


def test_weight_tie_goes_to_longer_then_lower_id():
    s = BlockStore()
    longer = build(s, GENESIS, [(1, 0, 1.0), (2, 0, 1.0)])
    shorter = build(s, GENESIS, [(1, 1, 2.0)])
    assert fork_choice(s.tips(), s) == longer[-1]
    s2 = BlockStore()
    x, y = Block(GENESIS, 1, 0, 1.0, payload_tag="a"), Block(GENESIS, 1, 0, 1.0, payload_tag="b")
    s2.add(x)
    s2.add(y)
    assert fork_choice([x.id, y.id], s2) == min(x.id, y.id)
    assert prefers(s2, min(x.id, y.id), max(x.id, y.id))
    with pytest.raises(ChainError):
        fork_choice([], s2)


@settings(max_examples=60)
@given(st.lists(st.tuples(st.integers(0, 5), st.floats(0, 10)), min_size=1, max_size=25))
def test_fork_choice_matches_brute_force(steps):
    s = BlockStore()
    ids = [GENESIS]
    for i, (pick, w) in enumerate(steps):
        parent = ids[pick % len(ids)]
        b = Block(parent, s.epoch_of(parent) + 1 + i, i, w)
        s.add(b)
        ids.append(b.id)
    best = max(s.tips(), key=lambda t: (chain_weight(s.chain(t)), len(s.chain(t)),
                                        [-ord(c) for c in t]))
    assert fork_choice(s.tips(), s) == best


def test_snapshot_is_frozen():
    b = Block(GENESIS, 1, 0, 3.0)
    with pytest.raises(AttributeError):
        b.leader_score_snapshot = 9.0


def test_common_ancestor_and_ancestor_at():
    s = BlockStore()
    trunk = build(s, GENESIS, [(1, 0, 1.0), (2, 0, 1.0)])
    left = build(s, trunk[-1], [(3, 1, 1.0), (4, 1, 1.0)])
    right = build(s, trunk[-1], [(5, 2, 1.0)])
    assert s.common_ancestor(left[-1], right[-1]) == trunk[-1]
    assert s.ancestor_at(left[-1], 1) == trunk[0]
    assert s.common_ancestor(left[-1], GENESIS) == GENESIS


def test_equivocation_evidence_once_per_slot():
    s = BlockStore()
    a = Block(GENESIS, 4, 7, 1.0, payload_tag="a")
    b = Block(GENESIS, 4, 7, 1.0, payload_tag="b")
    c = Block(GENESIS, 4, 7, 1.0, payload_tag="c")
    assert detect_equivocation(a, s) is None
    s.add(a)
    ev = detect_equivocation(b, s)
    s.add(b)
    assert (ev.leader, ev.epoch, ev.block_a, ev.block_b) == (7, 4, a.id, b.id)
    assert detect_equivocation(c, s) is None
    other = Block(GENESIS, 4, 8, 1.0)
    assert detect_equivocation(other, s) is None


def test_finality_needs_strictly_more_than_two_thirds():
    votes = [FinalityVote(v, "B", 1.0) for v in range(2)]
    assert not finalize(votes, 3.0)
    assert finalize(votes + [FinalityVote(2, "B", 0.01)], 3.0)
    exact = [FinalityVote(0, "B", Fraction(2, 3))]
    assert not finalize(exact, Fraction(1))
    assert finalize([FinalityVote(0, "B", Fraction(2, 3) + Fraction(1, 10**9))], Fraction(1))


def test_finality_counts_each_voter_once():
    votes = [FinalityVote(0, "B", 1.0)] * 5
    assert not finalize(votes, 3.0)
    with pytest.raises(ValueError):
        finalize([FinalityVote(0, "A", 1.0), FinalityVote(1, "B", 1.0)], 3.0)
    with pytest.raises(ValueError):
        finalize([], 0)


def test_quorum_intersection_on_small_weight_vectors():
    for weights in product([1, 2, 3, 5], repeat=4):
        assert quorum_intersection_holds([Fraction(w) for w in weights])
    assert quorum_intersection_holds([Fraction(1, 3), Fraction(1, 7), Fraction(2, 9)])


def test_exhaustive_double_voting_has_no_conflicts():
    report = enumerate_double_voting(max_validators=5)
    assert report.conflicting_finalizations == 0
    assert report.instances > 200 and report.vote_patterns > 50_000


def test_enumeration_finds_conflicts_past_one_third():
    # the same search with a heavier adversary must turn up double finality,
    # otherwise the zero above would be vacuous
    report = enumerate_double_voting(max_validators=4, adversary_bound=Fraction(1, 2))
    assert report.conflicting_finalizations > 0
