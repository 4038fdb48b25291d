import numpy as np
import pytest
from hypothesis import given, strategies as st

from pocmt.hco import (CapacityViolation, WindowLedger, allocate_adversary, allocation_vector,
                       check_windows, honest_solves, min_humans, parse_strategy)


def test_honest_solves_edges_and_mean():
    rng = np.random.default_rng(0)
    assert honest_solves(0, 1, 1.0, rng) == 1
    assert honest_solves(0, 3, 0.0, rng) == 0
    draws = [honest_solves(v, 1, 0.98, rng) for v in range(100_000)]
    assert 0.975 <= np.mean(draws) <= 0.985
    with pytest.raises(ValueError):
        honest_solves(0, 0, 0.5, rng)


def test_allocation_examples():
    ids = range(100)
    conc = allocate_adversary(ids, 10, 1, "concentrate")
    assert [conc[a] for a in range(12)] == [1] * 10 + [0, 0]
    assert sum(conc.values()) == 10
    assert allocate_adversary(range(4), 100, 2, "spread") == {0: 2, 1: 2, 2: 2, 3: 2}
    for strategy in ("concentrate", "spread", "rotate:3"):
        assert set(allocate_adversary(ids, 0, 1, strategy).values()) == {0}


def test_spread_is_round_robin_and_rotate_shifts():
    assert list(allocation_vector(4, 6, 3, "spread")) == [2, 2, 1, 1]
    assert list(allocation_vector(5, 4, 2, "concentrate")) == [2, 2, 0, 0, 0]
    assert list(allocation_vector(5, 4, 2, "rotate", window=1)) == [0, 2, 2, 0, 0]
    assert list(allocation_vector(5, 4, 2, "rotate:2", window=1)) == [2, 2, 0, 0, 0]
    assert list(allocation_vector(5, 4, 2, "rotate:2", window=2)) == [0, 2, 2, 0, 0]
    assert list(allocation_vector(5, 5, 2, "rotate", window=4)) == [2, 1, 0, 0, 2]


@given(st.integers(1, 40), st.integers(0, 200), st.integers(1, 5),
       st.sampled_from(["concentrate", "spread", "rotate", "rotate:4"]), st.integers(0, 50))
def test_allocation_postconditions(s, cap, k, strategy, window):
    vec = allocation_vector(s, cap, k, strategy, window)
    assert vec.sum() == min(cap, s * k)
    assert vec.min() >= 0 and vec.max() <= k


def test_min_humans_examples():
    assert min_humans(100, 1, 1) == 100
    assert min_humans(100, 2, 4) == 50
    assert min_humans(7, 3, 5) == 5
    with pytest.raises(ValueError):
        min_humans(0, 1, 1)


def test_min_humans_matches_brute_force_grid():
    for s in range(1, 13):
        for k in range(1, 13):
            for tau in range(1, 13):
                brute = next(m for m in range(s * k + 1) if m * tau >= s * k)
                assert min_humans(s, k, tau) == brute


def test_full_engagement_at_minimum_capacity():
    for s, k, tau in [(7, 3, 5), (10, 2, 3), (1, 1, 1), (12, 5, 7)]:
        cap = min_humans(s, k, tau) * tau
        for strategy in ("concentrate", "spread", "rotate"):
            assert set(allocate_adversary(range(s), cap, k, strategy).values()) == {k}


def test_sublinear_starvation_count():
    for cap in range(0, 100, 7):
        for strategy in ("concentrate", "spread"):
            vec = allocation_vector(100, cap, 1, strategy)
            assert int((vec == 0).sum()) == 100 - cap


def test_ledger_records_and_verifies():
    led = WindowLedger(3, 2, 4, 6, adversaries=[3, 4, 5])
    led.record_many([0, 1, 2], [2, 1, 0])
    led.record_many(slice(3, 6), [2, 2, 0])
    assert led.adversary_spent == 4
    assert led.verify() == 4
    assert led.solved_map() == {0: 2, 1: 1, 2: 0, 3: 2, 4: 2, 5: 0}
    with pytest.raises(ValueError, match="twice"):
        led.record(0, 1)


def test_ledger_rejects_bad_counts_and_duplicates():
    led = WindowLedger(0, 1, 5, 4, adversaries=slice(2, 4))
    with pytest.raises(ValueError, match="outside"):
        led.record(0, 2)
    with pytest.raises(ValueError, match="duplicate"):
        led.record_many([1, 1], [0, 1])


def test_capacity_violation_is_caught():
    led = WindowLedger(7, 1, 1, 4, adversaries=[2, 3])
    led.record_many([2, 3], [1, 1])
    with pytest.raises(CapacityViolation) as exc:
        led.verify()
    assert exc.value.window == 7 and "X(d)=2 > M=1" in str(exc.value)


def test_automated_solves_cannot_push_an_identity_past_k():
    led = WindowLedger(0, 1, 5, 2, adversaries=[1])
    led.record(1, 1)
    led.automated[1] = 1
    with pytest.raises(CapacityViolation, match="exceeds k"):
        led.verify()


def test_check_windows_reports_first_bad_window():
    solved = np.array([[0, 1, 1], [0, 1, 0], [0, 1, 1]])
    spent = check_windows(solved[:2, :] * [1, 1, 0], np.zeros((2, 3), int), [1, 1],
                          slice(1, 3), 1)
    assert list(spent) == [1, 1]
    with pytest.raises(CapacityViolation) as exc:
        check_windows(solved, np.zeros((3, 3), int), [1, 1, 1], slice(1, 3), 1, first_window=10)
    assert exc.value.window == 10


def test_parse_strategy():
    assert parse_strategy("rotate:3") == ("rotate", 3)
    assert parse_strategy("spread") == ("spread", 1)
    for bad in ("hoard", "rotate:0"):
        with pytest.raises(ValueError):
            parse_strategy(bad)
