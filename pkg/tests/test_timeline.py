import pytest
from hypothesis import given, strategies as st

from pocmt.timeline import Timeline


def test_unit_windows_coincide_with_epochs():
    tl = Timeline(1, 3000)
    assert tl.window_of(2999) == 2999
    assert all(tl.window_of(t) == t for t in range(0, 3000, 97))
    assert all(tl.is_window_boundary(t) for t in range(0, 3000, 61))


def test_window_mapping_with_longer_windows():
    tl = Timeline(4, 10)
    assert [tl.window_of(t) for t in range(10)] == [0, 0, 0, 0, 1, 1, 1, 1, 2, 2]
    assert [t for t in range(10) if tl.is_window_boundary(t)] == [3, 7, 9]
    assert tl.window_count == 3
    assert list(tl.epochs_in(2)) == [8, 9]


@given(st.integers(1, 20), st.integers(1, 500))
def test_windows_partition_the_horizon(E, T):
    tl = Timeline(E, T)
    epochs = [t for d in range(tl.window_count) for t in tl.epochs_in(d)]
    assert epochs == list(range(T))
    assert sum(tl.is_window_boundary(t) for t in range(T)) == tl.window_count


def test_out_of_range_and_invalid():
    tl = Timeline(2, 5)
    with pytest.raises(IndexError):
        tl.window_of(5)
    with pytest.raises(IndexError):
        tl.epochs_in(3)
    with pytest.raises(ValueError):
        Timeline(0, 5)
    with pytest.raises(ValueError):
        Timeline(1, 0)
