"""Human Challenge Oracle modeled as per-window solve counts.

Challenges are never materialized; a window issues ``k(d)`` challenges to
every identity and records how many each one solved. Solutions are bound to
the identity that solved them and are credited only to the window that
issued them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

STRATEGIES = ("concentrate", "spread", "rotate")


class CapacityViolation(AssertionError):
    """A window's solve counts break the per-identity or capacity bound."""

    def __init__(self, message: str, window: int) -> None:
        super().__init__(message)
        self.window = window


@dataclass(frozen=True)
class HcoParams:
    honest_solve_prob: float = 0.98
    automated_solve_prob: float = 0.0

    def __post_init__(self) -> None:
        for name in ("honest_solve_prob", "automated_solve_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be a probability")


class WindowLedger:
    """Solve accounting for one human window.

    ``solved[v]`` is x_v(d) for validator ids ``0..n-1``; ``adversary_spent``
    is X(d), the human time the adversary actually used. Automated solves are
    kept in ``automated`` because they consume no human time.
    """

    def __init__(self, window: int, issued_per_validator: int, adversary_capacity: int,
                 validators: int, adversaries=()) -> None:
        self.window = window
        self.issued_per_validator = issued_per_validator
        self.adversary_capacity = adversary_capacity
        self.solved = np.zeros(validators, dtype=np.int64)
        self.automated = np.zeros(validators, dtype=np.int64)
        self.recorded = np.zeros(validators, dtype=bool)
        self.adversarial = np.zeros(validators, dtype=bool)
        self._adv = adversaries if isinstance(adversaries, slice) else list(adversaries)
        self.adversarial[self._adv] = True

    @property
    def adversary_spent(self) -> int:
        return int(self.solved[self._adv].sum())

    def record(self, validator: int, count: int) -> None:
        self.record_many([validator], [count])

    def record_many(self, validators, counts) -> None:
        """Record x_v(d) for a batch; ``validators`` may be an index sequence or slice."""
        xs = np.asarray(counts, dtype=np.int64)
        if len(xs) and (xs.min() < 0 or xs.max() > self.issued_per_validator):
            raise ValueError(
                f"window {self.window}: solve count outside [0, {self.issued_per_validator}]")
        if not isinstance(validators, slice):
            validators = np.asarray(validators, dtype=np.int64)
            if len(np.unique(validators)) != len(validators):
                raise ValueError(f"window {self.window}: duplicate validator in batch")
        if self.recorded[validators].any():
            raise ValueError(f"window {self.window}: solve count recorded twice")
        self.solved[validators] = xs
        self.recorded[validators] = True

    def solved_map(self) -> dict[int, int]:
        return {int(v): int(self.solved[v]) for v in np.nonzero(self.recorded)[0]}

    def credited(self) -> np.ndarray:
        """Per-validator solves credited to H (human plus automated)."""
        return self.solved + self.automated

    def verify(self) -> int:
        """Check per-identity and capacity bounds; returns X(d)."""
        spent = check_windows(self.solved[None], self.automated[None],
                              [self.issued_per_validator], self._adv,
                              self.adversary_capacity, first_window=self.window)
        return int(spent[0])


def check_windows(solved: np.ndarray, automated: np.ndarray, issued: Sequence[int],
                  adversaries, capacity: int, first_window: int = 0) -> np.ndarray:
    """Ledger invariants for a block of windows (rows) at once.

    Every identity gets at most k(d) credited solves and the adversary's human
    solves stay within ``capacity``. Returns X(d) per row.
    """
    solved = np.asarray(solved)
    issued = np.asarray(issued, dtype=np.int64)[:, None]
    bad = (((solved + automated) > issued) | (solved < 0)).any(axis=1)
    if bad.any():
        d = first_window + int(np.argmax(bad))
        raise CapacityViolation(f"window {d}: an identity exceeds k(d)", d)
    spent = solved[:, adversaries].sum(axis=1)
    over = spent > capacity
    if over.any():
        i = int(np.argmax(over))
        raise CapacityViolation(
            f"window {first_window + i}: X(d)={int(spent[i])} > M={capacity}", first_window + i)
    return spent


def honest_solves(validator: int, k: int, p: float, rng: np.random.Generator) -> int:
    """Binomial(k, p) solve count for one honest validator."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return int(rng.binomial(k, p))


def min_humans(s: int, k: int, tau_h: int) -> int:
    """Fewest humans able to solve all ``k`` challenges for ``s`` identities."""
    if s < 1 or k < 1 or tau_h < 1:
        raise ValueError("s, k and tau_h must be >= 1")
    return -(-s * k // tau_h)


def parse_strategy(spec: str) -> tuple[str, int]:
    """``"rotate:3"`` -> ("rotate", 3); bare names get period 1."""
    name, _, arg = spec.partition(":")
    if name not in STRATEGIES:
        raise ValueError(f"unknown allocation strategy {spec!r}")
    period = int(arg) if arg else 1
    if period < 1:
        raise ValueError("rotate period must be >= 1")
    return name, period


def allocation_vector(s: int, capacity: int, k: int, strategy: str = "concentrate",
                      window: int = 0) -> np.ndarray:
    """Per-identity solve counts for identities in creation order.

    ``concentrate`` fills identities to ``k`` in order; ``spread`` deals one
    solve at a time round-robin; ``rotate[:period]`` is ``concentrate`` with
    the starting identity shifted by one every ``period`` windows.
    """
    name, period = parse_strategy(strategy)
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    out = np.zeros(s, dtype=np.int64)
    total = min(capacity, s * k)
    if total == 0:
        return out
    if name == "spread":
        base, extra = divmod(total, s)
        out[:] = base
        out[:extra] += 1
        return out
    full, rest = divmod(total, k)
    out[:full] = k
    if rest:
        out[full] = rest
    if name == "rotate":
        out = np.roll(out, (window // period) % s)
    return out


def allocate_adversary(identities: Sequence[int], capacity: int, k: int,
                       strategy: str = "concentrate", window: int = 0) -> dict[int, int]:
    """Split ``capacity`` solves across ``identities``, at most ``k`` each."""
    ids = list(identities)
    vec = allocation_vector(len(ids), capacity, k, strategy, window)
    return {a: int(x) for a, x in zip(ids, vec)}
