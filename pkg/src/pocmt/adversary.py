"""Centralized Sybil adversary under a per-window human-time capacity."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .hco import WindowLedger, allocation_vector, parse_strategy
from .state import ProtocolParams
from .timeline import Timeline

ONLINE_POLICIES = ("always", "offline", "rotate")


def parse_online_policy(spec: str) -> tuple[str, float]:
    """``"rotate:0.5"`` -> ("rotate", 0.5)."""
    name, _, arg = spec.partition(":")
    if name not in ONLINE_POLICIES:
        raise ValueError(f"unknown online policy {spec!r}")
    if name != "rotate":
        if arg:
            raise ValueError(f"online policy {name!r} takes no argument")
        return name, 1.0 if name == "always" else 0.0
    frac = float(arg) if arg else 0.5
    if not 0.0 <= frac <= 1.0:
        raise ValueError(f"rotate fraction {frac} outside [0, 1]")
    return name, frac


@dataclass(frozen=True)
class AdversaryConfig:
    sybil_count: int = 100
    adversary_humans: int = 10
    adversary_strategy: str = "concentrate"
    online_policy: str = "always"
    equivocate: bool = False
    private_fork: bool = False
    # a private fork is published once it outranks the public head and is this many
    # blocks longer; a losing one is given up once the public head is this far ahead
    fork_publish_lead: int = 2
    fork_abandon_deficit: int = 8

    def __post_init__(self) -> None:
        if self.sybil_count < 0:
            raise ValueError("sybil_count must be >= 0")
        if self.adversary_humans < 0:
            raise ValueError("adversary_humans must be >= 0")
        if self.fork_publish_lead < 1:
            raise ValueError("fork_publish_lead must be >= 1")
        if self.fork_abandon_deficit < 1:
            raise ValueError("fork_abandon_deficit must be >= 1")
        parse_strategy(self.adversary_strategy)
        parse_online_policy(self.online_policy)

    def capacity(self, tau_h: int) -> int:
        """M = m * tau_h solves per window."""
        return self.adversary_humans * tau_h


@dataclass
class CostLedger:
    human_time_spent: int = 0
    node_epochs_online: int = 0
    slash_events: int = 0
    window_spend: list[int] = field(default_factory=list)

    def close_window(self, ledger: WindowLedger) -> None:
        self.record_spend([ledger.verify()])

    def record_spend(self, spend) -> None:
        """Append already verified per-window X(d) values."""
        spend = [int(x) for x in spend]
        self.window_spend.extend(spend)
        self.human_time_spent += sum(spend)


@dataclass(frozen=True)
class AdversaryActions:
    """What the adversary does in one epoch.

    ``allocation`` (solve counts per identity, creation order) is only set on
    the first epoch of a window.
    """

    online: np.ndarray
    allocation: np.ndarray | None = None
    equivocate: bool = False
    private_fork: bool = False

    def allocation_map(self, first_id: int) -> dict[int, int]:
        if self.allocation is None:
            return {}
        return {first_id + i: int(x) for i, x in enumerate(self.allocation)}


class Adversary:
    """Chooses per-epoch actions for identities ``first_id .. first_id+s-1``."""

    def __init__(self, config: AdversaryConfig, first_id: int, tau_h: int) -> None:
        self.config = config
        self.first_id = first_id
        self.identities = range(first_id, first_id + config.sybil_count)
        self.capacity = config.capacity(tau_h)
        self.costs = CostLedger()
        self._policy, self._fraction = parse_online_policy(config.online_policy)
        self._online: dict[int, np.ndarray] = {}
        self._alloc: dict[tuple[int, int], np.ndarray] = {}

    def online_set(self, window: int) -> np.ndarray:
        s = len(self.identities)
        if self._policy == "rotate" and s:
            n_on = int(round(self._fraction * s))
            shift = (window * n_on) % s
        else:
            n_on, shift = 0, 0
        mask = self._online.get(shift)
        if mask is None:
            if self._policy == "always":
                mask = np.ones(s, dtype=bool)
            else:
                mask = np.zeros(s, dtype=bool)
                mask[(shift + np.arange(n_on)) % max(s, 1)] = True
            mask.flags.writeable = False
            self._online[shift] = mask
        return mask

    def allocation(self, window: int, k: int) -> np.ndarray:
        name, period = parse_strategy(self.config.adversary_strategy)
        s = len(self.identities)
        offset = (window // period) % s if name == "rotate" and s else 0
        vec = self._alloc.get((k, offset))
        if vec is None:
            vec = allocation_vector(s, self.capacity, k, self.config.adversary_strategy, window)
            vec.flags.writeable = False
            self._alloc[(k, offset)] = vec
        return vec

    def plan(self, timeline: Timeline, params: ProtocolParams) -> tuple[np.ndarray, np.ndarray]:
        """Online masks and solve allocations for every window, each (windows, s).

        Equivalent to calling :meth:`step` for every epoch; the policies do not
        depend on chain state, so the whole horizon can be planned at once.
        """
        w, s = timeline.window_count, len(self.identities)
        online = np.array([self.online_set(d) for d in range(w)], dtype=bool).reshape(w, s)
        alloc = np.array([self.allocation(d, params.k(d)) for d in range(w)],
                         dtype=np.int64).reshape(w, s)
        lengths = np.array([len(timeline.epochs_in(d)) for d in range(w)])
        self.costs.node_epochs_online += int(online.sum(axis=1) @ lengths)
        return online, alloc

    def step(self, window: int, epoch: int, window_start: bool, k: int) -> AdversaryActions:
        online = self.online_set(window)
        self.costs.node_epochs_online += int(online.sum())
        alloc = self.allocation(window, k) if window_start else None
        return AdversaryActions(online, alloc, self.config.equivocate, self.config.private_fork)


def total_human_time(ledger: CostLedger, windows: int | None = None) -> int:
    """Sum of X(d) over the first ``windows`` completed windows (all by default)."""
    spend = ledger.window_spend if windows is None else ledger.window_spend[:windows]
    if windows is not None and windows > len(ledger.window_spend):
        raise ValueError(f"only {len(ledger.window_spend)} windows completed")
    return int(sum(spend))
