"""Commitment state (H, P, U), its update rules and the commitment score.

The scalar functions operate on a single :class:`CommitmentState`.
:class:`Population` applies the identical formulas to numpy columns holding a
whole validator set and is what the simulator uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

OFFLINE_PARTICIPATION = ("frozen", "compliance", "slash")


class ContractViolation(ValueError):
    """A caller broke an operation's precondition."""


@dataclass(frozen=True)
class CommitmentState:
    engagement: float = 0.0
    participation: float = 0.0
    availability: float = 0.0

    def __post_init__(self) -> None:
        if min(self.engagement, self.participation, self.availability) < 0:
            raise ContractViolation(f"negative commitment component in {self}")

    def __add__(self, other: CommitmentState) -> CommitmentState:
        return CommitmentState(
            self.engagement + other.engagement,
            self.participation + other.participation,
            self.availability + other.availability,
        )


@dataclass(frozen=True)
class ProtocolParams:
    """Scoring and dynamics constants. Defaults are the reference parameter set."""

    weight_engagement: float = 1.0
    weight_participation: float = 0.5
    weight_availability: float = 0.1
    boost_engagement: float = 1.0
    boost_participation: float = 0.5
    boost_availability: float = 0.2
    decay_rate: float = 0.05
    slash_factor: float = 0.1
    leader_scale: float = 1.0
    committee_scale: float = 10.0
    # k(d) schedule, cycled over windows
    challenge_rate: tuple[int, ...] = (1,)
    human_solve_cap: int = 1
    availability_cap: float = math.inf
    engagement_decay: float = 0.0
    offline_participation: str = "frozen"

    def __post_init__(self) -> None:
        weights = (self.weight_engagement, self.weight_participation, self.weight_availability)
        if min(weights) < 0:
            raise ValueError("weights must be non-negative")
        if max(weights) <= 0:
            raise ValueError("at least one weight must be positive")
        for name in ("boost_engagement", "boost_participation", "boost_availability",
                     "decay_rate", "leader_scale", "committee_scale"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0")
        if not 0 < self.slash_factor < 1:
            raise ValueError("slash_factor must lie in (0, 1)")
        rates = tuple(int(k) for k in self.challenge_rate)
        if not rates or min(rates) < 1:
            raise ValueError("challenge_rate entries must be positive integers")
        object.__setattr__(self, "challenge_rate", rates)
        if self.human_solve_cap < 1:
            raise ValueError("human_solve_cap must be >= 1")
        if not self.availability_cap > 0:
            raise ValueError("availability_cap must be > 0")
        if self.engagement_decay < 0:
            raise ValueError("engagement_decay must be >= 0")
        if self.offline_participation not in OFFLINE_PARTICIPATION:
            raise ValueError(f"offline_participation must be one of {OFFLINE_PARTICIPATION}")

    def k(self, window: int) -> int:
        """Challenge rate k(d) for window ``window``."""
        return self.challenge_rate[window % len(self.challenge_rate)]


def compute_score(state: CommitmentState, params: ProtocolParams) -> float:
    return (params.weight_engagement * state.engagement
            + params.weight_participation * state.participation
            + params.weight_availability * state.availability)


def _next_participation(p, online, compliant, params: ProtocolParams):
    accrued = p + params.boost_participation
    slashed = p * params.slash_factor
    active = np.where(compliant, accrued, slashed)
    mode = params.offline_participation
    if mode == "frozen":
        idle = p
    elif mode == "compliance":
        idle = active
    else:
        idle = slashed
    return np.where(online, active, idle)


def epoch_update(state: CommitmentState, online: bool, compliant: bool,
                 params: ProtocolParams) -> CommitmentState:
    """Per-epoch availability and participation rules; H is untouched.

    Offline validators decay U by ``exp(-decay_rate)``. Online validators
    gain ``boost_participation`` when compliant and are slashed otherwise.
    Offline P follows ``params.offline_participation``: unchanged (``frozen``,
    the default), the same compliant/violating rule (``compliance``), or
    slashed (``slash``).
    """
    if online:
        u = min(state.availability + params.boost_availability, params.availability_cap)
    else:
        u = state.availability * math.exp(-params.decay_rate)
    p = float(_next_participation(state.participation, online, compliant, params))
    return CommitmentState(state.engagement, p, u)


def window_update(state: CommitmentState, solved: int, params: ProtocolParams,
                  window: int = 0) -> CommitmentState:
    """Window-boundary boost ``H + boost_engagement * solved``."""
    k = params.k(window)
    if not 0 <= solved <= k:
        raise ContractViolation(f"solved={solved} outside [0, k(d)={k}] in window {window}")
    h = state.engagement
    if params.engagement_decay:
        h *= math.exp(-params.engagement_decay)
    return CommitmentState(h + params.boost_engagement * solved,
                           state.participation, state.availability)


def slash(state: CommitmentState, params: ProtocolParams) -> CommitmentState:
    return CommitmentState(state.engagement, state.participation * params.slash_factor,
                           state.availability)


@dataclass
class Population:
    """Column-wise commitment state for validators ``0..n-1``."""

    engagement: np.ndarray
    participation: np.ndarray
    availability: np.ndarray

    @classmethod
    def zeros(cls, n: int) -> Population:
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))

    @classmethod
    def from_states(cls, states: Sequence[CommitmentState]) -> Population:
        return cls(np.array([s.engagement for s in states], dtype=float),
                   np.array([s.participation for s in states], dtype=float),
                   np.array([s.availability for s in states], dtype=float))

    def __len__(self) -> int:
        return len(self.engagement)

    def state(self, v: int) -> CommitmentState:
        return CommitmentState(float(self.engagement[v]), float(self.participation[v]),
                               float(self.availability[v]))

    def scores(self, params: ProtocolParams) -> np.ndarray:
        return (params.weight_engagement * self.engagement
                + params.weight_participation * self.participation
                + params.weight_availability * self.availability)

    def epoch_update(self, online: np.ndarray, compliant: np.ndarray,
                     params: ProtocolParams) -> None:
        u = self.availability
        self.availability = np.where(
            online,
            np.minimum(u + params.boost_availability, params.availability_cap),
            u * math.exp(-params.decay_rate),
        )
        self.participation = _next_participation(self.participation, online, compliant, params)

    def window_update(self, solved: np.ndarray, params: ProtocolParams, window: int) -> None:
        k = params.k(window)
        if len(solved) and (solved.min() < 0 or solved.max() > k):
            raise ContractViolation(f"solve counts outside [0, {k}] in window {window}")
        h = self.engagement
        if params.engagement_decay:
            h = h * math.exp(-params.engagement_decay)
        self.engagement = h + params.boost_engagement * solved

    def slash(self, offenders: Sequence[int], params: ProtocolParams) -> None:
        for v in offenders:
            self.participation[v] *= params.slash_factor
