"""Deterministic epoch/window engine and the metrics computed from its traces.

Within one epoch the order is fixed: adversary step, availability and
participation updates, score recomputation, leader election, block proposal
and fork choice, equivocation slashing, and finally (at a window boundary)
HCO solve accounting and the engagement update. H changes made at a boundary
are therefore first visible to the next epoch's election.

Adversary policies and HCO solve draws do not depend on chain state, so they
are planned for the whole horizon before the epoch loop.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .adversary import Adversary, AdversaryConfig, CostLedger
from .chain import GENESIS, Block, BlockStore, detect_equivocation, prefers, _Desc
from .election import (RESOLUTIONS, beacon, bootstrap_index, derive_keys, resolve_leaders,
                       sortition_matrix, win_probabilities)
from .hco import CapacityViolation, HcoParams, check_windows
from .state import Population, ProtocolParams
from .timeline import Timeline

HONEST, ADVERSARIAL = "honest", "adversarial"


class InvariantViolation(AssertionError):
    pass


@dataclass(frozen=True)
class HonestConfig:
    count: int = 50
    online_prob: float = 0.995

    def __post_init__(self) -> None:
        if self.count < 1:
            raise ValueError("honest count must be >= 1")
        if not 0.0 <= self.online_prob <= 1.0:
            raise ValueError("online_prob must be a probability")


@dataclass(frozen=True)
class ElectionConfig:
    leader_resolution: str = "normalized"
    beacon_domain_tag: str = "beacon"

    def __post_init__(self) -> None:
        if self.leader_resolution not in RESOLUTIONS:
            raise ValueError(f"leader_resolution must be one of {RESOLUTIONS}")


@dataclass(frozen=True)
class ExperimentConfig:
    timeline: Timeline = field(default_factory=Timeline)
    protocol: ProtocolParams = field(default_factory=ProtocolParams)
    hco: HcoParams = field(default_factory=HcoParams)
    honest: HonestConfig = field(default_factory=HonestConfig)
    adversary: AdversaryConfig = field(default_factory=AdversaryConfig)
    election: ElectionConfig = field(default_factory=ElectionConfig)
    seed: int = 0
    bft: bool = False
    rho: float = 0.45
    freeze_epoch_state: bool = False
    retain_scores: bool = False

    def __post_init__(self) -> None:
        if not 0.0 < self.rho < 0.5:
            raise ValueError("rho must lie in (0, 1/2)")
        if self.bft and self.adversary.private_fork:
            raise ValueError("bft mode does not model private forks")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class ForkEvent:
    start_epoch: int
    end_epoch: int
    private_blocks: int
    displaced: int
    adopted: bool


@dataclass
class ExperimentTrace:
    honest_count: int
    adversary_count: int
    epochs_per_window: int
    W_H: np.ndarray
    W_A: np.ndarray
    leader: np.ndarray = None
    bootstrap: np.ndarray = None
    head_weight: np.ndarray = None
    chain_len: np.ndarray = None
    evidence_count: np.ndarray = None
    whm_ok: np.ndarray = None
    X_d: np.ndarray = None
    adversary_capacity: int = 0
    honest_solves_total: np.ndarray = None
    scores: np.ndarray | None = None
    fork_events: list[ForkEvent] = field(default_factory=list)
    conflicting_finalizations: int = 0
    finalized_blocks: int = 0
    bft_weight_ok: bool = True
    costs: CostLedger = field(default_factory=CostLedger)
    resolution: str = "normalized"
    theta: float = 1.0

    def __post_init__(self) -> None:
        t = len(self.W_H)
        if self.leader is None:
            self.leader = np.full(t, -1)
        for name, dtype in (("bootstrap", bool), ("head_weight", float), ("chain_len", int),
                            ("evidence_count", int), ("whm_ok", bool)):
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(t, dtype=dtype))

    @property
    def horizon(self) -> int:
        return len(self.W_H)

    @property
    def empty(self) -> np.ndarray:
        return self.leader < 0

    def leader_class(self, t: int) -> str:
        v = int(self.leader[t])
        if v < 0:
            return ""
        return HONEST if v < self.honest_count else ADVERSARIAL

    def final_weight_share(self) -> float:
        total = self.W_H[-1] + self.W_A[-1]
        return float(self.W_A[-1] / total) if total > 0 else 0.0


# -- random streams ------------------------------------------------------

def stream(seed: int, tag: str) -> np.random.Generator:
    digest = hashlib.blake2b(tag.encode(), key=struct.pack("<Q", seed), digest_size=16).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


# -- engine ----------------------------------------------------------------

class _Fork:
    """Withheld adversarial branch."""

    def __init__(self, base: str, store: BlockStore, epoch: int) -> None:
        self.base = base
        self.start = epoch
        self.blocks: list[Block] = []
        self.weight = store.weight[base]
        self.length = store.length[base]

    @property
    def tip(self) -> str:
        return self.blocks[-1].id if self.blocks else self.base

    def rank(self) -> tuple:
        return (self.weight, self.length, _Desc(self.tip))


def prefers_fork(store: BlockStore, fork: _Fork, head: str) -> bool:
    return bool(fork.blocks) and fork.rank() > store.rank(head)


class _ChainWalk:
    """Steps (5) and (6): block proposal, fork choice, private forks, slashing
    and the optional BFT voting round, one epoch at a time."""

    def __init__(self, config: ExperimentConfig, adversary: Adversary, T: int) -> None:
        self.config = config
        self.adversary = adversary
        self.nh = config.honest.count
        self.store = BlockStore()
        self.head = GENESIS
        self.fork: _Fork | None = None
        self.fork_events: list[ForkEvent] = []
        self.evidence_total = 0
        self.finalized = self.conflicting = 0
        self.bft_ok = True
        self.rng_split = stream(config.seed, "bft-split")
        self.head_w = np.zeros(T)
        self.chain_len = np.zeros(T, dtype=np.int64)
        self.evid = np.zeros(T, dtype=np.int64)

    def _slash(self, block: Block, pop: Population | None) -> None:
        if detect_equivocation(block, self.store):
            if pop is None:
                raise InvariantViolation(f"epoch {block.epoch}: slash in a run planned without one")
            self.evidence_total += 1
            self.adversary.costs.slash_events += 1
            pop.slash([block.leader], self.config.protocol)

    def _publish(self, t: int, pop: Population | None) -> None:
        f, store = self.fork, self.store
        old = self.head
        for b in f.blocks:
            self._slash(b, pop)
            store.add(b)
        adopted = bool(f.blocks) and prefers(store, f.tip, old)
        displaced = 0
        if adopted:
            ca = store.common_ancestor(old, f.tip)
            displaced = store.length[old] - store.length[ca]
            self.head = f.tip
        self.fork_events.append(ForkEvent(f.start, t, len(f.blocks), displaced, adopted))
        self.fork = None

    def step(self, t: int, leader: int, cs: np.ndarray, r: float,
             pop: Population | None, last: bool) -> None:
        adv_cfg, store = self.config.adversary, self.store
        if leader >= 0:
            snap = float(cs[leader])
            is_adv = leader >= self.nh
            if is_adv and adv_cfg.private_fork:
                if self.fork is None:
                    self.fork = _Fork(self.head, store, t)
                b = Block(self.fork.tip, t, leader, snap, r, "a")
                self.fork.blocks.append(b)
                self.fork.weight += snap
                self.fork.length += 1
            else:
                parent = self.head
                proposed = [Block(parent, t, leader, snap, r, "a")]
                if is_adv and adv_cfg.equivocate:
                    proposed.append(Block(parent, t, leader, snap, r, "b"))
                for b in proposed:
                    self._slash(b, pop)
                    store.add(b)
                    if prefers(store, b.id, self.head):
                        self.head = b.id
                if self.config.bft:
                    self._vote(cs, len(proposed))

        fork = self.fork
        if fork is not None:
            lead = fork.length - store.length[self.head]
            if ((lead >= adv_cfg.fork_publish_lead and prefers_fork(store, fork, self.head))
                    or -lead >= adv_cfg.fork_abandon_deficit or last):
                self._publish(t, pop)

        self.head_w[t] = store.weight[self.head]
        self.chain_len[t] = store.length[self.head]
        self.evid[t] = self.evidence_total

    def _vote(self, cs: np.ndarray, siblings: int) -> None:
        """One weighted voting round over the sibling proposals of this height.

        Honest voters back exactly one sibling; adversarial voters back all.
        """
        nh = self.nh
        tot = cs.sum()
        adv = cs[nh:].sum()
        if not adv * 3 < tot:
            self.bft_ok = False
        if siblings == 1:
            tallies = np.array([cs[:nh].sum()])
        else:
            side = self.rng_split.integers(0, siblings, nh)
            tallies = np.bincount(side, weights=cs[:nh], minlength=siblings)
        tallies = tallies + adv
        done = int((3 * tallies > 2 * tot).sum())
        self.finalized += done
        self.conflicting += max(0, done - 1)


def run(config: ExperimentConfig, interleave: bool | None = None) -> ExperimentTrace:
    """Simulate one run; identical configs give identical traces.

    Scores only feed back from the chain through equivocation slashing, so
    without an equivocating adversary the state trajectory is computed first
    and elections are resolved in one batch. ``interleave=True`` forces the
    epoch-by-epoch path (both paths produce identical traces).
    """
    tl, params = config.timeline, config.protocol
    T, E = tl.horizon_epochs, tl.epochs_per_window
    W = tl.window_count
    nh, s = config.honest.count, config.adversary.sybil_count
    n = nh + s
    if interleave is None:
        interleave = config.adversary.equivocate
    adversary = Adversary(config.adversary, nh, params.human_solve_cap)
    adv_slice = slice(nh, n)

    seed = config.seed
    tag = config.election.beacon_domain_tag.encode()
    beacons = [beacon(seed, t, tag) for t in range(T)]
    sortition = sortition_matrix(derive_keys(seed, n), beacons)

    def fail(t: int, msg: str) -> InvariantViolation:
        return InvariantViolation(f"epoch {t}: {msg}")

    # (1) adversary actions and HCO solve accounting for every window
    ks = np.array([params.k(d) for d in range(W)], dtype=np.int64)
    adv_online, alloc = adversary.plan(tl, params)
    honest_solved = stream(seed, "honest-solve").binomial(
        ks[:, None], config.hco.honest_solve_prob, (W, nh))
    automated = np.zeros((W, n), dtype=np.int64)
    eps = config.hco.automated_solve_prob
    if eps > 0 and s:
        automated[:, nh:] = stream(seed, "automated-solve").binomial(ks[:, None] - alloc, eps)
    solved = np.concatenate([honest_solved, alloc], axis=1)
    try:
        X_d = check_windows(solved, automated, ks, adv_slice, adversary.capacity)
    except CapacityViolation as exc:
        raise fail(tl.epochs_in(exc.window)[-1], str(exc)) from exc
    adversary.costs.record_spend(X_d)
    credited = (solved + automated).astype(float)

    online = None
    if not config.freeze_epoch_state:
        online = np.empty((T, n), dtype=bool)
        online[:, :nh] = stream(seed, "honest-online").random((T, nh)) < config.honest.online_prob
        lengths = [len(tl.epochs_in(d)) for d in range(W)]
        online[:, nh:] = np.repeat(adv_online, lengths, axis=0)

    pop = Population.zeros(n)
    theta = params.leader_scale
    resolution = config.election.leader_resolution
    walk = _ChainWalk(config, adversary, T)
    CS = np.empty((T, n))
    leaders = np.full(T, -1, dtype=np.int64)
    boot = np.zeros(T, dtype=bool)

    def elect(lo: int, hi: int) -> None:
        leaders[lo:hi] = resolve_leaders(CS[lo:hi], sortition[lo:hi], theta, resolution)
        for t in np.nonzero(CS[lo:hi].sum(axis=1) <= 0)[0] + lo:
            leaders[t] = bootstrap_index(beacons[t], n)
            boot[t] = True

    def walk_step(t: int) -> None:
        v = int(leaders[t])
        r = float(sortition[t, v]) if v >= 0 else 0.0
        walk.step(t, v, CS[t], r, pop if interleave else None, t == T - 1)

    for t in range(T):
        # (2) availability and participation, (3) scores
        if online is not None:
            pop.epoch_update(online[t], online[t], params)
        CS[t] = pop.scores(params)
        if interleave:
            # (4) election, (5) proposal and fork choice, (6) slashing
            elect(t, t + 1)
            walk_step(t)
        # (7) window boundary
        if tl.is_window_boundary(t):
            d = t // E
            pop.window_update(credited[d], params, d)

    if not interleave:
        elect(0, T)
        for t in range(T):
            walk_step(t)

    # components only shrink by positive factors, so a negative one shows up in CS
    negative = (CS < 0).any(axis=1)
    if negative.any():
        raise fail(int(np.argmax(negative)), "negative commitment score")
    W_H = CS[:, :nh].sum(axis=1)
    W_A = CS[:, nh:].sum(axis=1)
    total = CS.sum(axis=1)
    bad = np.abs(W_H + W_A - total) > 1e-9 * np.maximum(1.0, total)
    if bad.any():
        raise fail(int(np.argmax(bad)), "score conservation broken")

    return ExperimentTrace(
        honest_count=nh, adversary_count=s, epochs_per_window=E,
        W_H=W_H, W_A=W_A, leader=leaders, bootstrap=boot, head_weight=walk.head_w,
        chain_len=walk.chain_len, evidence_count=walk.evid,
        whm_ok=W_A <= config.rho * (W_H + W_A), X_d=np.asarray(X_d, dtype=np.int64),
        adversary_capacity=adversary.capacity, honest_solves_total=honest_solved.sum(axis=1),
        scores=CS if config.retain_scores else None, fork_events=walk.fork_events,
        conflicting_finalizations=walk.conflicting, finalized_blocks=walk.finalized,
        bft_weight_ok=walk.bft_ok, costs=adversary.costs, resolution=resolution, theta=theta,
    )


# -- metrics -------------------------------------------------------------

def check_drift(trace: ExperimentTrace, tol: float = 1e-9) -> tuple[bool, int | None]:
    """Is W_H - W_A non-decreasing across window starts?

    Returns ``(ok, first_violating_window)``.
    """
    starts = np.arange(0, trace.horizon, trace.epochs_per_window)
    gap = (trace.W_H - trace.W_A)[starts]
    drops = np.nonzero(np.diff(gap) < -tol)[0]
    if len(drops):
        return False, int(drops[0] + 1)
    return True, None


def leader_share(trace: ExperimentTrace, cls: str = ADVERSARIAL) -> float | None:
    led = trace.leader[trace.leader >= 0]
    if len(led) == 0:
        return None
    adv = int((led >= trace.honest_count).sum())
    if cls == ADVERSARIAL:
        return adv / len(led)
    if cls == HONEST:
        return (len(led) - adv) / len(led)
    raise ValueError(f"unknown class {cls!r}")


def win_probability_matrix(trace: ExperimentTrace) -> np.ndarray:
    """Exact per-epoch leader probabilities for every validator."""
    if trace.scores is None:
        raise ValueError("trace was recorded without per-epoch scores")
    sc = trace.scores
    totals = sc.sum(axis=1)
    out = np.full(sc.shape, 1.0 / sc.shape[1])
    live = totals > 0
    if live.any():
        tau = np.minimum(1.0, trace.theta * sc[live] / totals[live, None])
        out[live] = win_probabilities(tau, trace.resolution)
    return out


@dataclass(frozen=True)
class Fairness:
    validators: np.ndarray
    empirical: np.ndarray
    expected: np.ndarray

    @property
    def deviation(self) -> np.ndarray:
        return np.abs(self.empirical - self.expected)

    @property
    def max_deviation(self) -> float:
        return float(self.deviation.max()) if len(self.deviation) else 0.0


def fairness_deviation(traces: ExperimentTrace | Sequence[ExperimentTrace],
                       validators: Iterable[int] | None = None) -> Fairness:
    """Empirical leader frequency vs mean exact win probability per validator.

    Several traces of the same population are pooled epoch-wise.
    """
    traces = [traces] if isinstance(traces, ExperimentTrace) else list(traces)
    nh = traces[0].honest_count
    ids = np.arange(nh) if validators is None else np.asarray(list(validators))
    wins = np.zeros(len(ids))
    expect = np.zeros(len(ids))
    epochs = 0
    for tr in traces:
        probs = win_probability_matrix(tr)
        led = tr.leader[tr.leader >= 0]
        counts = np.bincount(led, minlength=probs.shape[1])
        wins += counts[ids]
        expect += probs[:, ids].sum(axis=0)
        epochs += tr.horizon
    return Fairness(ids, wins / epochs, expect / epochs)


def reorg_profile(traces: ExperimentTrace | Sequence[ExperimentTrace],
                  depths: Sequence[int] = range(1, 7)) -> dict[int, float]:
    """Fraction of fork publications displacing at least ``k`` public blocks."""
    traces = [traces] if isinstance(traces, ExperimentTrace) else list(traces)
    displaced = np.array([e.displaced for tr in traces for e in tr.fork_events])
    if len(displaced) == 0:
        return {k: 0.0 for k in depths}
    return {k: float((displaced >= k).mean()) for k in depths}


def p_min(trace: ExperimentTrace, warmup: float = 0.1) -> float:
    start = int(math.floor(warmup * trace.horizon))
    tot = trace.W_H + trace.W_A
    ok = tot[start:] > 0
    return float((trace.W_H[start:][ok] / tot[start:][ok]).min())


def honest_leader_gaps(trace: ExperimentTrace) -> np.ndarray:
    led = np.nonzero((trace.leader >= 0) & (trace.leader < trace.honest_count))[0]
    return np.diff(led)


def summarize(trace: ExperimentTrace) -> dict[str, object]:
    drift_ok, first_bad = check_drift(trace)
    share = leader_share(trace)
    depths = [e.displaced for e in trace.fork_events]
    return {
        "epochs": trace.horizon,
        "leader_share_adv": share,
        "weight_share_final": trace.final_weight_share(),
        "W_H_final": float(trace.W_H[-1]),
        "W_A_final": float(trace.W_A[-1]),
        "drift_ok": drift_ok,
        "drift_first_violation": first_bad,
        "chain_len": int(trace.chain_len[-1]),
        "empty_rate": float(trace.empty.mean()),
        "bootstrap_epochs": int(trace.bootstrap.sum()),
        "whm_violations": int((~trace.whm_ok).sum()),
        "evidence_count": int(trace.evidence_count[-1]),
        "human_time_total": trace.costs.human_time_spent,
        "node_epochs_online": trace.costs.node_epochs_online,
        "slash_events": trace.costs.slash_events,
        "fork_publications": len(depths),
        "max_reorg_depth": max(depths, default=0),
        "finalized_blocks": trace.finalized_blocks,
        "conflicting_finalizations": trace.conflicting_finalizations,
        "bft_weight_ok": trace.bft_weight_ok,
    }
