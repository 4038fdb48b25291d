"""Command line entry point: run a preset or config file, write CSVs and figures.

Exit status is 0 on success, 1 on a configuration error and 2 when a run
trips an invariant (capacity, conservation, BFT safety).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .chain import enumerate_double_voting
from .config import PRESETS, ConfigError, Preset, get_value, load_config, point_label, serialize
from .simulator import (HONEST, ADVERSARIAL, ExperimentConfig, ExperimentTrace, run,
                        summarize, win_probability_matrix)

TRACE_COLUMNS = ("epoch", "window", "W_H", "W_A", "leader_id", "leader_class", "empty_epoch",
                 "head_weight", "chain_len", "evidence_count")
WINDOW_COLUMNS = ("window", "X_d", "adversary_capacity", "honest_solves_total")
REORG_DEPTHS = tuple(range(1, 7))


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


@dataclass(frozen=True)
class Job:
    name: str
    label: str
    seed: int
    config: ExperimentConfig
    out: str


@dataclass
class RunResult:
    label: str
    seed: int
    summary: dict
    W_H: np.ndarray
    W_A: np.ndarray
    displaced: list[int]
    fairness: tuple[np.ndarray, np.ndarray, int] | None = None


def write_trace(path: Path, trace: ExperimentTrace) -> None:
    E, nh = trace.epochs_per_window, trace.honest_count
    leader = trace.leader

    def cls(v: int) -> str:
        return "" if v < 0 else (HONEST if v < nh else ADVERSARIAL)

    _write_csv(path, TRACE_COLUMNS, (
        (t, t // E, trace.W_H[t], trace.W_A[t], leader[t], cls(leader[t]), leader[t] < 0,
         trace.head_weight[t], trace.chain_len[t], trace.evidence_count[t])
        for t in range(trace.horizon)))


def write_windows(path: Path, trace: ExperimentTrace) -> None:
    _write_csv(path, WINDOW_COLUMNS, (
        (d, trace.X_d[d], trace.adversary_capacity, trace.honest_solves_total[d])
        for d in range(len(trace.X_d))))


def execute(job: Job) -> RunResult:
    """Run one (config, seed) pair and write its trace and window CSVs."""
    trace = run(job.config)
    out = Path(job.out)
    stem = f"{job.name}_{job.label}_seed{job.seed}"
    write_trace(out / f"trace_{stem}.csv", trace)
    write_windows(out / f"windows_{stem}.csv", trace)
    fair = None
    if trace.scores is not None:
        probs = win_probability_matrix(trace)
        led = trace.leader[trace.leader >= 0]
        wins = np.bincount(led, minlength=probs.shape[1]).astype(float)
        fair = (wins, probs.sum(axis=0), trace.horizon)
    return RunResult(job.label, job.seed, summarize(trace), trace.W_H, trace.W_A,
                     [e.displaced for e in trace.fork_events], fair)


def _seed_list(spec: str | None, default: Sequence[int]) -> list[int]:
    if spec is None:
        return list(default)
    try:
        if "," in spec:
            seeds = [int(x) for x in spec.split(",") if x.strip()]
        elif "-" in spec:
            lo, hi = (int(x) for x in spec.split("-", 1))
            seeds = list(range(lo, hi + 1))
        else:
            seeds = list(range(int(spec)))
    except ValueError:
        raise ConfigError(f"--seeds: expected N, a-b or a comma list, got {spec!r}") from None
    if not seeds or min(seeds) < 0:
        raise ConfigError(f"--seeds: need at least one non-negative seed, got {spec!r}")
    return seeds


def plan(args: argparse.Namespace) -> tuple[str, Preset | None, list[Job]]:
    source = args.preset or args.config
    configs = load_config(source, args.set or ())
    preset = PRESETS.get(args.preset) if args.preset else None
    if preset is not None:
        name, default_seeds = preset.name, range(preset.seeds)
    else:
        name, default_seeds = Path(args.config).stem, [configs[0].seed]
    seeds = _seed_list(args.seeds, default_seeds)
    out = str(args.out)
    jobs = [Job(name, point_label(preset, cfg), s, dataclasses.replace(cfg, seed=s), out)
            for cfg in configs for s in seeds]
    labels = [j.label for j in jobs]
    if len(set(zip(labels, (j.seed for j in jobs)))) != len(jobs):
        raise ConfigError(f"{source}: overrides collapse sweep points onto the same file names")
    return name, preset, jobs


SUMMARY_COLUMNS = ("label", "runs", "leader_share_mean", "leader_share_std",
                   "weight_share_mean", "weight_share_std", "drift_ok_runs", "chain_len_min",
                   "empty_rate_mean", "whm_violations", "evidence_total", "human_time_mean",
                   "fork_publications", "max_reorg_depth", "finalized_blocks",
                   "conflicting_finalizations")


def _mean_std(xs: Sequence[float]) -> tuple[float, float]:
    a = np.asarray([x for x in xs if x is not None], dtype=float)
    if len(a) == 0:
        return float("nan"), float("nan")
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


def aggregate(results: Sequence[RunResult]) -> list[tuple]:
    rows = []
    for label in dict.fromkeys(r.label for r in results):
        group = [r.summary for r in results if r.label == label]
        ls = _mean_std([g["leader_share_adv"] for g in group])
        ws = _mean_std([g["weight_share_final"] for g in group])
        rows.append((
            label, len(group), *ls, *ws,
            sum(g["drift_ok"] for g in group),
            min(g["chain_len"] for g in group),
            float(np.mean([g["empty_rate"] for g in group])),
            sum(g["whm_violations"] for g in group),
            sum(g["evidence_count"] for g in group),
            float(np.mean([g["human_time_total"] for g in group])),
            sum(g["fork_publications"] for g in group),
            max(g["max_reorg_depth"] for g in group),
            sum(g["finalized_blocks"] for g in group),
            sum(g["conflicting_finalizations"] for g in group),
        ))
    return rows


def report(name: str, preset: Preset | None, jobs: Sequence[Job],
           results: Sequence[RunResult], out: Path, figures: bool) -> list[str]:
    """Write per-run, per-preset and preset-specific CSVs (and figures).

    Returns a list of safety failures; empty means every check held.
    """
    failures: list[str] = []
    keys = list(results[0].summary)
    _write_csv(out / f"runs_{name}.csv", ("label", "seed", *keys),
               ((r.label, r.seed, *(r.summary[k] for k in keys)) for r in results))
    summary = aggregate(results)
    _write_csv(out / f"summary_{name}.csv", SUMMARY_COLUMNS, summary)
    for job in {j.label: j for j in jobs}.values():
        (out / f"config_{name}_{job.label}.txt").write_text(
            serialize(dataclasses.replace(job.config, seed=0)))

    fig_dir = out / "figures"
    cfg0 = jobs[0].config

    if cfg0.adversary.private_fork:
        displaced = np.array([d for r in results for d in r.displaced])
        freq = [float((displaced >= k).mean()) if len(displaced) else 0.0 for k in REORG_DEPTHS]
        _write_csv(out / f"reorg_{name}.csv", ("depth", "frequency", "publications"),
                   ((k, f, len(displaced)) for k, f in zip(REORG_DEPTHS, freq)))
        if figures:
            from .plotting import plot_reorg
            plot_reorg(REORG_DEPTHS, freq, fig_dir / f"reorg_{name}.svg")

    fair = [r.fairness for r in results if r.fairness is not None]
    if fair:
        nh = cfg0.honest.count
        wins = sum(f[0] for f in fair)[:nh]
        expect = sum(f[1] for f in fair)[:nh]
        epochs = sum(f[2] for f in fair)
        emp, exp = wins / epochs, expect / epochs
        _write_csv(out / f"fairness_{name}.csv",
                   ("validator", "empirical", "expected", "deviation"),
                   ((v, emp[v], exp[v], abs(emp[v] - exp[v])) for v in range(nh)))
        if figures:
            from .plotting import plot_fairness
            plot_fairness(exp, emp, fig_dir / f"fairness_{name}.svg")

    if any(j.config.bft for j in jobs):
        enum = enumerate_double_voting()
        _write_csv(out / f"bft_enumeration_{name}.csv",
                   ("instances", "vote_patterns", "conflicting_finalizations"),
                   [(enum.instances, enum.vote_patterns, enum.conflicting_finalizations)])
        if enum.conflicting_finalizations:
            failures.append(f"enumeration found {enum.conflicting_finalizations} conflicts")
        for r in results:
            if r.summary["bft_weight_ok"] and r.summary["conflicting_finalizations"]:
                failures.append(f"{r.label} seed {r.seed}: conflicting finalization "
                                "with adversarial weight below one third")

    if figures:
        _figures(name, preset, jobs, summary, results, fig_dir)
    return failures


def _figures(name: str, preset: Preset | None, jobs: Sequence[Job], summary: list[tuple],
             results: Sequence[RunResult], fig_dir: Path) -> None:
    from . import plotting
    if preset is not None and preset.sweep_key is not None:
        first = {j.label: j.config for j in reversed(jobs)}
        values = [float(get_value(first[row[0]], preset.sweep_key)) for row in summary]
        lead_m, lead_s = [row[2] for row in summary], [row[3] for row in summary]
        wt_m, wt_s = [row[4] for row in summary], [row[5] for row in summary]
        if preset.label == "m":
            plotting.plot_capacity_leader(values, lead_m, lead_s,
                                          fig_dir / f"capacity-leader_{name}.svg")
            plotting.plot_capacity_weight(values, lead_m, wt_m,
                                          fig_dir / f"capacity-weight_{name}.svg")
        else:
            plotting.plot_ablation(values, wt_m, wt_s, fig_dir / f"ablation_{name}.svg")
        return
    first_label = [r for r in results if r.label == results[0].label]
    w_h = np.mean([r.W_H for r in first_label], axis=0)
    w_a = np.mean([r.W_A for r in first_label], axis=0)
    plotting.plot_drift(np.arange(len(w_h)), w_h, w_a, fig_dir / f"drift_{name}.svg")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pocmt", description=__doc__.splitlines()[0])
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=sorted(PRESETS), help="named experiment")
    src.add_argument("--config", help="key=value config file")
    p.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override a config key (repeatable, applied last)")
    p.add_argument("--seeds", help="N (seeds 0..N-1), a-b, or a comma list")
    p.add_argument("--out", default="results", type=Path, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs")
    p.add_argument("--no-figures", action="store_true", help="skip SVG figures")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.jobs < 1:
            raise ConfigError("--jobs: must be >= 1")
        name, preset, jobs = plan(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    args.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        if args.jobs == 1:
            results = [execute(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(execute, jobs))
        failures = report(name, preset, jobs, results, args.out, not args.no_figures)
    except AssertionError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return 2
    for msg in failures:
        print(f"assertion failure: {msg}", file=sys.stderr)
    if failures:
        return 2
    print(f"{name}: {len(jobs)} runs in {time.perf_counter() - start:.1f}s -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
