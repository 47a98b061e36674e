"""Synthetic-instance experiments comparing three scheduling approaches.

An instance is a Poisson stream of runway operations over a fixed duration.
Three approaches produce a schedule for each instance: first-come
first-served, the search engine driven by a deterministic target-deviation
objective, and the search engine driven by the stochastic simulator with
adaptive resampling. Every approach's final schedule is scored by a common
out-of-sample replication set, and the per-approach measures land in one
comparison table.
"""

from __future__ import annotations

import csv
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from runwaysched.baseline import InfeasibleInstanceError, fcfs_schedule
from runwaysched.domain import (
    DEFAULT_FLEET_MIX,
    DEFAULT_MAX_DELAY_MS,
    Aircraft,
    NodeNetwork,
    OperationType,
    RunwayCarry,
    Scenario,
    Schedule,
    WeightClass,
    load_scenario,
    ms_from_s,
    s_from_ms,
    unfairness,
)
from runwaysched.optimizer import (
    Budget,
    Candidate,
    IterationRow,
    OptParams,
    OptResult,
    SchedulingProblem,
    run,
)
from runwaysched.resampling import SedrParams, simulation_evaluator
from runwaysched.simulator import Replications, run_replications

__all__ = [
    "APPROACHES",
    "EXPERIMENT_PRESET",
    "EXPERIMENT_SEDR",
    "ExperimentConfig",
    "ApproachOutcome",
    "MetricsRow",
    "InstanceResult",
    "ExperimentResult",
    "RollingOutcome",
    "generate_instance",
    "sequence_changes",
    "weighted_pick",
    "solve_instance",
    "score_schedule",
    "run_experiment",
    "rolling_horizon",
    "emit_outputs",
]

APPROACHES = ("fcfs", "det", "sbo")

# replication stream for final scoring, disjoint from optimization streams
EVAL_SEED_OFFSET = 7919

# search configuration sized so a full three-approach comparison on an
# hour-long instance finishes in a couple of minutes
EXPERIMENT_PRESET = OptParams(
    psize=30, b=10, improve_threshold=5, dist_threshold=10.0, archive_cap=45
)
EXPERIMENT_SEDR = SedrParams(t_min=3, se_threshold=0.05, hard_cap=12)


@dataclass(frozen=True)
class ExperimentConfig:
    """Instance source, approach selection, and evaluation protocol."""

    rate_per_h: float = 103.0
    duration_s: float = 3600.0
    fleet_mix: tuple[float, float, float, float] = DEFAULT_FLEET_MIX
    arrival_fraction: float = 0.5
    runway_count: int = 3
    approach: str = "all"
    horizon_s: float = 1200.0
    eval_replications: int = 50
    weights: tuple[float, float] = (0.75, 0.25)
    seeds: tuple[int, ...] = (0,)
    scenario_path: str | None = None
    out_dir: str | None = None
    params: OptParams = EXPERIMENT_PRESET
    sedr: SedrParams = EXPERIMENT_SEDR
    antithetic: bool = False
    max_evals: int | None = 25000
    max_iter: int | None = None
    max_cpu_s: float | None = None
    insertion_cap: int | None = 30

    def __post_init__(self) -> None:
        if self.approach not in APPROACHES + ("all",):
            raise ValueError(f"unknown approach {self.approach!r}")
        if abs(self.weights[0] + self.weights[1] - 1.0) > 1e-9:
            raise ValueError("selection weights must sum to 1")
        if self.horizon_s <= 0:
            raise ValueError("horizon must be positive")
        if self.eval_replications < 1:
            raise ValueError("need at least one evaluation replication")
        if self.rate_per_h <= 0 or self.duration_s <= 0:
            raise ValueError("rate and duration must be positive")
        if not 0.0 <= self.arrival_fraction <= 1.0:
            raise ValueError("arrival fraction must lie in [0, 1]")
        if not self.seeds:
            raise ValueError("need at least one seed")

    def approaches(self) -> tuple[str, ...]:
        return APPROACHES if self.approach == "all" else (self.approach,)

    def budget(self) -> Budget:
        return Budget(self.max_evals, self.max_iter, self.max_cpu_s)


def generate_instance(
    rate_per_h: float,
    duration_s: float,
    fleet_mix: Sequence[float] = DEFAULT_FLEET_MIX,
    arrival_fraction: float = 0.5,
    seed: int = 0,
    runway_count: int = 3,
    network: NodeNetwork | None = None,
) -> Scenario:
    """Poisson operation stream: exponential inter-arrival times at the given
    hourly rate, weight class drawn from the fleet mix, operation type from
    the arrival fraction. Ready time is the system arrival plus the
    class-specific unimpeded traversal (zero for departures, which are staged
    at the runway), and the latest allowed start follows 600 s later.
    Deterministic in the seed."""
    if abs(sum(fleet_mix) - 1.0) > 1e-9:
        raise ValueError("fleet mix must sum to 1")
    net = network if network is not None else NodeNetwork()
    rng = np.random.default_rng(seed)
    mean_gap_s = 3600.0 / rate_per_h
    aircraft = []
    t = rng.exponential(mean_gap_s)
    next_id = 1
    while t < duration_s:
        wclass = WeightClass(int(rng.choice(4, p=np.asarray(fleet_mix))))
        op = (
            OperationType.ARRIVAL
            if rng.random() < arrival_fraction
            else OperationType.DEPARTURE
        )
        sysarr_ms = ms_from_s(t)
        traversal_ms = (
            net.arrival_unimpeded_ms(wclass) if op is OperationType.ARRIVAL else 0
        )
        ready_ms = sysarr_ms + traversal_ms
        aircraft.append(
            Aircraft(
                id=next_id,
                op=op,
                wclass=wclass,
                ready_ms=ready_ms,
                target_ms=ready_ms,
                due_ms=ready_ms + DEFAULT_MAX_DELAY_MS,
                system_arrival_ms=sysarr_ms,
            )
        )
        next_id += 1
        t += rng.exponential(mean_gap_s)
    return Scenario(
        aircraft=tuple(aircraft),
        runway_count=runway_count,
        network=net,
        fleet_mix=tuple(fleet_mix),
    )


def _ranks_within_op(scenario: Scenario, start_ms: Sequence[int]) -> list[int]:
    ranks = [0] * scenario.n
    for op in (OperationType.ARRIVAL, OperationType.DEPARTURE):
        members = [i for i, a in enumerate(scenario.aircraft) if a.op is op]
        members.sort(key=lambda i: (start_ms[i], scenario.aircraft[i].id))
        for rank, i in enumerate(members, start=1):
            ranks[i] = rank
    return ranks


def sequence_changes(
    scenario: Scenario, schedule: Schedule, reference: Schedule
) -> int:
    """Number of aircraft whose within-type order differs between a planned
    schedule and a reference plan (the first-come-first-served plan in the
    comparison table, which scores 0 against itself)."""
    got = _ranks_within_op(scenario, schedule.start_ms)
    want = _ranks_within_op(scenario, reference.start_ms)
    return sum(1 for a, b in zip(got, want) if a != b)


def weighted_pick(
    front: Sequence[Candidate], weights: tuple[float, float]
) -> Candidate:
    """Single reported solution: minimize the weighted sum of min-max
    normalized objectives over the front."""
    if not front:
        raise ValueError("cannot pick from an empty front")
    f1s = [c.objectives[0] for c in front]
    f2s = [c.objectives[1] for c in front]
    lo1, hi1 = min(f1s), max(f1s)
    lo2, hi2 = min(f2s), max(f2s)
    span1 = hi1 - lo1 or 1.0
    span2 = hi2 - lo2 or 1.0

    def score(c: Candidate) -> tuple:
        n1 = (c.objectives[0] - lo1) / span1
        n2 = (c.objectives[1] - lo2) / span2
        return (
            weights[0] * n1 + weights[1] * n2,
            c.objectives[0],
            c.objectives[1],
            c.seq,
        )

    return min(front, key=score)


def _deviation_evaluator(scenario: Scenario) -> Callable:
    """Deterministic objectives: total absolute deviation of the planned
    starts from the target times (s), and the planned fairness penalty."""

    def evaluate(schedule: Schedule, k: int, rng) -> tuple[float, float]:
        total_ms = sum(
            abs(start - a.target_ms)
            for start, a in zip(schedule.start_ms, scenario.aircraft)
        )
        return (s_from_ms(total_ms), unfairness(scenario, schedule.start_ms))

    return evaluate


@dataclass(frozen=True)
class ApproachOutcome:
    """One approach's schedule for one instance, plus how it was found."""

    approach: str
    schedule: Schedule
    computation_s: float
    front: tuple[Candidate, ...] = ()
    progress: tuple[IterationRow, ...] = ()
    samples: int = 0


def solve_instance(
    scenario: Scenario, approach: str, config: ExperimentConfig, seed: int
) -> ApproachOutcome:
    """Produce one approach's schedule. Computation time covers only the
    search; time spent inside objective sampling is measured and excluded."""
    if approach == "fcfs":
        t0 = time.perf_counter()
        schedule = fcfs_schedule(scenario)
        return ApproachOutcome("fcfs", schedule, time.perf_counter() - t0)
    sampling_s = 0.0

    def timed(evaluator: Callable) -> Callable:
        def evaluate(schedule, k, rng):
            nonlocal sampling_s
            t = time.perf_counter()
            try:
                return evaluator(schedule, k, rng)
            finally:
                sampling_s += time.perf_counter() - t

        return evaluate

    if approach == "det":
        problem = SchedulingProblem(
            scenario,
            timed(_deviation_evaluator(scenario)),
            sedr=None,
            insertion_cap=config.insertion_cap,
        )
    elif approach == "sbo":
        problem = SchedulingProblem(
            scenario,
            timed(simulation_evaluator(scenario, seed, config.antithetic)),
            sedr=config.sedr,
            insertion_cap=config.insertion_cap,
        )
    else:
        raise ValueError(f"unknown approach {approach!r}")
    t0 = time.perf_counter()
    result = run(problem, config.params, config.budget(), seed=seed)
    elapsed = time.perf_counter() - t0
    picked = weighted_pick(result.front, config.weights)
    return ApproachOutcome(
        approach,
        picked.solution,
        max(elapsed - sampling_s, 0.0),
        front=result.front,
        progress=result.progress,
        samples=result.stats.samples,
    )


@dataclass(frozen=True)
class MetricsRow:
    """One comparison-table row: replication means for one approach."""

    approach: str
    seed: int
    utilization_s: float
    avg_landing_delay_s: float
    longest_landing_delay_s: float
    avg_takeoff_delay_s: float
    longest_takeoff_delay_s: float
    avg_sequence_change: float
    computation_s: float
    error: str = ""


_ROW_FIELDS = (
    "approach",
    "seed",
    "utilization_s",
    "avg_landing_delay_s",
    "longest_landing_delay_s",
    "avg_takeoff_delay_s",
    "longest_takeoff_delay_s",
    "avg_sequence_change",
    "computation_s",
    "error",
)


def score_schedule(
    schedule: Schedule,
    scenario: Scenario,
    config: ExperimentConfig,
    seed: int,
) -> Replications:
    """Common out-of-sample scoring: a replication set on its own stream."""
    return run_replications(
        schedule, scenario, seed + EVAL_SEED_OFFSET, config.eval_replications
    )


def _metrics_row(
    outcome: ApproachOutcome,
    scenario: Scenario,
    reference: Schedule,
    config: ExperimentConfig,
    seed: int,
) -> MetricsRow:
    reps = score_schedule(outcome.schedule, scenario, config, seed)
    outs = reps.outputs

    def mean(values) -> float:
        return float(sum(values)) / len(outs)

    return MetricsRow(
        approach=outcome.approach,
        seed=seed,
        utilization_s=reps.mean.f1,
        avg_landing_delay_s=mean(o.avg_landing_delay_s for o in outs),
        longest_landing_delay_s=mean(o.longest_landing_delay_s for o in outs),
        avg_takeoff_delay_s=mean(o.avg_takeoff_delay_s for o in outs),
        longest_takeoff_delay_s=mean(o.longest_takeoff_delay_s for o in outs),
        avg_sequence_change=float(
            sequence_changes(scenario, outcome.schedule, reference)
        ),
        computation_s=outcome.computation_s,
    )


def _failed_row(approach: str, seed: int, error: str) -> MetricsRow:
    return MetricsRow(
        approach, seed, *(float("nan"),) * 6, 0.0, error=error
    )


@dataclass(frozen=True)
class InstanceResult:
    seed: int
    scenario: Scenario
    rows: tuple[MetricsRow, ...]
    outcomes: tuple[ApproachOutcome, ...]


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    instances: tuple[InstanceResult, ...]

    def rows(self) -> list[MetricsRow]:
        return [row for inst in self.instances for row in inst.rows]


def _load_or_generate(config: ExperimentConfig, seed: int) -> Scenario:
    if config.scenario_path is not None:
        return load_scenario(config.scenario_path)
    return generate_instance(
        config.rate_per_h,
        config.duration_s,
        config.fleet_mix,
        config.arrival_fraction,
        seed=seed,
        runway_count=config.runway_count,
    )


def _run_instance(config: ExperimentConfig, seed: int) -> InstanceResult:
    scenario = _load_or_generate(config, seed)
    try:
        reference = fcfs_schedule(scenario)
    except InfeasibleInstanceError as err:
        rows = tuple(
            _failed_row(a, seed, str(err)) for a in config.approaches()
        )
        return InstanceResult(seed, scenario, rows, ())
    rows = []
    outcomes = []
    for approach in config.approaches():
        try:
            outcome = solve_instance(scenario, approach, config, seed)
        except InfeasibleInstanceError as err:
            # one failing approach must not take the others down
            rows.append(_failed_row(approach, seed, str(err)))
            continue
        outcomes.append(outcome)
        rows.append(_metrics_row(outcome, scenario, reference, config, seed))
    return InstanceResult(seed, scenario, tuple(rows), tuple(outcomes))


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Solve and score every (instance seed, approach) pair; write the output
    files when the configuration names a directory. Worker parallelism comes
    from the RUNWAY_SBO_THREADS environment variable (default sequential);
    outputs are keyed by seed, so the result does not depend on it."""
    workers = int(os.environ.get("RUNWAY_SBO_THREADS", "1"))
    if workers > 1 and len(config.seeds) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            instances = list(
                pool.map(_run_instance, [config] * len(config.seeds), config.seeds)
            )
    else:
        instances = [_run_instance(config, seed) for seed in config.seeds]
    result = ExperimentResult(config, tuple(instances))
    if config.out_dir is not None:
        emit_outputs(result, config.out_dir)
    return result


@dataclass(frozen=True)
class RollingOutcome:
    schedule: Schedule
    windows: int
    per_window: tuple[ApproachOutcome, ...]


def rolling_horizon(
    scenario: Scenario,
    window_s: float,
    config: ExperimentConfig,
    seed: int = 0,
    approach: str = "sbo",
) -> RollingOutcome:
    """Split a long instance into consecutive planning windows by system
    arrival, solve each window with the last committed operation per runway
    carried forward as the follow-on separation constraint, and stitch the
    window sequences back into one globally feasible schedule."""
    if window_s <= 0:
        raise ValueError("window must be positive")
    window_ms = ms_from_s(window_s)
    last_arrival = max((a.system_arrival_ms for a in scenario.aircraft), default=0)
    windows = last_arrival // window_ms + 1
    carry: list[RunwayCarry | None] = list(scenario.carry_in) + [None] * (
        scenario.runway_count - len(scenario.carry_in)
    )
    sequences: list[list[int]] = [[] for _ in range(scenario.runway_count)]
    outcomes = []
    for w in range(windows):
        members = [
            i
            for i, a in enumerate(scenario.aircraft)
            if w * window_ms <= a.system_arrival_ms < (w + 1) * window_ms
        ]
        if not members:
            continue
        sub = Scenario(
            aircraft=tuple(scenario.aircraft[i] for i in members),
            runway_count=scenario.runway_count,
            default_band=scenario.default_band,
            band_overrides=scenario.band_overrides,
            separation=scenario.separation,
            network=scenario.network,
            fleet_mix=scenario.fleet_mix,
            max_delay_ms=scenario.max_delay_ms,
            noise=scenario.noise,
            carry_in=tuple(carry),
        )
        outcome = solve_instance(sub, approach, config, seed + w)
        outcomes.append(outcome)
        window_schedule = outcome.schedule
        for r, seq in enumerate(window_schedule.sequences(sub.runway_count)):
            sequences[r].extend(members[i] for i in seq)
            if seq:
                last = max(seq, key=lambda i: window_schedule.start_ms[i])
                carry[r] = RunwayCarry(
                    sub.aircraft[last].op,
                    sub.aircraft[last].wclass,
                    window_schedule.start_ms[last],
                )
    stitched = Schedule.from_sequences(scenario, sequences)
    return RollingOutcome(stitched, int(windows), tuple(outcomes))


def _front_rows(front: Sequence[Candidate]) -> list[tuple]:
    rows = []
    for cand in front:
        encoding = ";".join(
            f"{r}.{p}" for r, p in cand.solution.encoding()
        )
        rows.append((cand.objectives[0], cand.objectives[1], encoding))
    return rows


def emit_outputs(result: ExperimentResult, out_dir: str | Path) -> list[Path]:
    """Write the comparison table, per-run front and progress files, and a
    manifest that pins everything needed for an exact re-run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    metrics_path = out / "metrics.csv"
    with metrics_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_ROW_FIELDS)
        for row in result.rows():
            writer.writerow([getattr(row, f) for f in _ROW_FIELDS])
    written.append(metrics_path)

    for inst in result.instances:
        for outcome in inst.outcomes:
            if outcome.approach == "fcfs":
                continue
            front_path = out / f"front_seed{inst.seed}_{outcome.approach}.csv"
            with front_path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["f1", "f2", "encoding"])
                writer.writerows(_front_rows(outcome.front))
            written.append(front_path)
            progress_path = out / f"progress_seed{inst.seed}_{outcome.approach}.csv"
            with progress_path.open("w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(
                    ["iteration", "evaluations", "archive_size", "hv_so_far"]
                )
                for r in outcome.progress:
                    writer.writerow(
                        [r.iteration, r.evaluations, r.archive_size, r.hv_so_far]
                    )
            written.append(progress_path)

    try:
        from importlib.metadata import version

        pkg_version = version("runwaysched")
    except Exception:
        pkg_version = "unknown"
    manifest = {
        "config": asdict(result.config),
        "package_version": pkg_version,
        "instances": [
            {"seed": inst.seed, "aircraft": inst.scenario.n}
            for inst in result.instances
        ],
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    written.append(manifest_path)
    return written
