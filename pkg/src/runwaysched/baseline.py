"""Deterministic baseline schedulers: first-come-first-served, a composite
dispatching-rule greedy, and an exhaustive solver for tiny instances."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

from runwaysched.domain import (
    Aircraft,
    Scenario,
    Schedule,
    SeparationMatrix,
    _initial_runway_state,
    earliest_start_ms,
    s_from_ms,
)


class InfeasibleInstanceError(ValueError):
    """No runway allows some aircraft to start within its time window."""


@dataclass(frozen=True)
class GreedyParams:
    """Coefficients of the composite priority index.

    k1 scales due-date urgency, k2 scales the separation penalty relative to
    the mean separation s_bar, k3 scales the not-yet-ready penalty. s_bar_s
    defaults to the mean over all same-runway separation entries.
    """

    k1: float = 2.0
    k2: float = 0.75
    k3: float = 1.7
    s_bar_s: float | None = None

    def resolve_s_bar_s(self, separation: SeparationMatrix) -> float:
        if self.s_bar_s is not None:
            return self.s_bar_s
        return separation.mean_same_runway_ms() / 1000.0


def priority_index(
    candidate: Aircraft,
    previous: Aircraft | None,
    t_ms: int,
    params: GreedyParams,
    separation: SeparationMatrix,
) -> float:
    """Composite dispatching priority of `candidate` at decision time t.

    weight * exp(-max(due - t, 0)/k1) * exp(-sep(previous, candidate)/(k2 *
    s_bar)) * exp(-max(ready - t, 0)/k3), all times in seconds; higher is
    more urgent. With no previous aircraft the separation term is 1.
    """
    s_bar = params.resolve_s_bar_s(separation)
    due_slack = max(candidate.due_ms - t_ms, 0) / 1000.0
    ready_slack = max(candidate.ready_ms - t_ms, 0) / 1000.0
    sep_s = s_from_ms(separation.between(previous, candidate)) if previous else 0.0
    return (
        candidate.weight
        * math.exp(-due_slack / params.k1)
        * math.exp(-sep_s / (params.k2 * s_bar))
        * math.exp(-ready_slack / params.k3)
    )


def _build_schedule(
    scenario: Scenario, sequences: list[list[int]], starts: dict[int, int]
) -> Schedule:
    runway = [0] * scenario.n
    position = [0] * scenario.n
    start = [0] * scenario.n
    for r, seq in enumerate(sequences):
        for p, idx in enumerate(seq, start=1):
            runway[idx] = r
            position[idx] = p
            start[idx] = starts[idx]
    return Schedule(tuple(runway), tuple(position), tuple(start))


def fcfs_schedule(scenario: Scenario) -> Schedule:
    """Schedule aircraft in system-arrival order (ids break ties), each on
    the runway giving the earliest feasible start.

    Raises InfeasibleInstanceError when no runway can start an aircraft by
    its due time.
    """
    order = sorted(
        range(scenario.n),
        key=lambda i: (scenario.aircraft[i].system_arrival_ms, scenario.aircraft[i].id),
    )
    last = _initial_runway_state(scenario)
    sequences: list[list[int]] = [[] for _ in range(scenario.runway_count)]
    starts: dict[int, int] = {}
    for idx in order:
        a = scenario.aircraft[idx]
        best_r, best_t = -1, 0
        for r in range(scenario.runway_count):
            t = earliest_start_ms(scenario, idx, r, last)
            if best_r < 0 or t < best_t:
                best_r, best_t = r, t
        if best_t > a.due_ms:
            raise InfeasibleInstanceError(
                f"aircraft {a.id} cannot start before its due time "
                f"({s_from_ms(best_t)} > {s_from_ms(a.due_ms)} s)"
            )
        sequences[best_r].append(idx)
        starts[idx] = best_t
        last[best_r] = (a, best_t)
    return _build_schedule(scenario, sequences, starts)


def greedy_schedule(
    scenario: Scenario, params: GreedyParams | None = None
) -> tuple[Schedule, float]:
    """Dispatch by repeatedly scheduling the highest-priority unscheduled
    aircraft on its earliest-start runway.

    The decision clock starts at the earliest ready time and advances to the
    start just committed; the separation term is taken against the most
    recently scheduled aircraft. Priority ties fall back to earlier target
    time, then id. Returns the schedule and its makespan in seconds.
    """
    params = params or GreedyParams()
    if scenario.n == 0:
        raise ValueError("empty scenario")
    unscheduled = set(range(scenario.n))
    last = _initial_runway_state(scenario)
    previous: Aircraft | None = None
    t = min(a.ready_ms for a in scenario.aircraft)
    sequences: list[list[int]] = [[] for _ in range(scenario.runway_count)]
    starts: dict[int, int] = {}
    while unscheduled:
        best_idx = -1
        best_key: tuple | None = None
        for i in unscheduled:
            a = scenario.aircraft[i]
            eta = priority_index(a, previous, t, params, scenario.separation)
            key = (-eta, a.target_ms, a.id)
            if best_key is None or key < best_key:
                best_idx, best_key = i, key
        a = scenario.aircraft[best_idx]
        best_r, best_t = -1, 0
        for r in range(scenario.runway_count):
            start = earliest_start_ms(scenario, best_idx, r, last)
            if best_r < 0 or start < best_t:
                best_r, best_t = r, start
        if best_t > a.due_ms:
            raise InfeasibleInstanceError(
                f"aircraft {a.id} cannot start before its due time under the "
                f"greedy dispatch order"
            )
        sequences[best_r].append(best_idx)
        starts[best_idx] = best_t
        last[best_r] = (a, best_t)
        previous = a
        t = best_t
        unscheduled.remove(best_idx)
    schedule = _build_schedule(scenario, sequences, starts)
    return schedule, s_from_ms(schedule.makespan_ms())


class ScheduleObjective(enum.Enum):
    MAKESPAN = "makespan"
    WEIGHTED_TARDINESS = "weighted_tardiness"
    EARLINESS_TARDINESS = "earliness_tardiness"


class BruteForceResult(NamedTuple):
    schedule: Schedule
    value: float


_BRUTE_FORCE_MAX_N = 9
_BRUTE_FORCE_MAX_M = 3


def brute_force_optimal(
    scenario: Scenario,
    objective: ScheduleObjective = ScheduleObjective.MAKESPAN,
) -> BruteForceResult:
    """Exhaustively optimal schedule for tiny instances (n <= 9, m <= 3).

    Enumerates runway assignments and per-runway orders depth-first in
    chronological placement order, setting starts greedily; branches are cut
    once the partial objective reaches the incumbent, so the first optimum in
    enumeration order wins ties. Start times in seconds enter the objective.
    """
    n, m = scenario.n, scenario.runway_count
    if n > _BRUTE_FORCE_MAX_N or m > _BRUTE_FORCE_MAX_M:
        raise ValueError(
            f"instance too large for exhaustive search: n={n} (max "
            f"{_BRUTE_FORCE_MAX_N}), m={m} (max {_BRUTE_FORCE_MAX_M})"
        )
    if n == 0:
        raise ValueError("empty scenario")

    aircraft = scenario.aircraft
    best_value = math.inf
    best: tuple[list[list[int]], dict[int, int]] | None = None
    sequences: list[list[int]] = [[] for _ in range(m)]
    starts: dict[int, int] = {}
    last = _initial_runway_state(scenario)

    def contribution(a: Aircraft, t_ms: int) -> float:
        if objective is ScheduleObjective.MAKESPAN:
            return 0.0
        dev_s = (t_ms - a.target_ms) / 1000.0
        if objective is ScheduleObjective.WEIGHTED_TARDINESS:
            return a.weight * max(dev_s, 0.0)
        return a.weight * abs(dev_s)

    def final_value(partial: float, t_last_ms: int) -> float:
        if objective is ScheduleObjective.MAKESPAN:
            return s_from_ms(t_last_ms)
        return partial

    def dfs(remaining: list[int], t_prev_ms: int, partial: float) -> None:
        nonlocal best_value, best
        if not remaining:
            value = final_value(partial, t_prev_ms)
            if value < best_value:
                best_value = value
                best = ([list(s) for s in sequences], dict(starts))
            return
        # any stragglers whose window already closed make the branch dead
        if any(aircraft[i].due_ms < t_prev_ms for i in remaining):
            return
        for i in remaining:
            a = aircraft[i]
            for r in range(m):
                t = earliest_start_ms(scenario, i, r, last)
                if t < t_prev_ms or t > a.due_ms:
                    continue
                new_partial = partial + contribution(a, t)
                bound = s_from_ms(t) if objective is ScheduleObjective.MAKESPAN else new_partial
                if bound >= best_value:
                    continue
                saved = last[r]
                sequences[r].append(i)
                starts[i] = t
                last[r] = (a, t)
                rest = [j for j in remaining if j != i]
                dfs(rest, t, new_partial)
                last[r] = saved
                del starts[i]
                sequences[r].pop()

    # starts never precede the earliest ready time, so it floors the
    # chronological placement discipline
    dfs(list(range(n)), min(a.ready_ms for a in aircraft), 0.0)
    if best is None:
        raise InfeasibleInstanceError("no feasible schedule exists for the instance")
    return BruteForceResult(_build_schedule(scenario, best[0], best[1]), best_value)
