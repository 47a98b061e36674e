"""Stochastic replay of runway operation schedules.

An aircraft is injected at its perturbed system-arrival time, traverses the
terminal-area network segment by segment (no overtaking on a segment), and is
released for its runway operation no earlier than its planned start, with all
separation and runway-occupancy constraints enforced against already-realized
operations. Arrivals absorb sequencing waits in the holding pattern at the
IAF, departures in the holding area.

Randomness is driven by inverse-CDF draws from per-(seed, replication,
aircraft, purpose) uniform streams, so two schedules evaluated under the same
seed consume identical perturbations (common random numbers) and antithetic
replications mirror the uniforms exactly.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from runwaysched.domain import (
    DEFAULT_NOISE,
    NodeNetwork,
    ObjectiveVector,
    OperationType,
    ROT_MEAN_S,
    Scenario,
    Schedule,
    StochasticConfig,
    WeightClass,
    position_shifts,
    s_from_ms,
)

__all__ = [
    "EventList",
    "PerturbationTable",
    "SimOutputs",
    "Replications",
    "NodeNetwork",
    "StochasticConfig",
    "perturbation_draws",
    "sample_rot",
    "simulate",
    "run_replications",
    "fairness",
]


class EventList:
    """Time-ordered event queue; equal-time events pop in insertion order."""

    __slots__ = ("_heap", "_count")

    def __init__(self) -> None:
        self._heap: list[tuple[int, int, object]] = []
        self._count = 0

    def push(self, time_ms: int, payload: object) -> None:
        heapq.heappush(self._heap, (time_ms, self._count, payload))
        self._count += 1

    def pop(self) -> tuple[int, int, object]:
        if not self._heap:
            raise IndexError("pop from empty event list")
        return heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


_PURPOSE_SYSARR = 0
_PURPOSE_ROT = 1
_PURPOSE_TRANSIT = 2  # + segment index


def _uniform(seed: int, replication: int, aircraft_id: int, purpose: int) -> float:
    """Deterministic uniform in (0, 1) keyed by the full stream identity."""
    ss = np.random.SeedSequence(
        entropy=seed % (2**128),
        spawn_key=(replication, purpose, aircraft_id % (2**63)),
    )
    word = int(ss.generate_state(1, np.uint64)[0])
    return (word + 0.5) / 2.0**64


@dataclass(frozen=True)
class PerturbationTable:
    """All draws one replication needs, aligned with scenario aircraft order."""

    injection_delta_ms: tuple[int, ...]
    transit_delta_ms: tuple[tuple[int, ...], ...]
    rot_ms: tuple[int, ...]


def _build_table(
    scenario: Scenario, seed: int, replication: int, antithetic: bool
) -> PerturbationTable:
    noise = scenario.noise
    aircraft = scenario.aircraft
    n = len(aircraft)
    if not noise.enabled:
        zeros = (0,) * n
        rot = tuple(noise.rot_mean_ms(a.op, a.wclass) for a in aircraft)
        seg_counts = [5 if a.op is OperationType.ARRIVAL else 3 for a in aircraft]
        return PerturbationTable(
            zeros, tuple((0,) * c for c in seg_counts), rot
        )

    # antithetic replications reuse the even partner's uniforms mirrored
    base_rep = replication - (replication % 2) if antithetic else replication
    mirror = antithetic and replication % 2 == 1

    def u(aircraft_id: int, purpose: int) -> float:
        value = _uniform(seed, base_rep, aircraft_id, purpose)
        return 1.0 - value if mirror else value

    is_arr = np.array([a.op is OperationType.ARRIVAL for a in aircraft])
    u_sys = np.array([u(a.id, _PURPOSE_SYSARR) for a in aircraft])
    loc = np.where(is_arr, noise.arr_lateness_mean_s, noise.dep_lateness_mean_s)
    scale = np.where(is_arr, noise.arr_lateness_sd_s, noise.dep_lateness_sd_s)
    sys_delta_s = stats.truncnorm.ppf(
        u_sys, -noise.trunc_sds, noise.trunc_sds, loc=loc, scale=scale
    )
    injection = tuple(int(round(v * 1000)) for v in sys_delta_s)

    u_rot = np.array([u(a.id, _PURPOSE_ROT) for a in aircraft])
    alpha = np.array([noise.rot_beta_shapes[int(a.wclass)][0] for a in aircraft])
    beta_ = np.array([noise.rot_beta_shapes[int(a.wclass)][1] for a in aircraft])
    unit = stats.beta.ppf(u_rot, alpha, beta_)
    lo = np.array([noise.rot_bounds_ms(a.op, a.wclass)[0] for a in aircraft])
    hi = np.array([noise.rot_bounds_ms(a.op, a.wclass)[1] for a in aircraft])
    rot = tuple(int(round(v)) for v in lo + (hi - lo) * unit)

    seg_counts = [5 if a.op is OperationType.ARRIVAL else 3 for a in aircraft]
    flat_u = [
        u(a.id, _PURPOSE_TRANSIT + k)
        for a, c in zip(aircraft, seg_counts)
        for k in range(c)
    ]
    flat_delta = stats.norm.ppf(np.array(flat_u)) * noise.transit_sd_s * 1000.0
    transit: list[tuple[int, ...]] = []
    pos = 0
    for c in seg_counts:
        transit.append(tuple(int(round(v)) for v in flat_delta[pos : pos + c]))
        pos += c
    return PerturbationTable(injection, tuple(transit), rot)


_TABLE_CACHE: dict[tuple, tuple[Scenario, PerturbationTable]] = {}


def perturbation_draws(
    scenario: Scenario, seed: int, replication: int = 0, antithetic: bool = False
) -> PerturbationTable:
    """Cached per-replication draw table (schedule-independent by design)."""
    key = (id(scenario), seed, replication, antithetic)
    hit = _TABLE_CACHE.get(key)
    if hit is not None and hit[0] is scenario:
        return hit[1]
    if len(_TABLE_CACHE) > 4096:
        _TABLE_CACHE.clear()
    table = _build_table(scenario, seed, replication, antithetic)
    _TABLE_CACHE[key] = (scenario, table)
    return table


def sample_rot(
    op: OperationType,
    wclass: WeightClass,
    rng: np.random.Generator,
    config: StochasticConfig = DEFAULT_NOISE,
    size: int | None = None,
):
    """Runway occupancy time draw(s) in seconds: a Beta variate rescaled to
    the configured interval around the class mean."""
    alpha, beta_ = config.rot_beta_shapes[int(wclass)]
    mean = ROT_MEAN_S[op][int(wclass)]
    lo = config.rot_lo_factor * mean
    hi = config.rot_hi_factor * mean
    u = rng.random() if size is None else rng.random(size)
    return lo + (hi - lo) * stats.beta.ppf(u, alpha, beta_)


def fairness(
    starts_s: Sequence[float], targets_s: Sequence[float], shifts: Sequence[int]
) -> float:
    """Deviation penalty: sum of |position shift| * (start - target)^2."""
    return sum(
        abs(k) * (t - d) * (t - d) for t, d, k in zip(starts_s, targets_s, shifts)
    )


class _ScenarioStatics:
    """Per-scenario constants the hot simulation loop needs."""

    __slots__ = (
        "scenario",
        "ops",
        "classes",
        "sep_flat",
        "cross",
        "segments_ms",
        "estimated_ms",
        "rot_mean_ms",
        "carry",
    )

    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.ops = tuple(int(a.op) for a in scenario.aircraft)
        self.classes = tuple(int(a.wclass) for a in scenario.aircraft)
        self.sep_flat = scenario.separation.same_runway_ms
        m = scenario.runway_count
        cross: list[list] = [[None] * m for _ in range(m)]
        for q in range(m):
            for r in range(m):
                if q == r:
                    continue
                band = scenario.band_for(q, r)
                table = tuple(
                    tuple(
                        tuple(
                            scenario.separation.cross_runway(
                                band,
                                OperationType(lop),
                                WeightClass(lcls),
                                OperationType(fop),
                                WeightClass(fcls),
                            )
                            for fcls in range(4)
                        )
                        for fop in range(2)
                    )
                    for lop in range(2)
                    for lcls in range(4)
                )
                # reshape: [leader op*4+cls][follower op][follower cls]
                if any(
                    v
                    for lrow in table
                    for frow in lrow
                    for v in frow
                ):
                    cross[q][r] = table
        self.cross = cross
        net = scenario.network
        self.segments_ms = tuple(
            net.segment_ms(a.op, a.wclass) for a in scenario.aircraft
        )
        self.estimated_ms = scenario.estimated_start_ms()
        self.rot_mean_ms = tuple(
            scenario.noise.rot_mean_ms(a.op, a.wclass) for a in scenario.aircraft
        )
        self.carry = [
            (
                None
                if scenario.carry_for(r) is None
                else (
                    int(scenario.carry_for(r).op),
                    int(scenario.carry_for(r).wclass),
                    scenario.carry_for(r).start_ms,
                    scenario.carry_for(r).start_ms
                    + scenario.noise.rot_mean_ms(
                        scenario.carry_for(r).op, scenario.carry_for(r).wclass
                    ),
                )
            )
            for r in range(m)
        ]


_STATICS_CACHE: dict[int, _ScenarioStatics] = {}


def _statics(scenario: Scenario) -> _ScenarioStatics:
    hit = _STATICS_CACHE.get(id(scenario))
    if hit is not None and hit.scenario is scenario:
        return hit
    if len(_STATICS_CACHE) > 512:
        _STATICS_CACHE.clear()
    built = _ScenarioStatics(scenario)
    _STATICS_CACHE[id(scenario)] = built
    return built


@dataclass(frozen=True)
class SimOutputs:
    """Realized times and aggregate measures of one simulation replication.

    Delays compare the realized start with the unimpeded deterministic
    traversal from system arrival; position shifts compare realized order
    with first-come-first-served order within each operation type. f1 is the
    start of the last operation in seconds, f2 the fairness penalty in
    squared seconds.
    """

    start_ms: tuple[int, ...]
    delay_ms: tuple[int, ...]
    shift: tuple[int, ...]
    rot_ms: tuple[int, ...]
    f1: float
    f2: float
    avg_landing_delay_s: float
    longest_landing_delay_s: float
    avg_takeoff_delay_s: float
    longest_takeoff_delay_s: float
    avg_sequence_change: float
    total_sequence_change: int
    violation_count: int
    infeasible: bool
    holding_peak_count: int
    holding_max_wait_ms: int
    trace: tuple[tuple[int, int, str], ...] | None = None

    @property
    def objectives(self) -> ObjectiveVector:
        return ObjectiveVector(self.f1, self.f2)


def simulate(
    schedule: Schedule,
    scenario: Scenario,
    seed: int,
    replication: int = 0,
    antithetic: bool = False,
    collect_trace: bool = False,
) -> SimOutputs:
    """Replay one schedule under one replication's perturbations.

    Deterministic per (schedule, scenario, seed, replication, antithetic):
    rerunning the same arguments reproduces the outputs bit for bit.
    """
    if schedule.n != scenario.n:
        raise ValueError("schedule does not match the scenario")
    st = _statics(scenario)
    table = perturbation_draws(scenario, seed, replication, antithetic)
    n = scenario.n
    m = scenario.runway_count
    aircraft = scenario.aircraft
    ops = st.ops
    classes = st.classes
    sep_flat = st.sep_flat

    inj = [
        aircraft[i].system_arrival_ms + table.injection_delta_ms[i] for i in range(n)
    ]

    # segment durations with additive noise, floored at zero
    seg_dur = [
        tuple(
            max(0, base + delta)
            for base, delta in zip(st.segments_ms[i], table.transit_delta_ms[i])
        )
        for i in range(n)
    ]

    # --- approach phase: entry -> meter fix -> IAF, no overtaking per runway
    avail = [0] * n
    iaf_time = [0] * n
    arrivals_by_runway: list[list[int]] = [[] for _ in range(m)]
    for i in range(n):
        if ops[i] == 0:
            arrivals_by_runway[schedule.runway[i]].append(i)
        else:
            avail[i] = inj[i]
    meter_time = [0] * n
    for r in range(m):
        path = sorted(arrivals_by_runway[r], key=lambda i: (inj[i], aircraft[i].id))
        arrivals_by_runway[r] = path
        last_meter = -(2**62)
        last_iaf = -(2**62)
        for i in path:
            meter = max(inj[i] + seg_dur[i][0], last_meter)
            iaf = max(meter + seg_dur[i][1], last_iaf)
            last_meter, last_iaf = meter, iaf
            meter_time[i] = meter
            iaf_time[i] = iaf
            avail[i] = iaf + seg_dur[i][2] + seg_dur[i][3] + seg_dur[i][4]

    # --- runway phase: realize operations chronologically, enforcing the
    # planned per-runway sequence, separations and runway occupancy
    seqs = schedule.sequences(m)
    ptr = [0] * m
    # per runway: (op, class, start, exit) of the most recent realized op
    last: list[tuple[int, int, int, int] | None] = list(st.carry)
    start = [0] * n
    cross = st.cross
    planned = schedule.start_ms
    rot = table.rot_ms
    remaining = n
    while remaining:
        best_r = -1
        best_t = 0
        for r in range(m):
            k = ptr[r]
            if k >= len(seqs[r]):
                continue
            j = seqs[r][k]
            t = avail[j]
            if planned[j] > t:
                t = planned[j]
            lc = last[r]
            if lc is not None:
                req = sep_flat[((lc[0] * 4 + lc[1]) * 2 + ops[j]) * 4 + classes[j]]
                if lc[2] + req > t:
                    t = lc[2] + req
                if lc[3] > t:
                    t = lc[3]
            for q in range(m):
                if q == r:
                    continue
                lq = last[q]
                if lq is None:
                    continue
                tbl = cross[q][r]  # leader on q, follower on r
                if tbl is None:
                    continue
                req = tbl[lq[0] * 4 + lq[1]][ops[j]][classes[j]]
                if req and lq[2] + req > t:
                    t = lq[2] + req
            if best_r < 0 or t < best_t or (t == best_t and r < best_r):
                best_r, best_t = r, t
        j = seqs[best_r][ptr[best_r]]
        start[j] = best_t
        last[best_r] = (ops[j], classes[j], best_t, best_t + rot[j])
        ptr[best_r] += 1
        remaining -= 1

    # --- outputs
    est = st.estimated_ms
    delay = [start[i] - est[i] for i in range(n)]
    shifts = position_shifts(scenario, start)
    f1 = s_from_ms(max(start)) if n else 0.0
    f2 = fairness(
        [s / 1000.0 for s in start],
        [a.target_ms / 1000.0 for a in aircraft],
        shifts,
    )

    landing = [delay[i] / 1000.0 for i in range(n) if ops[i] == 0]
    takeoff = [delay[i] / 1000.0 for i in range(n) if ops[i] == 1]
    violations = sum(
        1
        for i in range(n)
        if start[i] > aircraft[i].due_ms or start[i] < aircraft[i].ready_ms
    )

    # holding pattern statistics (arrivals): occupancy between reaching the
    # IAF and release onto final approach
    hold_events: list[tuple[int, int]] = []
    max_wait = 0
    cap = scenario.noise.holding_cap
    max_wait_allowed = round(scenario.noise.holding_max_wait_s * 1000)
    peak = 0
    for r in range(m):
        events: list[tuple[int, int]] = []
        for i in arrivals_by_runway[r]:
            final_dur = seg_dur[i][2] + seg_dur[i][3] + seg_dur[i][4]
            release = start[i] - final_dur
            wait = release - iaf_time[i]
            if wait > max_wait:
                max_wait = wait
            if wait > 0:
                events.append((iaf_time[i], 1))
                events.append((release, -1))
        events.sort(key=lambda e: (e[0], e[1]))
        level = 0
        for _, d in events:
            level += d
            if level > peak:
                peak = level
        hold_events.extend(events)
    infeasible = peak > cap or max_wait > max_wait_allowed

    total_shift = sum(abs(s) for s in shifts)
    trace = (
        _replay_trace(scenario, schedule, st, inj, seg_dur, meter_time, iaf_time, start, rot, arrivals_by_runway)
        if collect_trace
        else None
    )
    return SimOutputs(
        start_ms=tuple(start),
        delay_ms=tuple(delay),
        shift=shifts,
        rot_ms=tuple(rot),
        f1=f1,
        f2=f2,
        avg_landing_delay_s=(sum(landing) / len(landing)) if landing else 0.0,
        longest_landing_delay_s=max(landing, default=0.0),
        avg_takeoff_delay_s=(sum(takeoff) / len(takeoff)) if takeoff else 0.0,
        longest_takeoff_delay_s=max(takeoff, default=0.0),
        avg_sequence_change=(total_shift / n) if n else 0.0,
        total_sequence_change=total_shift,
        violation_count=violations,
        infeasible=infeasible,
        holding_peak_count=peak,
        holding_max_wait_ms=max(max_wait, 0),
        trace=trace,
    )


def _replay_trace(
    scenario: Scenario,
    schedule: Schedule,
    st: _ScenarioStatics,
    inj: list[int],
    seg_dur: list[tuple[int, ...]],
    meter_time: list[int],
    iaf_time: list[int],
    start: list[int],
    rot: Sequence[int],
    arrivals_by_runway: list[list[int]],
) -> tuple[tuple[int, int, str], ...]:
    """Push the realized lifecycle through the event queue and emit rows."""
    ev = EventList()
    n = scenario.n
    aircraft = scenario.aircraft
    for i in range(n):
        a = aircraft[i]
        if a.op is OperationType.ARRIVAL:
            ev.push(inj[i], (a.id, "entry"))
            ev.push(meter_time[i], (a.id, "meter_fix"))
            ev.push(iaf_time[i], (a.id, "iaf"))
            final_dur = seg_dur[i][2] + seg_dur[i][3] + seg_dur[i][4]
            release = start[i] - final_dur
            ev.push(release, (a.id, "hold_release"))
            ev.push(release + seg_dur[i][2], (a.id, "faf"))
            ev.push(release + seg_dur[i][2] + seg_dur[i][3], (a.id, "saf"))
            ev.push(start[i], (a.id, "threshold"))
            ev.push(start[i] + rot[i], (a.id, "runway_exit"))
        else:
            ev.push(inj[i], (a.id, "holding_area"))
            ev.push(start[i], (a.id, "start_of_roll"))
            wheels_off = start[i] + rot[i]
            ev.push(wheels_off, (a.id, "take_off"))
    # climb segments per runway in take-off order, no overtaking
    for r in range(scenario.runway_count):
        deps = [i for i in schedule.sequences(scenario.runway_count)[r] if aircraft[i].op is OperationType.DEPARTURE]
        deps.sort(key=lambda i: start[i])
        last_nodes = [-(2**62)] * 3
        for i in deps:
            t = start[i] + rot[i]
            for k, name in enumerate(("initial_climb", "enroute_climb", "departure_fix")):
                t = max(t + seg_dur[i][k], last_nodes[k])
                last_nodes[k] = t
                ev.push(t, (aircraft[i].id, name))
    rows = []
    prev = None
    while ev:
        t, _, payload = ev.pop()
        if prev is not None and t < prev:
            raise RuntimeError("event list broke time ordering")
        prev = t
        rows.append((t, payload[0], payload[1]))
    return tuple(rows)


@dataclass(frozen=True)
class Replications:
    """Aggregate of repeated simulations of one schedule."""

    outputs: tuple[SimOutputs, ...]
    mean: ObjectiveVector
    sd: tuple[float, float]

    @property
    def n(self) -> int:
        return len(self.outputs)


def run_replications(
    schedule: Schedule,
    scenario: Scenario,
    seed: int,
    n: int,
    antithetic: bool = False,
) -> Replications:
    """Simulate `n` replications (antithetic pairs require even n)."""
    if n < 1:
        raise ValueError("need at least one replication")
    if antithetic and n % 2:
        raise ValueError("antithetic replication count must be even")
    outputs = tuple(
        simulate(schedule, scenario, seed, replication=k, antithetic=antithetic)
        for k in range(n)
    )
    f1s = [o.f1 for o in outputs]
    f2s = [o.f2 for o in outputs]
    mean = ObjectiveVector(sum(f1s) / n, sum(f2s) / n)
    if n > 1:
        sd = (
            math.sqrt(sum((v - mean.f1) ** 2 for v in f1s) / (n - 1)),
            math.sqrt(sum((v - mean.f2) ** 2 for v in f2s) / (n - 1)),
        )
    else:
        sd = (0.0, 0.0)
    return Replications(outputs, mean, sd)
