"""Hybrid tabu/scatter search for bi-objective minimization.

The engine evolves a two-tier reference set (quality tier plus diversity
tier) through the five scatter-search methods: diversification generation,
improvement (a gated tabu kick followed by first-improvement descent),
subset generation over unseen pairs, solution combination, and reference-set
update. Explicit memory stores every visited solution fingerprint, so no
candidate is ever evaluated twice; an elitist bounded archive collects the
non-dominated solutions found along the way and feeds parents back into
combination via binary tournament.

The engine is generic over a problem adapter. Two adapters are provided:
schedules over a scenario (permutation encoding) and two-variable boxed
continuous problems (benchmark functions).
"""

from __future__ import annotations

import itertools
import math
import time
from collections import deque
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Iterable, Iterator, Sequence

import numpy as np

from runwaysched.baseline import greedy_schedule
from runwaysched.domain import (
    ObjectiveVector,
    Scenario,
    Schedule,
    check_feasibility,
    encoding_distance,
)
from runwaysched.metrics import hypervolume, nondominated_filter, normalize_front
from runwaysched.resampling import (
    RunningRanges,
    SampleStreams,
    SedrParams,
    sedr_evaluate,
)

__all__ = [
    "DomRel",
    "dominates",
    "nondomination_ranks",
    "crowding_distance",
    "OptParams",
    "BENCHMARK_PRESET",
    "SBO_PRESET",
    "Budget",
    "Candidate",
    "TabuMemory",
    "Archive",
    "RefSet",
    "refset_init",
    "subset_generate",
    "refset_update_dynamic",
    "SchedulingProblem",
    "ContinuousProblem",
    "OptResult",
    "RunStats",
    "run",
]


class DomRel(Enum):
    STRICT = "strict"
    WEAK_ONLY = "weak_only"
    NONE = "none"


def dominates(a: Sequence[float], b: Sequence[float]) -> DomRel:
    """Componentwise minimization dominance between two objective vectors."""
    if a[0] == b[0] and a[1] == b[1]:
        return DomRel.WEAK_ONLY
    if a[0] <= b[0] and a[1] <= b[1]:
        return DomRel.STRICT
    return DomRel.NONE


def nondomination_ranks(points: Sequence[Sequence[float]]) -> list[int]:
    """0-based Pareto rank per point (0 = non-dominated)."""
    n = len(points)
    ranks = [-1] * n
    remaining = list(range(n))
    rank = 0
    while remaining:
        front_pts = nondominated_filter([points[i] for i in remaining])
        # match by multiset of values, preserving order
        used = [False] * len(front_pts)
        next_remaining = []
        for i in remaining:
            placed = False
            for j, p in enumerate(front_pts):
                if not used[j] and p[0] == points[i][0] and p[1] == points[i][1]:
                    used[j] = True
                    ranks[i] = rank
                    placed = True
                    break
            if not placed:
                next_remaining.append(i)
        remaining = next_remaining
        rank += 1
    return ranks


def crowding_distance(points: Sequence[Sequence[float]]) -> list[float]:
    """Density estimate per point: boundary solutions get +inf, interior ones
    the sum over objectives of the normalized gap between their neighbors.
    Points whose objective vector is duplicated get 0 (zero gaps)."""
    n = len(points)
    if n == 0:
        return []
    if n <= 2:
        return [math.inf] * n
    vecs = [(p[0], p[1]) for p in points]
    counts: dict[tuple[float, float], int] = {}
    for v in vecs:
        counts[v] = counts.get(v, 0) + 1
    unique = [i for i in range(n) if counts[vecs[i]] == 1]
    dist = [0.0] * n
    if not unique:
        return dist
    if len(unique) <= 2:
        for i in unique:
            dist[i] = math.inf
        return dist
    for k in range(2):
        order = sorted(unique, key=lambda i: vecs[i][k])
        lo = vecs[order[0]][k]
        hi = vecs[order[-1]][k]
        span = hi - lo
        if span <= 0:
            continue
        dist[order[0]] = math.inf
        dist[order[-1]] = math.inf
        for pos in range(1, len(order) - 1):
            i = order[pos]
            if dist[i] != math.inf:
                gap = vecs[order[pos + 1]][k] - vecs[order[pos - 1]][k]
                dist[i] += gap / span
    return dist


# --------------------------------------------------------------- parameters


@dataclass(frozen=True)
class OptParams:
    """Search knobs; tier sizes split the refset evenly (b1 = b2 = b/2).

    The three switches at the bottom select the search variant: the elitist
    archive (off disables the archive entirely, so the front comes from the
    refset alone), dynamic (immediate) vs static (end-of-sweep) refset
    update, and refset rebuilding on stagnation.
    """

    psize: int = 100
    b: int = 20
    improve_threshold: int = 7
    dist_threshold: float = 17.0
    archive_cap: int = 55
    max_iter: int | None = None
    max_cpu_s: float | None = None
    elitist: bool = True
    dynamic_update: bool = True
    rebuild_enabled: bool = True

    def __post_init__(self) -> None:
        if self.b < 4:
            raise ValueError("refset size b must be at least 4")
        if self.b % 2:
            raise ValueError("refset size b must be even (b1 = b2 = b/2)")
        if self.psize < self.b:
            raise ValueError("population size must be at least b")
        if self.archive_cap < 2:
            raise ValueError("archive capacity must be at least 2")

    @property
    def b1(self) -> int:
        return self.b // 2

    @property
    def b2(self) -> int:
        return self.b - self.b1


BENCHMARK_PRESET = OptParams(
    psize=100, b=20, improve_threshold=7, dist_threshold=17.0, archive_cap=55
)
SBO_PRESET = OptParams(
    psize=120, b=22, improve_threshold=6, dist_threshold=14.0, archive_cap=45
)


@dataclass(frozen=True)
class Budget:
    """Run limits; the tightest of these and OptParams' own limits applies."""

    max_evals: int | None = None
    max_iter: int | None = None
    max_cpu_s: float | None = None


class _Exhausted(Exception):
    pass


# ------------------------------------------------------------------- memory


@dataclass(frozen=True)
class Candidate:
    """An evaluated solution: mean objectives plus bookkeeping identity."""

    solution: object
    objectives: ObjectiveVector
    fingerprint: object
    seq: int


class TabuMemory:
    """Exact explicit memory: visited fingerprints, combined subset pairs,
    and placement frequencies for diversification bias."""

    def __init__(self) -> None:
        self.visited: set = set()
        self.combined: set = set()
        self.frequency: dict = {}

    def seen(self, fingerprint) -> bool:
        return fingerprint in self.visited

    def record_visit(self, fingerprint, freq_keys: Iterable = ()) -> bool:
        """Insert once; returns False when the fingerprint was already known."""
        if fingerprint in self.visited:
            return False
        self.visited.add(fingerprint)
        for key in freq_keys:
            self.frequency[key] = self.frequency.get(key, 0) + 1
        return True

    def subset_seen(self, fp_a, fp_b) -> bool:
        return frozenset((fp_a, fp_b)) in self.combined

    def record_subset(self, fp_a, fp_b) -> None:
        self.combined.add(frozenset((fp_a, fp_b)))


def _quality_keys(cands: Sequence[Candidate]) -> list[tuple]:
    """(pareto rank, -crowding within rank, seq) sort keys; lower is better."""
    objs = [c.objectives for c in cands]
    ranks = nondomination_ranks(objs)
    crowd = [0.0] * len(cands)
    for r in set(ranks):
        idxs = [i for i in range(len(cands)) if ranks[i] == r]
        cd = crowding_distance([objs[i] for i in idxs])
        for i, d in zip(idxs, cd):
            crowd[i] = d
    return [(ranks[i], -crowd[i], cands[i].seq) for i in range(len(cands))]


class Archive:
    """Bounded elitist store of mutually non-dominated candidates."""

    def __init__(self, cap: int) -> None:
        self.cap = cap
        self.entries: list[Candidate] = []

    def __len__(self) -> int:
        return len(self.entries)

    def insert(self, cand: Candidate) -> bool:
        """Reject if strictly dominated; otherwise admit, dropping members the
        candidate strictly dominates, then truncate by crowding if over cap."""
        for member in self.entries:
            if dominates(member.objectives, cand.objectives) is DomRel.STRICT:
                return False
        self.entries = [
            m
            for m in self.entries
            if dominates(cand.objectives, m.objectives) is not DomRel.STRICT
        ]
        self.entries.append(cand)
        while len(self.entries) > self.cap:
            crowd = crowding_distance([m.objectives for m in self.entries])
            evict = min(range(len(self.entries)), key=lambda i: (crowd[i], -i))
            del self.entries[evict]
        return True

    def front(self) -> list[Candidate]:
        return list(self.entries)


@dataclass
class RefSet:
    """Two-tier reference set: tier 1 ordered by quality, tier 2 by how far
    each member sits from the rest of the set."""

    tier1: list[Candidate]
    tier2: list[Candidate]
    relaxations: int = 0

    def members(self) -> list[Candidate]:
        return self.tier1 + self.tier2

    def fingerprints(self) -> set:
        return {c.fingerprint for c in self.members()}

    def reorder(self, problem) -> None:
        if self.tier1:
            keys = _quality_keys(self.tier1)
            order = sorted(range(len(self.tier1)), key=keys.__getitem__)
            self.tier1 = [self.tier1[i] for i in order]
        if self.tier2:
            all_members = self.members()
            self.tier2.sort(
                key=lambda c: (-_distance_min(c, all_members, problem), c.seq)
            )


def _distance_min(cand: Candidate, members: Sequence[Candidate], problem) -> float:
    ds = [
        problem.distance(cand.solution, m.solution)
        for m in members
        if m.fingerprint != cand.fingerprint
    ]
    return min(ds) if ds else math.inf


def refset_init(population: Sequence[Candidate], params: OptParams, problem) -> RefSet:
    """Build the initial refset with the minimum-diversity admission test.

    The best solution seeds the set; later candidates are admitted in quality
    order only when their distance to the current set reaches the threshold.
    If the population cannot fill b members, the threshold is halved (each
    relaxation recorded) until either the set fills or the threshold bottoms
    out, after which only exact duplicates stay excluded.
    """
    if not population:
        raise ValueError("population is empty")
    keys = _quality_keys(population)
    order = sorted(range(len(population)), key=keys.__getitem__)
    ordered = [population[i] for i in order]
    members = [ordered[0]]
    fps = {ordered[0].fingerprint}
    remaining = ordered[1:]
    threshold = params.dist_threshold
    relaxations = 0
    while len(members) < params.b and remaining:
        rejected = []
        for cand in remaining:
            if len(members) >= params.b:
                rejected.append(cand)
                continue
            if cand.fingerprint in fps:
                rejected.append(cand)
                continue
            if _distance_min(cand, members, problem) >= threshold:
                members.append(cand)
                fps.add(cand.fingerprint)
            else:
                rejected.append(cand)
        if len(rejected) == len(remaining):
            # nothing admitted this pass: relax, or give up at the floor
            if threshold < 1e-12:
                for cand in rejected:
                    if len(members) >= params.b:
                        break
                    if cand.fingerprint not in fps:
                        members.append(cand)
                        fps.add(cand.fingerprint)
                break
            threshold *= 0.5
            relaxations += 1
        remaining = rejected
    tier1 = members[: params.b1]
    tier2 = members[params.b1 :]
    refset = RefSet(tier1, tier2, relaxations)
    refset.reorder(problem)
    return refset


def subset_generate(
    candidates: Sequence[Candidate], memory: TabuMemory
) -> list[tuple[Candidate, Candidate]]:
    """All unordered pairs not yet combined; emitted pairs are recorded."""
    pairs = []
    for a, b in itertools.combinations(candidates, 2):
        if a.fingerprint == b.fingerprint:
            continue
        if memory.subset_seen(a.fingerprint, b.fingerprint):
            continue
        memory.record_subset(a.fingerprint, b.fingerprint)
        pairs.append((a, b))
    return pairs


def refset_update_dynamic(
    refset: RefSet, cand: Candidate, problem, params: OptParams
) -> bool:
    """Admit a candidate by quality into tier 1, else by diversity into
    tier 2; the set is reordered after any insertion."""
    if cand.fingerprint in refset.fingerprints():
        return False
    if len(refset.tier1) < params.b1:
        refset.tier1.append(cand)
        refset.reorder(problem)
        return True
    pool = refset.tier1 + [cand]
    keys = _quality_keys(pool)
    cand_key = keys[-1]
    worst_idx = max(range(len(refset.tier1)), key=keys.__getitem__)
    if cand_key < keys[worst_idx]:
        refset.tier1[worst_idx] = cand
        refset.reorder(problem)
        return True
    if len(refset.members()) < params.b:
        refset.tier2.append(cand)
        refset.reorder(problem)
        return True
    if refset.tier2:
        all_members = refset.members()
        d_cand = _distance_min(cand, all_members, problem)
        d_members = [
            _distance_min(m, all_members, problem) for m in refset.tier2
        ]
        incumbent_min = min(d_members)
        if d_cand > incumbent_min:
            # replace the least-diverse member (ties: larger seq goes)
            worst = min(
                range(len(refset.tier2)),
                key=lambda i: (d_members[i], -refset.tier2[i].seq),
            )
            refset.tier2[worst] = cand
            refset.reorder(problem)
            return True
    return False


# ---------------------------------------------------------------- problems


class SchedulingProblem:
    """Permutation-encoded runway schedules over a fixed scenario.

    evaluate(schedule, k, rng) -> (f1, f2) supplies objective samples; pass
    sedr to resample noisy evaluators adaptively. Distances are Hamming over
    per-aircraft (runway, position) rows.
    """

    def __init__(
        self,
        scenario: Scenario,
        evaluate: Callable,
        sedr: SedrParams | None = None,
        seed_schedule: Schedule | None = None,
        diversify_attempts: int = 60,
        insertion_cap: int | None = None,
        tabu_iters: int = 4,
        tabu_sample: int = 6,
    ) -> None:
        self.scenario = scenario
        self.evaluate = evaluate
        self.sedr = sedr
        self._seed_schedule = seed_schedule
        self.diversify_attempts = diversify_attempts
        self.insertion_cap = insertion_cap
        self.tabu_iters = tabu_iters
        self.tabu_sample = tabu_sample

    def seed_solution(self) -> Schedule:
        if self._seed_schedule is not None:
            return self._seed_schedule
        schedule, _ = greedy_schedule(self.scenario)
        return schedule

    def fingerprint(self, schedule: Schedule):
        return schedule.encoding()

    def freq_keys(self, schedule: Schedule):
        return [
            (i, schedule.runway[i], schedule.position[i])
            for i in range(schedule.n)
        ]

    def distance(self, a: Schedule, b: Schedule) -> float:
        return float(encoding_distance(a, b))

    def feasible(self, schedule: Schedule) -> bool:
        return not check_feasibility(schedule, self.scenario)

    def _from_sequences(self, seqs) -> Schedule | None:
        try:
            return Schedule.from_sequences(self.scenario, seqs)
        except (ValueError, KeyError):
            return None

    def diversify(self, seed: Schedule, memory: TabuMemory, rng) -> Schedule | None:
        """One fresh feasible schedule biased against frequent placements."""
        sc = self.scenario
        n = sc.n
        m = sc.runway_count
        for _ in range(self.diversify_attempts):
            order = rng.permutation(n)
            seqs: list[list[int]] = [[] for _ in range(m)]
            for i in order:
                i = int(i)
                scores = [
                    memory.frequency.get((i, r, len(seqs[r]) + 1), 0)
                    for r in range(m)
                ]
                best = min(scores)
                choices = [r for r in range(m) if scores[r] == best]
                r = choices[int(rng.integers(len(choices)))]
                seqs[r].append(i)
            candidate = self._from_sequences(seqs)
            if candidate is not None and not self.feasible(candidate):
                # fall back to target-time order per runway, keeping the
                # diversified runway assignment
                repaired = [
                    sorted(s, key=lambda i: (sc.aircraft[i].target_ms, i))
                    for s in seqs
                ]
                candidate = self._from_sequences(repaired)
                if candidate is not None and not self.feasible(candidate):
                    candidate = None
            if candidate is None:
                continue
            fp = self.fingerprint(candidate)
            if memory.record_visit(fp, self.freq_keys(candidate)):
                return candidate
        return None

    def move_scales(self) -> tuple:
        return (None,)

    def local_moves(self, schedule: Schedule, rng, scale) -> Iterator[Schedule]:
        """Insertion neighborhood: relocate one aircraft to another slot."""
        sc = self.scenario
        m = sc.runway_count
        base = [list(s) for s in schedule.sequences(m)]
        moves = []
        for i in range(sc.n):
            src = schedule.runway[i]
            for r in range(m):
                slots = len(base[r]) + (0 if r == src else 1)
                for pos in range(slots):
                    if r == src and base[r][pos] == i:
                        continue
                    moves.append((i, r, pos))
        if self.insertion_cap is not None and len(moves) > self.insertion_cap:
            picks = rng.choice(len(moves), size=self.insertion_cap, replace=False)
            moves = [moves[int(k)] for k in sorted(picks)]
        for i, r, pos in moves:
            seqs = [list(s) for s in base]
            seqs[schedule.runway[i]].remove(i)
            seqs[r].insert(pos, i)
            candidate = self._from_sequences(seqs)
            if candidate is not None:
                yield candidate

    def perturb_sample(self, schedule: Schedule, rng, count: int) -> list[Schedule]:
        """Random swap/relocate variants for the tabu kick."""
        sc = self.scenario
        n = sc.n
        m = sc.runway_count
        out = []
        for _ in range(count):
            seqs = [list(s) for s in schedule.sequences(m)]
            if n >= 2 and rng.random() < 0.5:
                i, j = rng.choice(n, size=2, replace=False)
                i, j = int(i), int(j)
                ri, pi = schedule.runway[i], schedule.position[i] - 1
                rj, pj = schedule.runway[j], schedule.position[j] - 1
                seqs[ri][pi], seqs[rj][pj] = seqs[rj][pj], seqs[ri][pi]
            else:
                i = int(rng.integers(n))
                r = int(rng.integers(m))
                seqs[schedule.runway[i]].remove(i)
                pos = int(rng.integers(len(seqs[r]) + 1))
                seqs[r].insert(pos, i)
            candidate = self._from_sequences(seqs)
            if candidate is not None:
                out.append(candidate)
        return out

    def combine(self, a: Candidate, b: Candidate, rng) -> list[Schedule]:
        """Position-vote crossover: each aircraft takes its (runway, position)
        from a parent chosen by weighted vote; duplicate claims are repaired
        by order-preserving reinsertion. Returns up to two children (the
        second uses the complementary votes)."""
        pa: Schedule = a.solution
        pb: Schedule = b.solution
        sc = self.scenario
        n = sc.n
        rel = dominates(a.objectives, b.objectives)
        if rel is DomRel.STRICT:
            w = 0.75
        elif dominates(b.objectives, a.objectives) is DomRel.STRICT:
            w = 0.25
        else:
            w = 0.5
        votes = rng.random(n) < w  # True: inherit from parent a
        children = []
        for mask in (votes, ~votes):
            claims = [
                (
                    (pa.runway[i], pa.position[i])
                    if mask[i]
                    else (pb.runway[i], pb.position[i])
                )
                for i in range(n)
            ]
            seqs: list[list[int]] = [[] for _ in range(sc.runway_count)]
            order = sorted(range(n), key=lambda i: (claims[i][1], i))
            for i in order:
                seqs[claims[i][0]].append(i)
            child = self._from_sequences(seqs)
            if child is not None and self.feasible(child):
                children.append(child)
        return children


class ContinuousProblem:
    """Two-variable boxed problems (benchmark functions).

    Fingerprints are grid-rounded coordinates; the frequency memory counts
    coarse grid cells so diversification spreads over the box; local moves
    are pattern steps over a shrinking scale schedule.
    """

    def __init__(
        self,
        evaluate: Callable,
        bounds: tuple[tuple[float, float], tuple[float, float]],
        sedr: SedrParams | None = None,
        grid: int = 12,
        fingerprint_decimals: int = 6,
        scales: tuple[float, ...] = (0.09, 0.015),
        diversify_attempts: int = 200,
        tabu_iters: int = 3,
        tabu_sample: int = 4,
    ) -> None:
        self.evaluate = evaluate
        self.bounds = bounds
        self.sedr = sedr
        self.grid = grid
        self.decimals = fingerprint_decimals
        self._scales = scales
        self.diversify_attempts = diversify_attempts
        self.tabu_iters = tabu_iters
        self.tabu_sample = tabu_sample

    def _clip(self, x: float, k: int) -> float:
        lo, hi = self.bounds[k]
        return min(max(x, lo), hi)

    def seed_solution(self) -> tuple[float, float]:
        return (
            (self.bounds[0][0] + self.bounds[0][1]) / 2.0,
            (self.bounds[1][0] + self.bounds[1][1]) / 2.0,
        )

    def fingerprint(self, x) -> tuple[float, float]:
        return (round(x[0], self.decimals), round(x[1], self.decimals))

    def _cell(self, x) -> tuple[int, int]:
        cells = []
        for k in range(2):
            lo, hi = self.bounds[k]
            frac = (x[k] - lo) / (hi - lo) if hi > lo else 0.0
            cells.append(min(self.grid - 1, max(0, int(frac * self.grid))))
        return (cells[0], cells[1])

    def freq_keys(self, x):
        return [self._cell(x)]

    def distance(self, a, b) -> float:
        return math.hypot(a[0] - b[0], a[1] - b[1])

    def feasible(self, x) -> bool:
        return (
            self.bounds[0][0] <= x[0] <= self.bounds[0][1]
            and self.bounds[1][0] <= x[1] <= self.bounds[1][1]
        )

    def diversify(self, seed, memory: TabuMemory, rng) -> tuple | None:
        """Uniform point inside the least-visited grid cell."""
        for _ in range(self.diversify_attempts):
            counts = np.empty((self.grid, self.grid))
            for gx in range(self.grid):
                for gy in range(self.grid):
                    counts[gx, gy] = memory.frequency.get((gx, gy), 0)
            best = counts.min()
            options = np.argwhere(counts == best)
            gx, gy = options[int(rng.integers(len(options)))]
            point = []
            for k, g in ((0, int(gx)), (1, int(gy))):
                lo, hi = self.bounds[k]
                width = (hi - lo) / self.grid
                point.append(lo + (g + rng.random()) * width)
            x = (point[0], point[1])
            fp = self.fingerprint(x)
            if memory.record_visit(fp, self.freq_keys(x)):
                return x
        return None

    def move_scales(self) -> tuple:
        return self._scales

    def local_moves(self, x, rng, scale) -> Iterator[tuple]:
        sx = scale * (self.bounds[0][1] - self.bounds[0][0])
        sy = scale * (self.bounds[1][1] - self.bounds[1][0])
        for dx, dy in (
            (1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1),
        ):
            cand = (self._clip(x[0] + dx * sx, 0), self._clip(x[1] + dy * sy, 1))
            if cand != x:
                yield cand

    def perturb_sample(self, x, rng, count: int) -> list[tuple]:
        out = []
        for _ in range(count):
            jitter = rng.normal(0.0, 0.05, size=2)
            out.append(
                (
                    self._clip(x[0] + jitter[0] * (self.bounds[0][1] - self.bounds[0][0]), 0),
                    self._clip(x[1] + jitter[1] * (self.bounds[1][1] - self.bounds[1][0]), 1),
                )
            )
        return out

    def combine(self, a: Candidate, b: Candidate, rng) -> list[tuple]:
        """Midpoint plus an extrapolation past the better parent."""
        xa, xb = a.solution, b.solution
        rel = dominates(b.objectives, a.objectives)
        better, worse = (b, a) if rel is DomRel.STRICT else (a, b)
        mid = ((xa[0] + xb[0]) / 2.0, (xa[1] + xb[1]) / 2.0)
        xb_, xw = better.solution, worse.solution
        out = (
            self._clip(xb_[0] + 0.5 * (xb_[0] - xw[0]), 0),
            self._clip(xb_[1] + 0.5 * (xb_[1] - xw[1]), 1),
        )
        return [mid, out]


# ------------------------------------------------------------------- engine


@dataclass
class RunStats:
    candidate_evals: int = 0
    samples: int = 0
    iterations: int = 0
    admissions: int = 0
    rebuilds: int = 0
    relaxations: int = 0
    runtime_s: float = 0.0
    budget_exhausted: bool = False
    diversification_starved: bool = False


@dataclass(frozen=True)
class IterationRow:
    """Progress-log row emitted after each iteration."""

    iteration: int
    evaluations: int
    archive_size: int
    hv_so_far: float


@dataclass(frozen=True)
class OptResult:
    front: tuple[Candidate, ...]
    refset: RefSet
    archive: tuple[Candidate, ...]
    stats: RunStats
    progress: tuple[IterationRow, ...]


class _Engine:
    def __init__(self, problem, params: OptParams, budget: Budget, seed: int):
        self.problem = problem
        self.params = params
        self.budget = budget
        main_ss, elite_ss = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(main_ss)
        # separate stream so switching elitism off leaves the rest of the
        # run's random draws aligned
        self._elite_rng = np.random.default_rng(elite_ss)
        self.memory = TabuMemory()
        self.archive = Archive(params.archive_cap)
        self.streams = SampleStreams(seed, fingerprint=problem.fingerprint)
        self.ranges = RunningRanges()
        self.stats = RunStats()
        self.progress: list[IterationRow] = []
        self.population: list[Candidate] = []
        self._seq = 0
        self._t0 = time.perf_counter()

    # --- budget

    def _remaining_evals(self) -> int | None:
        if self.budget.max_evals is None:
            return None
        return self.budget.max_evals - self.stats.samples

    def _out_of_time(self) -> bool:
        limits = [
            t
            for t in (self.budget.max_cpu_s, self.params.max_cpu_s)
            if t is not None
        ]
        if not limits:
            return False
        return (time.perf_counter() - self._t0) >= min(limits)

    def _check_budget(self) -> None:
        remaining = self._remaining_evals()
        floor = self.problem.sedr.t_min if self.problem.sedr is not None else 1
        if remaining is not None and remaining < floor:
            self.stats.budget_exhausted = True
            raise _Exhausted
        if self._out_of_time():
            self.stats.budget_exhausted = True
            raise _Exhausted

    # --- the single evaluation path

    def evaluate_new(self, solution) -> Candidate:
        """Evaluate a never-seen solution; every objective sample in the run
        flows through here."""
        self._check_budget()
        fp = self.problem.fingerprint(solution)
        self.memory.record_visit(fp, self.problem.freq_keys(solution))
        sedr = self.problem.sedr
        if sedr is not None:
            remaining = self._remaining_evals()
            if remaining is not None and remaining < sedr.hard_cap:
                sedr = replace(sedr, hard_cap=max(sedr.t_min, remaining))
            rec = sedr_evaluate(
                solution, self.problem.evaluate, sedr, self.streams, scales=self.ranges
            )
            objectives = rec.mean
            self.stats.samples += rec.n
        else:
            f1, f2 = self.problem.evaluate(
                solution, 0, self.streams.rng_for(solution, 0)
            )
            self.ranges.update(f1, f2)
            objectives = ObjectiveVector(float(f1), float(f2))
            self.stats.samples += 1
        self.stats.candidate_evals += 1
        cand = Candidate(solution, objectives, fp, self._seq)
        self._seq += 1
        if self.params.elitist:
            self.archive.insert(cand)
        return cand

    def _maybe_evaluate(self, solution) -> Candidate | None:
        """Evaluate unless the fingerprint was already visited or infeasible."""
        if self.memory.seen(self.problem.fingerprint(solution)):
            return None
        if not self.problem.feasible(solution):
            return None
        return self.evaluate_new(solution)

    # --- improvement

    def _dominance_count(self, objectives, context) -> int:
        return sum(
            1 for o in context if dominates(objectives, o) is DomRel.STRICT
        )

    def _norm_sum(self, objectives) -> float:
        s1, s2 = self.ranges.scales()
        return objectives[0] / s1 + objectives[1] / s2

    def _tabu_step(self, cand: Candidate) -> Candidate:
        """Short kick through unvisited neighbors, keeping the best found."""
        best = cand
        cur = cand
        for _ in range(self.problem.tabu_iters):
            raw = self.problem.perturb_sample(
                cur.solution, self.rng, self.problem.tabu_sample
            )
            evaluated = []
            for sol in raw:
                got = self._maybe_evaluate(sol)
                if got is not None:
                    evaluated.append(got)
            if not evaluated:
                break
            pick = min(
                evaluated,
                key=lambda c: (
                    0 if dominates(c.objectives, best.objectives) is DomRel.STRICT else 1,
                    self._norm_sum(c.objectives),
                    c.seq,
                ),
            )
            cur = pick
            if dominates(pick.objectives, best.objectives) is DomRel.STRICT:
                best = pick
        return best

    def improve(self, cand: Candidate, context: Sequence[ObjectiveVector]) -> Candidate:
        """Gated tabu kick, then first-improvement descent over local moves.

        The result weakly dominates the input under the evaluator's means.
        """
        if self._dominance_count(cand.objectives, context) >= self.params.improve_threshold:
            cand = self._tabu_step(cand)
        for scale in self.problem.move_scales():
            while True:
                found = None
                for sol in self.problem.local_moves(cand.solution, self.rng, scale):
                    got = self._maybe_evaluate(sol)
                    if got is None:
                        continue
                    if dominates(got.objectives, cand.objectives) is DomRel.STRICT:
                        found = got
                        break
                if found is None:
                    break
                cand = found
        return cand

    # --- elitism

    def _tournament_pool(self, refset: RefSet) -> list[Candidate]:
        combined = self.archive.front() + refset.members()
        if len(combined) < 2:
            return []
        crowd = crowding_distance([c.objectives for c in combined])
        refset_fps = refset.fingerprints()
        picks: list[Candidate] = []
        seen = set()
        for _ in range(self.params.b1):
            i = int(self._elite_rng.integers(len(combined)))
            j = int(self._elite_rng.integers(len(combined)))
            a, b = combined[i], combined[j]
            if dominates(a.objectives, b.objectives) is DomRel.STRICT:
                winner = a
            elif dominates(b.objectives, a.objectives) is DomRel.STRICT:
                winner = b
            elif crowd[i] != crowd[j]:
                winner = a if crowd[i] > crowd[j] else b
            else:
                winner = a if a.seq <= b.seq else b
            if winner.fingerprint not in refset_fps and winner.fingerprint not in seen:
                picks.append(winner)
                seen.add(winner.fingerprint)
        return picks

    # --- phases

    def build_population(self) -> None:
        seed_sol = self.problem.seed_solution()
        population = self.population
        fps = set()
        seed_cand = self._maybe_evaluate(seed_sol)
        if seed_cand is not None:
            seed_cand = self.improve(seed_cand, [])
            population.append(seed_cand)
            fps.add(seed_cand.fingerprint)
        while len(population) < self.params.psize:
            sol = self.problem.diversify(seed_sol, self.memory, self.rng)
            if sol is None:
                self.stats.diversification_starved = True
                break
            if not self.problem.feasible(sol):
                continue
            cand = self.evaluate_new(sol)
            cand = self.improve(cand, [c.objectives for c in population])
            if cand.fingerprint not in fps:
                population.append(cand)
                fps.add(cand.fingerprint)

    def rebuild(self, refset: RefSet, seed_sol) -> bool:
        """Replace tier 2 with fresh diversified solutions chosen max-min."""
        retained = list(refset.tier1)
        need = self.params.b - len(retained)
        if need <= 0:
            return False
        pool: list[Candidate] = []
        attempts = 0
        while len(pool) < 3 * need and attempts < 6 * need:
            attempts += 1
            sol = self.problem.diversify(seed_sol, self.memory, self.rng)
            if sol is None:
                self.stats.diversification_starved = True
                break
            if not self.problem.feasible(sol):
                continue
            pool.append(self.evaluate_new(sol))
        if not pool:
            return False
        chosen: list[Candidate] = []
        anchors = retained[:]
        while pool and len(chosen) < need:
            best = max(
                pool,
                key=lambda c: (_distance_min(c, anchors, self.problem), -c.seq),
            )
            pool.remove(best)
            chosen.append(best)
            anchors.append(best)
        refset.tier2 = chosen
        refset.reorder(self.problem)
        self.stats.rebuilds += 1
        return True

    def _hv_so_far(self) -> float:
        objs = [c.objectives for c in self.archive.front()]
        if len(objs) < 1:
            return 0.0
        f1 = [o[0] for o in objs]
        f2 = [o[1] for o in objs]
        bounds = ((min(f1), max(f1)), (min(f2), max(f2)))
        return hypervolume(normalize_front(objs, bounds))

    def run(self, on_iteration=None) -> OptResult:
        refset = RefSet([], [])
        try:
            self.build_population()
            if self.population:
                refset = refset_init(self.population, self.params, self.problem)
                self.stats.relaxations = refset.relaxations
            self._loop(refset, on_iteration)
        except _Exhausted:
            if not refset.members() and self.population:
                refset = refset_init(self.population, self.params, self.problem)
                self.stats.relaxations = refset.relaxations
        self.stats.runtime_s = time.perf_counter() - self._t0
        merged: list[Candidate] = list(self.archive.front())
        seen = {c.fingerprint for c in merged}
        for c in refset.members():
            if c.fingerprint not in seen:
                merged.append(c)
                seen.add(c.fingerprint)
        objs = [c.objectives for c in merged]
        front_objs = nondominated_filter(objs)
        front = []
        used = [False] * len(merged)
        for p in front_objs:
            for i, c in enumerate(merged):
                if not used[i] and c.objectives == p:
                    front.append(c)
                    used[i] = True
                    break
        front.sort(key=lambda c: (c.objectives[0], c.objectives[1], c.seq))
        return OptResult(
            front=tuple(front),
            refset=refset,
            archive=tuple(self.archive.front()),
            stats=self.stats,
            progress=tuple(self.progress),
        )

    def _loop(self, refset: RefSet, on_iteration) -> None:
        if not refset.members():
            return
        seed_sol = self.problem.seed_solution()
        max_iters = [
            v for v in (self.params.max_iter, self.budget.max_iter) if v is not None
        ]
        max_iter = min(max_iters) if max_iters else None
        while max_iter is None or self.stats.iterations < max_iter:
            self._check_budget()
            self.stats.iterations += 1
            pairs = subset_generate(refset.members(), self.memory)
            if self.params.elitist:
                # elite parents pair after the plain refset pairs, so the
                # non-elitist run is a prefix of this one within a sweep
                picks = self._tournament_pool(refset)
                pairs += subset_generate(refset.members() + picks, self.memory)
            context = [m.objectives for m in refset.members()]
            new_solution = False
            pending: list[Candidate] = []
            queue = deque(pairs)
            while queue:
                a, b = queue.popleft()
                children = self.problem.combine(a, b, self.rng)
                for sol in children:
                    cand = self._maybe_evaluate(sol)
                    if cand is None:
                        continue
                    cand = self.improve(cand, context)
                    if self.params.dynamic_update:
                        if refset_update_dynamic(refset, cand, self.problem, self.params):
                            new_solution = True
                            self.stats.admissions += 1
                            # the admission lands before the remaining pending
                            # combinations run; pairings of the new member
                            # join the tail of the same sweep
                            queue.extend(
                                subset_generate(refset.members(), self.memory)
                            )
                    else:
                        pending.append(cand)
            for cand in pending:
                if refset_update_dynamic(refset, cand, self.problem, self.params):
                    new_solution = True
                    self.stats.admissions += 1
            row = IterationRow(
                iteration=self.stats.iterations,
                evaluations=self.stats.samples,
                archive_size=len(self.archive),
                hv_so_far=self._hv_so_far(),
            )
            self.progress.append(row)
            if on_iteration is not None:
                on_iteration(row)
            if not new_solution:
                # a full sweep admitted nothing: rebuild the diversity tier,
                # or stop when rebuilding is off or starved
                rebuilt = self.params.rebuild_enabled and self.rebuild(
                    refset, seed_sol
                )
                if not rebuilt:
                    break


def run(
    problem,
    params: OptParams,
    budget: Budget | int | None = None,
    seed: int = 0,
    on_iteration: Callable[[IterationRow], None] | None = None,
) -> OptResult:
    """Run the search to its budget and return the non-dominated front of
    archive and refset, plus the final refset, archive, and run statistics.

    Runs are deterministic in (problem, params, budget, seed) as long as the
    budget is expressed in evaluations or iterations (CPU-time limits depend
    on the machine). An integer budget is a sample-evaluation cap, except 0,
    which runs only the initialization phase and returns its front; when no
    limit is given at all the loop defaults to 100 iterations.
    """
    if budget is None:
        budget = Budget()
    elif isinstance(budget, int):
        budget = Budget(max_iter=0) if budget == 0 else Budget(max_evals=budget)
    if (
        budget.max_evals is None
        and budget.max_iter is None
        and budget.max_cpu_s is None
        and params.max_iter is None
        and params.max_cpu_s is None
    ):
        budget = replace(budget, max_iter=100)
    return _Engine(problem, params, budget, seed).run(on_iteration)
