"""Adaptive replication budgeting for noisy objective evaluations.

Each candidate solution is sampled a minimum number of times, then resampled
one replication at a time while the average standard error of its two
objective estimates stays at or above a threshold, up to a hard cap. Sample
streams are keyed by (solution fingerprint, sample index), so re-evaluating
the same solution reproduces the same draws.

The two objectives live on incomparable scales (seconds vs squared seconds),
so the stop rule averages standard errors after dividing each objective by a
caller-supplied scale; passing a RunningRanges tracker normalizes by the
min-max span of everything sampled so far in the run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from runwaysched.domain import ObjectiveVector, Scenario, Schedule
from runwaysched.simulator import simulate

__all__ = [
    "SedrParams",
    "EvalRecord",
    "SampleStreams",
    "RunningRanges",
    "solution_fingerprint",
    "sedr_evaluate",
    "simulation_evaluator",
    "noisy_function_evaluator",
]

Evaluator = Callable[[object, int, np.random.Generator], tuple[float, float]]


@dataclass(frozen=True)
class SedrParams:
    """Stop-rule knobs: initial samples, SE threshold, per-solution cap."""

    t_min: int = 5
    se_threshold: float = 0.05
    hard_cap: int = 30

    def __post_init__(self) -> None:
        if self.t_min < 2:
            raise ValueError("t_min must be at least 2 (sample sd needs n >= 2)")
        if self.se_threshold <= 0:
            raise ValueError("se_threshold must be positive")
        if self.hard_cap < self.t_min:
            raise ValueError("hard_cap must be at least t_min")


@dataclass(frozen=True)
class EvalRecord:
    """Sampled objective estimate for one solution."""

    samples: tuple[tuple[float, float], ...]
    mean: ObjectiveVector
    sd: tuple[float, float]
    se: tuple[float, float]
    n: int
    budget_capped: bool


def solution_fingerprint(solution) -> object:
    """Canonical hashable identity of a candidate solution."""
    enc = getattr(solution, "encoding", None)
    if callable(enc):
        return tuple(enc())
    if isinstance(solution, (tuple, list)):
        return tuple(solution)
    return solution


class SampleStreams:
    """Deterministic per-(solution, sample index) random number streams."""

    def __init__(self, base_seed: int, fingerprint=solution_fingerprint) -> None:
        self.base_seed = base_seed
        self._fingerprint = fingerprint

    def seed_for(self, solution, k: int) -> int:
        fp = self._fingerprint(solution)
        ss = np.random.SeedSequence(
            entropy=self.base_seed % (2**128),
            spawn_key=(hash(fp) % (2**63), k),
        )
        return int(ss.generate_state(2, np.uint64)[0])

    def rng_for(self, solution, k: int) -> np.random.Generator:
        return np.random.default_rng(self.seed_for(solution, k))


class RunningRanges:
    """Min-max span per objective over every sample seen so far in a run."""

    __slots__ = ("lo", "hi")

    def __init__(self) -> None:
        self.lo = [math.inf, math.inf]
        self.hi = [-math.inf, -math.inf]

    def update(self, f1: float, f2: float) -> None:
        for k, v in enumerate((f1, f2)):
            if v < self.lo[k]:
                self.lo[k] = v
            if v > self.hi[k]:
                self.hi[k] = v

    def scales(self) -> tuple[float, float]:
        spans = []
        for k in range(2):
            span = self.hi[k] - self.lo[k]
            spans.append(span if span > 0 and math.isfinite(span) else 1.0)
        return (spans[0], spans[1])


def _moments(samples: list[tuple[float, float]]):
    n = len(samples)
    mean = (
        sum(s[0] for s in samples) / n,
        sum(s[1] for s in samples) / n,
    )
    if n > 1:
        sd = tuple(
            math.sqrt(sum((s[k] - mean[k]) ** 2 for s in samples) / (n - 1))
            for k in range(2)
        )
    else:
        sd = (0.0, 0.0)
    se = (sd[0] / math.sqrt(n), sd[1] / math.sqrt(n))
    return mean, sd, se


def sedr_evaluate(
    solution,
    evaluator: Evaluator,
    params: SedrParams,
    streams: SampleStreams,
    scales: Sequence[float] | RunningRanges = (1.0, 1.0),
) -> EvalRecord:
    """Sample a solution until its objective estimates are precise enough.

    Draws t_min samples, then adds one sample at a time while the mean of the
    two scaled standard errors is at or above the threshold, stopping early
    at the hard cap (flagged on the record).
    """
    dynamic = hasattr(scales, "update")
    samples: list[tuple[float, float]] = []

    def draw() -> None:
        k = len(samples)
        f1, f2 = evaluator(solution, k, streams.rng_for(solution, k))
        samples.append((float(f1), float(f2)))
        if dynamic:
            scales.update(f1, f2)

    for _ in range(params.t_min):
        draw()
    capped = False
    while True:
        mean, sd, se = _moments(samples)
        s1, s2 = scales.scales() if dynamic else scales
        ase = (se[0] / (s1 if s1 > 0 else 1.0) + se[1] / (s2 if s2 > 0 else 1.0)) / 2
        if ase < params.se_threshold:
            break
        if len(samples) >= params.hard_cap:
            capped = True
            break
        draw()
    return EvalRecord(
        samples=tuple(samples),
        mean=ObjectiveVector(mean[0], mean[1]),
        sd=(sd[0], sd[1]),
        se=se,
        n=len(samples),
        budget_capped=capped,
    )


def simulation_evaluator(
    scenario: Scenario, base_seed: int, antithetic: bool = False
) -> Evaluator:
    """Objective sampler that replays a schedule under replication k.

    Perturbation draws are keyed by aircraft and replication inside the
    simulator, so different schedules sampled at the same index share the
    same random numbers.
    """

    def evaluate(schedule: Schedule, k: int, rng: np.random.Generator):
        out = simulate(schedule, scenario, base_seed, replication=k, antithetic=antithetic)
        return (out.f1, out.f2)

    return evaluate


def noisy_function_evaluator(f, sigma: float) -> Evaluator:
    """Additive-Gaussian-noise wrapper around a deterministic 2-objective f."""

    def evaluate(x, k: int, rng: np.random.Generator):
        f1, f2 = f(x)
        if sigma:
            eps = rng.normal(0.0, sigma, size=2)
            return (f1 + eps[0], f2 + eps[1])
        return (f1, f2)

    return evaluate
