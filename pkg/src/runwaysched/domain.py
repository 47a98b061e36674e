"""Data model for multi-runway arrival/departure scheduling.

Times are integer milliseconds internally; file formats and user-facing
numbers are seconds. All value types are immutable and hashable so they can
key caches and be shared freely between threads.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

SCENARIO_SCHEMA_VERSION = "v1"

DEFAULT_MAX_DELAY_MS = 600_000

KNOTS_TO_NM_PER_MS = 1.0 / 3_600_000.0


def ms_from_s(seconds: float) -> int:
    """Convert seconds to the internal integer-millisecond representation."""
    return round(seconds * 1000)


def s_from_ms(millis: int) -> float:
    return millis / 1000.0


class OperationType(enum.IntEnum):
    ARRIVAL = 0
    DEPARTURE = 1

    @property
    def json_name(self) -> str:
        return "arrival" if self is OperationType.ARRIVAL else "departure"

    @classmethod
    def from_name(cls, name: str) -> "OperationType":
        try:
            return _OP_BY_NAME[name.lower()]
        except KeyError:
            raise ValueError(f"unknown operation type: {name!r}") from None


_OP_BY_NAME = {"arrival": OperationType.ARRIVAL, "departure": OperationType.DEPARTURE}


class WeightClass(enum.IntEnum):
    HEAVY = 0
    B757 = 1
    LARGE = 2
    SMALL = 3

    @property
    def json_name(self) -> str:
        return _CLASS_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "WeightClass":
        try:
            return _CLASS_BY_NAME[name.lower()]
        except KeyError:
            raise ValueError(f"unknown weight class: {name!r}") from None


_CLASS_NAMES = {
    WeightClass.HEAVY: "heavy",
    WeightClass.B757: "b757",
    WeightClass.LARGE: "large",
    WeightClass.SMALL: "small",
}
_CLASS_BY_NAME = {v: k for k, v in _CLASS_NAMES.items()}


class SpacingBand(enum.IntEnum):
    """Lateral spacing between a parallel runway pair."""

    BELOW_760M = 0
    FROM_760_TO_1310M = 1
    ABOVE_1310M = 2

    @property
    def json_name(self) -> str:
        return _BAND_NAMES[self]

    @classmethod
    def from_name(cls, name: str) -> "SpacingBand":
        try:
            return _BAND_BY_NAME[name]
        except KeyError:
            raise ValueError(f"unknown spacing band: {name!r}") from None


_BAND_NAMES = {
    SpacingBand.BELOW_760M: "<760m",
    SpacingBand.FROM_760_TO_1310M: "760-1310m",
    SpacingBand.ABOVE_1310M: ">1310m",
}
_BAND_BY_NAME = {v: k for k, v in _BAND_NAMES.items()}


class ObjectiveVector(NamedTuple):
    """Bi-objective fitness: f1 makespan-like (s), f2 unfairness (s^2)."""

    f1: float
    f2: float


@dataclass(frozen=True)
class Aircraft:
    """One runway operation request.

    `ready_ms <= target_ms <= due_ms` and `system_arrival_ms <= ready_ms`;
    `system_arrival_ms` is when the aircraft enters the modeled system
    (radar range for arrivals, holding area for departures).
    """

    id: int
    op: OperationType
    wclass: WeightClass
    ready_ms: int
    target_ms: int
    due_ms: int
    system_arrival_ms: int
    weight: float = 1.0

    def __post_init__(self) -> None:
        if not self.ready_ms <= self.target_ms <= self.due_ms:
            raise ValueError(
                f"aircraft {self.id}: require ready <= target <= due, got "
                f"{self.ready_ms}, {self.target_ms}, {self.due_ms}"
            )
        if self.system_arrival_ms > self.ready_ms:
            raise ValueError(
                f"aircraft {self.id}: system arrival {self.system_arrival_ms} "
                f"after ready time {self.ready_ms}"
            )
        if self.weight < 0:
            raise ValueError(f"aircraft {self.id}: negative weight")

    @classmethod
    def from_seconds(
        cls,
        id: int,
        op: OperationType,
        wclass: WeightClass,
        ready_s: float,
        target_s: float | None = None,
        due_s: float | None = None,
        system_arrival_s: float | None = None,
        weight: float = 1.0,
    ) -> "Aircraft":
        """Build from second-valued times; target defaults to ready and due
        to target + 600 s."""
        ready = ms_from_s(ready_s)
        target = ready if target_s is None else ms_from_s(target_s)
        due = target + DEFAULT_MAX_DELAY_MS if due_s is None else ms_from_s(due_s)
        sysarr = ready if system_arrival_s is None else ms_from_s(system_arrival_s)
        return cls(id, op, wclass, ready, target, due, sysarr, weight)


# Same-runway separation requirements in seconds. Row order and column order
# are Heavy, B757, Large, Small; the row is the leader.
SAME_RUNWAY_SEPARATION_S = {
    (OperationType.DEPARTURE, OperationType.DEPARTURE): (
        (60, 90, 120, 120),
        (60, 60, 90, 90),
        (60, 60, 60, 90),
        (60, 60, 60, 60),
    ),
    (OperationType.DEPARTURE, OperationType.ARRIVAL): (
        (50, 53, 55, 65),
        (50, 53, 55, 65),
        (50, 53, 55, 65),
        (50, 53, 55, 65),
    ),
    (OperationType.ARRIVAL, OperationType.DEPARTURE): (
        (75, 75, 75, 75),
        (65, 65, 65, 65),
        (55, 55, 55, 55),
        (40, 40, 40, 40),
    ),
    (OperationType.ARRIVAL, OperationType.ARRIVAL): (
        (96, 133, 157, 196),
        (74, 107, 133, 157),
        (60, 65, 69, 131),
        (60, 65, 69, 82),
    ),
}


class ParallelRuleKind(enum.IntEnum):
    SAME_AS_SINGLE = 0
    INDEPENDENT = 1
    FIXED = 2


@dataclass(frozen=True)
class ParallelRule:
    kind: ParallelRuleKind
    fixed_ms: int = 0

    def to_json(self):
        if self.kind is ParallelRuleKind.SAME_AS_SINGLE:
            return "same"
        if self.kind is ParallelRuleKind.INDEPENDENT:
            return "independent"
        return s_from_ms(self.fixed_ms)

    @classmethod
    def from_json(cls, value) -> "ParallelRule":
        if value == "same":
            return cls(ParallelRuleKind.SAME_AS_SINGLE)
        if value == "independent":
            return cls(ParallelRuleKind.INDEPENDENT)
        if isinstance(value, (int, float)):
            return cls(ParallelRuleKind.FIXED, ms_from_s(value))
        raise ValueError(f"unknown parallel rule: {value!r}")


_SAME = ParallelRule(ParallelRuleKind.SAME_AS_SINGLE)
_INDEP = ParallelRule(ParallelRuleKind.INDEPENDENT)

# Parallel-runway rules keyed by spacing band, then (leader op, follower op).
DEFAULT_PARALLEL_RULES = {
    SpacingBand.BELOW_760M: {
        (OperationType.DEPARTURE, OperationType.DEPARTURE): _SAME,
        (OperationType.DEPARTURE, OperationType.ARRIVAL): _SAME,
        (OperationType.ARRIVAL, OperationType.DEPARTURE): _INDEP,
        (OperationType.ARRIVAL, OperationType.ARRIVAL): _SAME,
    },
    SpacingBand.FROM_760_TO_1310M: {
        (OperationType.DEPARTURE, OperationType.DEPARTURE): _INDEP,
        (OperationType.DEPARTURE, OperationType.ARRIVAL): _INDEP,
        (OperationType.ARRIVAL, OperationType.DEPARTURE): _INDEP,
        (OperationType.ARRIVAL, OperationType.ARRIVAL): ParallelRule(
            ParallelRuleKind.FIXED, 40_000
        ),
    },
    SpacingBand.ABOVE_1310M: {
        (OperationType.DEPARTURE, OperationType.DEPARTURE): _INDEP,
        (OperationType.DEPARTURE, OperationType.ARRIVAL): _INDEP,
        (OperationType.ARRIVAL, OperationType.DEPARTURE): _INDEP,
        (OperationType.ARRIVAL, OperationType.ARRIVAL): _INDEP,
    },
}

_OPS = (OperationType.ARRIVAL, OperationType.DEPARTURE)
_CLASSES = (WeightClass.HEAVY, WeightClass.B757, WeightClass.LARGE, WeightClass.SMALL)
_OP_PAIRS = [(a, b) for a in _OPS for b in _OPS]


def _flat_index(
    leader_op: OperationType,
    leader_cls: WeightClass,
    follower_op: OperationType,
    follower_cls: WeightClass,
) -> int:
    return ((int(leader_op) * 4 + int(leader_cls)) * 2 + int(follower_op)) * 4 + int(
        follower_cls
    )


@dataclass(frozen=True)
class SeparationMatrix:
    """Minimum time separations between consecutive runway operations.

    `same_runway_ms` is a flat 64-entry tuple indexed by
    (leader op, leader class, follower op, follower class); `parallel` maps a
    spacing band and op pair to the rule applied across that runway pair.
    """

    same_runway_ms: tuple[int, ...]
    parallel: tuple[tuple[ParallelRule, ...], ...]  # [band][op-pair index]

    def __post_init__(self) -> None:
        if len(self.same_runway_ms) != 64:
            raise ValueError("same-runway table must have 64 entries")
        if any(v < 0 for v in self.same_runway_ms):
            raise ValueError("separations must be nonnegative")
        if len(self.parallel) != 3 or any(len(row) != 4 for row in self.parallel):
            raise ValueError("parallel rules must cover 3 bands x 4 op pairs")

    def same_runway(
        self,
        leader_op: OperationType,
        leader_cls: WeightClass,
        follower_op: OperationType,
        follower_cls: WeightClass,
    ) -> int:
        return self.same_runway_ms[
            _flat_index(leader_op, leader_cls, follower_op, follower_cls)
        ]

    def between(self, leader: Aircraft, follower: Aircraft) -> int:
        return self.same_runway(leader.op, leader.wclass, follower.op, follower.wclass)

    def parallel_rule(
        self, band: SpacingBand, leader_op: OperationType, follower_op: OperationType
    ) -> ParallelRule:
        return self.parallel[int(band)][int(leader_op) * 2 + int(follower_op)]

    def cross_runway(
        self,
        band: SpacingBand,
        leader_op: OperationType,
        leader_cls: WeightClass,
        follower_op: OperationType,
        follower_cls: WeightClass,
    ) -> int:
        """Required gap across a parallel runway pair (0 when independent)."""
        rule = self.parallel_rule(band, leader_op, follower_op)
        if rule.kind is ParallelRuleKind.INDEPENDENT:
            return 0
        if rule.kind is ParallelRuleKind.FIXED:
            return rule.fixed_ms
        return self.same_runway(leader_op, leader_cls, follower_op, follower_cls)

    def mean_same_runway_ms(self) -> float:
        return sum(self.same_runway_ms) / len(self.same_runway_ms)

    def to_json(self) -> dict:
        same = {}
        for (lop, fop), rows in self._rows().items():
            key = f"{lop.json_name}->{fop.json_name}"
            same[key] = {
                lcls.json_name: {
                    fcls.json_name: s_from_ms(rows[int(lcls)][int(fcls)])
                    for fcls in _CLASSES
                }
                for lcls in _CLASSES
            }
        parallel = {
            band.json_name: {
                f"{lop.json_name}->{fop.json_name}": self.parallel_rule(
                    band, lop, fop
                ).to_json()
                for lop, fop in _OP_PAIRS
            }
            for band in SpacingBand
        }
        return {"same_runway_s": same, "parallel": parallel}

    def _rows(self) -> dict:
        out = {}
        for lop, fop in _OP_PAIRS:
            out[(lop, fop)] = tuple(
                tuple(self.same_runway(lop, lcls, fop, fcls) for fcls in _CLASSES)
                for lcls in _CLASSES
            )
        return out

    @classmethod
    def from_json(cls, data: dict) -> "SeparationMatrix":
        flat = [0] * 64
        for key, rows in data["same_runway_s"].items():
            lop_name, fop_name = key.split("->")
            lop = OperationType.from_name(lop_name)
            fop = OperationType.from_name(fop_name)
            for lcls_name, cols in rows.items():
                lcls = WeightClass.from_name(lcls_name)
                for fcls_name, seconds in cols.items():
                    fcls = WeightClass.from_name(fcls_name)
                    flat[_flat_index(lop, lcls, fop, fcls)] = ms_from_s(seconds)
        parallel = []
        for band in SpacingBand:
            rules = data["parallel"][band.json_name]
            parallel.append(
                tuple(
                    ParallelRule.from_json(rules[f"{lop.json_name}->{fop.json_name}"])
                    for lop, fop in _OP_PAIRS
                )
            )
        return cls(tuple(flat), tuple(parallel))


def default_separation() -> SeparationMatrix:
    """Separation matrix preloaded with the bundled reference values."""
    flat = [0] * 64
    for (lop, fop), rows in SAME_RUNWAY_SEPARATION_S.items():
        for lcls in _CLASSES:
            for fcls in _CLASSES:
                flat[_flat_index(lop, lcls, fop, fcls)] = (
                    rows[int(lcls)][int(fcls)] * 1000
                )
    parallel = tuple(
        tuple(DEFAULT_PARALLEL_RULES[band][(lop, fop)] for lop, fop in _OP_PAIRS)
        for band in SpacingBand
    )
    return SeparationMatrix(tuple(flat), parallel)


DEFAULT_SEPARATION = default_separation()


def check_triangle(sep: SeparationMatrix) -> list[tuple]:
    """Triples of (op, class) states whose direct separation exceeds the
    two-hop path, i.e. sep(i,k) > sep(i,j) + sep(j,k).

    A non-empty result means consecutive-pair separation enforcement does not
    imply all-pairs enforcement for schedules over that matrix.
    """
    states = [(op, cls) for op in _OPS for cls in _CLASSES]
    violations = []
    for i in states:
        for j in states:
            for k in states:
                direct = sep.same_runway(i[0], i[1], k[0], k[1])
                via = sep.same_runway(i[0], i[1], j[0], j[1]) + sep.same_runway(
                    j[0], j[1], k[0], k[1]
                )
                if direct > via:
                    violations.append((i, j, k))
    return violations


# Ground speeds in knots per weight class (Heavy, B757, Large, Small) for each
# arrival segment: entry->meter, meter->IAF, IAF->FAF, FAF->SAF,
# SAF->threshold.
ARRIVAL_SPEEDS_KN = (
    (185, 185, 170, 165, 135),
    (185, 185, 170, 163, 133),
    (190, 190, 174, 165, 134),
    (191, 191, 170, 160, 120),
)
# Departure segments: take-off->initial climb, initial->en-route climb,
# en-route climb->departure fix.
DEPARTURE_SPEEDS_KN = (
    (173, 184, 251),
    (166, 177, 243),
    (154, 175, 231),
    (126, 141, 182),
)

DEFAULT_ARRIVAL_SEGMENT_NM = (10.0, 8.0, 7.0, 3.0, 2.0)
DEFAULT_DEPARTURE_SEGMENT_NM = (2.0, 3.0, 10.0)

ARRIVAL_NODES = ("entry", "meter_fix", "iaf", "faf", "saf", "threshold")
DEPARTURE_NODES = (
    "holding_area",
    "start_of_roll",
    "take_off",
    "initial_climb",
    "enroute_climb",
    "departure_fix",
)

# Mean runway occupancy times in seconds per (op, class).
ROT_MEAN_S = {
    OperationType.ARRIVAL: (40.0, 40.0, 35.0, 30.0),
    OperationType.DEPARTURE: (50.0, 45.0, 40.0, 30.0),
}

# Beta shape pairs (alpha, beta) for runway occupancy sampling per class.
ROT_BETA_SHAPES = (
    (27.48, 12.03),
    (27.48, 12.03),
    (26.86, 12.42),
    (26.86, 12.42),
)

DEFAULT_FLEET_MIX = (0.101, 0.038, 0.743, 0.118)


@dataclass(frozen=True)
class NodeNetwork:
    """Terminal-area geometry: per-segment distances and class speeds.

    Arrivals fly entry point -> meter fix -> IAF -> FAF -> SAF -> threshold
    and clear the runway after touchdown; departures queue in the holding
    area, roll, and climb take-off -> initial climb -> en-route climb ->
    departure fix. Aircraft cannot overtake on a segment; reordering happens
    in the IAF holding pattern or the holding area.
    """

    arrival_nm: tuple[float, ...] = DEFAULT_ARRIVAL_SEGMENT_NM
    departure_nm: tuple[float, ...] = DEFAULT_DEPARTURE_SEGMENT_NM
    arrival_speeds_kn: tuple[tuple[float, ...], ...] = ARRIVAL_SPEEDS_KN
    departure_speeds_kn: tuple[tuple[float, ...], ...] = DEPARTURE_SPEEDS_KN

    def __post_init__(self) -> None:
        if len(self.arrival_nm) != 5 or len(self.departure_nm) != 3:
            raise ValueError("expected 5 arrival and 3 departure segments")
        if any(d <= 0 for d in self.arrival_nm + self.departure_nm):
            raise ValueError("segment distances must be positive")
        for speeds, count in (
            (self.arrival_speeds_kn, 5),
            (self.departure_speeds_kn, 3),
        ):
            if len(speeds) != 4 or any(len(row) != count for row in speeds):
                raise ValueError("speed table must be 4 classes x segment count")
            if any(v <= 0 for row in speeds for v in row):
                raise ValueError("speeds must be positive")

    def segment_ms(self, op: OperationType, wclass: WeightClass) -> tuple[int, ...]:
        """Unimpeded traversal time of each segment for this class."""
        if op is OperationType.ARRIVAL:
            dists, speeds = self.arrival_nm, self.arrival_speeds_kn[int(wclass)]
        else:
            dists, speeds = self.departure_nm, self.departure_speeds_kn[int(wclass)]
        return tuple(
            round(d / (v * KNOTS_TO_NM_PER_MS)) for d, v in zip(dists, speeds)
        )

    def arrival_unimpeded_ms(self, wclass: WeightClass) -> int:
        """Entry point to threshold with no interference."""
        return sum(self.segment_ms(OperationType.ARRIVAL, wclass))

    def final_approach_ms(self, wclass: WeightClass) -> int:
        """IAF (holding fix) to threshold."""
        return sum(self.segment_ms(OperationType.ARRIVAL, wclass)[2:])

    def to_json(self) -> dict:
        return {
            "arrival_nm": list(self.arrival_nm),
            "departure_nm": list(self.departure_nm),
            "arrival_speeds_kn": [list(r) for r in self.arrival_speeds_kn],
            "departure_speeds_kn": [list(r) for r in self.departure_speeds_kn],
        }

    @classmethod
    def from_json(cls, data: dict) -> "NodeNetwork":
        return cls(
            tuple(data["arrival_nm"]),
            tuple(data["departure_nm"]),
            tuple(tuple(r) for r in data["arrival_speeds_kn"]),
            tuple(tuple(r) for r in data["departure_speeds_kn"]),
        )


DEFAULT_NETWORK = NodeNetwork()


@dataclass(frozen=True)
class StochasticConfig:
    """Perturbation model applied by the simulator.

    System-arrival lateness is truncated normal (+-trunc_sds standard
    deviations); per-segment transit noise is additive normal; runway
    occupancy is a Beta draw rescaled to [rot_lo_factor, rot_hi_factor] times
    the class mean. With `enabled` false the simulator is deterministic and
    uses the mean occupancy times.
    """

    enabled: bool = True
    arr_lateness_mean_s: float = 0.0
    arr_lateness_sd_s: float = 30.0
    dep_lateness_mean_s: float = -30.0
    dep_lateness_sd_s: float = 90.0
    transit_sd_s: float = 108.0
    trunc_sds: float = 3.0
    rot_lo_factor: float = 0.6
    rot_hi_factor: float = 1.8
    rot_beta_shapes: tuple[tuple[float, float], ...] = ROT_BETA_SHAPES
    holding_cap: int = 8
    holding_max_wait_s: float = 600.0

    def __post_init__(self) -> None:
        if self.trunc_sds <= 0:
            raise ValueError("truncation width must be positive")
        if not 0 <= self.rot_lo_factor <= self.rot_hi_factor:
            raise ValueError("bad occupancy scaling interval")
        if len(self.rot_beta_shapes) != 4 or any(
            a <= 0 or b <= 0 for a, b in self.rot_beta_shapes
        ):
            raise ValueError("need positive Beta shapes for 4 classes")

    def rot_mean_ms(self, op: OperationType, wclass: WeightClass) -> int:
        return ms_from_s(ROT_MEAN_S[op][int(wclass)])

    def rot_bounds_ms(self, op: OperationType, wclass: WeightClass) -> tuple[int, int]:
        mean = ROT_MEAN_S[op][int(wclass)]
        return ms_from_s(self.rot_lo_factor * mean), ms_from_s(self.rot_hi_factor * mean)

    def to_json(self) -> dict:
        return {
            "enabled": self.enabled,
            "arr_lateness_mean_s": self.arr_lateness_mean_s,
            "arr_lateness_sd_s": self.arr_lateness_sd_s,
            "dep_lateness_mean_s": self.dep_lateness_mean_s,
            "dep_lateness_sd_s": self.dep_lateness_sd_s,
            "transit_sd_s": self.transit_sd_s,
            "trunc_sds": self.trunc_sds,
            "rot_lo_factor": self.rot_lo_factor,
            "rot_hi_factor": self.rot_hi_factor,
            "rot_beta_shapes": [list(p) for p in self.rot_beta_shapes],
            "holding_cap": self.holding_cap,
            "holding_max_wait_s": self.holding_max_wait_s,
        }

    @classmethod
    def from_json(cls, data: dict) -> "StochasticConfig":
        kwargs = dict(data)
        if "rot_beta_shapes" in kwargs:
            kwargs["rot_beta_shapes"] = tuple(
                tuple(p) for p in kwargs["rot_beta_shapes"]
            )
        return cls(**kwargs)


DEFAULT_NOISE = StochasticConfig()


@dataclass(frozen=True)
class RunwayCarry:
    """Last operation committed on a runway before the scheduling horizon."""

    op: OperationType
    wclass: WeightClass
    start_ms: int

    def to_json(self) -> dict:
        return {
            "op": self.op.json_name,
            "class": self.wclass.json_name,
            "start_s": s_from_ms(self.start_ms),
        }

    @classmethod
    def from_json(cls, data: dict) -> "RunwayCarry":
        return cls(
            OperationType.from_name(data["op"]),
            WeightClass.from_name(data["class"]),
            ms_from_s(data["start_s"]),
        )


@dataclass(frozen=True)
class Scenario:
    """One scheduling problem instance."""

    aircraft: tuple[Aircraft, ...]
    runway_count: int
    default_band: SpacingBand = SpacingBand.ABOVE_1310M
    band_overrides: tuple[tuple[int, int, SpacingBand], ...] = ()
    separation: SeparationMatrix = DEFAULT_SEPARATION
    network: NodeNetwork = DEFAULT_NETWORK
    fleet_mix: tuple[float, float, float, float] = DEFAULT_FLEET_MIX
    max_delay_ms: int = DEFAULT_MAX_DELAY_MS
    noise: StochasticConfig = DEFAULT_NOISE
    carry_in: tuple[RunwayCarry | None, ...] = ()

    def __post_init__(self) -> None:
        if self.runway_count < 1:
            raise ValueError("need at least one runway")
        ids = [a.id for a in self.aircraft]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate aircraft ids")
        for a in self.aircraft:
            if a.due_ms - a.target_ms > self.max_delay_ms:
                raise ValueError(
                    f"aircraft {a.id}: due exceeds target by more than the "
                    f"maximum delay {self.max_delay_ms} ms"
                )
        if abs(sum(self.fleet_mix) - 1.0) > 1e-9 or any(
            p < 0 for p in self.fleet_mix
        ):
            raise ValueError("fleet mix must be nonnegative and sum to 1")
        for i, j, _ in self.band_overrides:
            if not (0 <= i < j < self.runway_count):
                raise ValueError("band override names an invalid runway pair")
        if self.carry_in and len(self.carry_in) != self.runway_count:
            raise ValueError("carry-in must list one entry per runway")

    @property
    def n(self) -> int:
        return len(self.aircraft)

    def band_for(self, i: int, j: int) -> SpacingBand:
        if i > j:
            i, j = j, i
        for a, b, band in self.band_overrides:
            if (a, b) == (i, j):
                return band
        return self.default_band

    def carry_for(self, runway: int) -> RunwayCarry | None:
        if not self.carry_in:
            return None
        return self.carry_in[runway]

    def index_of(self, aircraft_id: int) -> int:
        try:
            return self._id_index()[aircraft_id]
        except KeyError:
            raise KeyError(f"unknown aircraft id {aircraft_id}") from None

    def _id_index(self) -> dict[int, int]:
        cached = _ID_INDEX_CACHE.get(id(self))
        if cached is None or cached[0] is not self:
            cached = (self, {a.id: i for i, a in enumerate(self.aircraft)})
            _ID_INDEX_CACHE[id(self)] = cached
        return cached[1]

    def estimated_start_ms(self) -> tuple[int, ...]:
        """Unimpeded operation start per aircraft: system arrival plus the
        deterministic approach traversal for arrivals, system arrival itself
        for departures (roll can begin as soon as the aircraft is staged)."""
        out = []
        for a in self.aircraft:
            if a.op is OperationType.ARRIVAL:
                out.append(a.system_arrival_ms + self.network.arrival_unimpeded_ms(a.wclass))
            else:
                out.append(a.system_arrival_ms)
        return tuple(out)

    def with_carry(self, carry: Sequence[RunwayCarry | None]) -> "Scenario":
        return Scenario(
            self.aircraft,
            self.runway_count,
            self.default_band,
            self.band_overrides,
            self.separation,
            self.network,
            self.fleet_mix,
            self.max_delay_ms,
            self.noise,
            tuple(carry),
        )

    def to_json(self) -> dict:
        bands: dict | str
        if self.band_overrides:
            bands = {
                "default": self.default_band.json_name,
                "overrides": [
                    {"pair": [i, j], "band": band.json_name}
                    for i, j, band in self.band_overrides
                ],
            }
        else:
            bands = self.default_band.json_name
        data = {
            "version": SCENARIO_SCHEMA_VERSION,
            "aircraft": [
                {
                    "id": a.id,
                    "op": a.op.json_name,
                    "class": a.wclass.json_name,
                    "ready_s": s_from_ms(a.ready_ms),
                    "target_s": s_from_ms(a.target_ms),
                    "due_s": s_from_ms(a.due_ms),
                    "system_arrival_s": s_from_ms(a.system_arrival_ms),
                    "weight": a.weight,
                }
                for a in self.aircraft
            ],
            "runways": {"count": self.runway_count, "spacing_bands": bands},
            "separation": self.separation.to_json(),
            "network": self.network.to_json(),
            "fleet_mix": {
                cls.json_name: self.fleet_mix[int(cls)] for cls in _CLASSES
            },
            "max_delay_s": s_from_ms(self.max_delay_ms),
            "noise": self.noise.to_json(),
        }
        if self.carry_in:
            data["carry_in"] = [
                c.to_json() if c is not None else None for c in self.carry_in
            ]
        return data

    @classmethod
    def from_json(cls, data: dict) -> "Scenario":
        version = data.get("version")
        if version != SCENARIO_SCHEMA_VERSION:
            raise ValueError(
                f"unsupported scenario schema version: {version!r} "
                f"(expected {SCENARIO_SCHEMA_VERSION!r})"
            )
        aircraft = tuple(
            Aircraft(
                id=entry["id"],
                op=OperationType.from_name(entry["op"]),
                wclass=WeightClass.from_name(entry["class"]),
                ready_ms=ms_from_s(entry["ready_s"]),
                target_ms=ms_from_s(entry["target_s"]),
                due_ms=ms_from_s(entry["due_s"]),
                system_arrival_ms=ms_from_s(
                    entry.get("system_arrival_s", entry["ready_s"])
                ),
                weight=entry.get("weight", 1.0),
            )
            for entry in data["aircraft"]
        )
        runways = data["runways"]
        bands = runways.get("spacing_bands", SpacingBand.ABOVE_1310M.json_name)
        if isinstance(bands, str):
            default_band = SpacingBand.from_name(bands)
            overrides: tuple = ()
        else:
            default_band = SpacingBand.from_name(bands["default"])
            overrides = tuple(
                (entry["pair"][0], entry["pair"][1], SpacingBand.from_name(entry["band"]))
                for entry in bands.get("overrides", [])
            )
        mix = data.get("fleet_mix")
        if mix is None:
            fleet_mix = DEFAULT_FLEET_MIX
        else:
            fleet_mix = tuple(mix[cls.json_name] for cls in _CLASSES)
        carry = tuple(
            RunwayCarry.from_json(c) if c is not None else None
            for c in data.get("carry_in", [])
        )
        return cls(
            aircraft=aircraft,
            runway_count=runways["count"],
            default_band=default_band,
            band_overrides=overrides,
            separation=(
                SeparationMatrix.from_json(data["separation"])
                if "separation" in data
                else DEFAULT_SEPARATION
            ),
            network=(
                NodeNetwork.from_json(data["network"])
                if "network" in data
                else DEFAULT_NETWORK
            ),
            fleet_mix=fleet_mix,
            max_delay_ms=ms_from_s(data.get("max_delay_s", 600.0)),
            noise=(
                StochasticConfig.from_json(data["noise"])
                if "noise" in data
                else DEFAULT_NOISE
            ),
            carry_in=carry,
        )


_ID_INDEX_CACHE: dict[int, tuple] = {}


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_json(), indent=2) + "\n")


def load_scenario(path: str | Path) -> Scenario:
    return Scenario.from_json(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class Schedule:
    """Runway assignment, per-runway sequence position (1-based) and planned
    start time for every aircraft, aligned with `scenario.aircraft` order.

    Construction validates structure (contiguous positions per runway,
    nondecreasing starts along each sequence); time windows and separations
    are the business of `check_feasibility`.
    """

    runway: tuple[int, ...]
    position: tuple[int, ...]
    start_ms: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.runway)
        if len(self.position) != n or len(self.start_ms) != n:
            raise ValueError("runway, position, start tuples must align")
        per_runway: dict[int, list[tuple[int, int]]] = {}
        for i in range(n):
            r = self.runway[i]
            if r < 0:
                raise ValueError("negative runway index")
            per_runway.setdefault(r, []).append((self.position[i], self.start_ms[i]))
        for r, entries in per_runway.items():
            entries.sort()
            if [p for p, _ in entries] != list(range(1, len(entries) + 1)):
                raise ValueError(f"positions on runway {r} are not contiguous from 1")
            starts = [t for _, t in entries]
            if any(b < a for a, b in zip(starts, starts[1:])):
                raise ValueError(f"starts on runway {r} decrease along the sequence")

    @property
    def n(self) -> int:
        return len(self.runway)

    def encoding(self) -> tuple[tuple[int, int], ...]:
        """Canonical (runway, position) rows used for distance and identity."""
        return tuple(zip(self.runway, self.position))

    def sequences(self, runway_count: int) -> list[list[int]]:
        """Aircraft indices per runway in position order."""
        seqs: list[list[int]] = [[] for _ in range(runway_count)]
        order = sorted(range(self.n), key=lambda i: (self.runway[i], self.position[i]))
        for i in order:
            seqs[self.runway[i]].append(i)
        return seqs

    def makespan_ms(self) -> int:
        return max(self.start_ms) if self.start_ms else 0

    @classmethod
    def from_sequences(
        cls, scenario: Scenario, sequences: Sequence[Sequence[int]]
    ) -> "Schedule":
        """Build a schedule from per-runway aircraft index sequences, setting
        each start greedily to the earliest time allowed by ready times,
        same-runway separation and dependent-runway separation.

        Cross-runway constraints apply between chronologically consecutive
        operations, so placement walks the runway heads in earliest-start
        order. Due-time feasibility is not enforced here.
        """
        starts, _ = _greedy_start_times(scenario, sequences)
        n = scenario.n
        runway = [0] * n
        position = [0] * n
        seen = 0
        for r, seq in enumerate(sequences):
            for p, idx in enumerate(seq, start=1):
                runway[idx] = r
                position[idx] = p
                seen += 1
        if seen != n:
            raise ValueError("sequences must place every aircraft exactly once")
        return cls(tuple(runway), tuple(position), tuple(starts))


def _dependent_pairs(scenario: Scenario) -> dict[tuple[int, int], bool]:
    """Map runway pair -> True when any op pair is coupled across it."""
    out = {}
    for i in range(scenario.runway_count):
        for j in range(i + 1, scenario.runway_count):
            band = scenario.band_for(i, j)
            coupled = any(
                scenario.separation.parallel_rule(band, lop, fop).kind
                is not ParallelRuleKind.INDEPENDENT
                for lop, fop in _OP_PAIRS
            )
            out[(i, j)] = coupled
    return out


def earliest_start_ms(
    scenario: Scenario,
    aircraft_idx: int,
    runway: int,
    last_by_runway: Sequence[tuple[Aircraft, int] | None],
) -> int:
    """Earliest start for an aircraft appended to `runway` given the most
    recent operation already committed on every runway."""
    a = scenario.aircraft[aircraft_idx]
    t = a.ready_ms
    sep = scenario.separation
    for r, last in enumerate(last_by_runway):
        if last is None:
            continue
        leader, leader_start = last
        if r == runway:
            required = sep.between(leader, a)
        else:
            required = sep.cross_runway(
                scenario.band_for(r, runway), leader.op, leader.wclass, a.op, a.wclass
            )
        if required > 0:
            t = max(t, leader_start + required)
    return t


def _initial_runway_state(scenario: Scenario) -> list[tuple[Aircraft, int] | None]:
    state: list[tuple[Aircraft, int] | None] = [None] * scenario.runway_count
    for r in range(scenario.runway_count):
        carry = scenario.carry_for(r)
        if carry is not None:
            pseudo = Aircraft(
                id=-1 - r,
                op=carry.op,
                wclass=carry.wclass,
                ready_ms=carry.start_ms,
                target_ms=carry.start_ms,
                due_ms=carry.start_ms,
                system_arrival_ms=carry.start_ms,
            )
            state[r] = (pseudo, carry.start_ms)
    return state


def _greedy_start_times(
    scenario: Scenario, sequences: Sequence[Sequence[int]]
) -> tuple[list[int], list[int]]:
    """Start times for fixed per-runway sequences plus the placement order.

    Repeatedly commits the runway head with the smallest attainable start, so
    the chronological merge across runways is consistent with the constraints
    applied. Returns (start_ms per aircraft index, placement order).
    """
    if len(sequences) != scenario.runway_count:
        raise ValueError("need one sequence per runway")
    heads = [0] * scenario.runway_count
    last = _initial_runway_state(scenario)
    starts = [0] * scenario.n
    order: list[int] = []
    remaining = sum(len(s) for s in sequences)
    while remaining:
        best_r = -1
        best_t = 0
        for r, seq in enumerate(sequences):
            if heads[r] >= len(seq):
                continue
            t = earliest_start_ms(scenario, seq[heads[r]], r, last)
            if best_r < 0 or t < best_t:
                best_r, best_t = r, t
        idx = sequences[best_r][heads[best_r]]
        starts[idx] = best_t
        order.append(idx)
        last[best_r] = (scenario.aircraft[idx], best_t)
        heads[best_r] += 1
        remaining -= 1
    return starts, order


@dataclass(frozen=True)
class Violation:
    """One broken scheduling constraint; slack_ms < 0 is the shortfall."""

    kind: str
    aircraft: tuple[int, ...]
    required_ms: int
    actual_ms: int
    slack_ms: int


def check_feasibility(schedule: Schedule, scenario: Scenario) -> list[Violation]:
    """All time-window and separation violations of a schedule.

    Separation is enforced between consecutive operations on the same runway
    and between chronologically consecutive operations across coupled
    (dependent) runway pairs; an empty result means the schedule is feasible.
    """
    if schedule.n != scenario.n:
        raise ValueError(
            f"schedule covers {schedule.n} aircraft, scenario has {scenario.n}"
        )
    violations: list[Violation] = []
    aircraft = scenario.aircraft
    sep = scenario.separation

    for i, a in enumerate(aircraft):
        t = schedule.start_ms[i]
        if t < a.ready_ms:
            violations.append(
                Violation("window", (a.id,), a.ready_ms, t, t - a.ready_ms)
            )
        elif t > a.due_ms:
            violations.append(Violation("window", (a.id,), a.due_ms, t, a.due_ms - t))

    sequences = schedule.sequences(scenario.runway_count)
    for r, seq in enumerate(sequences):
        chain: list[tuple[Aircraft, int]] = []
        carry = scenario.carry_for(r)
        if carry is not None:
            chain.append((_carry_aircraft(carry, r), carry.start_ms))
        chain.extend((aircraft[i], schedule.start_ms[i]) for i in seq)
        for (leader, lt), (follower, ft) in zip(chain, chain[1:]):
            required = sep.between(leader, follower)
            gap = ft - lt
            if gap < required:
                violations.append(
                    Violation(
                        "separation",
                        (leader.id, follower.id),
                        required,
                        gap,
                        gap - required,
                    )
                )

    for (q, r), coupled in _dependent_pairs(scenario).items():
        if not coupled:
            continue
        band = scenario.band_for(q, r)
        merged: list[tuple[int, int, int, Aircraft]] = []
        for rw in (q, r):
            carry = scenario.carry_for(rw)
            if carry is not None:
                merged.append((carry.start_ms, rw, 0, _carry_aircraft(carry, rw)))
            for i in sequences[rw]:
                merged.append(
                    (schedule.start_ms[i], rw, schedule.position[i], aircraft[i])
                )
        merged.sort(key=lambda e: (e[0], e[1], e[2]))
        for (lt, lr, _, leader), (ft, fr, _, follower) in zip(merged, merged[1:]):
            if lr == fr:
                continue
            required = sep.cross_runway(
                band, leader.op, leader.wclass, follower.op, follower.wclass
            )
            gap = ft - lt
            if required > 0 and gap < required:
                violations.append(
                    Violation(
                        "dependent_separation",
                        (leader.id, follower.id),
                        required,
                        gap,
                        gap - required,
                    )
                )
    return violations


def _carry_aircraft(carry: RunwayCarry, runway: int) -> Aircraft:
    return Aircraft(
        id=-1 - runway,
        op=carry.op,
        wclass=carry.wclass,
        ready_ms=carry.start_ms,
        target_ms=carry.start_ms,
        due_ms=carry.start_ms,
        system_arrival_ms=carry.start_ms,
    )


def encoding_distance(a: Schedule, b: Schedule) -> int:
    """Hamming distance between the (runway, position) rows of two schedules."""
    if a.n != b.n:
        raise ValueError("schedules cover different aircraft counts")
    return sum(
        1
        for ra, pa, rb, pb in zip(a.runway, a.position, b.runway, b.position)
        if ra != rb or pa != pb
    )


def fcfs_positions(scenario: Scenario) -> tuple[int, ...]:
    """First-come-first-served rank of each aircraft within its operation
    type (1-based), ordered by system arrival with id breaking ties."""
    ranks = [0] * scenario.n
    for op in _OPS:
        members = [i for i, a in enumerate(scenario.aircraft) if a.op is op]
        members.sort(key=lambda i: (scenario.aircraft[i].system_arrival_ms, scenario.aircraft[i].id))
        for rank, i in enumerate(members, start=1):
            ranks[i] = rank
    return tuple(ranks)


def position_shifts(
    scenario: Scenario, start_ms: Sequence[int]
) -> tuple[int, ...]:
    """Signed per-aircraft rank change (within operation type) of the given
    start times relative to first-come-first-served order."""
    fcfs = fcfs_positions(scenario)
    shifts = [0] * scenario.n
    for op in _OPS:
        members = [i for i, a in enumerate(scenario.aircraft) if a.op is op]
        members.sort(key=lambda i: (start_ms[i], scenario.aircraft[i].id))
        for rank, i in enumerate(members, start=1):
            shifts[i] = rank - fcfs[i]
    return tuple(shifts)


def unfairness(
    scenario: Scenario, start_ms: Sequence[int], shifts: Sequence[int] | None = None
) -> float:
    """Aggregate deviation penalty: sum over aircraft of |rank shift| times
    the squared deviation (s^2) of the start from the target time."""
    if shifts is None:
        shifts = position_shifts(scenario, start_ms)
    total = 0.0
    for i, a in enumerate(scenario.aircraft):
        dev_s = (start_ms[i] - a.target_ms) / 1000.0
        total += abs(shifts[i]) * dev_s * dev_s
    return total


def planned_objectives(schedule: Schedule, scenario: Scenario) -> ObjectiveVector:
    """Makespan (s) and unfairness (s^2) of the planned start times."""
    return ObjectiveVector(
        s_from_ms(schedule.makespan_ms()), unfairness(scenario, schedule.start_ms)
    )


def schedule_to_json(schedule: Schedule, scenario: Scenario) -> dict:
    return {
        "assignments": [
            {
                "id": scenario.aircraft[i].id,
                "runway": schedule.runway[i],
                "position": schedule.position[i],
                "start_s": s_from_ms(schedule.start_ms[i]),
            }
            for i in range(schedule.n)
        ]
    }


def schedule_from_json(data: dict, scenario: Scenario) -> Schedule:
    runway = [0] * scenario.n
    position = [0] * scenario.n
    start = [0] * scenario.n
    seen = set()
    for entry in data["assignments"]:
        i = scenario.index_of(entry["id"])
        if i in seen:
            raise ValueError(f"aircraft {entry['id']} assigned twice")
        seen.add(i)
        runway[i] = entry["runway"]
        position[i] = entry["position"]
        start[i] = ms_from_s(entry["start_s"])
    if len(seen) != scenario.n:
        raise ValueError("schedule does not cover every aircraft")
    return Schedule(tuple(runway), tuple(position), tuple(start))
