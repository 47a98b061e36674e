"""Pareto-front quality measures and the noisy benchmark functions used to
exercise the optimizer without the simulator.

All metrics assume minimization of both objectives. Fronts are plain
sequences of 2-d points (anything indexable by 0 and 1).
"""

from __future__ import annotations

import csv
import math
import warnings
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "dominates",
    "nondominated_filter",
    "front_bounds",
    "normalize_front",
    "hypervolume",
    "normalized_hypervolume",
    "hypervolume_ratio",
    "y_metric",
    "ff",
    "zdt3",
    "noisy",
    "reference_front",
    "save_front",
    "load_front",
]

Point = Sequence[float]


def dominates(a: Point, b: Point) -> bool:
    """True when a is at least as good in both objectives and better in one."""
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def nondominated_filter(points: Sequence[Point]) -> list:
    """Points not strictly dominated by any other, in input order.

    Duplicates of a surviving point all survive. Sort-and-sweep, O(n log n).
    """
    n = len(points)
    if n <= 1:
        return list(points)
    order = sorted(range(n), key=lambda i: (points[i][0], points[i][1]))
    keep = [False] * n
    best_f2_before = math.inf  # over strictly smaller f1
    i = 0
    while i < n:
        j = i
        f1 = points[order[i]][0]
        while j < n and points[order[j]][0] == f1:
            j += 1
        group = order[i:j]
        group_min_f2 = points[group[0]][1]  # sorted by f2 within the group
        for idx in group:
            f2 = points[idx][1]
            dominated = best_f2_before <= f2 or f2 > group_min_f2
            keep[idx] = not dominated
        if group_min_f2 < best_f2_before:
            best_f2_before = group_min_f2
        i = j
    return [points[i] for i in range(n) if keep[i]]


def front_bounds(points: Sequence[Point]) -> tuple[tuple[float, float], tuple[float, float]]:
    """Per-objective (min, max) over the points."""
    if not points:
        raise ValueError("cannot take bounds of an empty front")
    f1 = [p[0] for p in points]
    f2 = [p[1] for p in points]
    return ((min(f1), max(f1)), (min(f2), max(f2)))


def normalize_front(
    points: Iterable[Point],
    bounds: tuple[tuple[float, float], tuple[float, float]],
) -> list[tuple[float, float]]:
    """Min-max normalize each objective; a degenerate range maps to 0."""
    (lo1, hi1), (lo2, hi2) = bounds
    s1 = hi1 - lo1
    s2 = hi2 - lo2
    return [
        (
            (p[0] - lo1) / s1 if s1 > 0 else 0.0,
            (p[1] - lo2) / s2 if s2 > 0 else 0.0,
        )
        for p in points
    ]


def hypervolume(front: Sequence[Point], ref: Point = (1.0, 1.0)) -> float:
    """Area of objective space dominated by the front up to the reference
    point. Points not componentwise <= ref are skipped with a warning."""
    inside = []
    skipped = 0
    for p in front:
        if p[0] <= ref[0] and p[1] <= ref[1]:
            inside.append((p[0], p[1]))
        else:
            skipped += 1
    if skipped:
        warnings.warn(
            f"hypervolume: skipped {skipped} point(s) beyond the reference point",
            stacklevel=2,
        )
    if not inside:
        return 0.0
    inside.sort()
    area = 0.0
    cur_f2 = ref[1]
    for f1, f2 in inside:
        if f2 < cur_f2:
            area += (ref[0] - f1) * (cur_f2 - f2)
            cur_f2 = f2
    return area


def normalized_hypervolume(
    front: Sequence[Point], reference_points: Sequence[Point]
) -> float:
    """Hypervolume of the front after normalizing both objectives by the
    reference front's bounds, with reference point (1, 1)."""
    bounds = front_bounds(reference_points)
    return hypervolume(normalize_front(nondominated_filter(list(front)), bounds))


def hypervolume_ratio(front: Sequence[Point], reference_points: Sequence[Point]) -> float:
    """Fraction of the reference front's normalized hypervolume the front
    attains; 1.0 means the front covers the reference exactly."""
    denom = normalized_hypervolume(reference_points, reference_points)
    if denom <= 0:
        raise ValueError("reference front has zero hypervolume")
    return normalized_hypervolume(front, reference_points) / denom


def y_metric(front: Sequence[Point], reference_front: Sequence[Point]) -> float:
    """Mean minimum Euclidean distance from front points to the reference."""
    if not front or not reference_front:
        raise ValueError("both fronts must be non-empty")
    ref = np.asarray(reference_front, dtype=float)
    total = 0.0
    for p in front:
        d = ref - np.asarray(p, dtype=float)
        total += math.sqrt(float(np.min(np.einsum("ij,ij->i", d, d))))
    return total / len(front)


_INV_SQRT2 = 1.0 / math.sqrt(2.0)


def ff(x1: float, x2: float) -> tuple[float, float]:
    """Two-variable bi-objective test function with a single concave front.

    Trade-off set: x1 = x2 in [-1/sqrt(2), 1/sqrt(2)].
    """
    if not (-4.0 <= x1 <= 4.0 and -4.0 <= x2 <= 4.0):
        raise ValueError("ff is defined on [-4, 4]^2")
    f1 = 1.0 - math.exp(-((x1 - _INV_SQRT2) ** 2) - ((x2 - _INV_SQRT2) ** 2))
    f2 = 1.0 - math.exp(-((x1 + _INV_SQRT2) ** 2) - ((x2 + _INV_SQRT2) ** 2))
    return (f1, f2)


def zdt3(x1: float, x2: float) -> tuple[float, float]:
    """Two-variable variant of the discontinuous-front benchmark."""
    if not (0.0 <= x1 <= 1.0 and 0.0 <= x2 <= 1.0):
        raise ValueError("zdt3 is defined on [0, 1]^2")
    g = 1.0 + (9.0 / 29.0) * x2
    ratio = x1 / g
    f2 = g * (1.0 - math.sqrt(ratio) - ratio * math.sin(10.0 * math.pi * x1))
    return (x1, f2)


def noisy(
    f: Callable[[float, float], tuple[float, float]],
    sigma: float,
    rng: np.random.Generator,
) -> Callable[[float, float], tuple[float, float]]:
    """Additive N(0, sigma^2) perturbation per objective per call."""
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return f

    def g(x1: float, x2: float) -> tuple[float, float]:
        f1, f2 = f(x1, x2)
        return (f1 + rng.normal(0.0, sigma), f2 + rng.normal(0.0, sigma))

    return g


def reference_front(name: str, n: int = 1001) -> tuple[tuple[float, float], ...]:
    """Dense sampling of a benchmark's true front in objective space."""
    if n < 2:
        raise ValueError("need at least two points")
    if name == "ff":
        ts = np.linspace(-_INV_SQRT2, _INV_SQRT2, n)
        return tuple(ff(t, t) for t in ts)
    if name == "zdt3":
        ts = np.linspace(0.0, 1.0, n)
        pts = [zdt3(t, 0.0) for t in ts]
        return tuple(nondominated_filter(pts))
    raise ValueError(f"unknown benchmark {name!r}")


def save_front(path, points: Sequence[Point]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["f1", "f2"])
        for p in points:
            writer.writerow([repr(float(p[0])), repr(float(p[1]))])


def load_front(path) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if [h.strip() for h in header] != ["f1", "f2"]:
            raise ValueError("expected header 'f1,f2'")
        return [(float(r[0]), float(r[1])) for r in reader if r]
