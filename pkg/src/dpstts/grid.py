"""Spatiotemporal cube discretization.

A domain (lon/lat box plus a time window) is cut into ``g_w x g_h x g_t``
cubes. Cubes are addressed either as ``Cube(x, y, t)`` index triples or by a
linear id ``(x * g_h + y) * g_t + t``, so sorting ids sorts cubes
lexicographically by ``(x, y, t)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

from ._backend import kernels
from .errors import (
    CubeOutOfGrid,
    EmptyAfterFiltering,
    NonMonotonicTime,
    PointOutOfDomain,
    UnsortedTimestamps,
)


@dataclass(frozen=True)
class SpatioTemporalDomain:
    left: float
    right: float
    bottom: float
    top: float
    s_time: float
    e_time: float

    def __post_init__(self):
        if not (self.left < self.right and self.bottom < self.top and self.s_time < self.e_time):
            raise ValueError(f"degenerate domain {self}")

    def contains(self, lon: float, lat: float, time: float) -> bool:
        return (
            self.left <= lon <= self.right
            and self.bottom <= lat <= self.top
            and self.s_time <= time <= self.e_time
        )

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        """Boolean mask over an ``(n, 3)`` array of ``(lon, lat, time)`` rows."""
        lon, lat, time = points[:, 0], points[:, 1], points[:, 2]
        return (
            (lon >= self.left) & (lon <= self.right)
            & (lat >= self.bottom) & (lat <= self.top)
            & (time >= self.s_time) & (time <= self.e_time)
        )


@dataclass(frozen=True)
class GridSpec:
    g_w: int
    g_h: int
    g_t: int
    v: int = 2

    def __post_init__(self):
        for name in ("g_w", "g_h", "g_t", "v"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")

    @property
    def n_cubes(self) -> int:
        return self.g_w * self.g_h * self.g_t

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.g_w, self.g_h, self.g_t)

    def cell_sizes(self, dom: SpatioTemporalDomain) -> tuple[float, float, float]:
        return (
            (dom.right - dom.left) / self.g_w,
            (dom.top - dom.bottom) / self.g_h,
            (dom.e_time - dom.s_time) / self.g_t,
        )


class Cube(NamedTuple):
    x: int
    y: int
    t: int


@dataclass(frozen=True)
class CubeTrajectory:
    cubes: tuple[Cube, ...]
    terminated: bool = True

    def __post_init__(self):
        object.__setattr__(self, "cubes", tuple(Cube(*c) for c in self.cubes))
        if not self.cubes:
            raise ValueError("cube trajectory must be non-empty")

    def __len__(self):
        return len(self.cubes)

    def __iter__(self):
        return iter(self.cubes)

    def violations(self, g: GridSpec) -> list[str]:
        """Invariant violations of this trajectory on grid ``g`` (empty if valid)."""
        problems = []
        for c in self.cubes:
            if not in_grid(c, g):
                problems.append(f"{c} outside grid")
        for a, b in zip(self.cubes, self.cubes[1:]):
            if a == b:
                problems.append(f"repeated cube {a}")
            elif not is_neighbor(a, b, g):
                problems.append(f"{b} is not a neighbor of {a}")
            if b.t < a.t:
                problems.append(f"time decreases {a} -> {b}")
        return problems


def in_grid(c: Cube, g: GridSpec) -> bool:
    return 0 <= c.x < g.g_w and 0 <= c.y < g.g_h and 0 <= c.t < g.g_t


def cube_id(c: Cube, g: GridSpec) -> int:
    if not in_grid(c, g):
        raise CubeOutOfGrid(f"{c} outside {g.shape}")
    return (c.x * g.g_h + c.y) * g.g_t + c.t


def cube_from_id(i: int, g: GridSpec) -> Cube:
    if not 0 <= i < g.n_cubes:
        raise CubeOutOfGrid(f"cube id {i} outside [0, {g.n_cubes})")
    xy, t = divmod(int(i), g.g_t)
    x, y = divmod(xy, g.g_h)
    return Cube(x, y, t)


def ids_to_xyt(ids: np.ndarray, g: GridSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    xy, t = np.divmod(ids, g.g_t)
    x, y = np.divmod(xy, g.g_h)
    return x, y, t


def xyt_to_ids(x, y, t, g: GridSpec) -> np.ndarray:
    return (np.asarray(x, dtype=np.int64) * g.g_h + y) * g.g_t + t


def discretize_point(p: Sequence[float], dom: SpatioTemporalDomain, g: GridSpec) -> Cube:
    lon, lat, time = p
    if not dom.contains(lon, lat, time):
        raise PointOutOfDomain(f"point {tuple(p)} outside {dom}")
    d_w, d_h, d_t = g.cell_sizes(dom)
    # points on the closed upper boundary land in the last cell
    return Cube(
        min(math.floor((lon - dom.left) / d_w), g.g_w - 1),
        min(math.floor((lat - dom.bottom) / d_h), g.g_h - 1),
        min(math.floor((time - dom.s_time) / d_t), g.g_t - 1),
    )


def discretize_points(points: np.ndarray, dom: SpatioTemporalDomain, g: GridSpec):
    """Vectorized ``discretize_point`` for in-domain rows of ``points``.

    Returns ``(x, y, t)`` int64 arrays; callers must mask out-of-domain rows
    first (see ``SpatioTemporalDomain.contains_many``).
    """
    d_w, d_h, d_t = g.cell_sizes(dom)
    x = np.minimum(np.floor((points[:, 0] - dom.left) / d_w), g.g_w - 1).astype(np.int64)
    y = np.minimum(np.floor((points[:, 1] - dom.bottom) / d_h), g.g_h - 1).astype(np.int64)
    t = np.minimum(np.floor((points[:, 2] - dom.s_time) / d_t), g.g_t - 1).astype(np.int64)
    return x, y, t


def cube_center(c: Cube, dom: SpatioTemporalDomain, g: GridSpec) -> tuple[float, float, float]:
    if not in_grid(c, g):
        raise CubeOutOfGrid(f"{c} outside {g.shape}")
    d_w, d_h, d_t = g.cell_sizes(dom)
    return (
        dom.left + c.x * d_w + d_w / 2,
        dom.bottom + c.y * d_h + d_h / 2,
        dom.s_time + c.t * d_t + d_t / 2,
    )


def cube_centers(ids: np.ndarray, dom: SpatioTemporalDomain, g: GridSpec) -> np.ndarray:
    """``(n, 3)`` array of cube centers for an array of linear cube ids."""
    d_w, d_h, d_t = g.cell_sizes(dom)
    x, y, t = ids_to_xyt(np.asarray(ids, dtype=np.int64), g)
    return np.column_stack((
        dom.left + x * d_w + d_w / 2,
        dom.bottom + y * d_h + d_h / 2,
        dom.s_time + t * d_t + d_t / 2,
    ))


def is_neighbor(a: Cube, b: Cube, g: GridSpec) -> bool:
    dx, dy, dt = b[0] - a[0], b[1] - a[1], b[2] - a[2]
    if abs(dx) <= 1 and abs(dy) <= 1 and 0 <= dt <= 1 and (dx, dy, dt) != (0, 0, 0):
        return True
    return dx == 0 and dy == 0 and 1 <= dt <= g.v


def neighbor_offsets(v: int) -> tuple[tuple[int, int, int], ...]:
    """All ``(dx, dy, dt)`` steps allowed by the neighbor relation, sorted."""
    steps = set()
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            for dt in (0, 1):
                if (dx, dy, dt) != (0, 0, 0):
                    steps.add((dx, dy, dt))
    steps.update((0, 0, dt) for dt in range(1, v + 1))
    return tuple(sorted(steps))


def neighbors(c: Cube, g: GridSpec) -> list[Cube]:
    out = []
    for dx, dy, dt in neighbor_offsets(g.v):
        b = Cube(c.x + dx, c.y + dy, c.t + dt)
        if in_grid(b, g):
            out.append(b)
    return out


def interpolate_gap(a: Cube, b: Cube, g: GridSpec) -> list[Cube]:
    """Cubes strictly between ``a`` and ``b`` on a unit-step path.

    Every differing coordinate moves one unit toward ``b`` per step, so the
    path length is the Chebyshev distance and each hop is a neighbor step.
    """
    if b.t < a.t:
        raise NonMonotonicTime(f"{b} precedes {a} in time")
    if a == b or is_neighbor(a, b, g):
        return []
    out = []
    x, y, t = a
    while True:
        x += (b.x > x) - (b.x < x)
        y += (b.y > y) - (b.y < y)
        t += (b.t > t) - (b.t < t)
        if (x, y, t) == b:
            return out
        out.append(Cube(x, y, t))


def discretize_trajectory(points, dom: SpatioTemporalDomain, g: GridSpec) -> CubeTrajectory:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if len(pts) > 1 and not np.all(np.diff(pts[:, 2]) >= 0):
        raise UnsortedTimestamps("timestamps decrease along the trajectory")
    pts = pts[dom.contains_many(pts)]
    if len(pts) == 0:
        raise EmptyAfterFiltering("no point of the trajectory lies in the domain")
    cubes = [discretize_point(p, dom, g) for p in pts]
    out = [cubes[0]]
    for c in cubes[1:]:
        if c == out[-1]:
            continue
        out.extend(interpolate_gap(out[-1], c, g))
        out.append(c)
    return CubeTrajectory(tuple(out), terminated=True)


class CubeDataset:
    """Cube trajectories stored flat: linear ids back to back plus offsets.

    Trajectory ``i`` is ``ids[offsets[i]:offsets[i + 1]]``.
    """

    def __init__(self, ids, offsets, grid: GridSpec):
        self.ids = np.ascontiguousarray(ids, dtype=np.int64)
        self.offsets = np.ascontiguousarray(offsets, dtype=np.int64)
        self.grid = grid
        if self.offsets.ndim != 1 or len(self.offsets) == 0 or self.offsets[0] != 0:
            raise ValueError("offsets must start at 0")
        if self.offsets[-1] != len(self.ids) or np.any(np.diff(self.offsets) < 1):
            raise ValueError("offsets must describe non-empty trajectories covering ids")

    @classmethod
    def from_trajectories(cls, trajectories: Iterable, grid: GridSpec) -> "CubeDataset":
        ids, offsets = [], [0]
        for tr in trajectories:
            cubes = tr.cubes if isinstance(tr, CubeTrajectory) else tr
            ids.extend(cube_id(Cube(*c), grid) for c in cubes)
            offsets.append(len(ids))
        return cls(np.asarray(ids, dtype=np.int64), offsets, grid)

    def __len__(self) -> int:
        return len(self.offsets) - 1

    def __getitem__(self, i: int) -> CubeTrajectory:
        seg = self.ids[self.offsets[i]:self.offsets[i + 1]]
        return CubeTrajectory(tuple(cube_from_id(c, self.grid) for c in seg))

    def __iter__(self) -> Iterator[CubeTrajectory]:
        for i in range(len(self)):
            yield self[i]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.offsets)

    def __eq__(self, other):
        return (
            isinstance(other, CubeDataset)
            and self.grid == other.grid
            and np.array_equal(self.ids, other.ids)
            and np.array_equal(self.offsets, other.offsets)
        )


def as_cube_dataset(da, grid: GridSpec) -> CubeDataset:
    if isinstance(da, CubeDataset):
        return da
    return CubeDataset.from_trajectories(da, grid)


def discretize_dataset(trajectories: Iterable, dom: SpatioTemporalDomain, g: GridSpec) -> CubeDataset:
    """Bulk ``discretize_trajectory`` over many point arrays.

    Each element is an ``(n, 3)`` array (or an object with a ``points``
    attribute). Out-of-domain points are dropped, and trajectories left
    empty are dropped entirely.
    """
    xs, ys, ts, offsets = [], [], [], [0]
    total = 0
    for tr in trajectories:
        pts = np.asarray(getattr(tr, "points", tr), dtype=np.float64).reshape(-1, 3)
        if len(pts) > 1 and not np.all(np.diff(pts[:, 2]) >= 0):
            raise UnsortedTimestamps("timestamps decrease along the trajectory")
        pts = pts[dom.contains_many(pts)]
        if len(pts) == 0:
            continue
        x, y, t = discretize_points(pts, dom, g)
        xs.append(x)
        ys.append(y)
        ts.append(t)
        total += len(pts)
        offsets.append(total)
    if len(offsets) == 1:
        return CubeDataset(np.empty(0, np.int64), [0], g)
    ox, oy, ot, new_offsets = kernels.expand_paths(
        np.concatenate(xs), np.concatenate(ys), np.concatenate(ts),
        np.asarray(offsets, dtype=np.int64), g.v,
    )
    return CubeDataset(xyt_to_ids(ox, oy, ot, g), new_offsets, g)
