"""Utility metrics comparing a real dataset with a synthetic one.

Spatial metrics work on a uniform 2-D evaluation grid over the domain's
bounding box, independent of the model grid. Cell ids are
``row * cols + col`` with rows along latitude.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._backend import kernels
from .errors import (
    DimensionMismatch,
    EmptyDataset,
    FewerThanKPatterns,
    NotADistribution,
    TooFewItems,
)
from .grid import SpatioTemporalDomain


@dataclass(frozen=True)
class EvalGrid:
    rows: int = 20
    cols: int = 20

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("evaluation grid needs at least one cell")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class EvalParams:
    grid: EvalGrid = EvalGrid(20, 20)
    sanity_fraction: float = 0.001
    top_k: int = 200
    min_pattern: int = 2
    max_pattern: int = 8
    bin_seconds: float = 900.0
    length_buckets: int = 20


class Pattern(NamedTuple):
    cells: tuple[int, ...]
    count: int


# --- primitives ------------------------------------------------------------

def _as_distribution(p, name):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1:
        raise DimensionMismatch(f"{name} must be a vector")
    if np.any(p < 0) or not np.all(np.isfinite(p)) or abs(p.sum() - 1.0) > 1e-6:
        raise NotADistribution(f"{name} is not a probability vector")
    return p


def jsd(p, q) -> float:
    """Jensen-Shannon divergence in bits, so the result lies in [0, 1]."""
    p = _as_distribution(p, "p")
    q = _as_distribution(q, "q")
    if p.shape != q.shape:
        raise DimensionMismatch(f"lengths differ: {len(p)} vs {len(q)}")
    m = (p + q) / 2

    def kl(a):
        nz = a > 0
        return float(np.sum(a[nz] * np.log2(a[nz] / m[nz])))

    return min(1.0, max(0.0, (kl(p) + kl(q)) / 2))


def _tied_pairs(x: np.ndarray) -> int:
    _, counts = np.unique(x, return_counts=True)
    return int((counts * (counts - 1) // 2).sum())


def kendall_tau(a, b) -> float:
    """Tie-corrected Kendall rank correlation (tau-b).

    Concordant minus discordant pairs, divided by the geometric mean of the
    pair counts left untied in each vector. Without ties this is exactly
    ``(C - D) / (n(n-1)/2)``. If either vector is constant no pair is
    comparable; the result is 1 when both are constant and 0 otherwise.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    n = len(a)
    if n < 2:
        raise TooFewItems("kendall tau needs at least two items")
    pairs = n * (n - 1) // 2
    untied_a = pairs - _tied_pairs(a)
    untied_b = pairs - _tied_pairs(b)
    if untied_a == 0 or untied_b == 0:
        return 1.0 if untied_a == untied_b else 0.0
    return kernels.concordance(a, b) / math.sqrt(untied_a * untied_b)


def _normalize(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.float64)
    return counts / counts.sum()


def _stack_points(ds) -> tuple[np.ndarray, np.ndarray]:
    """All points of ``ds`` as one ``(n, 3)`` array plus a trajectory index per row."""
    trs = list(ds)
    if not trs:
        return np.empty((0, 3)), np.empty(0, dtype=np.int64)
    pts = np.concatenate([tr.points for tr in trs])
    owner = np.repeat(np.arange(len(trs)), [len(tr.points) for tr in trs])
    return pts, owner


def point_cells(points: np.ndarray, dom: SpatioTemporalDomain, g: EvalGrid):
    """Cell id per point and a mask of points inside the spatial box."""
    lon, lat = points[:, 0], points[:, 1]
    inside = (lon >= dom.left) & (lon <= dom.right) & (lat >= dom.bottom) & (lat <= dom.top)
    col = np.floor((lon - dom.left) / ((dom.right - dom.left) / g.cols))
    row = np.floor((lat - dom.bottom) / ((dom.top - dom.bottom) / g.rows))
    col = np.clip(np.nan_to_num(col), 0, g.cols - 1).astype(np.int64)
    row = np.clip(np.nan_to_num(row), 0, g.rows - 1).astype(np.int64)
    return row * g.cols + col, inside


# --- temporal --------------------------------------------------------------

def n_time_bins(dom: SpatioTemporalDomain, bin_width: float) -> int:
    return max(1, math.ceil((dom.e_time - dom.s_time) / bin_width - 1e-9))


def temporal_visit_distribution(ds, dom: SpatioTemporalDomain, bin_width: float = 900) -> np.ndarray:
    pts, _ = _stack_points(ds)
    t = pts[:, 2]
    t = t[(t >= dom.s_time) & (t <= dom.e_time)]
    if len(t) == 0:
        raise EmptyDataset("no points inside the time window")
    n = n_time_bins(dom, bin_width)
    idx = np.minimum(np.floor((t - dom.s_time) / bin_width).astype(np.int64), n - 1)
    return _normalize(np.bincount(idx, minlength=n))


# --- location popularity ---------------------------------------------------

def location_popularity(ds, dom: SpatioTemporalDomain, g: EvalGrid) -> np.ndarray:
    pts, _ = _stack_points(ds)
    cells, inside = point_cells(pts, dom, g)
    return np.bincount(cells[inside], minlength=g.n_cells).astype(np.int64)


def location_avre(d, d_syn, dom, g: EvalGrid, sanity: float) -> float:
    """Mean over cells of ``|pop_D - pop_syn| / max(pop_D, sanity)``."""
    pop = location_popularity(d, dom, g).astype(np.float64)
    pop_syn = location_popularity(d_syn, dom, g).astype(np.float64)
    num = np.abs(pop - pop_syn)
    den = np.maximum(pop, sanity)
    with np.errstate(divide="ignore", invalid="ignore"):
        re = np.where(num == 0, 0.0, num / den)
    return float(re.mean())


def location_kt(d, d_syn, dom, g: EvalGrid) -> float:
    return kendall_tau(location_popularity(d, dom, g), location_popularity(d_syn, dom, g))


# --- frequent patterns -----------------------------------------------------

def cell_sequences(ds, dom, g: EvalGrid) -> tuple[np.ndarray, np.ndarray]:
    """Per-trajectory cell sequences with consecutive repeats collapsed.

    Returns flat ``cells`` and the owning trajectory index of each entry.
    """
    pts, owner = _stack_points(ds)
    cells, inside = point_cells(pts, dom, g)
    cells, owner = cells[inside], owner[inside]
    keep = np.ones(len(cells), dtype=bool)
    keep[1:] = (cells[1:] != cells[:-1]) | (owner[1:] != owner[:-1])
    return cells[keep], owner[keep]


def _windows(cells, owner, length):
    if len(cells) < length:
        return np.empty((0, length), dtype=cells.dtype)
    w = sliding_window_view(cells, length)
    same = owner[: len(owner) - length + 1] == owner[length - 1:]
    return w[same]


def _count_rows(rows: np.ndarray):
    if len(rows) == 0:
        return rows, np.empty(0, dtype=np.int64)
    return np.unique(rows, axis=0, return_counts=True)


def mine_top_k_patterns(ds, dom, g: EvalGrid, k: int = 200, min_len: int = 2,
                        max_len: int = 8) -> list[Pattern]:
    """The ``k`` most frequent contiguous cell patterns of length min_len..max_len.

    Every window of every trajectory is an occurrence (overlaps count). Ties
    in count are broken by lexicographic order of the cell tuple.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    cells, owner = cell_sequences(ds, dom, g)
    candidates = []
    for length in range(min_len, max_len + 1):
        rows, counts = _count_rows(_windows(cells, owner, length))
        if len(counts) == 0:
            continue
        # lexsort: last key is primary
        order = np.lexsort(tuple(rows[:, j] for j in range(length - 1, -1, -1)) + (-counts,))
        for i in order[:k]:
            candidates.append(Pattern(tuple(int(c) for c in rows[i]), int(counts[i])))
    candidates.sort(key=lambda p: (-p.count, p.cells))
    top = candidates[:k]
    if len(top) < k:
        warnings.warn(f"only {len(top)} distinct patterns, fewer than k={k}", FewerThanKPatterns)
    return top


def pattern_counts(ds, dom, g: EvalGrid, patterns) -> np.ndarray:
    """Occurrence counts of the given patterns in ``ds`` (window counting)."""
    cells, owner = cell_sequences(ds, dom, g)
    out = np.zeros(len(patterns), dtype=np.int64)
    by_len: dict[int, list[int]] = {}
    for i, p in enumerate(patterns):
        by_len.setdefault(len(p.cells if isinstance(p, Pattern) else p), []).append(i)
    for length, idx in by_len.items():
        query = np.array([patterns[i].cells if isinstance(patterns[i], Pattern) else patterns[i]
                          for i in idx], dtype=np.int64).reshape(-1, length)
        win = _windows(cells, owner, length).astype(np.int64)
        if len(win) == 0:
            continue
        both = np.concatenate([query, win])
        _, inverse = np.unique(both, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        tally = np.bincount(inverse[len(query):], minlength=inverse.max() + 1)
        out[idx] = tally[inverse[: len(query)]]
    return out


def fp_kt(d, d_syn, dom, g: EvalGrid, k: int = 200, min_len: int = 2, max_len: int = 8) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FewerThanKPatterns)
        top = mine_top_k_patterns(d, dom, g, k, min_len, max_len)
    if len(top) < 2:
        raise TooFewItems("the real dataset yields fewer than two patterns")
    real = np.array([p.count for p in top])
    syn = pattern_counts(d_syn, dom, g, top)
    return kendall_tau(real, syn)


# --- trips and lengths -----------------------------------------------------

def trip_distribution(ds, dom, g: EvalGrid) -> np.ndarray:
    """Normalized counts over (start cell, end cell) pairs, ``n_cells**2`` long."""
    pts, owner = _stack_points(ds)
    cells, inside = point_cells(pts, dom, g)
    cells, owner = cells[inside], owner[inside]
    if len(cells) == 0:
        raise EmptyDataset("no trajectory has a point inside the spatial domain")
    first = np.ones(len(owner), dtype=bool)
    first[1:] = owner[1:] != owner[:-1]
    last = np.ones(len(owner), dtype=bool)
    last[:-1] = owner[:-1] != owner[1:]
    trips = cells[first] * g.n_cells + cells[last]
    return _normalize(np.bincount(trips, minlength=g.n_cells ** 2))


def trip_error(d, d_syn, dom, g: EvalGrid) -> float:
    return jsd(trip_distribution(d, dom, g), trip_distribution(d_syn, dom, g))


def length_histograms(d, d_syn, buckets: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Bucket distributions of trajectory point counts.

    Buckets are equal-width over the real dataset's length range; synthetic
    lengths outside it clamp to the end buckets. If every real length is
    the same, the categories become below / equal / above that length.
    """
    lens = np.array([len(tr.points) for tr in d], dtype=np.int64)
    lens_syn = np.array([len(tr.points) for tr in d_syn], dtype=np.int64)
    if len(lens) == 0 or len(lens_syn) == 0:
        raise EmptyDataset("length error needs two non-empty datasets")
    lo, hi = int(lens.min()), int(lens.max())
    if lo == hi:
        def bucket(x):
            return np.sign(x - lo) + 1
        n = 3
    else:
        def bucket(x):
            return np.clip((x - lo) * buckets // (hi - lo), 0, buckets - 1)
        n = buckets
    return (_normalize(np.bincount(bucket(lens), minlength=n)),
            _normalize(np.bincount(bucket(lens_syn), minlength=n)))


def length_error(d, d_syn, buckets: int = 20) -> float:
    return jsd(*length_histograms(d, d_syn, buckets))


# --- report ----------------------------------------------------------------

@dataclass
class MetricsReport:
    temporal_jsd: float
    location_avre: float
    location_kt: float
    fp_kt: float
    trip_error: float
    length_error: float
    temporal_hist_real: list[float] = field(default_factory=list)
    temporal_hist_syn: list[float] = field(default_factory=list)
    bin_start_seconds: list[float] = field(default_factory=list)

    SCORES = ("location_avre", "location_kt", "fp_kt", "trip_error", "length_error", "temporal_jsd")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(**{k: doc[k] for k in cls.__dataclass_fields__})

    def scores(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in self.SCORES}

    def plot_rows(self, which: str = "real") -> list[tuple[float, float]]:
        hist = self.temporal_hist_real if which == "real" else self.temporal_hist_syn
        return list(zip(self.bin_start_seconds, hist))


def evaluate_all(d, d_syn, dom: SpatioTemporalDomain, params: EvalParams = EvalParams()) -> MetricsReport:
    g = params.grid
    hist = temporal_visit_distribution(d, dom, params.bin_seconds)
    hist_syn = temporal_visit_distribution(d_syn, dom, params.bin_seconds)
    sanity = params.sanity_fraction * len(d)
    return MetricsReport(
        temporal_jsd=jsd(hist, hist_syn),
        location_avre=location_avre(d, d_syn, dom, g, sanity),
        location_kt=location_kt(d, d_syn, dom, g),
        fp_kt=fp_kt(d, d_syn, dom, g, params.top_k, params.min_pattern, params.max_pattern),
        trip_error=trip_error(d, d_syn, dom, g),
        length_error=length_error(d, d_syn, params.length_buckets),
        temporal_hist_real=hist.tolist(),
        temporal_hist_syn=hist_syn.tolist(),
        bin_start_seconds=[dom.s_time + i * params.bin_seconds for i in range(len(hist))],
    )
