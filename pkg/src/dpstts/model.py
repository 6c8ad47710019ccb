"""Noisy start distribution + noisy first-order Markov model over cubes.

Frequency and transition matrices use a fixed-slot layout: row ``i`` is
cube ``i`` and column ``s < K`` is the neighbor reached by
``neighbor_offsets(v)[s]``; column ``K`` is the stop symbol. Slots whose
neighbor falls outside the grid are structurally zero.
"""
from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .dp import (
    STREAM_FREQUENCY,
    STREAM_START,
    NoiseSource,
    PrivacyBudget,
    check_epsilon,
    split_budget,
)
from .errors import CorruptModelFile, NonNeighborTransition, VersionMismatch
from .grid import (
    GridSpec,
    SpatioTemporalDomain,
    as_cube_dataset,
    ids_to_xyt,
    neighbor_offsets,
)

STOP = -1
FORMAT_NAME = "dpstts-model"
FORMAT_VERSION = 1


@functools.lru_cache(maxsize=32)
def slot_layout(grid: GridSpec):
    """Per-grid constants: ``(offsets, slot_delta, support, lookup)``.

    ``slot_delta[s]`` is the linear-id step of slot ``s``; ``support`` is the
    ``(n_cubes, K + 1)`` boolean mask of in-grid slots (stop always on);
    ``lookup[dx + 1, dy + 1, dt]`` maps a step to its slot or -1.
    """
    offsets = neighbor_offsets(grid.v)
    k = len(offsets)
    steps = np.array(offsets, dtype=np.int64)
    slot_delta = (steps[:, 0] * grid.g_h + steps[:, 1]) * grid.g_t + steps[:, 2]
    x, y, t = ids_to_xyt(np.arange(grid.n_cubes, dtype=np.int64), grid)
    support = np.ones((grid.n_cubes, k + 1), dtype=bool)
    nx = x[:, None] + steps[None, :, 0]
    ny = y[:, None] + steps[None, :, 1]
    nt = t[:, None] + steps[None, :, 2]
    support[:, :k] = (
        (nx >= 0) & (nx < grid.g_w) & (ny >= 0) & (ny < grid.g_h) & (nt < grid.g_t)
    )
    lookup = np.full((3, 3, grid.v + 1), -1, dtype=np.int64)
    for s, (dx, dy, dt) in enumerate(offsets):
        lookup[dx + 1, dy + 1, dt] = s
    for arr in (slot_delta, support, lookup):
        arr.setflags(write=False)
    return offsets, slot_delta, support, lookup


def _sparse_row(grid: GridSpec, values: np.ndarray, i: int, keep) -> dict[int, float]:
    _, slot_delta, support, _ = slot_layout(grid)
    k = len(slot_delta)
    out = {}
    for s in np.flatnonzero(support[i]):
        if keep(values[i, s]):
            target = STOP if s == k else int(i + slot_delta[s])
            out[target] = float(values[i, s])
    return out


@dataclass(eq=False)
class StartDistribution:
    mass: np.ndarray

    def __eq__(self, other):
        return isinstance(other, StartDistribution) and np.array_equal(self.mass, other.mass)


@dataclass(eq=False)
class FrequencyMatrix:
    grid: GridSpec
    values: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return slot_layout(self.grid)[2]

    def row(self, i: int) -> dict[int, float]:
        """Every support cell of row ``i``, keyed by target cube id or ``STOP``."""
        return _sparse_row(self.grid, self.values, i, lambda _: True)

    def total(self) -> float:
        return float(self.values.sum())

    def __eq__(self, other):
        return (
            isinstance(other, FrequencyMatrix)
            and self.grid == other.grid
            and np.array_equal(self.values, other.values)
        )


@dataclass(eq=False)
class TransitionMatrix:
    grid: GridSpec
    probs: np.ndarray
    all_zero: np.ndarray

    def row(self, i: int) -> dict[int, float]:
        """Non-zero probabilities of row ``i``."""
        return _sparse_row(self.grid, self.probs, i, lambda p: p != 0)

    def cumulative(self) -> np.ndarray:
        """Row-wise cumulative probabilities prepared for inversion sampling.

        Entries from each row's last positive slot onward are set to +inf so
        rounding in the cumulative sum can never select a zero-mass slot.
        """
        cdf = np.cumsum(self.probs, axis=1)
        positive = self.probs > 0
        n_slots = self.probs.shape[1]
        last = n_slots - 1 - np.argmax(positive[:, ::-1], axis=1)
        cdf[np.arange(n_slots)[None, :] >= last[:, None]] = np.inf
        return np.ascontiguousarray(cdf)

    def __eq__(self, other):
        return (
            isinstance(other, TransitionMatrix)
            and self.grid == other.grid
            and np.array_equal(self.probs, other.probs)
            and np.array_equal(self.all_zero, other.all_zero)
        )


@dataclass(eq=False)
class SynthModel:
    domain: SpatioTemporalDomain
    grid: GridSpec
    start: StartDistribution
    tm: TransitionMatrix
    budget: PrivacyBudget
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        n = self.grid.n_cubes
        if self.start.mass.shape != (n,) or self.tm.probs.shape[0] != n or self.tm.grid != self.grid:
            raise ValueError("model matrices do not match the grid")

    @property
    def source_size(self) -> int:
        return int(self.metadata.get("source_size", 0))

    def start_cumulative(self) -> np.ndarray:
        cdf = np.cumsum(self.start.mass)
        last = int(np.flatnonzero(self.start.mass > 0)[-1])
        cdf[last:] = np.inf
        return cdf

    def __eq__(self, other):
        return (
            isinstance(other, SynthModel)
            and self.domain == other.domain
            and self.grid == other.grid
            and self.start == other.start
            and self.tm == other.tm
            and self.budget == other.budget
            and self.metadata == other.metadata
        )


def count_starts(da, grid: GridSpec) -> np.ndarray:
    da = as_cube_dataset(da, grid)
    return np.bincount(da.ids[da.offsets[:-1]], minlength=grid.n_cubes).astype(np.int64)


def noisy_start_distribution(counts, eps_s: float, rng: NoiseSource | None) -> StartDistribution:
    """Laplace noise (sensitivity 1) on start counts, clamp, then normalize.

    With ``eps_s == NOISE_OFF`` no noise is drawn. If every noisy count is
    non-positive the result is uniform over all cubes.
    """
    check_epsilon(eps_s)
    noisy = np.asarray(counts, dtype=np.float64).copy()
    if not math.isinf(eps_s):
        noisy += rng.laplace(1.0 / eps_s, size=len(noisy))
    np.maximum(noisy, 0.0, out=noisy)
    total = noisy.sum()
    if total <= 0:
        return StartDistribution(np.full(len(noisy), 1.0 / len(noisy)))
    return StartDistribution(noisy / total)


def build_frequency_matrix(da, grid: GridSpec) -> FrequencyMatrix:
    """Length-normalized 2-gram frequencies.

    A trajectory of ``L`` cubes has ``L`` 2-grams (``L - 1`` moves plus the
    final move to the stop symbol); each contributes ``1 / L`` so every
    trajectory carries total mass exactly one.
    """
    da = as_cube_dataset(da, grid)
    offsets, _, _, lookup = slot_layout(grid)
    k = len(offsets)
    values = np.zeros((grid.n_cubes, k + 1))
    if len(da) == 0:
        return FrequencyMatrix(grid, values)

    lengths = da.lengths
    weight = 1.0 / lengths
    ends = da.offsets[1:] - 1
    # moves between consecutive cubes of the same trajectory
    is_move = np.ones(len(da.ids), dtype=bool)
    is_move[ends] = False
    src = da.ids[is_move]
    dst = da.ids[np.flatnonzero(is_move) + 1]
    move_weight = np.repeat(weight, lengths - 1)

    sx, sy, st = ids_to_xyt(src, grid)
    tx, ty, tt = ids_to_xyt(dst, grid)
    dx, dy, dt = tx - sx, ty - sy, tt - st
    ok = (np.abs(dx) <= 1) & (np.abs(dy) <= 1) & (dt >= 0) & (dt <= grid.v)
    slots = np.full(len(src), -1, dtype=np.int64)
    slots[ok] = lookup[dx[ok] + 1, dy[ok] + 1, dt[ok]]
    if np.any(slots < 0):
        bad = int(np.flatnonzero(slots < 0)[0])
        raise NonNeighborTransition(f"cube {int(src[bad])} -> {int(dst[bad])} is not a neighbor step")

    np.add.at(values, (src, slots), move_weight)
    np.add.at(values, (da.ids[ends], np.full(len(ends), k)), weight)
    return FrequencyMatrix(grid, values)


def add_fm_noise(fm: FrequencyMatrix, eps_m: float, rng: NoiseSource | None) -> FrequencyMatrix:
    """Laplace noise (sensitivity 1) on every support cell, zeros included."""
    check_epsilon(eps_m)
    if math.isinf(eps_m):
        return FrequencyMatrix(fm.grid, fm.values.copy())
    # one draw per cell in row-major order, discarded off-support, so the
    # stream position never depends on the data
    noise = rng.laplace(1.0 / eps_m, size=fm.values.shape)
    return FrequencyMatrix(fm.grid, fm.values + np.where(fm.support, noise, 0.0))


def derive_transition_matrix(fm_noisy: FrequencyMatrix) -> TransitionMatrix:
    clamped = np.where(fm_noisy.support, np.maximum(fm_noisy.values, 0.0), 0.0)
    sums = clamped.sum(axis=1)
    all_zero = ~(sums > 0)
    probs = np.zeros_like(clamped)
    live = ~all_zero
    probs[live] = clamped[live] / sums[live, None]
    return TransitionMatrix(fm_noisy.grid, probs, all_zero)


def build_model(
    da,
    domain: SpatioTemporalDomain,
    grid: GridSpec,
    epsilon: float,
    delta_split: float = 0.5,
    rng: NoiseSource | int = 0,
) -> SynthModel:
    budget = split_budget(epsilon, delta_split)
    if not isinstance(rng, NoiseSource):
        rng = NoiseSource(rng)
    da = as_cube_dataset(da, grid)
    if len(da) == 0:
        raise ValueError("cannot build a model from an empty cube dataset")
    start = noisy_start_distribution(count_starts(da, grid), budget.eps_s, rng.substream(STREAM_START))
    fm = build_frequency_matrix(da, grid)
    fm_noisy = add_fm_noise(fm, budget.eps_m, rng.substream(STREAM_FREQUENCY))
    tm = derive_transition_matrix(fm_noisy)
    metadata = {
        "seed": rng.seed,
        "source_size": len(da),
        "eps_s": budget.eps_s,
        "eps_m": budget.eps_m,
    }
    return SynthModel(domain, grid, start, tm, budget, metadata)


# --- serialization -------------------------------------------------------

def model_to_dict(model: SynthModel) -> dict:
    k = model.tm.probs.shape[1] - 1
    _, slot_delta, _, _ = slot_layout(model.grid)
    rows = []
    for i in np.flatnonzero(~model.tm.all_zero):
        p = model.tm.probs[i]
        entries = [
            [STOP if s == k else int(i + slot_delta[s]), float(p[s])]
            for s in np.flatnonzero(p)
        ]
        rows.append([int(i), entries])
    d = model.domain
    g = model.grid
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "domain": {"left": d.left, "right": d.right, "bottom": d.bottom, "top": d.top,
                   "s_time": d.s_time, "e_time": d.e_time},
        "grid": {"g_w": g.g_w, "g_h": g.g_h, "g_t": g.g_t, "v": g.v},
        "budget": {"epsilon": model.budget.epsilon, "delta_split": model.budget.delta_split},
        "metadata": model.metadata,
        "start": [[int(i), float(model.start.mass[i])] for i in np.flatnonzero(model.start.mass)],
        "transitions": rows,
    }


def model_from_dict(doc: dict) -> SynthModel:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT_NAME:
        raise CorruptModelFile("not a model document")
    if doc.get("version") != FORMAT_VERSION:
        raise VersionMismatch(f"model format version {doc.get('version')!r}, expected {FORMAT_VERSION}")
    try:
        domain = SpatioTemporalDomain(**doc["domain"])
        grid = GridSpec(**doc["grid"])
        budget = PrivacyBudget(**doc["budget"])
        _, _, support, lookup = slot_layout(grid)
        k = support.shape[1] - 1
        mass = np.zeros(grid.n_cubes)
        for i, m in doc["start"]:
            if not 0 <= i < grid.n_cubes:
                raise IndexError(f"start cube {i} outside grid")
            mass[i] = m
        probs = np.zeros((grid.n_cubes, k + 1))
        all_zero = np.ones(grid.n_cubes, dtype=bool)
        for i, entries in doc["transitions"]:
            if not 0 <= i < grid.n_cubes:
                raise IndexError(f"row {i} outside grid")
            all_zero[i] = not entries
            sx, sy, st = ids_to_xyt(np.int64(i), grid)
            for target, p in entries:
                if target == STOP:
                    s = k
                elif not 0 <= target < grid.n_cubes:
                    raise CorruptModelFile(f"transition target {target} outside grid")
                else:
                    tx, ty, tt = ids_to_xyt(np.int64(target), grid)
                    dx, dy, dt = tx - sx, ty - sy, tt - st
                    if not (abs(dx) <= 1 and abs(dy) <= 1 and 0 <= dt <= grid.v):
                        raise CorruptModelFile(f"transition {i} -> {target} outside support")
                    s = int(lookup[dx + 1, dy + 1, dt])
                    if s < 0 or not support[i, s]:
                        raise CorruptModelFile(f"transition {i} -> {target} outside support")
                probs[i, s] = p
        metadata = dict(doc["metadata"])
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise CorruptModelFile(f"malformed model document: {exc}") from exc
    return SynthModel(domain, grid, StartDistribution(mass), TransitionMatrix(grid, probs, all_zero),
                      budget, metadata)


def dumps_model(model: SynthModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n"


def loads_model(text: str) -> SynthModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModelFile(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(doc)


def save_model(model: SynthModel, path) -> None:
    from .fileio import atomic_write_text

    atomic_write_text(path, dumps_model(model))


def load_model(path) -> SynthModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
