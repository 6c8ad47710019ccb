"""Sampling synthetic trajectories from a built model."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._backend import kernels
from .dp import STREAM_GENERATION, NoiseSource
from .grid import CubeDataset, CubeTrajectory, cube_centers
from .ingest import RawDataset, RawTrajectory
from .model import SynthModel, slot_layout

DEFAULT_MAX_LEN = 125


@dataclass(frozen=True)
class GenerationConfig:
    count: int
    max_len: int = DEFAULT_MAX_LEN
    seed: int = 0

    def __post_init__(self):
        if int(self.count) < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if int(self.max_len) < 1:
            raise ValueError(f"max_len must be >= 1, got {self.max_len}")

    @classmethod
    def for_model(cls, model: SynthModel, count=None, max_len=DEFAULT_MAX_LEN, seed=0):
        """Config whose count defaults to the size of the model's source dataset."""
        return cls(model.source_size if count is None else count, max_len, seed)


def _walk(model: SynthModel, uniforms: np.ndarray) -> CubeDataset:
    _, slot_delta, _, _ = slot_layout(model.grid)
    ids, offsets = kernels.random_walk(
        model.start_cumulative(),
        model.tm.cumulative(),
        model.tm.all_zero.astype(np.uint8),
        np.ascontiguousarray(slot_delta),
        np.ascontiguousarray(uniforms, dtype=np.float64),
    )
    return CubeDataset(ids, offsets, model.grid)


def generate_cube_trajectory(model: SynthModel, max_len: int, rng: NoiseSource) -> CubeTrajectory:
    """One walk: start cube from the start mass, then transitions until stop.

    Consumes ``max_len`` uniforms from ``rng`` regardless of the walk length.
    """
    return _walk(model, rng.uniform((1, max_len)))[0]


def generate_cube_dataset(model: SynthModel, cfg: GenerationConfig) -> CubeDataset:
    # walk i always reads row i of the uniform block, so its randomness is
    # fixed by (seed, i) alone
    rng = NoiseSource(cfg.seed, STREAM_GENERATION)
    return _walk(model, rng.uniform((cfg.count, cfg.max_len)))


def materialize(cubes: CubeDataset, model: SynthModel, source: str = "synthetic") -> RawDataset:
    """Replace every cube by its center point; ids are ``syn-<index>``."""
    centers = cube_centers(cubes.ids, model.domain, model.grid)
    trajectories = []
    for i in range(len(cubes)):
        pts = centers[cubes.offsets[i]:cubes.offsets[i + 1]]
        trajectories.append(RawTrajectory(f"syn-{i}", pts))
    return RawDataset(trajectories, source)


def generate_dataset(model: SynthModel, cfg: GenerationConfig) -> RawDataset:
    return materialize(generate_cube_dataset(model, cfg), model)
