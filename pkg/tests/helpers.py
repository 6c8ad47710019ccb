"""Shared fixtures: small domains and random cube-trajectory generators."""
from __future__ import annotations

import numpy as np

from dpstts.grid import Cube, CubeTrajectory, GridSpec, SpatioTemporalDomain, neighbors

UNIT2 = SpatioTemporalDomain(0, 2, 0, 2, 0, 2)


def random_cube_trajectory(rng: np.random.Generator, g: GridSpec, max_len: int = 12) -> CubeTrajectory:
    """A random neighbor walk with no immediate repeats."""
    c = Cube(int(rng.integers(g.g_w)), int(rng.integers(g.g_h)), int(rng.integers(g.g_t)))
    cubes = [c]
    for _ in range(int(rng.integers(0, max_len))):
        nb = neighbors(c, g)
        if not nb:
            break
        c = nb[int(rng.integers(len(nb)))]
        cubes.append(c)
    return CubeTrajectory(cubes)


def random_cube_dataset(rng: np.random.Generator, g: GridSpec, n: int, max_len: int = 12):
    return [random_cube_trajectory(rng, g, max_len) for _ in range(n)]


def random_grid(rng: np.random.Generator, max_side: int = 8) -> GridSpec:
    return GridSpec(*(int(s) for s in rng.integers(1, max_side + 1, 3)), v=int(rng.integers(1, 4)))
