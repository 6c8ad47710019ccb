"""Random-walk trajectory datasets with hotspot structure, for benchmarks and tests."""
from __future__ import annotations

import numpy as np

from .grid import SpatioTemporalDomain
from .ingest import RawDataset, RawTrajectory

# the first bounding box of the Porto experiments, 14:00-18:00 as seconds of day
PORTO_TAXI1 = SpatioTemporalDomain(-8.665, -8.528, 41.104, 41.250, 14 * 3600.0, 18 * 3600.0)


def random_walk_dataset(
    n: int,
    dom: SpatioTemporalDomain = PORTO_TAXI1,
    seed: int = 0,
    n_hotspots: int = 6,
    interval: float = 15.0,
    min_points: int = 5,
    max_points: int = 120,
    step_fraction: float = 0.05,
    active_region: tuple[float, float, float, float] = (0.25, 0.85, 0.2, 0.8),
) -> RawDataset:
    """``n`` correlated random walks that start near a few hotspots.

    Each walk keeps a slowly turning heading and is sampled every
    ``interval`` seconds. Walks reflect off the edges of ``active_region``
    (fractions ``x0, x1, y0, y1`` of the box), leaving the rest of the box
    unvisited the way water or parkland is in real taxi data. Start times
    favour the early part of the window so the temporal histogram is not
    flat.
    """
    rng = np.random.default_rng(seed)
    width, height = dom.right - dom.left, dom.top - dom.bottom
    span = dom.e_time - dom.s_time
    x0, x1, y0, y1 = active_region
    lo_x, hi_x = dom.left + x0 * width, dom.left + x1 * width
    lo_y, hi_y = dom.bottom + y0 * height, dom.bottom + y1 * height
    hot = np.column_stack((
        rng.uniform(lo_x, hi_x, n_hotspots),
        rng.uniform(lo_y, hi_y, n_hotspots),
    ))
    weights = rng.dirichlet(np.ones(n_hotspots))
    step = step_fraction * min(width, height)
    out = []
    for i in range(n):
        m = int(rng.integers(min_points, max_points + 1))
        h = rng.choice(n_hotspots, p=weights)
        pos = hot[h] + rng.normal(0.0, 0.03, 2) * (width, height)
        heading = rng.uniform(0, 2 * np.pi)
        turns = np.cumsum(rng.normal(0.0, 0.35, m))
        speed = step * rng.uniform(0.3, 1.5)
        d = np.column_stack((np.cos(heading + turns), np.sin(heading + turns))) * speed
        d[0] = 0.0
        path = pos + np.cumsum(d, axis=0)
        path[:, 0] = _reflect(path[:, 0], lo_x, hi_x)
        path[:, 1] = _reflect(path[:, 1], lo_y, hi_y)
        start = dom.s_time + span * rng.beta(1.6, 2.4) * max(0.0, 1 - m * interval / span)
        times = start + interval * np.arange(m)
        keep = times <= dom.e_time
        out.append(RawTrajectory(f"rw-{i}", np.column_stack((path, times))[keep]))
    return RawDataset(out, f"random-walk(n={n}, seed={seed})")


def _reflect(x, lo, hi):
    width = hi - lo
    y = np.mod(x - lo, 2 * width)
    return lo + np.where(y > width, 2 * width - y, y)
