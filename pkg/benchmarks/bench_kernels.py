"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Inputs come from the random-walk benchmark dataset on the default
20x20x16 grid, so the sizes match a typical pipeline run.
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from dpstts import _pykernels
from dpstts.dp import NoiseSource
from dpstts.grid import GridSpec, discretize_dataset, discretize_points
from dpstts.model import build_model, slot_layout
from dpstts.simulate import PORTO_TAXI1, random_walk_dataset

try:
    from dpstts import _ckernels
except ImportError:
    _ckernels = None


def workloads(n_trajectories: int, n_walks: int):
    g = GridSpec(20, 20, 16, v=2)
    real = random_walk_dataset(n_trajectories, seed=0)
    pts = np.concatenate([tr.points for tr in real])
    offsets = np.concatenate(([0], np.cumsum([len(tr) for tr in real]))).astype(np.int64)
    x, y, t = discretize_points(pts, PORTO_TAXI1, g)
    model = build_model(discretize_dataset(real, PORTO_TAXI1, g), PORTO_TAXI1, g, 1.0, 0.5, 0)
    _, slot_delta, _, _ = slot_layout(g)
    walk_args = (model.start_cumulative(), model.tm.cumulative(), model.tm.all_zero.astype(np.uint8),
                 np.ascontiguousarray(slot_delta), NoiseSource(1).uniform((n_walks, 125)))
    rng = np.random.default_rng(0)
    pop = rng.poisson(50, 400).astype(np.float64)
    pop_syn = rng.poisson(50, 400).astype(np.float64)
    return {
        "expand_paths": lambda k: k.expand_paths(x, y, t, offsets, g.v),
        "random_walk": lambda k: k.random_walk(*walk_args),
        "concordance (400 cells)": lambda k: k.concordance(pop, pop_syn),
    }


def best_time(fn, repeat: int) -> float:
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--trajectories", type=int, default=5000)
    parser.add_argument("--walks", type=int, default=5000)
    args = parser.parse_args(argv)
    if _ckernels is None:
        print("compiled kernels not built; only the Python fallback is available")
    print(f"{'kernel':<26}{'python [s]':>12}{'compiled [s]':>14}{'speedup':>10}")
    for name, run in workloads(args.trajectories, args.walks).items():
        py = best_time(lambda: run(_pykernels), args.repeat)
        if _ckernels is None:
            print(f"{name:<26}{py:>12.4f}{'-':>14}{'-':>10}")
            continue
        c = best_time(lambda: run(_ckernels), args.repeat)
        print(f"{name:<26}{py:>12.4f}{c:>14.4f}{py / c:>9.1f}x")


if __name__ == "__main__":
    main()
