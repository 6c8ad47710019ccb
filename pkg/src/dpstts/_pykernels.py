"""Pure-Python implementations of the hot loops.

Mirrors ``_ckernels.pyx`` function for function; the two must produce
identical outputs for identical inputs (tests assert this).
"""
from bisect import bisect_right

import numpy as np

NAME = "python"


def _sign(a):
    return (a > 0) - (a < 0)


def expand_paths(x, y, t, offsets, v):
    """Collapse repeated cubes and fill gaps between non-neighboring cubes.

    ``x``, ``y``, ``t`` are flat int64 arrays of cube indices for all
    trajectories back to back; ``offsets`` has one more entry than there are
    trajectories. Returns the expanded flat arrays and their new offsets.
    """
    xs, ys, ts = x.tolist(), y.tolist(), t.tolist()
    offs = offsets.tolist()
    ox, oy, ot = [], [], []
    new_offsets = [0]
    for k in range(len(offs) - 1):
        lo, hi = offs[k], offs[k + 1]
        if hi > lo:
            cx, cy, ct = xs[lo], ys[lo], ts[lo]
            ox.append(cx)
            oy.append(cy)
            ot.append(ct)
            for j in range(lo + 1, hi):
                nx, ny, nt = xs[j], ys[j], ts[j]
                dx, dy, dt = nx - cx, ny - cy, nt - ct
                if dx == 0 and dy == 0 and dt == 0:
                    continue
                if dt < 0:
                    raise ValueError("time index decreases at position %d" % j)
                near = -1 <= dx <= 1 and -1 <= dy <= 1 and dt <= 1
                dwell = dx == 0 and dy == 0 and dt <= v
                if not (near or dwell):
                    # unit steps toward the target in every differing coordinate
                    while True:
                        cx += _sign(nx - cx)
                        cy += _sign(ny - cy)
                        ct += _sign(nt - ct)
                        if cx == nx and cy == ny and ct == nt:
                            break
                        ox.append(cx)
                        oy.append(cy)
                        ot.append(ct)
                cx, cy, ct = nx, ny, nt
                ox.append(cx)
                oy.append(cy)
                ot.append(ct)
        new_offsets.append(len(ox))
    return (
        np.asarray(ox, dtype=np.int64),
        np.asarray(oy, dtype=np.int64),
        np.asarray(ot, dtype=np.int64),
        np.asarray(new_offsets, dtype=np.int64),
    )


def random_walk(start_cdf, cdf, all_zero, slot_delta, uniforms):
    """Sample one cube-id walk per row of ``uniforms``.

    Column 0 of a row picks the start cube (first index whose cumulative
    mass exceeds the uniform); column j picks the j-th transition by linear
    scan of the current cube's cumulative row. The last slot of ``cdf`` is
    the stop symbol. A walk ends on stop, on an all-zero row, or after
    ``uniforms.shape[1]`` cubes.
    """
    start = start_cdf.tolist()
    n_walks, max_len = uniforms.shape
    n_slots = cdf.shape[1]
    stop_slot = n_slots - 1
    rows = cdf.tolist()
    dead = all_zero.tolist()
    delta = slot_delta.tolist()
    us = uniforms.tolist()
    out = []
    offsets = [0]
    last = len(start) - 1
    for w in range(n_walks):
        u = us[w]
        cur = min(bisect_right(start, u[0]), last)
        out.append(cur)
        for j in range(1, max_len):
            if dead[cur]:
                break
            row = rows[cur]
            uj = u[j]
            s = 0
            while s < stop_slot and not uj < row[s]:
                s += 1
            if s == stop_slot:
                break
            cur += delta[s]
            out.append(cur)
        offsets.append(len(out))
    return np.asarray(out, dtype=np.int64), np.asarray(offsets, dtype=np.int64)


def concordance(a, b):
    """Concordant minus discordant pairs; ties in either vector count zero."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    total = 0
    for i in range(len(a) - 1):
        total += int(np.dot(np.sign(a[i + 1:] - a[i]), np.sign(b[i + 1:] - b[i])))
    return total
