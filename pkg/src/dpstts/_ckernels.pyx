# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in ``_pykernels``.

Same signatures, same outputs. Built optionally by ``setup.py``; when the
extension is absent the package falls back to the pure-Python module.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

NAME = "cython"


cdef inline long _sign(long a) noexcept nogil:
    return (a > 0) - (a < 0)


def expand_paths(const cnp.int64_t[::1] x, const cnp.int64_t[::1] y,
                 const cnp.int64_t[::1] t, const cnp.int64_t[::1] offsets,
                 long v):
    cdef Py_ssize_t n_traj = offsets.shape[0] - 1
    cdef Py_ssize_t k, j, lo, hi, n = 0
    cdef long cx, cy, ct, nx, ny, nt, dx, dy, dt, steps
    cdef bint near, dwell

    # first pass: exact output size
    for k in range(n_traj):
        lo = offsets[k]
        hi = offsets[k + 1]
        if hi <= lo:
            continue
        cx = x[lo]; cy = y[lo]; ct = t[lo]
        n += 1
        for j in range(lo + 1, hi):
            nx = x[j]; ny = y[j]; nt = t[j]
            dx = nx - cx; dy = ny - cy; dt = nt - ct
            if dx == 0 and dy == 0 and dt == 0:
                continue
            if dt < 0:
                raise ValueError("time index decreases at position %d" % j)
            steps = max(max(abs(dx), abs(dy)), dt)
            near = -1 <= dx <= 1 and -1 <= dy <= 1 and dt <= 1
            dwell = dx == 0 and dy == 0 and dt <= v
            n += 1 if (near or dwell) else steps
            cx = nx; cy = ny; ct = nt

    ox_arr = np.empty(n, dtype=np.int64)
    oy_arr = np.empty(n, dtype=np.int64)
    ot_arr = np.empty(n, dtype=np.int64)
    off_arr = np.empty(n_traj + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] ox = ox_arr
    cdef cnp.int64_t[::1] oy = oy_arr
    cdef cnp.int64_t[::1] ot = ot_arr
    cdef cnp.int64_t[::1] off = off_arr
    cdef Py_ssize_t p = 0
    off[0] = 0
    for k in range(n_traj):
        lo = offsets[k]
        hi = offsets[k + 1]
        if hi > lo:
            cx = x[lo]; cy = y[lo]; ct = t[lo]
            ox[p] = cx; oy[p] = cy; ot[p] = ct
            p += 1
            for j in range(lo + 1, hi):
                nx = x[j]; ny = y[j]; nt = t[j]
                dx = nx - cx; dy = ny - cy; dt = nt - ct
                if dx == 0 and dy == 0 and dt == 0:
                    continue
                near = -1 <= dx <= 1 and -1 <= dy <= 1 and dt <= 1
                dwell = dx == 0 and dy == 0 and dt <= v
                if not (near or dwell):
                    while True:
                        cx += _sign(nx - cx)
                        cy += _sign(ny - cy)
                        ct += _sign(nt - ct)
                        if cx == nx and cy == ny and ct == nt:
                            break
                        ox[p] = cx; oy[p] = cy; ot[p] = ct
                        p += 1
                cx = nx; cy = ny; ct = nt
                ox[p] = cx; oy[p] = cy; ot[p] = ct
                p += 1
        off[k + 1] = p
    return ox_arr, oy_arr, ot_arr, off_arr


cdef inline Py_ssize_t _bisect_right(const double[::1] a, double u) noexcept nogil:
    cdef Py_ssize_t lo = 0, hi = a.shape[0], mid
    while lo < hi:
        mid = (lo + hi) // 2
        if u < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


def random_walk(const double[::1] start_cdf, const double[:, ::1] cdf,
                const cnp.uint8_t[::1] all_zero, const cnp.int64_t[::1] slot_delta,
                const double[:, ::1] uniforms):
    cdef Py_ssize_t n_walks = uniforms.shape[0]
    cdef Py_ssize_t max_len = uniforms.shape[1]
    cdef Py_ssize_t stop_slot = cdf.shape[1] - 1
    cdef Py_ssize_t last = start_cdf.shape[0] - 1
    cdef Py_ssize_t w, j, s, p = 0
    cdef cnp.int64_t cur
    cdef double uj

    out_arr = np.empty(n_walks * max_len, dtype=np.int64)
    off_arr = np.empty(n_walks + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_arr
    cdef cnp.int64_t[::1] off = off_arr
    off[0] = 0
    with nogil:
        for w in range(n_walks):
            cur = min(_bisect_right(start_cdf, uniforms[w, 0]), last)
            out[p] = cur
            p += 1
            for j in range(1, max_len):
                if all_zero[cur]:
                    break
                uj = uniforms[w, j]
                s = 0
                while s < stop_slot and not uj < cdf[cur, s]:
                    s += 1
                if s == stop_slot:
                    break
                cur += slot_delta[s]
                out[p] = cur
                p += 1
            off[w + 1] = p
    return out_arr[:p].copy(), off_arr


def concordance(a, b):
    cdef const double[::1] av = np.ascontiguousarray(a, dtype=np.float64)
    cdef const double[::1] bv = np.ascontiguousarray(b, dtype=np.float64)
    cdef Py_ssize_t n = av.shape[0], i, j
    cdef long long total = 0
    cdef double da, db
    with nogil:
        for i in range(n - 1):
            for j in range(i + 1, n):
                da = av[j] - av[i]
                db = bv[j] - bv[i]
                total += ((da > 0) - (da < 0)) * ((db > 0) - (db < 0))
    return int(total)
