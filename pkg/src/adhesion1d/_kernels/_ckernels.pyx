# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_pykernels``. Same arguments, same
floating-point operation order, same results."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()

ctypedef cnp.int64_t i64


def pava(const double[::1] widths, const double[::1] values):
    cdef Py_ssize_t n = values.shape[0]
    sums_a = np.empty(n, dtype=np.float64)
    wts_a = np.empty(n, dtype=np.float64)
    ends_a = np.empty(n, dtype=np.int64)
    means_a = np.empty(n, dtype=np.float64)
    cdef double[::1] sums = sums_a
    cdef double[::1] wts = wts_a
    cdef i64[::1] ends = ends_a
    cdef double[::1] means = means_a
    cdef Py_ssize_t i, k = -1
    cdef double w, s
    for i in range(n):
        w = widths[i]
        s = w * values[i]
        k += 1
        sums[k] = s
        wts[k] = w
        ends[k] = i + 1
        means[k] = s / w
        while k > 0 and means[k - 1] > means[k]:
            sums[k - 1] += sums[k]
            wts[k - 1] += wts[k]
            ends[k - 1] = ends[k]
            means[k - 1] = sums[k - 1] / wts[k - 1]
            k -= 1
    return ends_a[:k + 1].copy(), means_a[:k + 1].copy()


def lower_hull(const double[::1] x, const double[::1] y):
    cdef Py_ssize_t n = x.shape[0]
    hull_a = np.empty(n, dtype=np.int64)
    cdef i64[::1] hull = hull_a
    cdef Py_ssize_t i, top = 0
    cdef i64 a, b
    cdef double cross
    for i in range(n):
        while top >= 2:
            a = hull[top - 2]
            b = hull[top - 1]
            cross = (x[b] - x[a]) * (y[i] - y[a]) - (y[b] - y[a]) * (x[i] - x[a])
            if cross <= 0.0:
                top -= 1
            else:
                break
        hull[top] = i
        top += 1
    return hull_a[:top].copy()


# --- binary min-heap keyed by (time, left slot) --------------------------

cdef struct Entry:
    double t
    i64 l
    i64 r
    i64 vl
    i64 vr


cdef inline bint _less(Entry* a, Entry* b) noexcept nogil:
    return a.t < b.t or (a.t == b.t and a.l < b.l)


cdef inline void _push(Entry* h, Py_ssize_t* size, Entry e) noexcept nogil:
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    size[0] += 1
    h[i] = e
    while i > 0:
        parent = (i - 1) >> 1
        if _less(&h[i], &h[parent]):
            h[i], h[parent] = h[parent], h[i]
            i = parent
        else:
            break


cdef inline Entry _pop(Entry* h, Py_ssize_t* size) noexcept nogil:
    cdef Entry top = h[0]
    cdef Py_ssize_t n, i, c, smallest
    size[0] -= 1
    n = size[0]
    if n > 0:
        h[0] = h[n]
        i = 0
        while True:
            c = 2 * i + 1
            if c >= n:
                break
            smallest = c
            if c + 1 < n and _less(&h[c + 1], &h[c]):
                smallest = c + 1
            if _less(&h[smallest], &h[i]):
                h[i], h[smallest] = h[smallest], h[i]
                i = smallest
            else:
                break
    return top


cdef inline void _heapify(Entry* h, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t start, i, c, smallest
    start = n // 2 - 1
    while start >= 0:
        i = start
        while True:
            c = 2 * i + 1
            if c >= n:
                break
            smallest = c
            if c + 1 < n and _less(&h[c + 1], &h[c]):
                smallest = c + 1
            if _less(&h[smallest], &h[i]):
                h[i], h[smallest] = h[smallest], h[i]
                i = smallest
            else:
                break
        start -= 1


cdef inline bint _collide(double[::1] M, double[::1] P, double[::1] Q, i64 l,
                          i64 r, double t_now, double* out) noexcept nogil:
    cdef double vl = Q[l] / M[l]
    cdef double vr = Q[r] / M[r]
    cdef double t
    if not vl > vr:
        return False
    t = (P[r] / M[r] - P[l] / M[l]) / (vl - vr)
    out[0] = t if t > t_now else t_now
    return True


cdef inline bint _valid(Entry* e, cnp.int8_t[::1] alive, i64[::1] nxt,
                        i64[::1] version) noexcept nogil:
    return (alive[e.l] != 0 and alive[e.r] != 0 and nxt[e.l] == e.r
            and version[e.l] == e.vl and version[e.r] == e.vr)


def sps_evolve(double[::1] M, double[::1] P, double[::1] Q, i64[::1] nxt,
               i64[::1] prv, i64[::1] last, i64[::1] first, cnp.int8_t[::1] alive,
               i64[::1] version, double t_now, double t_target, double rel_tol,
               double[::1] ev_time, i64[::1] ev_first, i64[::1] ev_last,
               double[::1] ev_post, i64[::1] ev_pre_ptr,
               double[::1] ev_pre_vals, double[::1] ev_pre_mass,
               Py_ssize_t n_ev, Py_ssize_t n_pre):
    cdef Py_ssize_t n = M.shape[0]
    # every merge pushes at most two entries
    cdef Py_ssize_t cap = 3 * n + 4
    heap_a = np.empty(cap * sizeof(Entry), dtype=np.uint8)
    lefts_a = np.empty(n + 1, dtype=np.int64)
    cdef unsigned char[::1] heap_buf = heap_a
    cdef Entry* heap = <Entry*> &heap_buf[0]
    cdef i64[::1] lefts = lefts_a
    cdef Py_ssize_t size = 0, nl, i
    cdef i64 s, r, c, end, after, left
    cdef double t, t_ev, window, stop, mass, pint, mom
    cdef Entry e, e2

    s = 0
    while s < n and not alive[s]:
        s += 1
    if s >= n:
        s = -1
    while s >= 0 and nxt[s] >= 0:
        r = nxt[s]
        if _collide(M, P, Q, s, r, t_now, &t):
            e.t = t; e.l = s; e.r = r; e.vl = version[s]; e.vr = version[r]
            heap[size] = e
            size += 1
        s = r
    _heapify(heap, size)

    stop = t_target + rel_tol * (fabs(t_target) if fabs(t_target) > 1.0 else 1.0)
    while size > 0:
        e = _pop(heap, &size)
        if not _valid(&e, alive, nxt, version):
            continue
        t_ev = e.t
        if t_ev > stop:
            break
        window = t_ev + rel_tol * (fabs(t_ev) if fabs(t_ev) > 1.0 else 1.0)
        nl = 0
        lefts[nl] = e.l
        nl += 1
        while size > 0 and heap[0].t <= window:
            e2 = _pop(heap, &size)
            if _valid(&e2, alive, nxt, version):
                lefts[nl] = e2.l
                nl += 1
        if nl > 1:
            lefts_a[:nl].sort()
        i = 0
        while i < nl:
            s = lefts[i]
            end = nxt[s]
            while i + 1 < nl and lefts[i + 1] == end:
                i += 1
                end = nxt[end]
            ev_pre_ptr[n_ev] = n_pre
            c = s
            mass = 0.0
            pint = 0.0
            mom = 0.0
            while True:
                ev_pre_vals[n_pre] = Q[c] / M[c]
                ev_pre_mass[n_pre] = M[c]
                n_pre += 1
                mass += M[c]
                pint += P[c]
                mom += Q[c]
                if c != s:
                    alive[c] = 0
                if c == end:
                    break
                c = nxt[c]
            M[s] = mass
            P[s] = pint
            Q[s] = mom
            last[s] = last[end]
            after = nxt[end]
            nxt[s] = after
            if after >= 0:
                prv[after] = s
            version[s] += 1
            ev_time[n_ev] = t_ev
            ev_first[n_ev] = first[s]
            ev_last[n_ev] = last[s]
            ev_post[n_ev] = mom / mass
            n_ev += 1
            ev_pre_ptr[n_ev] = n_pre
            left = prv[s]
            if left >= 0 and _collide(M, P, Q, left, s, t_ev, &t):
                e2.t = t; e2.l = left; e2.r = s
                e2.vl = version[left]; e2.vr = version[s]
                _push(heap, &size, e2)
            if after >= 0 and _collide(M, P, Q, s, after, t_ev, &t):
                e2.t = t; e2.l = s; e2.r = after
                e2.vl = version[s]; e2.vr = version[after]
                _push(heap, &size, e2)
            i += 1
    return n_ev, n_pre
