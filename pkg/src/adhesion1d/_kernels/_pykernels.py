"""Pure-Python kernels. Reference semantics for the compiled twin in
``_ckernels.pyx``; both must return bit-identical results."""

import heapq

import numpy as np


def pava(widths, values):
    """Weighted pool-adjacent-violators.

    Returns ``(ends, means)``: pool ``k`` covers cells ``ends[k-1]:ends[k]``
    and carries the width-weighted mean ``means[k]``. Pools are merged while
    the left mean is strictly larger than the right one.
    """
    n = len(values)
    sums = [0.0] * n
    wts = [0.0] * n
    ends = [0] * n
    means = [0.0] * n
    k = -1
    for i in range(n):
        w = float(widths[i])
        s = w * float(values[i])
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
    return (np.asarray(ends[:k + 1], dtype=np.int64),
            np.asarray(means[:k + 1], dtype=np.float64))


def lower_hull(x, y):
    """Indices of the lower convex hull of points sorted by strictly
    increasing ``x`` (monotone chain, collinear points dropped)."""
    n = len(x)
    hull = []
    for i in range(n):
        xi = float(x[i])
        yi = float(y[i])
        while len(hull) >= 2:
            a = hull[-2]
            b = hull[-1]
            cross = (x[b] - x[a]) * (yi - y[a]) - (y[b] - y[a]) * (xi - x[a])
            if cross <= 0.0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=np.int64)


def _collision_time(M, P, Q, l, r, t_now):
    vl = Q[l] / M[l]
    vr = Q[r] / M[r]
    if not vl > vr:
        return None
    t = (P[r] / M[r] - P[l] / M[l]) / (vl - vr)
    return t if t > t_now else t_now


def sps_evolve(M, P, Q, nxt, prv, last, first, alive, version, t_now, t_target,
               rel_tol, ev_time, ev_first, ev_last, ev_post, ev_pre_ptr,
               ev_pre_vals, ev_pre_mass, n_ev, n_pre):
    """Advance a sticky-particle cluster list from ``t_now`` to ``t_target``.

    Cluster ``s`` has mass ``M[s]``, mass-weighted initial intercept ``P[s]``
    and momentum ``Q[s]``; its position at time ``t`` is ``(P + t Q) / M``.
    Clusters form a doubly linked list through ``nxt``/``prv`` (-1 ends).
    Arrays are mutated in place; the event log is appended from ``n_ev``
    and ``n_pre``. Returns the new ``(n_ev, n_pre)``.
    """
    heap = []
    s = 0
    while s >= 0 and not alive[s]:
        s += 1
        if s >= len(alive):
            s = -1
    while s >= 0 and nxt[s] >= 0:
        r = nxt[s]
        t = _collision_time(M, P, Q, s, r, t_now)
        if t is not None:
            heap.append((t, s, r, version[s], version[r]))
        s = r
    heapq.heapify(heap)

    def valid(entry):
        _, l, r, vl, vr = entry
        return (alive[l] and alive[r] and nxt[l] == r
                and version[l] == vl and version[r] == vr)

    stop = t_target + rel_tol * max(1.0, abs(t_target))
    while heap:
        entry = heapq.heappop(heap)
        if not valid(entry):
            continue
        t_ev = entry[0]
        if t_ev > stop:
            break
        window = t_ev + rel_tol * max(1.0, abs(t_ev))
        lefts = [entry[1]]
        while heap and heap[0][0] <= window:
            e2 = heapq.heappop(heap)
            if valid(e2):
                lefts.append(e2[1])
        lefts.sort()
        i = 0
        nl = len(lefts)
        while i < nl:
            s = lefts[i]
            end = nxt[s]
            while i + 1 < nl and lefts[i + 1] == end:
                i += 1
                end = nxt[end]
            # merge the chain s .. end into slot s
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
            if left >= 0:
                t = _collision_time(M, P, Q, left, s, t_ev)
                if t is not None:
                    heapq.heappush(heap, (t, left, s, version[left], version[s]))
            if after >= 0:
                t = _collision_time(M, P, Q, s, after, t_ev)
                if t is not None:
                    heapq.heappush(heap, (t, s, after, version[s], version[after]))
            i += 1
    return n_ev, n_pre
