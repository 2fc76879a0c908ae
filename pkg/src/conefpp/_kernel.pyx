# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled search kernel.

Mirror of ``_pykernel.py``: every floating-point expression is written
in the same evaluation order so the two backends agree bit for bit
(the build disables FMA contraction for the same reason).  Supports
d <= 3; the facade falls back to the pure backend beyond that.
"""

import math

import numpy as np

from libc.math cimport INFINITY, log1p, pow
from libcpp.pair cimport pair
from libcpp.queue cimport priority_queue
from libcpp.unordered_map cimport unordered_map
from libcpp.vector cimport vector

ctypedef unsigned long long u64
ctypedef long long i64
ctypedef pair[double, i64] entry

cdef u64 GOLD = 0x9E3779B97F4A7C15ULL
cdef i64 EDGE_COORD_LIMIT = 1LL << 30
cdef i64 KEY_COORD_LIMIT = 1LL << 20
cdef i64 KEY_OFFSET = 1LL << 20
cdef int KEY_BITS = 21
cdef double INV_2_53 = 2.0 ** -53
cdef double MEMBER_EPS = 1e-9

STATUS_EXHAUSTED = 0
STATUS_TARGET = 1
STATUS_BOUND = 2
STATUS_CAP = 3


cdef inline u64 _mix64(u64 x) nogil:
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL
    return x ^ (x >> 31)


cdef inline double _u01(u64 seed, i64 *coords, int d, int axis,
                        int stream, i64 index) nogil:
    # 128-bit edge id (hi, lo) built by 31-bit shifts, then mixed
    cdef u64 hi = 0
    cdef u64 lo = <u64> axis
    cdef int i
    for i in range(d):
        hi = (hi << 31) | (lo >> 33)
        lo = (lo << 31) | (<u64> (coords[i] + EDGE_COORD_LIMIT))
    cdef u64 h = _mix64(seed ^ GOLD)
    h = _mix64(h ^ hi)
    h = _mix64(h ^ lo)
    h = _mix64(h ^ (((<u64> stream) << 48) | (<u64> index)))
    return (h >> 11) * INV_2_53


cdef struct DistSpec:
    int kind
    double a
    double b
    int nkind
    double na
    double nb


cdef struct ModeSpec:
    int mode
    double t0
    double t1
    double rate


cdef struct RegionSpec:
    int kind
    int d
    double f[16]


cdef inline double _quantile_basic(int kind, double a, double b,
                                   double u) nogil:
    if kind == 0:
        return a
    if kind == 1:
        return -log1p(-u) / a
    if kind == 2:
        return a + (b - a) * u
    if kind == 3:
        return 0.0 if u < a else b
    # kind == 4: pareto tail
    return b * pow(1.0 - u, -1.0 / a)


cdef inline double _quantile(DistSpec *ds, double u) nogil:
    if ds.kind == 5:
        if u < ds.a:
            return 0.0
        return _quantile_basic(ds.nkind, ds.na, ds.nb,
                               (u - ds.a) / (1.0 - ds.a))
    return _quantile_basic(ds.kind, ds.a, ds.b, u)


cdef inline int _clock_window(u64 seed, i64 *coords, int d, int axis,
                              double rate, double t0, double t1,
                              i64 *j0_out, i64 *j1_out) nogil:
    cdef double acc = 0.0
    cdef double end = t0 + t1
    cdef i64 j = 0
    cdef i64 j0 = -1
    cdef double xi
    while True:
        xi = -log1p(-_u01(seed, coords, d, axis, 1, j + 1)) / rate
        acc += xi
        if j0 < 0 and acc > t0:
            j0 = j
        if acc > end:
            break
        j += 1
        if j > 10000000:
            return 1
    if j0 < 0:
        j0 = j
    j0_out[0] = j0
    j1_out[0] = j
    return 0


cdef inline double _edge_weight(u64 seed, i64 *coords, int d, int axis,
                                DistSpec *ds, ModeSpec *ms,
                                int *err) nogil:
    cdef i64 j0 = 0, j1 = 0, j
    cdef double w, best
    if ms.mode == 0:
        return _quantile(ds, _u01(seed, coords, d, axis, 0, 0))
    if ms.mode == 1:
        if _clock_window(seed, coords, d, axis, ms.rate, ms.t0, 0.0,
                         &j0, &j1):
            err[0] = 2
            return 0.0
        return _quantile(ds, _u01(seed, coords, d, axis, 0, j0))
    if _clock_window(seed, coords, d, axis, ms.rate, ms.t0, ms.t1,
                     &j0, &j1):
        err[0] = 2
        return 0.0
    if ms.mode == 2:
        if j1 > j0:
            return 0.0
        return _quantile(ds, _u01(seed, coords, d, axis, 0, j0))
    best = 0.0
    for j in range(j0, j1 + 1):
        w = _quantile(ds, _u01(seed, coords, d, axis, 0, j))
        if j == j0 or w > best:
            best = w
    return best


cdef inline bint _member(RegionSpec *rs, i64 *coords) nogil:
    cdef int d = rs.d
    cdef int i
    cdef double t, q2, x, cc, aa, bb, c, collar, r, num, den, a, px, vx, dx, s
    if rs.kind == 0:
        return True
    if rs.kind == 1:
        c = rs.f[0]
        collar = rs.f[1]
        t = 0.0
        q2 = 0.0
        for i in range(d):
            x = <double> coords[i]
            t += x * rs.f[2 + i]
            q2 += x * x
        cc = q2 - collar * collar
        if cc <= MEMBER_EPS:
            return True
        aa = 1.0 - c * c
        bb = -2.0 * (t + c * collar)
        if aa < 0.0:
            return True
        if aa == 0.0:
            return bb < 0.0
        if bb >= 0.0:
            return False
        return bb * bb - 4.0 * aa * cc >= -MEMBER_EPS
    if rs.kind == 2:
        r = rs.f[0]
        t = 0.0
        q2 = 0.0
        for i in range(d):
            x = <double> coords[i]
            t += x * rs.f[2 + i]
            q2 += x * x
        return q2 - t * t <= r * r + MEMBER_EPS
    if rs.kind == 3:
        r = rs.f[0]
        num = 0.0
        den = 0.0
        for i in range(d):
            px = rs.f[2 + i]
            vx = rs.f[2 + d + i] - px
            num += ((<double> coords[i]) - px) * vx
            den += vx * vx
        a = 0.0 if den == 0.0 else num / den
        if a < 0.0:
            a = 0.0
        elif a > 1.0:
            a = 1.0
        q2 = 0.0
        for i in range(d):
            px = rs.f[2 + i]
            vx = rs.f[2 + d + i] - px
            dx = (<double> coords[i]) - (px + a * vx)
            q2 += dx * dx
        return q2 <= r * r + MEMBER_EPS
    if rs.kind == 4:
        s = 0.0
        for i in range(d):
            s += (<double> coords[i]) * rs.f[2 + i]
        return s >= rs.f[0] - MEMBER_EPS
    # kind == 5: log wedge, d = 2
    if coords[0] < 0 or coords[1] < 0:
        return False
    return (<double> coords[1]) <= rs.f[0] * log1p(<double> coords[0]) \
        + MEMBER_EPS


cdef inline i64 _pack(i64 *coords, int d) nogil:
    cdef i64 acc = 0
    cdef int i
    for i in range(d):
        acc = (acc << KEY_BITS) | (coords[i] + KEY_OFFSET)
    return acc


cdef inline void _unpack(i64 key, int d, i64 *out) nogil:
    cdef int i
    for i in range(d - 1, -1, -1):
        out[i] = (key & ((1LL << KEY_BITS) - 1)) - KEY_OFFSET
        key >>= KEY_BITS


cdef int _fill_region(RegionSpec *rs, object region, int d) except -1:
    cdef tuple f = region[1]
    cdef int i
    rs.kind = region[0]
    rs.d = d
    if len(f) > 16:
        raise ValueError("region parameter block too large")
    for i in range(len(f)):
        rs.f[i] = f[i]
    return 0


def backend_name():
    return "compiled"


def u01_scalar(seed, coords, axis, stream, index):
    cdef i64 buf[4]
    cdef int d = len(coords)
    cdef int i
    if d > 4:
        raise ValueError("compiled kernel supports d <= 4 for edge ids")
    for i in range(d):
        if not -EDGE_COORD_LIMIT < coords[i] < EDGE_COORD_LIMIT:
            raise OverflowError("edge coordinate out of the 2**30 id range")
        buf[i] = coords[i]
    return _u01(<u64> (seed & 0xFFFFFFFFFFFFFFFF), buf, d, axis,
                stream, index)


def edge_weight(seed, coords, axis, dist, mode):
    cdef i64 buf[4]
    cdef int d = len(coords)
    cdef int i
    cdef int err = 0
    cdef DistSpec ds
    cdef ModeSpec ms
    if d > 4:
        raise ValueError("compiled kernel supports d <= 4 for edge ids")
    for i in range(d):
        if not -EDGE_COORD_LIMIT < coords[i] < EDGE_COORD_LIMIT:
            raise OverflowError("edge coordinate out of the 2**30 id range")
        buf[i] = coords[i]
    ds.kind, ds.a, ds.b, ds.nkind, ds.na, ds.nb = dist
    ms.mode, ms.t0, ms.t1, ms.rate = mode
    w = _edge_weight(<u64> (seed & 0xFFFFFFFFFFFFFFFF), buf, d, axis,
                     &ds, &ms, &err)
    if err:
        raise RuntimeError("runaway clock walk; check rate and window")
    return w


def ring_times(seed, coords, axis, rate, t0, t1):
    cdef i64 buf[4]
    cdef int d = len(coords)
    cdef int i
    cdef u64 s = <u64> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef double acc = 0.0
    cdef double end = t0 + t1
    cdef double xi
    cdef i64 j = 0
    for i in range(d):
        buf[i] = coords[i]
    out = []
    while True:
        xi = -log1p(-_u01(s, buf, d, axis, 1, j + 1)) / rate
        acc += xi
        if acc > end:
            return out
        if acc > t0:
            out.append(acc)
        j += 1
        if j > 10000000:
            raise RuntimeError("runaway clock walk; check rate and window")


def member(region, coords):
    cdef RegionSpec rs
    cdef i64 buf[4]
    cdef int d = len(coords)
    cdef int i
    if d > 4:
        raise ValueError("compiled kernel supports d <= 4")
    _fill_region(&rs, region, d)
    for i in range(d):
        buf[i] = coords[i]
    return bool(_member(&rs, buf))


def explore(seed, d, region, dist, mode, sources, stop_kind, stop_val,
            bound, cap):
    """See ``_pykernel.explore``; identical contract and outputs."""
    cdef int dd = d
    if dd < 1 or dd > 3:
        raise ValueError("compiled kernel supports 1 <= d <= 3")
    cdef RegionSpec rs
    cdef DistSpec ds
    cdef ModeSpec ms
    _fill_region(&rs, region, dd)
    ds.kind, ds.a, ds.b, ds.nkind, ds.na, ds.nb = dist
    ms.mode, ms.t0, ms.t1, ms.rate = mode

    cdef u64 sd = <u64> (seed & 0xFFFFFFFFFFFFFFFF)
    cdef double bnd = bound
    cdef i64 capn = cap
    cdef int stopk = stop_kind
    cdef i64 stopv = stop_val if stop_val is not None else 0

    cdef priority_queue[entry] heap
    cdef unordered_map[i64, double] dist_map
    cdef unordered_map[i64, i64] parent_key
    cdef unordered_map[i64, i64] settled
    cdef vector[i64] out_keys
    cdef vector[double] out_costs
    cdef vector[i64] out_parents

    cdef i64 site[4]
    cdef i64 nb[4]
    cdef i64 key, k2, pk, csum, idx
    cdef int i, axis, sgn_ix
    cdef i64 sgn
    cdef double cost, w, t
    cdef int status = 0
    cdef double frontier_min = INFINITY
    cdef i64 target_idx = -1
    cdef int err = 0

    for src in sources:
        for i in range(dd):
            site[i] = src[i]
        if not _member(&rs, site):
            continue
        for i in range(dd):
            if not (-KEY_COORD_LIMIT < site[i] < KEY_COORD_LIMIT):
                raise OverflowError(
                    "site coordinate out of the 2**20 key range")
        key = _pack(site, dd)
        if dist_map.count(key) == 0:
            dist_map[key] = 0.0
            heap.push(entry(-0.0, -key))

    # the C++ priority queue is a max-heap: negate costs on push so pop
    # order matches the Python min-heap, tie-broken by the packed key
    cdef entry top
    with nogil:
        while heap.size() > 0:
            top = heap.top()
            heap.pop()
            cost = -top.first
            key = -top.second
            if settled.count(key) > 0:
                continue
            if cost > bnd:
                status = 2
                frontier_min = cost
                break
            if <i64> out_keys.size() >= capn:
                status = 3
                frontier_min = cost
                break
            idx = <i64> out_keys.size()
            settled[key] = idx
            out_keys.push_back(key)
            out_costs.push_back(cost)
            if parent_key.count(key) > 0:
                pk = parent_key[key]
                out_parents.push_back(settled[pk])
            else:
                out_parents.push_back(-1)
            _unpack(key, dd, site)
            if stopk == 1 and key == stopv:
                status = 1
                frontier_min = cost
                target_idx = idx
                break
            if stopk == 2:
                csum = 0
                for i in range(dd):
                    csum += site[i]
                if csum == stopv:
                    status = 1
                    frontier_min = cost
                    target_idx = idx
                    break
            for axis in range(dd):
                for sgn_ix in range(2):
                    sgn = -1 if sgn_ix == 0 else 1
                    for i in range(dd):
                        nb[i] = site[i]
                    nb[axis] += sgn
                    if not _member(&rs, nb):
                        continue
                    if sgn > 0:
                        w = _edge_weight(sd, site, dd, axis, &ds, &ms, &err)
                    else:
                        w = _edge_weight(sd, nb, dd, axis, &ds, &ms, &err)
                    if err:
                        break
                    t = cost + w
                    for i in range(dd):
                        if not (-KEY_COORD_LIMIT < nb[i] < KEY_COORD_LIMIT):
                            err = 1
                            break
                    if err:
                        break
                    k2 = _pack(nb, dd)
                    if settled.count(k2) > 0:
                        continue
                    if dist_map.count(k2) == 0 or t < dist_map[k2]:
                        dist_map[k2] = t
                        parent_key[k2] = key
                        heap.push(entry(-t, -k2))
                if err:
                    break
            if err:
                break

    if err == 1:
        raise OverflowError("site coordinate out of the 2**20 key range")
    if err == 2:
        raise RuntimeError("runaway clock walk; check rate and window")

    cdef i64 m = <i64> out_keys.size()
    sites_arr = np.empty((m, dd), dtype=np.int64)
    costs_arr = np.empty(m, dtype=np.float64)
    parents_arr = np.empty(m, dtype=np.int32)
    cdef i64[:, ::1] sv = sites_arr
    cdef double[::1] cv = costs_arr
    cdef int[::1] pv = parents_arr
    for idx in range(m):
        _unpack(out_keys[<size_t> idx], dd, site)
        for i in range(dd):
            sv[idx, i] = site[i]
        cv[idx] = out_costs[<size_t> idx]
        pv[idx] = <int> out_parents[<size_t> idx]
    return (status, sites_arr, costs_arr, parents_arr, int(m),
            frontier_min, int(target_idx))
