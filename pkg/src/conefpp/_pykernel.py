"""Pure-Python search kernel.

Reference implementation of the edge-weight generator, region membership
tests and the best-first (Dijkstra) exploration engine.  The compiled
kernel in ``_kernel.pyx`` mirrors every arithmetic expression here in the
same evaluation order; the two backends are required to agree bit for bit
on all outputs, which the test suite checks.  Keep the twins in sync.

Encodings shared by both backends
---------------------------------

distribution ``(kind, a, b, nkind, na, nb)``::

    0 point mass       a=value
    1 exponential      a=rate
    2 uniform          a=lo, b=hi
    3 bernoulli-zero   a=p0, b=v1
    4 pareto tail      a=alpha, b=scale     (support [scale, inf))
    5 zero mixture     a=p0, nested continuous part in (nkind, na, nb)

weight mode ``(mode, t0, t1, rate)``::

    0 static                      weight stream index 0
    1 value at time t0
    2 lower envelope on [t0, t0+t1]   (weight at t0 if no ring, else 0)
    3 upper envelope on [t0, t0+t1]   (max weight over the window)

region ``(kind, params)`` with ``params`` a flat float tuple::

    0 full lattice     ()
    1 cone             (c, collar, u1..ud)        u = unit axis direction
    2 cylinder         (r, 0, u1..ud)
    3 capsule          (r, 0, x1..xd, y1..yd)
    4 half-space       (offset, 0, n1..nd)        n.x >= offset
    5 log wedge        (a,)                       d=2 only
"""

import heapq
import math

import numpy as np

MASK64 = (1 << 64) - 1
GOLD = 0x9E3779B97F4A7C15

# coordinate bounds: 2**30 for the collision-free edge id,
# 2**20 for the packed site key used by the search engine
EDGE_COORD_LIMIT = 1 << 30
KEY_COORD_LIMIT = 1 << 20
KEY_OFFSET = 1 << 20
KEY_BITS = 21

STREAM_WEIGHT = 0
STREAM_CLOCK = 1

STATUS_EXHAUSTED = 0
STATUS_TARGET = 1
STATUS_BOUND = 2
STATUS_CAP = 3

_INV_2_53 = 2.0 ** -53


def backend_name():
    return "pure-python"


def mix64(x):
    """64-bit finalizing mixer (splitmix-style avalanche)."""
    x &= MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(seed, k):
    """Stream-split a base seed; used for replica environments."""
    return mix64(mix64(seed ^ GOLD) ^ (k & MASK64))


def _edge_words(coords, axis):
    # interleaved signed-coordinate encoding of (base, axis), collision
    # free for |coordinate| < 2**30 and d <= 4
    acc = axis
    for c in coords:
        if not -EDGE_COORD_LIMIT < c < EDGE_COORD_LIMIT:
            raise OverflowError("edge coordinate out of the 2**30 id range")
        acc = (acc << 31) | (c + EDGE_COORD_LIMIT)
    return (acc >> 64) & MASK64, acc & MASK64


def u01(seed, coords, axis, stream, index):
    """Uniform [0,1) variate attached to (edge, stream, index)."""
    hi, lo = _edge_words(coords, axis)
    h = mix64(seed ^ GOLD)
    h = mix64(h ^ hi)
    h = mix64(h ^ lo)
    h = mix64(h ^ ((stream << 48) | index))
    return (h >> 11) * _INV_2_53


def quantile(dist, u):
    kind = dist[0]
    if kind == 0:
        return dist[1]
    if kind == 1:
        return -math.log1p(-u) / dist[1]
    if kind == 2:
        return dist[1] + (dist[2] - dist[1]) * u
    if kind == 3:
        return 0.0 if u < dist[1] else dist[2]
    if kind == 4:
        return dist[2] * math.pow(1.0 - u, -1.0 / dist[1])
    if kind == 5:
        if u < dist[1]:
            return 0.0
        return quantile((dist[3], dist[4], dist[5], 0, 0.0, 0.0),
                        (u - dist[1]) / (1.0 - dist[1]))
    raise ValueError(f"unknown distribution kind {kind}")


def _clock_window(seed, coords, axis, rate, t0, t1):
    """Count rings up to t0 and within (t0, t0+t1].

    Ring k arrives at the k-th partial sum of unit-rate exponentials
    drawn from the clock stream, divided by the rate.  Returns
    (j0, j1): weight indices in force at t0 and at t0+t1.
    """
    acc = 0.0
    j = 0
    j0 = -1
    end = t0 + t1
    while True:
        xi = -math.log1p(-u01(seed, coords, axis, STREAM_CLOCK, j + 1)) / rate
        acc += xi
        if j0 < 0 and acc > t0:
            j0 = j
        if acc > end:
            break
        j += 1
        if j > 10_000_000:
            raise RuntimeError("runaway clock walk; check rate and window")
    if j0 < 0:
        j0 = j
    return j0, j


def edge_weight(seed, coords, axis, dist, mode):
    m = mode[0]
    if m == 0:
        return quantile(dist, u01(seed, coords, axis, STREAM_WEIGHT, 0))
    rate = mode[3]
    if m == 1:
        j0, _ = _clock_window(seed, coords, axis, rate, mode[1], 0.0)
        return quantile(dist, u01(seed, coords, axis, STREAM_WEIGHT, j0))
    j0, j1 = _clock_window(seed, coords, axis, rate, mode[1], mode[2])
    if m == 2:
        if j1 > j0:
            return 0.0
        return quantile(dist, u01(seed, coords, axis, STREAM_WEIGHT, j0))
    if m == 3:
        best = 0.0
        for j in range(j0, j1 + 1):
            w = quantile(dist, u01(seed, coords, axis, STREAM_WEIGHT, j))
            if j == j0 or w > best:
                best = w
        return best
    raise ValueError(f"unknown weight mode {m}")


def ring_times(seed, coords, axis, rate, t0, t1):
    """Sorted resampling times of an edge inside (t0, t0+t1]."""
    acc = 0.0
    j = 0
    out = []
    end = t0 + t1
    while True:
        xi = -math.log1p(-u01(seed, coords, axis, STREAM_CLOCK, j + 1)) / rate
        acc += xi
        if acc > end:
            return out
        if acc > t0:
            out.append(acc)
        j += 1
        if j > 10_000_000:
            raise RuntimeError("runaway clock walk; check rate and window")


# margin for closed-ball membership resolved in floating point; sites
# within the margin are classified inside
MEMBER_EPS = 1e-9


def member(region, coords):
    kind = region[0]
    if kind == 0:
        return True
    f = region[1]
    d = len(coords)
    if kind == 1:
        c = f[0]
        collar = f[1]
        t = 0.0
        q2 = 0.0
        for i in range(d):
            x = float(coords[i])
            t += x * f[2 + i]
            q2 += x * x
        # feasibility of (1-c^2)a^2 - 2(t + c*collar)a + (|x|^2-collar^2) <= 0
        # over a >= 0
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
    if kind == 2:
        r = f[0]
        t = 0.0
        q2 = 0.0
        for i in range(d):
            x = float(coords[i])
            t += x * f[2 + i]
            q2 += x * x
        return q2 - t * t <= r * r + MEMBER_EPS
    if kind == 3:
        r = f[0]
        num = 0.0
        den = 0.0
        for i in range(d):
            px = f[2 + i]
            vx = f[2 + d + i] - px
            num += (float(coords[i]) - px) * vx
            den += vx * vx
        a = 0.0 if den == 0.0 else num / den
        if a < 0.0:
            a = 0.0
        elif a > 1.0:
            a = 1.0
        q2 = 0.0
        for i in range(d):
            px = f[2 + i]
            vx = f[2 + d + i] - px
            dx = float(coords[i]) - (px + a * vx)
            q2 += dx * dx
        return q2 <= r * r + MEMBER_EPS
    if kind == 4:
        s = 0.0
        for i in range(d):
            s += float(coords[i]) * f[2 + i]
        return s >= f[0] - MEMBER_EPS
    if kind == 5:
        x, y = coords
        if x < 0 or y < 0:
            return False
        return y <= f[0] * math.log1p(float(x)) + MEMBER_EPS
    raise ValueError(f"unknown region kind {kind}")


def pack_site(coords):
    """Order-preserving integer key; lexicographic on coordinates."""
    acc = 0
    for c in coords:
        if not -KEY_COORD_LIMIT < c < KEY_COORD_LIMIT:
            raise OverflowError("site coordinate out of the 2**20 key range")
        acc = (acc << KEY_BITS) | (c + KEY_OFFSET)
    return acc


def unpack_site(key, d):
    out = [0] * d
    for i in range(d - 1, -1, -1):
        out[i] = (key & ((1 << KEY_BITS) - 1)) - KEY_OFFSET
        key >>= KEY_BITS
    return tuple(out)


def explore(seed, d, region, dist, mode, sources, stop_kind, stop_val,
            bound, cap):
    """Best-first search over the induced subgraph.

    sources: iterable of coordinate tuples, all given cost 0.
    stop_kind: 0 none, 1 stop when the packed site ``stop_val`` settles,
    2 stop when any site with coordinate sum ``stop_val`` settles.
    bound: settle nothing with cost > bound.  cap: hard settle limit.

    Returns (status, sites, costs, parents, explored, frontier_min,
    target_idx) with sites in settle order, so costs are sorted and
    ties resolve by the packed key (lexicographic site order).
    """
    heap = []
    dist_map = {}
    parent_key = {}
    for s in sources:
        if not member(region, s):
            continue
        k = pack_site(s)
        if k not in dist_map:
            dist_map[k] = 0.0
            heapq.heappush(heap, (0.0, k))

    settled_idx = {}
    out_keys = []
    out_costs = []
    out_parents = []
    status = STATUS_EXHAUSTED
    frontier_min = math.inf
    target_idx = -1

    while heap:
        cost, key = heapq.heappop(heap)
        if key in settled_idx:
            continue
        if cost > bound:
            status = STATUS_BOUND
            frontier_min = cost
            break
        if len(out_keys) >= cap:
            status = STATUS_CAP
            frontier_min = cost
            break
        idx = len(out_keys)
        settled_idx[key] = idx
        out_keys.append(key)
        out_costs.append(cost)
        pk = parent_key.get(key)
        out_parents.append(-1 if pk is None else settled_idx[pk])
        site = unpack_site(key, d)
        if stop_kind == 1 and key == stop_val:
            status = STATUS_TARGET
            frontier_min = cost
            target_idx = idx
            break
        if stop_kind == 2 and sum(site) == stop_val:
            status = STATUS_TARGET
            frontier_min = cost
            target_idx = idx
            break
        for axis in range(d):
            for sgn in (-1, 1):
                nb = list(site)
                nb[axis] += sgn
                nb = tuple(nb)
                if not member(region, nb):
                    continue
                base = site if sgn > 0 else nb
                w = edge_weight(seed, base, axis, dist, mode)
                t = cost + w
                k2 = pack_site(nb)
                if k2 in settled_idx:
                    continue
                old = dist_map.get(k2)
                if old is None or t < old:
                    dist_map[k2] = t
                    parent_key[k2] = key
                    heapq.heappush(heap, (t, k2))

    m = len(out_keys)
    sites = np.empty((m, d), dtype=np.int64)
    for i, k in enumerate(out_keys):
        sites[i] = unpack_site(k, d)
    costs = np.asarray(out_costs, dtype=np.float64)
    parents = np.asarray(out_parents, dtype=np.int32)
    return status, sites, costs, parents, m, frontier_min, target_idx
