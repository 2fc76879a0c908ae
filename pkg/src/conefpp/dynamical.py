"""Dynamical environments: exact travel-time trajectories on a window.

Each edge carries an independent Poisson clock; at every ring the
weight is redrawn from the same law.  The map s -> T^(s)(src, dst) is
then piecewise constant, and on a bounded window it can only change at
ring times of edges inside a certified box, so the whole trajectory is
computed exactly rather than sampled on a grid.

Certification works per sub-window: with the lower-envelope field
(zero on any edge whose clock rings inside the sub-window) every
vertex v on an s-optimal path satisfies

    bar(src, v) + bar(v, dst) <= hat-cost(src, dst)

because bar-distances lower-bound each snapshot metric while the
hat-cost upper-bounds every snapshot optimum.  Edges with both
endpoints in that box are the only candidates for breakpoints.  The
sub-window length is chosen so the density of bar-zero edges stays
below the bond percolation threshold, which keeps the box finite.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass, field as dc_field

from . import estimators, geometry, kernel, metric, randomness
from ._pykernel import STREAM_WEIGHT, quantile
from .errors import BudgetExceeded
from .kernel import u01
from .metric import DEFAULT_CAP
from .randomness import derive_seed, mode_at, mode_lower, mode_upper

# bond percolation thresholds (d=3 numeric); the generic fallback is
# the standard 1/(2d-1) lower bound
_BOND_PC = {2: 0.5, 3: 0.2488}
# keep the bar-zero density at this fraction of the threshold
_ZERO_TARGET = 0.35


def _percolation_threshold(d):
    return _BOND_PC.get(d, 1.0 / (2 * d - 1))


def subcritical_window(d, rate, zero_mass=0.0):
    """Longest sub-window keeping bar-zero edges safely subcritical.

    An edge is bar-zero when it rings inside the sub-window or starts
    at zero, so the zero density is 1 - (1-p0) exp(-rate*delta).
    """
    target = _ZERO_TARGET * _percolation_threshold(d)
    if zero_mass >= target:
        raise ValueError(
            f"zero atom {zero_mass:.3f} leaves no subcritical envelope "
            f"window in d={d} (needs < {target:.3f})")
    return -math.log((1.0 - target) / (1.0 - zero_mass)) / rate


class DynamicalEnvironment:
    """Poisson-clock edge resampling over the horizon [0, S]."""

    def __init__(self, seed, dist, horizon=1.0, rate=1.0):
        if horizon < 0:
            raise ValueError("horizon must be non-negative")
        if rate <= 0:
            raise ValueError("clock rate must be positive")
        self.field = randomness.WeightField(seed, dist, clock_rate=rate)
        self.dist = dist
        self.seed = self.field.seed
        self.horizon = float(horizon)
        self.rate = float(rate)

    def _require_window(self, a, b):
        if not (0.0 <= a <= b <= self.horizon + 1e-12):
            raise ValueError(
                f"window [{a}, {b}] is not inside [0, {self.horizon}]")


def travel_time_at(dyn, region, src, dst, s, cap=DEFAULT_CAP):
    """Travel time in the snapshot environment at clock time s.

    Marginally this is distributed exactly like the static travel
    time; only the joint law across times differs.
    """
    dyn._require_window(s, s)
    return metric.travel_time(region, dyn.field, src, dst, cap=cap,
                              mode=mode_at(s, dyn.rate))


def envelope_travel_times(dyn, region, src, dst, delta, cap=DEFAULT_CAP,
                          start=0.0):
    """Lower/upper envelope costs over the window [start, start+delta].

    The lower field zeroes every edge that rings inside the window, so
    long windows can percolate and exhaust the cap; that surfaces as
    BudgetExceeded rather than a wrong number.
    """
    if delta < 0:
        raise ValueError("delta must be non-negative")
    dyn._require_window(start, start + delta)
    bar = metric.travel_time(region, dyn.field, src, dst, cap=cap,
                             mode=mode_lower(start, delta, dyn.rate))
    hat = metric.travel_time(region, dyn.field, src, dst, cap=cap,
                             mode=mode_upper(start, delta, dyn.rate))
    return bar.cost, hat.cost


def subwindow_envelopes(dyn, region, src, dst, window, delta,
                        cap=DEFAULT_CAP):
    """Envelope brackets on a delta-cover of the window.

    Cross-check helper: each returned (t0, t1, bar, hat) must bracket
    the exact trajectory values on [t0, t1].
    """
    a, b = float(window[0]), float(window[1])
    dyn._require_window(a, b)
    pieces = max(1, math.ceil((b - a) / delta)) if b > a else 1
    out = []
    for i in range(pieces):
        t0 = a + (b - a) * i / pieces
        t1 = a + (b - a) * (i + 1) / pieces
        bar, hat = envelope_travel_times(dyn, region, src, dst, t1 - t0,
                                         cap=cap, start=t0)
        out.append((t0, t1, bar, hat))
    return out


@dataclass
class TravelTimeTrajectory:
    """Piecewise-constant, right-continuous travel-time evolution.

    ``values`` has one entry per segment: values[0] holds on
    [window[0], breakpoints[0]) and values[i+1] from breakpoints[i] on.
    Breakpoints are every ring time of a certified-box edge, including
    rings that leave the optimum unchanged, so ``events`` counts clock
    activity rather than value changes.
    """

    src: tuple
    site: tuple
    window: tuple
    breakpoints: list
    values: list
    sup: float
    inf: float
    events: int
    recomputes: int = 0
    box_edges: list = dc_field(default_factory=list)

    def value_at(self, s):
        a, b = self.window
        if not (a <= s <= b + 1e-12):
            raise ValueError(f"{s} outside window [{a}, {b}]")
        return self.values[bisect_right(self.breakpoints, s)]

    def to_csv(self):
        lines = ["time,cost"]
        lines.append(f"{self.window[0]!r},{self.values[0]!r}")
        for t, v in zip(self.breakpoints, self.values[1:]):
            lines.append(f"{t!r},{v!r}")
        return "\n".join(lines) + "\n"

    def to_json(self):
        return {
            "src": list(self.src),
            "site": list(self.site),
            "window": list(self.window),
            "breakpoints": list(self.breakpoints),
            "values": list(self.values),
            "sup": self.sup,
            "inf": self.inf,
            "events": self.events,
            "recomputes": self.recomputes,
            "box_edges": list(self.box_edges),
        }


def _bounded_distance_map(region, fld, root, bound, mode, cap, label):
    status, sites, costs, parents, m, frontier, tidx = kernel.explore(
        fld.seed, len(root), region.encode(), fld.dist.encode(), mode,
        [tuple(root)], stop_kind=0, stop_val=None, bound=bound, cap=cap)
    if status == kernel.STATUS_CAP:
        raise BudgetExceeded(
            float(frontier), m,
            f"box certification failed: {label} envelope run hit the "
            f"site cap (window too long for this law?)")
    out = {}
    for row, c in zip(sites.tolist(), costs.tolist()):
        out[tuple(row)] = c
    return out


def _path_edge_keys(path):
    return frozenset(geometry.canonical_edge(a, b)
                     for a, b in zip(path, path[1:]))


def _axis_steps(d):
    steps = []
    for i in range(d):
        e = [0] * d
        e[i] = 1
        steps.append(tuple(e))
    return steps


def sup_travel_time(dyn, region, src, dst, window=None, delta=None,
                    cap=DEFAULT_CAP):
    """Exact trajectory of s -> T^(s)(src, dst) over the window.

    The window is covered by sub-windows short enough for envelope
    certification (``delta`` overrides the automatic length).  Inside
    each sub-window the optimum is recomputed only when a ring could
    change it: a weight increase on the current optimal path, or a
    decrease whose best possible path through the edge, lower-bounded
    via the bar-distance maps, would beat the current cost.
    """
    if window is None:
        window = (0.0, dyn.horizon)
    a0, b0 = float(window[0]), float(window[1])
    dyn._require_window(a0, b0)
    src = tuple(src)
    dst = tuple(dst)
    fld = dyn.field
    if src == dst:
        return TravelTimeTrajectory(
            src=src, site=dst, window=(a0, b0), breakpoints=[],
            values=[0.0], sup=0.0, inf=0.0, events=0)
    d = len(src)
    if delta is None:
        delta = subcritical_window(d, dyn.rate, dyn.dist.zero_mass())
    pieces = max(1, math.ceil((b0 - a0) / delta)) if b0 > a0 else 1
    steps = _axis_steps(d)
    enc = dyn.dist.encode()

    breakpoints = []
    values = []
    box_edges = []
    recomputes = 0
    cost = None
    path_edges = frozenset()
    path_w = {}

    def resolve(t, bound):
        nonlocal recomputes
        recomputes += 1
        res = metric.travel_time(region, fld, src, dst, cap=cap,
                                 mode=mode_at(t, dyn.rate), bound=bound)
        keys = _path_edge_keys(res.path)
        return res.cost, keys, {e: fld.weight_at(e[0], e[1], t)
                                for e in keys}

    for i in range(pieces):
        ca = a0 + (b0 - a0) * i / pieces
        cb = a0 + (b0 - a0) * (i + 1) / pieces
        span = cb - ca
        hat = metric.travel_time(region, fld, src, dst, cap=cap,
                                 mode=mode_upper(ca, span, dyn.rate))
        # tiny inflation absorbs summation-order ulps between modes
        bound = hat.cost + 1e-9 * (1.0 + abs(hat.cost))
        bar_mode = mode_lower(ca, span, dyn.rate)
        from_src = _bounded_distance_map(region, fld, src, bound,
                                         bar_mode, cap, "source")
        from_dst = _bounded_distance_map(region, fld, dst, bound,
                                         bar_mode, cap, "target")
        box = {v for v, c in from_src.items()
               if c + from_dst.get(v, math.inf) <= bound}

        edges = []
        for v in box:
            for ax, e in enumerate(steps):
                nb = tuple(v[j] + e[j] for j in range(d))
                if nb in box:
                    edges.append((v, ax))
        box_edges.append(len(edges))

        events = []
        for base, ax in edges:
            rings = fld.ring_times(base, ax, 0.0, cb)
            k0 = bisect_right(rings, ca)
            if k0 == len(rings):
                continue
            w_prev = quantile(enc, u01(fld.seed, base, ax,
                                       STREAM_WEIGHT, k0))
            for j in range(k0, len(rings)):
                w_new = quantile(enc, u01(fld.seed, base, ax,
                                          STREAM_WEIGHT, j + 1))
                events.append((rings[j], base, ax, w_prev, w_new))
                w_prev = w_new
        events.sort(key=lambda ev: ev[0])

        fresh, fresh_edges, fresh_w = resolve(ca, bound)
        if cost is None:
            values.append(fresh)
        elif abs(fresh - cost) > 1e-6 * (1.0 + abs(cost)):
            raise BudgetExceeded(
                fresh, 0, f"trajectory seam mismatch at t={ca}: carried "
                f"{cost!r} vs recomputed {fresh!r}")
        cost, path_edges, path_w = fresh, fresh_edges, fresh_w

        for t, base, ax, w_old, w_new in events:
            key = (base, ax)
            if w_new != w_old:
                if key in path_edges:
                    if w_new < w_old:
                        path_w[key] = w_new
                        cost = sum(path_w.values())
                    else:
                        cost, path_edges, path_w = resolve(t, bound)
                elif w_new < w_old:
                    u, v = base, tuple(base[j] + steps[ax][j]
                                       for j in range(d))
                    through = w_new + min(
                        from_src.get(u, math.inf) + from_dst.get(v, math.inf),
                        from_src.get(v, math.inf) + from_dst.get(u, math.inf))
                    if through < cost - 1e-12:
                        cost, path_edges, path_w = resolve(t, bound)
            breakpoints.append(t)
            values.append(cost)

    return TravelTimeTrajectory(
        src=src, site=dst, window=(a0, b0), breakpoints=breakpoints,
        values=values, sup=max(values), inf=min(values),
        events=len(breakpoints), recomputes=recomputes,
        box_edges=box_edges)


def dynamical_deviation_probability(dist, region, z, epsilon, replicas,
                                    mu_ref, seed, window=(0.0, 1.0),
                                    rate=1.0, delta=None, cap=DEFAULT_CAP,
                                    jobs=1):
    """Fraction of replicas whose whole-window sup deviates from mu_hat.

    The deviation statistic is sup over s in the window of
    |T^(s)(0, z) - mu_hat(z)|, evaluated exactly from the trajectory,
    so this dominates the static deviation probability replica by
    replica (same derived seeds, and the snapshot at s=0 is the static
    environment).
    """
    estimators._check_plugin(mu_ref, epsilon)
    z = tuple(z)
    norm = geometry.l1(z)
    mu_z = mu_ref.mu_hat(z)
    origin = tuple([0] * len(z))

    def one(k):
        dyn = DynamicalEnvironment(derive_seed(seed, k), dist,
                                   horizon=window[1], rate=rate)
        traj = sup_travel_time(dyn, region, origin, z, window=window,
                               delta=delta, cap=cap)
        return max(traj.sup - mu_z, mu_z - traj.inf) > epsilon * norm

    hits = estimators.replica_map(one, replicas, jobs)
    successes = int(sum(hits))
    return estimators.DeviationEstimate(
        site=z, epsilon=epsilon, replicas=replicas,
        p_hat=successes / replicas,
        wilson_ci=estimators.wilson_interval(successes, replicas),
        mu_ref=mu_ref, values=[bool(h) for h in hits])
