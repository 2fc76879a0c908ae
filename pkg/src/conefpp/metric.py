"""Travel times over implicit induced subgraphs.

All queries run one best-first search on the region graph with the
pure-function weight environment.  On infinite regions termination is
guaranteed by first finding an explicit in-region staircase path; its
cost is a valid upper bound, and the target always settles before the
frontier exceeds it.  Equal tentative costs resolve by canonical
(lexicographic) site order, so reported paths are reproducible across
backends and runs.
"""

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import geometry, kernel
from .errors import BudgetExceeded, EmptySlice, Unreachable
from .randomness import MODE_STATIC

DEFAULT_CAP = 50_000_000


@dataclass
class TravelTimeResult:
    cost: float
    path: list
    certified: bool
    explored: int
    src: tuple
    dst: tuple

    def to_json(self):
        return {
            "cost": self.cost,
            "path": [list(p) for p in self.path],
            "certified": self.certified,
            "explored": self.explored,
            "src": list(self.src),
            "dst": list(self.dst),
        }


def path_cost(field, path, mode=MODE_STATIC):
    """Weight sum of a path, in path order; empty and single-site paths
    cost zero."""
    if len(path) < 2:
        return 0.0
    return field.edge_weight_on_path(path, mode)


def candidate_paths(region, src, dst):
    """In-region staircase paths from src to dst, used for U-pruning.

    Tries the proportional chord staircase, all axis-ordered
    staircases, and (when the origin is a region site) the composite
    via the origin, keeping paths whose every vertex is in the region.
    """
    src = tuple(src)
    dst = tuple(dst)
    d = len(src)
    enc = region.encode()

    def inside(path):
        return all(kernel.member(enc, p) for p in path)

    def axis_order_path(a, b, order):
        cur = list(a)
        path = [tuple(cur)]
        for ax in order:
            step = 1 if b[ax] > a[ax] else -1
            while cur[ax] != b[ax]:
                cur[ax] += step
                path.append(tuple(cur))
        return path

    out = []
    p = geometry.segment_path(src, dst)
    if inside(p):
        out.append(p)
    orders = itertools.permutations(range(d)) if d <= 3 else \
        [tuple(range(d)), tuple(reversed(range(d)))]
    for order in orders:
        p = axis_order_path(src, dst, order)
        if inside(p):
            out.append(p)
    origin = tuple([0] * d)
    if src != origin and dst != origin and kernel.member(enc, origin):
        p1 = geometry.segment_path(src, origin)
        p2 = geometry.segment_path(origin, dst)
        if inside(p1) and inside(p2):
            out.append(p1 + p2[1:])
    return out


def _upper_bound(region, field, src, dst, mode):
    best = math.inf
    for p in candidate_paths(region, src, dst):
        best = min(best, path_cost(field, p, mode))
    return best


def _bound_ladder(top, dist, length):
    """Increasing exploration bounds ending at the certified bound.

    A staircase-path bound certifies termination but can be huge under
    heavy tails (one bad edge inflates the whole sum), and searched
    area grows like bound^d.  Start from a per-edge quantile guess and
    double; total wasted work stays a small multiple of the final run.
    """
    if not math.isfinite(top):
        return [top]
    q = 0.0
    for level in (0.25, 0.5, 0.75, 0.9):
        q = dist.quantile(level)
        if q > 0.0:
            break
    first = length * q
    if first <= 0.0 or first >= top:
        return [top / 2.0, top]
    rungs = [first]
    while rungs[-1] * 2.0 < top:
        rungs.append(rungs[-1] * 2.0)
    rungs.append(top)
    return rungs


def _extract_path(sites, parents, idx):
    path = []
    while idx >= 0:
        path.append(tuple(int(c) for c in sites[idx]))
        idx = int(parents[idx])
    path.reverse()
    return path


def travel_time(region, field, src, dst, cap=DEFAULT_CAP,
                mode=MODE_STATIC, bound=None):
    """Exact point-to-point travel time on the induced subgraph."""
    src = tuple(src)
    dst = tuple(dst)
    enc = region.encode()
    if not kernel.member(enc, src) or not kernel.member(enc, dst):
        raise ValueError("both endpoints must be region sites")
    if src == dst:
        return TravelTimeResult(cost=0.0, path=[], certified=True,
                                explored=0, src=src, dst=dst)
    # explore in canonical orientation so T(x,y) == T(y,x) bit-exactly
    swapped = dst < src
    a, b = (dst, src) if swapped else (src, dst)
    if bound is None:
        top = _upper_bound(region, field, a, b, mode)
        bounds = _bound_ladder(top, field.dist, geometry.l1(
            geometry.sub(b, a)))
    else:
        bounds = [bound]
    for bnd in bounds:
        status, sites, costs, parents, m, frontier, tidx = kernel.explore(
            field.seed, len(src), enc, field.dist.encode(), mode, [a],
            stop_kind=1, stop_val=kernel.pack_site(b),
            bound=bnd, cap=cap)
        if status == kernel.STATUS_TARGET:
            path = _extract_path(sites, parents, tidx)
            if swapped:
                path.reverse()
            return TravelTimeResult(
                cost=float(costs[tidx]), path=path,
                certified=True, explored=m, src=src, dst=dst)
        if status == kernel.STATUS_CAP:
            raise BudgetExceeded(float(frontier), m)
        if status == kernel.STATUS_EXHAUSTED:
            raise Unreachable(
                f"{dst} is not connected to {src} in the region")
    raise BudgetExceeded(float(frontier), m,
                         "bound exceeded before the target settled")


def _slice_sites(region, level):
    """Region sites on the hyperplane of coordinate sum ``level``."""
    d = region.d
    if region.kind == "cylinder":
        u = geometry.unit(region.axis)
        su = sum(u)
        if su <= 0:
            raise ValueError("cylinder axis must have positive "
                             "coordinate sum for hyperplane queries")
        center = [level / su * c for c in u]
        pad = region.radius + math.sqrt(d) + 1
    elif region.kind == "capsule":
        p, q = region.p, region.q
        sp, sq = sum(p), sum(q)
        if sq == sp:
            center = list(p)
        else:
            a = min(max((level - sp) / (sq - sp), 0.0), 1.0)
            center = [pi + a * (qi - pi) for pi, qi in zip(p, q)]
        pad = region.radius + math.sqrt(d) + 1
    else:
        raise ValueError("hyperplane queries need a cylinder or capsule")
    enc = region.encode()
    los = [int(math.floor(c - pad)) for c in center]
    his = [int(math.ceil(c + pad)) for c in center]
    out = []

    def rec(prefix):
        i = len(prefix)
        if i == d - 1:
            last = level - sum(prefix)
            if los[i] <= last <= his[i]:
                site = tuple(prefix + [last])
                if kernel.member(enc, site):
                    out.append(site)
            return
        for c in range(los[i], his[i] + 1):
            rec(prefix + [c])

    rec([])
    return sorted(out)


def travel_time_to_hyperplane(region, field, from_level, to_level,
                              cap=DEFAULT_CAP, mode=MODE_STATIC):
    """Passage time between two coordinate-sum hyperplanes.

    Multi-source search from every region site on the source slice,
    stopping when the first site with the target coordinate sum
    settles; that settle is the minimum over all source/sink pairs.
    """
    if from_level >= to_level:
        raise ValueError("source level must be below the target level")
    sources = _slice_sites(region, from_level)
    if not sources:
        raise EmptySlice(f"no region sites with coordinate sum {from_level}")
    sinks = _slice_sites(region, to_level)
    if not sinks:
        raise EmptySlice(f"no region sites with coordinate sum {to_level}")
    bound = math.inf
    probe_src = min(sources, key=geometry.l2)
    probe_dst = min(sinks, key=geometry.l2)
    for p in candidate_paths(region, probe_src, probe_dst):
        bound = min(bound, path_cost(field, p, mode))
    status, sites, costs, parents, m, frontier, tidx = kernel.explore(
        field.seed, region.d, region.encode(), field.dist.encode(), mode,
        sources, stop_kind=2, stop_val=to_level, bound=bound, cap=cap)
    if status == kernel.STATUS_TARGET:
        path = _extract_path(sites, parents, tidx)
        return TravelTimeResult(
            cost=float(costs[tidx]), path=path, certified=True,
            explored=m, src=path[0], dst=path[-1])
    if status == kernel.STATUS_CAP:
        raise BudgetExceeded(float(frontier), m)
    if status == kernel.STATUS_BOUND:
        raise BudgetExceeded(float(frontier), m,
                             "bound exceeded before reaching the slice")
    raise Unreachable("target slice not connected to the source slice")


@dataclass
class ReachableSet:
    """Sites with travel time at most the budget, in settle order."""

    sites: np.ndarray
    costs: np.ndarray
    budget: float
    src: tuple

    def __len__(self):
        return len(self.costs)

    def pairs(self):
        for row, c in zip(self.sites, self.costs):
            yield tuple(int(x) for x in row), float(c)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            d = self.sites.shape[1] if len(self.sites) else len(self.src)
            w.writerow([f"z{i+1}" for i in range(d)] + ["cost"])
            for row, c in zip(self.sites, self.costs):
                w.writerow([int(x) for x in row] + [repr(float(c))])


def reachable_set(region, field, src, t, cap=DEFAULT_CAP,
                  mode=MODE_STATIC):
    """All region sites with travel time at most t, with exact costs."""
    if t < 0:
        raise ValueError("time budget must be non-negative")
    src = tuple(src)
    enc = region.encode()
    if not kernel.member(enc, src):
        raise ValueError("source must be a region site")
    status, sites, costs, parents, m, frontier, tidx = kernel.explore(
        field.seed, len(src), enc, field.dist.encode(), mode, [src],
        stop_kind=0, stop_val=None, bound=float(t), cap=cap)
    if status == kernel.STATUS_CAP:
        raise BudgetExceeded(
            float(frontier), m,
            f"reachable set at t={t} overflows the {cap}-site cap",
            partial=ReachableSet(sites=sites, costs=costs, budget=float(t),
                                 src=src))
    return ReachableSet(sites=sites, costs=costs, budget=float(t), src=src)


def coupled_travel_times(regions, field, src, dst, cap=DEFAULT_CAP,
                         mode=MODE_STATIC):
    """Travel times through several regions over one shared environment."""
    return [travel_time(r, field, src, dst, cap=cap, mode=mode).cost
            for r in regions]
