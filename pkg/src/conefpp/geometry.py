"""Lattice geometry for cone-like induced subgraphs.

Regions are infinite subsets of Z^d described in closed form (full
lattice, cones around a rational direction with a connectivity collar,
cylinders, capsules, half-spaces, a logarithmic wedge).  Membership is
resolved exactly in floating point via quadratic feasibility with a
symmetric 1e-9 margin; sites within the margin count as inside.

The module also provides the constructive ingredients used throughout
the suite: monotone staircase paths tracking a chord, bundles of
edge-disjoint detours around a single edge, flood-fill connectivity of
segment neighborhoods, and interior witnesses for boundary sites of a
cone with their edge-disjoint connecting paths.
"""

import math
from collections import deque
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernel
from .errors import NoDetours, WitnessNotFound

INTERIOR = "interior"
BOUNDARY = "boundary"
OUTSIDE = "outside"

MEMBER_EPS = 1e-9


def l1(z):
    return sum(abs(c) for c in z)


def l2(z):
    return math.sqrt(sum(c * c for c in z))


def linf(z):
    return max(abs(c) for c in z)


def add(a, b):
    return tuple(x + y for x, y in zip(a, b))


def sub(a, b):
    return tuple(x - y for x, y in zip(a, b))


def scale(z, k):
    return tuple(k * c for c in z)


def unit(z):
    n = l2(z)
    return tuple(c / n for c in z)


def default_collar(d):
    """Connectivity collar 4*sqrt(d); wide enough that a detour bundle
    around any edge near the central ray stays inside the region."""
    return 4.0 * math.sqrt(d)


@dataclass(frozen=True)
class Region:
    """Closed-form description of an induced subgraph of Z^d.

    ``axis`` is kept as an exact integer vector; the unit direction is
    derived when encoding so that both backends normalize identically.
    """

    kind: str
    d: int
    axis: Optional[tuple] = None
    c: Optional[float] = None
    collar: Optional[float] = None
    radius: Optional[float] = None
    p: Optional[tuple] = None
    q: Optional[tuple] = None
    offset: Optional[float] = None
    slope: Optional[float] = None

    def encode(self):
        if self.kind == "lattice":
            return (0, ())
        if self.kind == "cone":
            return (1, (self.c, self.collar) + unit(self.axis))
        if self.kind == "cone_interior":
            return (1, (self.c, 0.0) + unit(self.axis))
        if self.kind == "cylinder":
            return (2, (self.radius, 0.0) + unit(self.axis))
        if self.kind == "capsule":
            return (3, (self.radius, 0.0) + tuple(map(float, self.p))
                    + tuple(map(float, self.q)))
        if self.kind == "halfspace":
            return (4, (self.offset, 0.0) + tuple(map(float, self.p)))
        if self.kind == "logwedge":
            return (5, (self.slope,))
        raise ValueError(f"unknown region kind {self.kind}")

    def to_json(self):
        doc = {"kind": self.kind, "d": self.d}
        for name in ("axis", "c", "collar", "radius", "p", "q",
                     "offset", "slope"):
            v = getattr(self, name)
            if v is not None:
                doc[name] = list(v) if isinstance(v, tuple) else v
        return doc

    @staticmethod
    def from_json(doc):
        """Inverse of to_json, routed through the factories so defaults
        (the cone collar in particular) and validation match regions
        built in code; a sparse document fails here, not mid-search."""
        if not isinstance(doc, dict):
            raise TypeError("region must be a JSON object")
        kw = dict(doc)
        kind = kw.pop("kind", None)
        d = kw.pop("d", None)
        fields = {"lattice": set(), "cone": {"axis", "c", "collar"},
                  "cone_interior": {"axis", "c", "collar"},
                  "cylinder": {"axis", "radius"},
                  "capsule": {"p", "q", "radius"},
                  "halfspace": {"p", "offset"}, "logwedge": {"slope"}}
        if kind not in fields:
            raise ValueError(f"unknown region kind {kind!r}")
        if d is None:
            raise ValueError("region needs a d field")
        extra = set(kw) - fields[kind]
        if extra:
            raise ValueError(
                f"{kind!r} region does not take {sorted(extra)}")
        try:
            if kind == "lattice":
                reg = lattice(int(d))
            elif kind == "cone":
                reg = cone(kw["axis"], kw["c"], kw.get("collar"))
            elif kind == "cone_interior":
                if kw.get("collar", 0.0) != 0.0:
                    raise ValueError("a cone interior has no collar")
                reg = cone_interior(kw["axis"], kw["c"])
            elif kind == "cylinder":
                reg = cylinder(kw["axis"], kw["radius"])
            elif kind == "capsule":
                reg = capsule(kw["p"], kw["q"], kw["radius"])
            elif kind == "halfspace":
                reg = halfspace(kw["p"], kw.get("offset", 0.0))
            else:
                reg = logwedge(kw["slope"])
        except KeyError as e:
            raise ValueError(
                f"{kind!r} region needs a {e.args[0]} field") from None
        if reg.d != int(d):
            raise ValueError(
                f"region says d={d} but its parameters have d={reg.d}")
        reg.encode()
        return reg


def lattice(d):
    return Region(kind="lattice", d=d)


def cone(axis, c, collar=None):
    axis = tuple(axis)
    if all(a == 0 for a in axis):
        raise ValueError("cone axis must be nonzero")
    d = len(axis)
    if collar is None:
        collar = default_collar(d)
    return Region(kind="cone", d=d, axis=axis, c=float(c),
                  collar=float(collar))


def cone_interior(axis, c):
    axis = tuple(axis)
    return Region(kind="cone_interior", d=len(axis), axis=axis,
                  c=float(c), collar=0.0)


def cylinder(axis, radius):
    axis = tuple(axis)
    if all(a == 0 for a in axis):
        raise ValueError("cylinder axis must be nonzero")
    return Region(kind="cylinder", d=len(axis), axis=axis,
                  radius=float(radius))


def capsule(p, q, radius):
    p = tuple(map(float, p))
    q = tuple(map(float, q))
    if len(p) != len(q):
        raise ValueError("capsule endpoints must share a dimension")
    return Region(kind="capsule", d=len(p), p=p, q=q, radius=float(radius))


def halfspace(normal, offset=0.0):
    normal = tuple(map(float, normal))
    return Region(kind="halfspace", d=len(normal), p=normal,
                  offset=float(offset))


def logwedge(slope):
    return Region(kind="logwedge", d=2, slope=float(slope))


def interior_of(region):
    """Region whose members are the collarless core.

    For a cone this is the union of balls B(a*axis, c*a); boundary
    sites are those in the collared region but not here.  For a
    halfspace the interior keeps the sites whose whole lattice
    neighborhood stays inside, so the wall layer is the boundary
    class (those sites have induced degree below 2d).  Other regions
    are their own interior.
    """
    if region.kind == "cone":
        return cone_interior(region.axis, region.c)
    if region.kind == "halfspace":
        # a step along +-e_i moves the dot product by at most max|n_i|
        shift = max(abs(float(c)) for c in region.p)
        return halfspace(region.p, region.offset + shift)
    return region


def contains(region, site):
    return kernel.member(region.encode(), tuple(site))


def classify(region, site):
    if region.kind not in ("cone", "cone_interior"):
        return INTERIOR if contains(region, site) else OUTSIDE
    if contains(interior_of(region), site):
        return INTERIOR
    if contains(region, site):
        return BOUNDARY
    return OUTSIDE


def neighbors(region, site):
    """Adjacent region sites, axis ascending, minus before plus."""
    enc = region.encode()
    out = []
    site = tuple(site)
    for axis in range(region.d):
        for sgn in (-1, 1):
            nb = list(site)
            nb[axis] += sgn
            nb = tuple(nb)
            if kernel.member(enc, nb):
                out.append(nb)
    return out


def degree(region, site):
    return len(neighbors(region, site))


def member_mask(region, sites):
    """Vectorized membership for an (m, d) integer array.

    Mirrors the scalar formulas with sequential accumulation so the
    float results match the kernel exactly.
    """
    sites = np.asarray(sites, dtype=np.float64)
    m, d = sites.shape
    kind, f = region.encode()
    if kind == 0:
        return np.ones(m, dtype=bool)
    if kind == 1:
        c, collar = f[0], f[1]
        t = np.zeros(m)
        q2 = np.zeros(m)
        for i in range(d):
            x = sites[:, i]
            t = t + x * f[2 + i]
            q2 = q2 + x * x
        cc = q2 - collar * collar
        aa = 1.0 - c * c
        bb = -2.0 * (t + c * collar)
        res = cc <= MEMBER_EPS
        if aa < 0.0:
            return np.ones(m, dtype=bool)
        if aa == 0.0:
            return res | (bb < 0.0)
        ok = (bb < 0.0) & (bb * bb - 4.0 * aa * cc >= -MEMBER_EPS)
        return res | ok
    if kind == 2:
        r = f[0]
        t = np.zeros(m)
        q2 = np.zeros(m)
        for i in range(d):
            x = sites[:, i]
            t = t + x * f[2 + i]
            q2 = q2 + x * x
        return q2 - t * t <= r * r + MEMBER_EPS
    if kind == 3:
        r = f[0]
        num = np.zeros(m)
        den = 0.0
        for i in range(d):
            px = f[2 + i]
            vx = f[2 + d + i] - px
            num = num + (sites[:, i] - px) * vx
            den += vx * vx
        a = num / den if den != 0.0 else np.zeros(m)
        a = np.clip(a, 0.0, 1.0)
        q2 = np.zeros(m)
        for i in range(d):
            px = f[2 + i]
            vx = f[2 + d + i] - px
            dx = sites[:, i] - (px + a * vx)
            q2 = q2 + dx * dx
        return q2 <= r * r + MEMBER_EPS
    if kind == 4:
        s = np.zeros(m)
        for i in range(d):
            s = s + sites[:, i] * f[2 + i]
        return s >= f[0] - MEMBER_EPS
    if kind == 5:
        x = sites[:, 0]
        y = sites[:, 1]
        wall = f[0] * np.log1p(np.maximum(x, 0.0)) + MEMBER_EPS
        return (x >= 0) & (y >= 0) & (y <= wall)
    raise ValueError(f"unknown region kind {kind}")


def l1_ball_sites(d, radius):
    """All integer sites with l1 norm at most radius, as an (m, d) array."""
    rng = np.arange(-radius, radius + 1)
    grids = np.meshgrid(*([rng] * d), indexing="ij")
    coords = np.stack([g.ravel() for g in grids], axis=1)
    mask = np.abs(coords).sum(axis=1) <= radius
    return coords[mask]


def classify_mask(region, sites):
    """Vector classify: 0 outside, 1 interior, 2 boundary."""
    inner = member_mask(interior_of(region), sites)
    outer = member_mask(region, sites)
    out = np.zeros(len(sites), dtype=np.int8)
    out[inner] = 1
    out[outer & ~inner] = 2
    return out


def _dist_point_segment(p, direction, lo, hi):
    dd = sum(x * x for x in direction)
    t = sum(a * b for a, b in zip(p, direction)) / dd
    t = min(max(t, lo), hi)
    return math.sqrt(sum((a - t * b) ** 2 for a, b in zip(p, direction)))


def segment_path(y, z, segment=None):
    """Monotone staircase from y to z tracking the chord.

    Steps are allocated to axes proportionally (largest-deficit rule),
    which keeps every vertex within sup-distance 1 of the chord and
    hence within sqrt(d) of it in Euclidean norm.  When both endpoints
    lie within sqrt(d) of the given segment (direction, lo, hi), every
    vertex of the path is within 2*sqrt(d) of that segment.
    """
    y = tuple(y)
    z = tuple(z)
    d = len(y)
    if segment is not None:
        direction, lo, hi = segment
        sd = math.sqrt(d) + MEMBER_EPS
        if _dist_point_segment(y, direction, lo, hi) > sd or \
                _dist_point_segment(z, direction, lo, hi) > sd:
            raise ValueError("endpoints are not within sqrt(d) of segment")
    total = [z[i] - y[i] for i in range(d)]
    n = [abs(t) for t in total]
    s = [1 if t > 0 else -1 for t in total]
    L = sum(n)
    path = [y]
    taken = [0] * d
    cur = list(y)
    for k in range(1, L + 1):
        best_axis = -1
        best_deficit = -math.inf
        for i in range(d):
            if taken[i] >= n[i]:
                continue
            deficit = n[i] * k / L - taken[i]
            if deficit > best_deficit:
                best_deficit = deficit
                best_axis = i
        taken[best_axis] += 1
        cur[best_axis] += s[best_axis]
        path.append(tuple(cur))
    return path


def path_edges(path):
    return [(path[i], path[i + 1]) for i in range(len(path) - 1)]


def canonical_edge(a, b):
    """Undirected edge as (base, axis) with base the lesser endpoint."""
    diff = [(i, b[i] - a[i]) for i in range(len(a)) if b[i] != a[i]]
    if len(diff) != 1 or abs(diff[0][1]) != 1:
        raise ValueError(f"{a} and {b} are not lattice neighbors")
    axis, step = diff[0]
    return (a if step > 0 else b, axis)


def _basis_step(site, axis, step):
    out = list(site)
    out[axis] += step
    return tuple(out)


def disjoint_detours(v, w, region):
    """2d edge-disjoint v-w paths of length at most 9 inside the region.

    One direct edge, a 3-step side path for each perpendicular
    direction, and one 9-step loop leaving v backwards; every vertex
    stays within Euclidean distance sqrt(5) of {v, w}, so the bundle
    fits whenever the region contains the 4*sqrt(d) sausage around a
    segment passing near both endpoints.
    """
    v = tuple(v)
    w = tuple(w)
    d = len(v)
    base, axis = canonical_edge(v, w)
    step = 1 if w[axis] > v[axis] else -1
    enc = region.encode()

    def inside(path):
        return all(kernel.member(enc, p) for p in path)

    paths = [[v, w]]
    for j in range(d):
        if j == axis:
            continue
        for sgn in (-1, 1):
            p = [v, _basis_step(v, j, sgn), _basis_step(w, j, sgn), w]
            if not inside(p):
                raise NoDetours(
                    f"side path along axis {j} leaves the region")
            paths.append(p)

    loop = None
    for j in range(d):
        if j == axis:
            continue
        for sgn in (-1, 1):
            back = _basis_step(v, axis, -step)
            fwd = _basis_step(w, axis, step)
            p = [v, back,
                 _basis_step(back, j, sgn),
                 _basis_step(v, j, sgn),
                 _basis_step(v, j, 2 * sgn),
                 _basis_step(w, j, 2 * sgn),
                 _basis_step(fwd, j, 2 * sgn),
                 _basis_step(fwd, j, sgn),
                 fwd, w]
            if inside(p):
                loop = p
                break
        if loop is not None:
            break
    if loop is None:
        raise NoDetours("no back loop fits inside the region")
    paths.append(loop)
    return paths


@dataclass
class ConnectivityReport:
    connected: bool
    n_sites: int
    n_reached: int


def segment_sausage_sites(z, r):
    """Integer sites within Euclidean r of the segment {a*z : a in [0,1]}."""
    d = len(z)
    pad = int(math.ceil(r))
    los = [min(0, c) - pad for c in z]
    his = [max(0, c) + pad for c in z]
    out = []
    def rec(prefix):
        i = len(prefix)
        if i == d:
            if _dist_point_segment(prefix, z, 0.0, 1.0) <= r + MEMBER_EPS:
                out.append(tuple(prefix))
            return
        for c in range(los[i], his[i] + 1):
            rec(prefix + [c])
    rec([])
    return out


def verify_connectivity(z, r):
    """Flood fill of the induced subgraph on the r-sausage of [0, z]."""
    sites = set(segment_sausage_sites(z, r))
    if not sites:
        return ConnectivityReport(connected=False, n_sites=0, n_reached=0)
    start = tuple([0] * len(z))
    if start not in sites:
        start = next(iter(sorted(sites)))
    seen = {start}
    dq = deque([start])
    d = len(z)
    while dq:
        cur = dq.popleft()
        for axis in range(d):
            for sgn in (-1, 1):
                nb = _basis_step(cur, axis, sgn)
                if nb in sites and nb not in seen:
                    seen.add(nb)
                    dq.append(nb)
    return ConnectivityReport(connected=len(seen) == len(sites),
                              n_sites=len(sites), n_reached=len(seen))


@dataclass
class PartitionWitness:
    site: tuple
    q: int
    witness: tuple
    paths: list


def _monotone_paths(z, v, count):
    """count edge-disjoint monotone paths z -> v of length |v-z|_1.

    Runs over the differing axes in cyclically shifted order; staircase
    corner profiles differ between shifts, so no edge repeats.
    """
    axes = [i for i in range(len(z)) if v[i] != z[i]]
    if len(axes) < count:
        return None
    paths = []
    for shift in range(count):
        order = axes[shift:] + axes[:shift]
        cur = list(z)
        path = [tuple(cur)]
        for ax in order:
            step = 1 if v[ax] > z[ax] else -1
            while cur[ax] != v[ax]:
                cur[ax] += step
                path.append(tuple(cur))
        paths.append(path)
    return paths


def boundary_sites_linf(region, R):
    """Boundary sites of a cone region with sup norm at most R."""
    coords = np.stack([g.ravel() for g in np.meshgrid(
        *([np.arange(-R, R + 1)] * region.d), indexing="ij")], axis=1)
    cls = classify_mask(region, coords)
    return [tuple(int(c) for c in row) for row in coords[cls == 2]]


def boundary_partition(region, R, max_witness=None):
    """Interior witnesses for every boundary site with sup norm <= R.

    Requires a cone region directed along the first coordinate axis.
    For a boundary site z on the sup-sphere of radius n with q nonzero
    coordinates among indices >= 2, searches the rectangle between z
    and the axis (first coordinate allowed to grow to n) for an
    interior site v on the same sup-sphere within l1-distance
    ``max_witness`` (default 16*sqrt(d)) admitting q edge-disjoint
    monotone connecting paths inside the region.
    """
    d = region.d
    if region.kind != "cone" or tuple(region.axis) != \
            tuple([1] + [0] * (d - 1)):
        raise ValueError("boundary partition requires a cone along e1")
    if max_witness is None:
        max_witness = 16.0 * math.sqrt(d)
    enc = region.encode()
    inner = interior_of(region)

    witnesses = []
    for site in boundary_sites_linf(region, R):
        # the cone is symmetric in the perpendicular coordinates only;
        # the axis coordinate keeps its sign (apex sites have z_1 < 0)
        signs = [1] + [1 if c >= 0 else -1 for c in site[1:]]
        zpos = tuple(abs(c) if i > 0 else c
                     for i, c in enumerate(site))
        n = max(abs(c) for c in zpos)
        q = sum(1 for c in zpos[1:] if c != 0)
        # offsets move toward the axis: v_1 up to n, v_i down to 0
        lims = [n - zpos[0]] + [zpos[i] for i in range(1, d)]

        def ring(delta):
            out = []

            def rec(i, rem, acc):
                if i == d - 1:
                    if rem <= lims[i]:
                        out.append(tuple(acc + [rem]))
                    return
                for off in range(min(rem, lims[i]) + 1):
                    rec(i + 1, rem - off, acc + [off])
            rec(0, delta, [])
            return out

        found = None
        for delta in range(1, int(max_witness) + 1):
            for offs in ring(delta):
                v = tuple(zpos[0] + offs[0] if i == 0 else
                          zpos[i] - offs[i] for i in range(d))
                if max(abs(c) for c in v) != n:
                    continue
                if not contains(inner, v):
                    continue
                paths = _monotone_paths(zpos, v, max(q, 1))
                if paths is None:
                    continue
                if all(kernel.member(enc, p)
                       for path in paths for p in path):
                    found = (v, paths)
                    break
            if found is not None:
                break
        if found is None:
            raise WitnessNotFound(
                f"no interior witness within {max_witness:.1f} of {site}")
        v, paths = found
        unsign = lambda p: tuple(c * s for c, s in zip(p, signs))
        witnesses.append(PartitionWitness(
            site=site, q=q, witness=unsign(v),
            paths=[[unsign(p) for p in path] for path in paths]))
    return witnesses


def halfspace_projection(site):
    """Project a half-space site to the bounding hyperplane {z_1 = 0}."""
    if site[0] < 0:
        raise ValueError("site must satisfy z_1 >= 0")
    return (0,) + tuple(site[1:])


def projection_paths(site):
    """2d-1 edge-disjoint paths from a site to its hyperplane projection.

    One straight descent along the first axis plus a shifted descent for
    each perpendicular direction; lengths are z_1 and z_1 + 2, and every
    vertex keeps z_1 >= 0.
    """
    site = tuple(site)
    v = halfspace_projection(site)
    m = site[0]
    if m == 0:
        return []
    d = len(site)
    straight = [tuple([site[0] - k] + list(site[1:])) for k in range(m + 1)]
    paths = [straight]
    for j in range(1, d):
        for sgn in (-1, 1):
            shifted = _basis_step(site, j, sgn)
            chain = [tuple([shifted[0] - k] + list(shifted[1:]))
                     for k in range(m + 1)]
            paths.append([site] + chain + [v])
    return paths
