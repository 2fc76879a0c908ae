"""Empirical growth shapes and the polygonal limit-shape estimate.

The limit shape is estimated per rational direction and interpolated
star-shaped (angularly linear in the radius); convexity is measured,
never imposed.  Cone restrictions intersect the polygon with the
collarless continuum cone, matching the structural claim that the
restricted limit shape is the lattice shape clipped to the cone.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import estimators, geometry, metric
from .errors import DegenerateShape

BASE_FAN_2D = ((1, 0), (4, 1), (3, 1), (2, 1), (3, 2), (4, 3), (1, 1))
BASE_FAN_3D = ((1, 0, 0), (1, 1, 0), (1, 1, 1))


def base_fan(d):
    if d == 2:
        return list(BASE_FAN_2D)
    if d == 3:
        return list(BASE_FAN_3D)
    raise ValueError("direction fans are defined for d in {2, 3}")


def canonical_direction(z):
    """Representative of the symmetry class: sorted |coords| descending."""
    return tuple(sorted((abs(c) for c in z), reverse=True))


def full_fan(d):
    """All signed permutation images of the base fan, deduplicated.

    In d=2 the list is sorted by angle so consecutive entries are
    angular neighbors of the polygon.
    """
    from itertools import permutations, product
    out = set()
    for base in base_fan(d):
        for perm in permutations(range(d)):
            for signs in product((-1, 1), repeat=d):
                v = tuple(signs[i] * base[perm[i]] for i in range(d))
                out.add(v)
    if d == 2:
        return sorted(out, key=lambda v: math.atan2(v[1], v[0]))
    return sorted(out)


@dataclass
class ShapeEstimate:
    """Reached cells at a time budget, with their exact travel times."""

    t: float
    sites: np.ndarray
    costs: np.ndarray
    region: geometry.Region
    src: tuple

    @property
    def scale(self):
        return 1.0 / self.t if self.t > 0 else math.inf

    def __len__(self):
        return len(self.costs)


def empirical_shape(region, field, t, cap=metric.DEFAULT_CAP):
    rs = metric.reachable_set(region, field, tuple([0] * region.d), t,
                              cap=cap)
    return ShapeEstimate(t=float(t), sites=rs.sites, costs=rs.costs,
                         region=region, src=rs.src)


@dataclass
class LimitShape:
    """Polygonal estimate of the travel-time unit ball.

    ``directions`` is the full fan; ``radii`` holds the Euclidean
    distance from the origin to the shape boundary along each
    direction, i.e. |z|_2 / mu_hat(z).  ``region`` non-None marks a
    cone restriction.
    """

    d: int
    directions: list
    radii: list
    radii_ci: list
    estimates: dict
    stderr: float
    region: Optional[geometry.Region] = None

    def _angle_table(self):
        if not hasattr(self, "_angles"):
            ang = np.array([math.atan2(v[1], v[0]) for v in self.directions])
            order = np.argsort(ang)
            self._angles = ang[order]
            self._radii_sorted = np.asarray(self.radii)[order]
        return self._angles, self._radii_sorted

    def radius_at(self, theta):
        """Star-shaped polygon radius by angular linear interpolation."""
        if self.d != 2:
            raise ValueError("angular interpolation is d=2 only")
        ang, rad = self._angle_table()
        i = int(np.searchsorted(ang, theta))
        lo = (i - 1) % len(ang)
        hi = i % len(ang)
        a0, a1 = ang[lo], ang[hi]
        r0, r1 = rad[lo], rad[hi]
        span = (a1 - a0) % (2 * math.pi)
        frac = ((theta - a0) % (2 * math.pi)) / span if span > 0 else 0.0
        return float(r0 + (r1 - r0) * frac)

    def mu_hat(self, z):
        """Plug-in time constant at site z from the polygon."""
        x = np.asarray(z, dtype=np.float64)
        r2 = float(np.sqrt((x * x).sum()))
        if r2 == 0.0:
            return 0.0
        return r2 / self.radius_at(math.atan2(x[1], x[0]))

    def mu_hat_array(self, sites):
        sites = np.asarray(sites, dtype=np.float64)
        return np.array([self.mu_hat(z) for z in sites])

    def in_shape(self, points, scale=1.0):
        """Mask of continuum points inside scale * (restricted) shape."""
        pts = np.asarray(points, dtype=np.float64)
        r2 = np.sqrt((pts * pts).sum(axis=1))
        ang = np.arctan2(pts[:, 1], pts[:, 0])
        lim = np.array([self.radius_at(a) for a in ang]) * scale
        ok = r2 <= lim + 1e-12
        if self.region is not None:
            core = geometry.interior_of(self.region)
            ok &= geometry.member_mask(core, pts)
        return ok

    def polygon_points(self, scale=1.0):
        ang, rad = self._angle_table()
        return [(float(scale * r * math.cos(a)), float(scale * r * math.sin(a)))
                for a, r in zip(ang, rad)]


def limit_shape(dist, directions, n, replicas, seed,
                cap=metric.DEFAULT_CAP, jobs=1):
    """Per-direction time constants assembled into a star polygon.

    ``n`` is the target l1 scale: each direction z is estimated at the
    multiple of z closest to that length, so every direction costs
    about the same work.  Only one representative per lattice-symmetry
    class is estimated; images inherit its value.  Degenerate regimes
    are refused: a zero atom of mass >= 1/2 forces a zero time
    constant (the percolation criterion), and so does any direction
    whose CI includes zero.
    """
    d = len(directions[0])
    if dist.zero_mass() >= 0.5:
        raise DegenerateShape(
            f"P(weight = 0) = {dist.zero_mass():.3f} >= 1/2: the time "
            "constant vanishes and the unit ball is unbounded")
    classes = {}
    for z in directions:
        classes.setdefault(canonical_direction(z), None)
    for rep in classes:
        n_rep = max(4, round(n / geometry.l1(rep)))
        est = estimators.estimate_time_constant(
            dist, rep, n_rep, replicas, seed, cap=cap, jobs=jobs)
        if est.mean - 2.0 * est.stderr <= 0.0:
            raise DegenerateShape(
                f"time constant CI along {rep} includes zero")
        classes[rep] = est
    radii = []
    cis = []
    for z in directions:
        est = classes[canonical_direction(z)]
        mu_z = est.mean * geometry.l1(z)
        r = geometry.l2(z) / mu_z
        halfw = 2.0 * est.stderr * geometry.l1(z) * geometry.l2(z) / mu_z ** 2
        radii.append(r)
        cis.append((r - halfw, r + halfw))
    stderr = max(e.stderr for e in classes.values())
    return LimitShape(d=d, directions=[tuple(z) for z in directions],
                      radii=radii, radii_ci=cis, estimates=classes,
                      stderr=stderr)


def restrict_shape(ls, region):
    """Clip a limit shape to the collarless continuum cone."""
    if region.kind not in ("cone", "cone_interior"):
        raise ValueError("restriction expects a cone region")
    return LimitShape(d=ls.d, directions=ls.directions, radii=ls.radii,
                      radii_ci=ls.radii_ci, estimates=ls.estimates,
                      stderr=ls.stderr, region=region)


@dataclass
class InclusionReport:
    lower_included: bool
    upper_included: bool
    sup_deviation: float
    t: float
    epsilon: float
    lower_misses: int = 0
    upper_misses: int = 0
    checked_lower: int = 0
    checked_upper: int = 0

    def to_json(self):
        return {
            "lower_included": self.lower_included,
            "upper_included": self.upper_included,
            "sup_deviation": self.sup_deviation,
            "t": self.t,
            "epsilon": self.epsilon,
            "lower_misses": self.lower_misses,
            "upper_misses": self.upper_misses,
            "checked_lower": self.checked_lower,
            "checked_upper": self.checked_upper,
        }


def _interior_mask(region, sites):
    if region.kind in ("cone", "cone_interior"):
        return geometry.member_mask(geometry.interior_of(region), sites)
    return np.ones(len(sites), dtype=bool)


def shape_deviation(se, ls, epsilon, sup_cutoff=0.25):
    """Site-level inclusion tests and the sup deviation statistic.

    (a) every interior site z with mu_hat(z) <= (1-eps)t is a reached
    cell; (b) every reached interior cell satisfies
    mu_hat(z) <= (1+eps)t; (c) sup over reached interior cells with
    |z|_1 >= sup_cutoff*t of |T(0,z) - mu_hat(z)| / |z|_1.

    Interior filtering matches the continuum convention that cone
    shapes are compared inside the collarless cone; for the lattice it
    is a no-op.
    """
    t = se.t
    cells = se.sites
    interior = _interior_mask(se.region, cells)

    # (b) upper inclusion over reached interior cells
    mu_cells = ls.mu_hat_array(cells)
    upper_ok = mu_cells[interior] <= (1.0 + epsilon) * t + 1e-9
    upper_misses = int((~upper_ok).sum())

    # (a) lower inclusion: candidate sites out to the polygon's reach
    max_r2 = (1.0 - epsilon) * t * max(ls.radii) + 1.0
    rad = int(math.ceil(max_r2 * math.sqrt(se.region.d)))
    cand = geometry.l1_ball_sites(se.region.d, min(rad, int(3 * t) + 2))
    cand = cand[_interior_mask(se.region, cand)]
    mu_cand = ls.mu_hat_array(cand)
    need = cand[mu_cand <= (1.0 - epsilon) * t]
    cell_keys = set(map(tuple, cells.tolist()))
    lower_misses = sum(1 for z in need.tolist()
                       if tuple(z) not in cell_keys)

    # (c) sup deviation over far interior cells
    norms = np.abs(cells).sum(axis=1)
    far = interior & (norms >= sup_cutoff * t) & (norms > 0)
    if far.any():
        sup_dev = float((np.abs(se.costs[far] - mu_cells[far])
                         / norms[far]).max())
    else:
        sup_dev = 0.0
    return InclusionReport(
        lower_included=lower_misses == 0,
        upper_included=upper_misses == 0,
        sup_deviation=sup_dev, t=t, epsilon=epsilon,
        lower_misses=int(lower_misses), upper_misses=upper_misses,
        checked_lower=int(len(need)), checked_upper=int(interior.sum()))


def filtered_shape(se, t):
    """Shape at a smaller budget from the same run: costs are fixed, so
    cells(t') is exactly the sub-level set."""
    if t > se.t:
        raise ValueError("can only filter down to a smaller budget")
    keep = se.costs <= t
    return ShapeEstimate(t=float(t), sites=se.sites[keep],
                         costs=se.costs[keep], region=se.region, src=se.src)


def hull_defect(se, shrink=0.05):
    """Fraction of cells outside the convex hull shrunk about the origin."""
    from scipy.spatial import ConvexHull
    pts = se.sites.astype(np.float64)
    if len(pts) <= se.region.d + 1:
        return 0.0
    hull = ConvexHull(pts)
    eqs = hull.equations  # A x + b <= 0 inside the hull
    a = eqs[:, :-1]
    b = eqs[:, -1]
    # x is inside the shrunk hull iff x/(1-shrink) is inside the hull
    outside = (pts @ a.T > (1.0 - shrink) * (-b)[None, :] + 1e-9).any(axis=1)
    return float(outside.sum() / len(pts))


def polygon_convexity_defect(ls):
    """Max relative radial gap between the polygon and its convex hull."""
    from scipy.spatial import ConvexHull
    pts = np.asarray(ls.polygon_points())
    hull = ConvexHull(pts)
    a = hull.equations[:, :-1]
    b = hull.equations[:, -1]
    worst = 0.0
    for p in pts:
        # radial scale needed to reach the hull along p's direction
        denom = a @ p
        scales = [(-b[i]) / denom[i] for i in range(len(b)) if denom[i] > 0]
        if not scales:
            continue
        reach = min(scales)
        worst = max(worst, reach - 1.0)
    return worst
