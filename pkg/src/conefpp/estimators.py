"""Monte Carlo estimation of time constants and deviation statistics.

Replica k of any estimate runs in its own environment derived from the
base seed, and all sites queried within a replica share that one
environment, so probability statements are about a single realization
of the weights.  Aggregation is a deterministic fold in replica order
regardless of worker count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from . import geometry, kernel, metric
from .errors import BudgetExceeded, Unreachable
from .randomness import MODE_STATIC, WeightField, derive_seed

DEFAULT_CAP = metric.DEFAULT_CAP


def replica_map(fn, replicas, jobs=1):
    """fn(k) for k in range(replicas), folded in replica order."""
    if jobs <= 1:
        return [fn(k) for k in range(replicas)]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, range(replicas)))


def mean_stderr(values):
    arr = np.asarray(values, dtype=np.float64)
    m = float(arr.mean())
    if len(arr) < 2:
        return m, 0.0
    return m, float(arr.std(ddof=1) / math.sqrt(len(arr)))


def median_stderr(values):
    """Sample median with a distribution-free standard error.

    The binomial order-statistic interval for the median stays valid
    when the law has infinite variance (heavy travel-time tails), where
    sigma/sqrt(n) is meaningless.  Below 8 samples fall back to the
    mean-based formula; the interval ranks would collapse.
    """
    arr = np.sort(np.asarray(values, dtype=np.float64))
    n = len(arr)
    m = float(np.median(arr))
    if n < 8:
        return m, (float(arr.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0)
    zq = 1.959964
    half = zq * math.sqrt(n) / 2.0
    lo = max(0, int(math.floor(n / 2 - half)))
    hi = min(n - 1, int(math.ceil(n / 2 + half)))
    return m, float((arr[hi] - arr[lo]) / (2.0 * zq))


def t_interval(values, level=0.95):
    """Two-sided t confidence interval for a mean."""
    from scipy.stats import t as t_dist
    m, se = mean_stderr(values)
    if se == 0.0:
        return (m, m)
    q = t_dist.ppf(0.5 + level / 2, df=len(values) - 1)
    return (m - q * se, m + q * se)


def wilson_interval(successes, n, level=0.95):
    """Wilson score interval for a binomial proportion."""
    from scipy.stats import norm
    z = norm.ppf(0.5 + level / 2)
    if n == 0:
        return (0.0, 1.0)
    p = successes / n
    denom = 1 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if successes == 0 else max(0.0, center - half)
    hi = 1.0 if successes == n else min(1.0, center + half)
    return (lo, hi)


@dataclass
class TimeConstantEstimate:
    """Travel-time constant per unit l1-length in a fixed direction."""

    direction: tuple
    n: int
    replicas: int
    mean: float
    stderr: float
    values: list
    fekete: dict = dc_field(default_factory=dict)
    region: Optional[object] = None
    seed: int = 0

    def mu_hat(self, z):
        """Plug-in estimate of the time constant at site z."""
        return self.mean * geometry.l1(z)

    def mu_hat_array(self, sites):
        sites = np.asarray(sites, dtype=np.float64)
        return self.mean * np.abs(sites).sum(axis=1)

    def to_json(self):
        return {
            "direction": list(self.direction),
            "n": self.n,
            "replicas": self.replicas,
            "mean": self.mean,
            "stderr": self.stderr,
            "values": list(self.values),
            "fekete": {str(k): v for k, v in self.fekete.items()},
            "region": self.region.to_json() if self.region else None,
            "seed": self.seed,
        }


def _multi_target_costs(region, field, targets, cap, mode=MODE_STATIC):
    """Exact costs from the origin to several sites with one search.

    The staircase-path bound guarantees every target settles; half of
    it usually suffices and explores a quarter of the area, so escalate
    geometrically.
    """
    d = len(targets[0])
    origin = tuple([0] * d)
    top = 0.0
    for tgt in targets:
        b = metric._upper_bound(region, field, origin, tgt, mode)
        if not math.isfinite(b):
            raise Unreachable(f"no staircase path to {tgt} in the region")
        top = max(top, b)
    tgt_arr = np.asarray(targets)
    length = max(geometry.l1(t) for t in targets)
    for bound in metric._bound_ladder(top, field.dist, length):
        status, sites, costs, parents, m, frontier, tidx = kernel.explore(
            field.seed, d, region.encode(), field.dist.encode(), mode,
            [origin], stop_kind=0, stop_val=None, bound=bound, cap=cap)
        out = []
        for tgt in tgt_arr:
            hit = np.flatnonzero((sites == tgt).all(axis=1))
            if len(hit) == 0:
                break
            out.append(float(costs[hit[0]]))
        if len(out) == len(targets):
            return out
        if status == kernel.STATUS_CAP:
            # a larger bound replays the same settles into the same cap
            raise BudgetExceeded(
                float(frontier), m,
                f"site cap {cap} hit before all targets settled")
    raise Unreachable(f"targets did not all settle under bound {top}")


def estimate_time_constant(dist, z, n, replicas, seed, region=None,
                           cap=DEFAULT_CAP, jobs=1, aggregate="mean"):
    """Location of T(0, nz)/(n*|z|_1) over independently seeded replicas.

    Also reports the subadditive upper-bound diagnostic: replica means
    of T(0, kz)/k at k in {n//4, n//2, n}, a non-increasing sequence in
    expectation, measured from the same searches.

    ``aggregate="median"`` swaps in the sample median with an
    order-statistic stderr; use it when the edge law makes travel-time
    variance infinite (Pareto alpha <= 1/2 per axis pair) and the mean
    would never satisfy a plug-in gate.
    """
    z = tuple(z)
    if n < 1 or replicas < 2:
        raise ValueError("need n >= 1 and at least 2 replicas")
    if aggregate not in ("mean", "median"):
        raise ValueError("aggregate must be 'mean' or 'median'")
    if region is None:
        region = geometry.lattice(len(z))
    ks = sorted({max(1, n // 4), max(1, n // 2), n})
    targets = [geometry.scale(z, k) for k in ks]
    norm = geometry.l1(z)

    def one(k):
        fld = WeightField(derive_seed(seed, k), dist)
        return _multi_target_costs(region, fld, targets, cap)

    rows = replica_map(one, replicas, jobs)
    values = [row[-1] / (n * norm) for row in rows]
    agg = median_stderr if aggregate == "median" else mean_stderr
    mean, stderr = agg(values)
    fekete = {}
    for i, k in enumerate(ks):
        fekete[k] = float(np.mean([row[i] / k for row in rows]))
    return TimeConstantEstimate(
        direction=z, n=n, replicas=replicas, mean=mean, stderr=stderr,
        values=values, fekete=fekete, region=region, seed=seed)


def estimate_cylinder_constant(dist, z, r, n, replicas, seed,
                               cap=DEFAULT_CAP, jobs=1):
    """Time constant of the cylinder of radius r around the ray of z."""
    d = len(z)
    if r < 4.0 * math.sqrt(d):
        raise ValueError("cylinder radius below the 4*sqrt(d) regime")
    region = geometry.cylinder(z, r)
    return estimate_time_constant(dist, z, n, replicas, seed,
                                  region=region, cap=cap, jobs=jobs)


@dataclass
class DeviationEstimate:
    site: tuple
    epsilon: float
    replicas: int
    p_hat: float
    wilson_ci: tuple
    mu_ref: TimeConstantEstimate
    values: list = dc_field(default_factory=list)

    def to_json(self):
        return {
            "site": list(self.site),
            "epsilon": self.epsilon,
            "replicas": self.replicas,
            "p_hat": self.p_hat,
            "wilson_ci": list(self.wilson_ci),
            "mu_ref": self.mu_ref.to_json(),
        }


def _check_plugin(mu_ref, epsilon):
    if not mu_ref.stderr < epsilon / 10.0:
        raise ValueError(
            f"plug-in discipline: mu stderr {mu_ref.stderr:.3g} must be "
            f"below epsilon/10 = {epsilon / 10.0:.3g}")


def deviation_probability(dist, region, z, epsilon, replicas, mu_ref,
                          seed, cap=DEFAULT_CAP, jobs=1):
    """Fraction of replicas with |T(0,z) - mu_hat(z)| > epsilon*|z|_1.

    Each replica needs only the indicator, so the search is bounded by
    the upper deviation threshold: a target that fails to settle is
    exactly an upper deviation, and a settled target is tested exactly.
    """
    _check_plugin(mu_ref, epsilon)
    z = tuple(z)
    norm = geometry.l1(z)
    mu_z = mu_ref.mu_hat(z)
    upper = mu_z + epsilon * norm
    origin = tuple([0] * len(z))
    d = len(z)
    enc = region.encode()
    denc = dist.encode()
    zkey = kernel.pack_site(z)

    def one(k):
        status, sites, costs, parents, m, frontier, tidx = kernel.explore(
            derive_seed(seed, k), d, enc, denc, MODE_STATIC, [origin],
            stop_kind=1, stop_val=zkey, bound=upper, cap=cap)
        if status == kernel.STATUS_TARGET:
            return abs(float(costs[tidx]) - mu_z) > epsilon * norm
        if status == kernel.STATUS_CAP:
            from .errors import BudgetExceeded
            raise BudgetExceeded(float(frontier), m,
                                 f"deviation replica {k} hit the site cap")
        # bound exceeded or region exhausted: T > upper threshold
        return True

    hits = replica_map(one, replicas, jobs)
    successes = int(sum(hits))
    return DeviationEstimate(
        site=z, epsilon=epsilon, replicas=replicas,
        p_hat=successes / replicas,
        wilson_ci=wilson_interval(successes, replicas),
        mu_ref=mu_ref, values=[bool(h) for h in hits])


def lp_deviation(dist, region, z, p, replicas, mu_ref, seed,
                 cap=DEFAULT_CAP, jobs=1, epsilon_gate=0.1):
    """Empirical E|(T(0,z) - mu_hat(z)) / |z|_1|^p with a t-interval."""
    _check_plugin(mu_ref, epsilon_gate)
    z = tuple(z)
    norm = geometry.l1(z)
    mu_z = mu_ref.mu_hat(z)
    origin = tuple([0] * len(z))

    def one(k):
        fld = WeightField(derive_seed(seed, k), dist)
        t = metric.travel_time(region, fld, origin, z, cap=cap).cost
        return abs((t - mu_z) / norm) ** p

    values = replica_map(one, replicas, jobs)
    mean, stderr = mean_stderr(values)
    return mean, t_interval(values), stderr


def y_lower_bound_check(dist, region, sites, seed, cap=DEFAULT_CAP):
    """Exact check of T(0,z) >= Y(z) for every given site, one replica.

    Y(z), the cheapest region edge at z, prices the final step of any
    path, so the travel time can never undercut it.
    """
    from .randomness import y_statistic
    fld = WeightField(seed, dist)
    origin = tuple([0] * region.d)
    bad = []
    for z in sites:
        z = tuple(z)
        if z == origin:
            continue
        t = metric.travel_time(region, fld, origin, z, cap=cap).cost
        y = y_statistic(fld, z, region)
        if t < y:
            bad.append((z, t, y))
    return bad


SLOPE_CONVERGENT = 0.1
SLOPE_DIVERGENT = 0.5


@dataclass
class TailSumDiagnostic:
    p: float
    epsilon: float
    radius: int
    site_set: str
    partial_sums: dict
    slope: float
    verdict: str
    replicas: int
    mu_ref: TimeConstantEstimate
    sites: np.ndarray = None
    norms: np.ndarray = None
    p_hat: np.ndarray = None
    ci_lo: np.ndarray = None
    ci_hi: np.ndarray = None

    def to_json(self):
        return {
            "p": self.p,
            "epsilon": self.epsilon,
            "radius": self.radius,
            "site_set": self.site_set,
            "partial_sums": {str(r): s for r, s in
                             sorted(self.partial_sums.items())},
            "slope": self.slope,
            "verdict": self.verdict,
            "replicas": self.replicas,
            "mu_ref": self.mu_ref.to_json(),
        }


def fit_dyadic_slope(partial_sums, radius):
    """Log-log slope of the partial sums over the window [R/2, R].

    All-zero windows fit slope zero: nothing is growing.
    """
    pts = [(math.log(r), math.log(s))
           for r, s in sorted(partial_sums.items())
           if radius / 2 <= r <= radius and s > 0.0]
    if len(pts) < 2:
        return 0.0
    xs, ys = zip(*pts)
    return float(np.polyfit(xs, ys, 1)[0])


def slope_verdict(slope):
    if slope < SLOPE_CONVERGENT:
        return "convergent-looking"
    if slope > SLOPE_DIVERGENT:
        return "divergent-looking"
    return "inconclusive"


def tail_sum(dist, region, p, epsilon, radius, replicas, mu_ref, seed,
             site_set="interior", cap=DEFAULT_CAP, jobs=1):
    """Partial sums of |z|^(p-d) * p_hat(z) over a site class.

    p_hat(z) estimates P(|T(0,z) - mu_hat(z)| > epsilon*|z|) with one
    bounded search per replica: the search bound is the largest upper
    deviation threshold in the ball, so a site that fails to settle is
    exactly a site whose travel time exceeds its own threshold.
    """
    _check_plugin(mu_ref, epsilon)
    d = region.d
    coords = geometry.l1_ball_sites(d, radius)
    cls = geometry.classify_mask(region, coords)
    want = 1 if site_set == "interior" else 2
    if site_set not in ("interior", "boundary"):
        raise ValueError("site_set must be 'interior' or 'boundary'")
    coords = coords[cls == want]
    norms = np.abs(coords).sum(axis=1)
    keep = norms > 0
    coords = coords[keep]
    norms = norms[keep].astype(np.float64)
    if len(coords) == 0:
        raise ValueError(
            f"region has no {site_set} sites within radius {radius}")
    mu_vals = mu_ref.mu_hat_array(coords)
    upper = mu_vals + epsilon * norms
    lower = mu_vals - epsilon * norms
    bound = float(upper.max())
    origin = tuple([0] * d)
    enc = region.encode()
    denc = dist.encode()
    m = len(coords)

    key_index = {}
    for i in range(m):
        key_index[kernel.pack_site(tuple(int(c) for c in coords[i]))] = i

    def one(k):
        fld_seed = derive_seed(seed, k)
        status, sites, costs, parents, nsettle, frontier, tidx = \
            kernel.explore(fld_seed, d, enc, denc, MODE_STATIC, [origin],
                           stop_kind=0, stop_val=None, bound=bound, cap=cap)
        if status == kernel.STATUS_CAP:
            from .errors import BudgetExceeded
            raise BudgetExceeded(float(frontier), nsettle,
                                 f"tail-sum replica {k} hit the site cap")
        t_here = np.full(m, np.inf)
        for j in range(nsettle):
            idx = key_index.get(
                kernel.pack_site(tuple(int(c) for c in sites[j])))
            if idx is not None:
                t_here[idx] = costs[j]
        # unsettled sites have T > bound >= their upper threshold
        return (t_here > upper) | (t_here < lower)

    hits = replica_map(one, replicas, jobs)
    counts = np.zeros(m)
    for h in hits:
        counts += h
    p_hat = counts / replicas
    ci = [wilson_interval(int(c), replicas) for c in counts]
    ci_lo = np.array([lo for lo, _ in ci])
    ci_hi = np.array([hi for _, hi in ci])

    weights = norms ** (p - d) * p_hat
    # one cumulative pass keeps the partial sums exactly non-decreasing
    order = np.argsort(norms, kind="stable")
    csum = np.concatenate([[0.0], np.cumsum(weights[order])])
    sorted_norms = norms[order]
    partial_sums = {}
    for r in range(1, radius + 1):
        partial_sums[r] = float(csum[np.searchsorted(sorted_norms, r,
                                                     side="right")])
    slope = fit_dyadic_slope(partial_sums, radius)
    return TailSumDiagnostic(
        p=p, epsilon=epsilon, radius=radius, site_set=site_set,
        partial_sums=partial_sums, slope=slope,
        verdict=slope_verdict(slope), replicas=replicas, mu_ref=mu_ref,
        sites=coords, norms=norms, p_hat=p_hat, ci_lo=ci_lo, ci_hi=ci_hi)


def mu_continuity_probe(dists, z, n, replicas, seed, cap=DEFAULT_CAP,
                        jobs=1):
    """Time constants along a parametric path of distributions."""
    return [estimate_time_constant(d, z, n, replicas, seed, cap=cap,
                                   jobs=jobs) for d in dists]
