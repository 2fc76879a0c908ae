"""Edge-weight distributions and deterministic weight environments.

Every random quantity in the suite is a pure function of (seed, edge,
stream, index) through the counter-based kernel, so environments never
store state: two queries for the same edge agree across processes,
backends, and exploration orders.
"""

import math
from dataclasses import dataclass
from typing import Optional

from . import kernel
from .errors import IsolatedSite

STREAM_WEIGHT = 0
STREAM_CLOCK = 1

_KIND_NAMES = {
    0: "point_mass",
    1: "exponential",
    2: "uniform",
    3: "bernoulli_zero",
    4: "pareto_tail",
    5: "zero_mixture",
}
_KIND_IDS = {v: k for k, v in _KIND_NAMES.items()}


@dataclass(frozen=True)
class Distribution:
    """Non-negative edge-weight law with closed-form tail and moments.

    ``nested`` is only used by the zero mixture, which places an atom
    of mass ``a`` at zero and otherwise draws from a non-atomic nested
    law.
    """

    kind: str
    a: float = 0.0
    b: float = 0.0
    nested: Optional["Distribution"] = None

    def encode(self):
        k = _KIND_IDS[self.kind]
        if self.nested is not None:
            nk = _KIND_IDS[self.nested.kind]
            return (k, self.a, self.b, nk, self.nested.a, self.nested.b)
        return (k, self.a, self.b, 0, 0.0, 0.0)

    def quantile(self, u):
        if not 0.0 <= u < 1.0:
            raise ValueError("quantile argument must lie in [0, 1)")
        return kernel._pykernel.quantile(self.encode(), u)

    def tail_prob(self, x):
        """P(weight > x)."""
        if x < 0:
            return 1.0
        if self.kind == "point_mass":
            return 1.0 if x < self.a else 0.0
        if self.kind == "exponential":
            return math.exp(-self.a * x)
        if self.kind == "uniform":
            lo, hi = self.a, self.b
            if x < lo:
                return 1.0
            if x >= hi:
                return 0.0
            return (hi - x) / (hi - lo)
        if self.kind == "bernoulli_zero":
            return (1.0 - self.a) if x < self.b else 0.0
        if self.kind == "pareto_tail":
            if x < self.b:
                return 1.0
            return (self.b / x) ** self.a
        if self.kind == "zero_mixture":
            return (1.0 - self.a) * self.nested.tail_prob(x)
        raise ValueError(self.kind)

    def zero_mass(self):
        """P(weight = 0)."""
        if self.kind == "point_mass":
            return 1.0 if self.a == 0.0 else 0.0
        if self.kind == "bernoulli_zero":
            return self.a
        if self.kind == "zero_mixture":
            return self.a
        return 0.0

    def min_tail(self, x, q):
        """P(min of q independent copies > x)."""
        return self.tail_prob(x) ** q

    def moment_finite(self, p, q=1):
        """Whether E[(min of q copies)^p] is finite."""
        if self.kind == "pareto_tail":
            return p < self.a * q
        if self.kind == "zero_mixture":
            return self.nested.moment_finite(p, q)
        return True

    def min_moment(self, p, q=1):
        """E[(min of q independent copies)^p], possibly infinite.

        Uses closed forms where the tail is elementary and adaptive
        quadrature of p x^(p-1) P(min > x) otherwise.
        """
        if not self.moment_finite(p, q):
            return math.inf
        if self.kind == "point_mass":
            return self.a ** p
        if self.kind == "exponential":
            return math.gamma(p + 1.0) / (q * self.a) ** p
        if self.kind == "bernoulli_zero":
            return (1.0 - self.a) ** q * self.b ** p
        if self.kind == "pareto_tail":
            aq = self.a * q
            return aq * self.b ** p / (aq - p)
        from scipy.integrate import quad
        val, _ = quad(lambda x: p * x ** (p - 1.0) * self.min_tail(x, q),
                      0.0, math.inf, limit=200)
        return val

    def moment(self, p):
        return self.min_moment(p, 1)

    def mean(self):
        return self.moment(1.0)

    def to_json(self):
        doc = {"kind": self.kind, "a": self.a, "b": self.b}
        if self.nested is not None:
            doc["nested"] = self.nested.to_json()
        return doc

    @staticmethod
    def from_json(doc):
        """Inverse of to_json; parameters are validated by the factories
        so a config typo fails here instead of yielding inf weights."""
        if not isinstance(doc, dict):
            raise TypeError("distribution must be a JSON object")
        extra = set(doc) - {"kind", "a", "b", "nested"}
        if extra:
            raise ValueError(
                f"unknown distribution fields {sorted(extra)}; laws are "
                f"parametrized by 'a' and 'b' as written by to_json()")
        kind = doc.get("kind")
        a = float(doc.get("a", 0.0))
        b = float(doc.get("b", 0.0))
        if kind == "zero_mixture":
            if "nested" not in doc:
                raise ValueError("zero_mixture requires a nested law")
            return zero_mixture(a, Distribution.from_json(doc["nested"]))
        if "nested" in doc:
            raise ValueError(f"{kind!r} does not take a nested law")
        if kind == "point_mass":
            return point_mass(a)
        if kind == "exponential":
            return exponential(a)
        if kind == "uniform":
            return uniform(a, b)
        if kind == "bernoulli_zero":
            return bernoulli_zero(a, b if "b" in doc else 1.0)
        if kind == "pareto_tail":
            return pareto_tail(a, b if "b" in doc else 1.0)
        raise ValueError(f"unknown distribution kind {kind!r}")


def point_mass(value):
    return Distribution("point_mass", float(value))


def exponential(rate=1.0):
    if rate <= 0:
        raise ValueError("rate must be positive")
    return Distribution("exponential", float(rate))


def uniform(lo=0.0, hi=1.0):
    if not 0 <= lo < hi:
        raise ValueError("need 0 <= lo < hi")
    return Distribution("uniform", float(lo), float(hi))


def bernoulli_zero(p_zero, value=1.0):
    if not 0 <= p_zero < 1:
        raise ValueError("p_zero must lie in [0, 1)")
    return Distribution("bernoulli_zero", float(p_zero), float(value))


def pareto_tail(alpha, scale=1.0):
    if alpha <= 0 or scale <= 0:
        raise ValueError("alpha and scale must be positive")
    return Distribution("pareto_tail", float(alpha), float(scale))


def zero_mixture(p_zero, base):
    if base.zero_mass() != 0.0:
        raise ValueError("nested law must be non-atomic at zero")
    if base.kind == "zero_mixture":
        raise ValueError("nested mixtures are not supported")
    return Distribution("zero_mixture", float(p_zero), 0.0, nested=base)


MODE_STATIC = (0, 0.0, 0.0, 1.0)


def mode_at(t, rate=1.0):
    return (1, float(t), 0.0, float(rate))


def mode_lower(t0, t1, rate=1.0):
    """Lower envelope over the window [t0, t0 + t1]: zero as soon as the
    edge clock rings inside the window, else the value at t0."""
    return (2, float(t0), float(t1), float(rate))


def mode_upper(t0, t1, rate=1.0):
    """Upper envelope: max weight the edge attains on [t0, t0 + t1]."""
    return (3, float(t0), float(t1), float(rate))


def derive_seed(seed, k):
    """Stream of independent replica seeds from a base seed."""
    return kernel.derive_seed(seed, k)


class WeightField:
    """Deterministic i.i.d. environment over the edges of Z^d.

    Edges are addressed as (base, axis) with base the lesser endpoint.
    In the dynamical variant each edge also carries a rate-``clock_rate``
    Poisson clock; at each ring the weight is redrawn from the same law,
    and envelope queries summarize a whole time window.
    """

    def __init__(self, seed, dist, clock_rate=1.0):
        self.seed = int(seed) & kernel.MASK64
        self.dist = dist
        self.clock_rate = float(clock_rate)
        self._enc = dist.encode()

    def weight(self, base, axis, mode=MODE_STATIC):
        return kernel.edge_weight(self.seed, tuple(base), axis,
                                  self._enc, mode)

    def weight_at(self, base, axis, t):
        return self.weight(base, axis, mode_at(t, self.clock_rate))

    def lower_weight(self, base, axis, t0, t1):
        return self.weight(base, axis, mode_lower(t0, t1, self.clock_rate))

    def upper_weight(self, base, axis, t0, t1):
        return self.weight(base, axis, mode_upper(t0, t1, self.clock_rate))

    def ring_times(self, base, axis, t0, t1):
        return kernel.ring_times(self.seed, tuple(base), axis,
                                 self.clock_rate, t0, t1)

    def edge_weight_on_path(self, path, mode=MODE_STATIC):
        total = 0.0
        for a, b in zip(path, path[1:]):
            diff = [(i, b[i] - a[i]) for i in range(len(a)) if b[i] != a[i]]
            if len(diff) != 1 or abs(diff[0][1]) != 1:
                raise ValueError(f"{a} -> {b} is not a lattice edge")
            axis, step = diff[0]
            base = a if step > 0 else b
            total += self.weight(base, axis, mode)
        return total


def y_statistic(field, site, region, mode=MODE_STATIC):
    """Minimum weight over the region edges incident to a site."""
    from . import geometry
    site = tuple(site)
    best = None
    for nb in geometry.neighbors(region, site):
        axis = next(i for i in range(len(site)) if nb[i] != site[i])
        base = site if nb[axis] > site[axis] else nb
        w = field.weight(base, axis, mode)
        if best is None or w < best:
            best = w
    if best is None:
        raise IsolatedSite(f"{site} has no incident edges in the region")
    return best
