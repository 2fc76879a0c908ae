"""Exact lattice-geometry checks: membership, classification, paths,
detours, and boundary witnesses."""
import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conefpp import geometry
from conefpp.errors import NoDetours
from conefpp.geometry import (BOUNDARY, INTERIOR, OUTSIDE, Region,
                              canonical_edge, capsule, classify,
                              classify_mask, cone, cone_interior, contains,
                              cylinder, default_collar, disjoint_detours,
                              halfspace, halfspace_projection, l1,
                              l1_ball_sites, lattice, logwedge, member_mask,
                              neighbors, path_edges, projection_paths,
                              scale, segment_path, verify_connectivity)


def brute_cone_member(axis, c, collar, z):
    """Minimize |z - a*u| - (c*a + collar) over a >= 0 numerically."""
    u = np.asarray(axis, dtype=float)
    u /= np.linalg.norm(u)
    z = np.asarray(z, dtype=float)
    grid = np.linspace(0.0, float(np.linalg.norm(z)) + 4 * collar + 10, 4001)
    vals = np.sqrt(((z[None, :] - grid[:, None] * u[None, :]) ** 2)
                   .sum(axis=1)) - (c * grid + collar)
    return bool(vals.min() <= 1e-6)


@pytest.mark.parametrize("d,axis,c", [
    (2, (1, 0), 0.5), (2, (2, 1), 0.35), (3, (1, 0, 0), 0.5),
    (3, (1, 1, 1), 0.25)])
def test_cone_membership_against_numeric_oracle(d, axis, c):
    region = cone(axis, c)
    rng = np.random.default_rng(4)
    for _ in range(250):
        z = tuple(int(v) for v in rng.integers(-15, 30, size=d))
        got = contains(region, z)
        want = brute_cone_member(axis, c, default_collar(d), z)
        assert got == want, (z, got, want)


def test_classification_partitions_membership():
    region = cone((1, 0), 0.5)
    inner = cone_interior((1, 0), 0.5)
    for z1 in range(-10, 25):
        for z2 in range(-14, 15):
            z = (z1, z2)
            label = classify(region, z)
            if contains(inner, z):
                assert label == INTERIOR
            elif contains(region, z):
                assert label == BOUNDARY
            else:
                assert label == OUTSIDE


def test_wide_cone_is_whole_lattice():
    # opening constant above one leaves nothing outside and no boundary
    region = cone((1, 0), 1.5)
    rng = np.random.default_rng(9)
    for _ in range(60):
        z = tuple(int(v) for v in rng.integers(-50, 50, size=2))
        assert classify(region, z) == INTERIOR


def test_cone_interior_scale_invariance():
    inner = cone_interior((1, 0), 0.4)
    rng = np.random.default_rng(10)
    hits = 0
    for _ in range(400):
        z = tuple(int(v) for v in rng.integers(-8, 20, size=2))
        if contains(inner, z):
            hits += 1
            for k in (2, 3, 5):
                assert contains(inner, scale(z, k))
    assert hits > 30


def test_cone_membership_monotone_in_opening():
    rng = np.random.default_rng(11)
    narrow = cone((1, 0, 0), 0.2)
    wide = cone((1, 0, 0), 0.7)
    for _ in range(300):
        z = tuple(int(v) for v in rng.integers(-10, 20, size=3))
        if contains(narrow, z):
            assert contains(wide, z)


def test_default_collar():
    assert default_collar(2) == pytest.approx(4 * math.sqrt(2))
    assert default_collar(3) == pytest.approx(4 * math.sqrt(3))


def test_member_mask_matches_scalar_all_kinds():
    regions = [lattice(2), cone((1, 0), 0.5), cone_interior((1, 2), 0.6),
               cylinder((1, 0), 6.0), capsule((0, 0), (7, 3), 5.8),
               halfspace((1, 0)), logwedge(1.5)]
    xs = np.arange(-9, 16)
    grid = np.stack(np.meshgrid(xs, xs, indexing="ij"), axis=-1)
    coords = grid.reshape(-1, 2)
    for region in regions:
        mask = member_mask(region, coords)
        for row, m in zip(coords, mask):
            assert bool(m) == contains(region, tuple(int(c) for c in row))


def test_classify_mask_matches_scalar():
    region = cone((1, 0), 0.5)
    coords = l1_ball_sites(2, 12)
    cls = classify_mask(region, coords)
    codes = {INTERIOR: 1, BOUNDARY: 2, OUTSIDE: 0}
    for row, c in zip(coords, cls):
        z = tuple(int(v) for v in row)
        assert codes[classify(region, z)] == c


def test_halfspace_boundary_is_the_wall():
    # wall sites have a neighbor outside, so their induced degree is
    # 2d - 1; they must land in the boundary class, not the interior
    region = halfspace((1, 0))
    coords = l1_ball_sites(2, 8)
    cls = classify_mask(region, coords)
    for row, c in zip(coords, cls):
        x1 = int(row[0])
        assert c == (0 if x1 < 0 else 2 if x1 == 0 else 1)


def test_l1_ball_site_counts():
    assert len(l1_ball_sites(2, 5)) == 2 * 25 + 2 * 5 + 1
    # sum over k of 2^k C(3,k) C(3,k)
    assert len(l1_ball_sites(3, 3)) == 63


def test_neighbor_order_and_degree():
    region = lattice(2)
    assert neighbors(region, (0, 0)) == [(-1, 0), (1, 0), (0, -1), (0, 1)]
    wedge = logwedge(2.0)
    assert neighbors(wedge, (0, 0)) == [(1, 0)]
    assert geometry.degree(wedge, (0, 0)) == 1
    # wedge widens along x like 2*log(1+x)
    assert contains(wedge, (20, 6)) and not contains(wedge, (20, 7))
    assert not contains(wedge, (3, -1))


def test_segment_path_follows_the_segment():
    rng = np.random.default_rng(21)
    for d in (2, 3):
        for _ in range(40):
            y = tuple(int(v) for v in rng.integers(-4, 5, size=d))
            z = tuple(int(v) for v in rng.integers(-4, 5, size=d))
            base = tuple(int(v) for v in rng.integers(2, 30, size=d))
            yy = geometry.add(y, base)
            zz = geometry.add(z, base)
            path = segment_path(yy, zz)
            assert path[0] == yy and path[-1] == zz
            assert len(path) == l1(geometry.sub(zz, yy)) + 1
            for a, b in zip(path, path[1:]):
                assert l1(geometry.sub(b, a)) == 1
            # the path never strays beyond the connectivity sausage
            sausage = capsule(yy, zz, 4 * math.sqrt(d))
            assert all(contains(sausage, p) for p in path)


def test_detours_exist_and_are_disjoint():
    for d, direction in ((2, (1, 0)), (2, (3, 1)), (3, (1, 1, 1))):
        length = 18
        far = scale(direction, max(1, length // l1(direction)))
        region = capsule(tuple([0.0] * d), tuple(map(float, far)),
                         4 * math.sqrt(d))
        path = segment_path(tuple([0] * d), far)
        for v, w in zip(path, path[1:]):
            detours = disjoint_detours(v, w, region)
            assert len(detours) == 2 * d
            seen = set()
            for det in detours:
                assert det[0] == v and det[-1] == w
                assert len(det) - 1 <= 9
                for a, b in zip(det, det[1:]):
                    assert l1(geometry.sub(b, a)) == 1
                    assert contains(region, a) and contains(region, b)
                edges = set(path_edges(det))
                assert not edges & seen
                seen |= edges


def test_detours_raise_when_region_too_thin():
    region = capsule((0.0, 0.0), (9.0, 0.0), 1.0)
    with pytest.raises(NoDetours):
        disjoint_detours((0, 0), (1, 0), region)


def test_sausage_connectivity_random_segments():
    rng = np.random.default_rng(33)
    for d in (2, 3):
        r = math.sqrt(d)
        for _ in range(12):
            z = tuple(int(v) for v in rng.integers(-6, 7, size=d))
            rep = verify_connectivity(z, r)
            assert rep.connected and rep.n_reached == rep.n_sites


def test_boundary_partition_small_radius():
    for d, expect_q in ((2, {0, 1}), (3, {0, 1, 2})):
        region = cone(tuple([1] + [0] * (d - 1)), 0.5)
        wits = geometry.boundary_partition(region, 10)
        assert len(wits) > 0
        inner = cone_interior(tuple([1] + [0] * (d - 1)), 0.5)
        qs = set()
        for w in wits:
            qs.add(w.q)
            n = max(abs(c) for c in w.site)
            assert max(abs(c) for c in w.witness) == n
            assert contains(inner, w.witness)
            assert len(w.paths) == max(w.q, 1)
            assert l1(geometry.sub(w.witness, w.site)) <= 16 * math.sqrt(d)
            seen = set()
            for path in w.paths:
                assert path[0] == w.site and path[-1] == w.witness
                for a, b in zip(path, path[1:]):
                    assert l1(geometry.sub(b, a)) == 1
                assert all(contains(region, p) for p in path)
                edges = set(path_edges(path))
                assert not edges & seen
                seen |= edges
        assert qs <= expect_q and 1 in qs


def test_boundary_partition_example_multiplicities():
    # an off-axis perpendicular coordinate forces one path per nonzero one
    region2 = cone((1, 0), 0.5)
    wits = {w.site: w for w in geometry.boundary_partition(region2, 8)}
    site = next(s for s in wits if s[1] > 0)
    assert wits[site].q == 1 and len(wits[site].paths) == 1
    region3 = cone((1, 0, 0), 0.5)
    wits3 = {w.site: w for w in geometry.boundary_partition(region3, 8)}
    site3 = next(s for s in wits3 if s[1] != 0 and s[2] != 0)
    assert wits3[site3].q == 2 and len(wits3[site3].paths) == 2


def test_witness_counts_grow_no_faster_than_lemma_rate():
    # |D_q ∩ H_n| <= M n^(q-1) with a generous fixed M
    for d in (2, 3):
        region = cone(tuple([1] + [0] * (d - 1)), 0.5)
        wits = geometry.boundary_partition(region, 20)
        by_q = {}
        for w in wits:
            n = max(abs(c) for c in w.site)
            by_q.setdefault(w.q, []).append(n)
        for q, ns in by_q.items():
            for n in (10, 20):
                count = sum(1 for m in ns if m <= n)
                assert count <= 64 * math.sqrt(d) * n ** max(q, 1)


def test_diagonal_cone_has_one_neighbor_sites():
    # with u along (1,1,1), collar 7 and opening 1/sqrt(3), the plane
    # z3 = -7 meets the graph exactly in the diagonal z1 = z2 >= 0, and
    # each diagonal site touches the graph through a single edge
    c = 1.0 / math.sqrt(3.0)
    G = cone((1, 1, 1), c, collar=7.0)
    for k in range(0, 31):
        z = (k, k, -7)
        assert contains(G, z)
        assert neighbors(G, z) == [(k, k, -6)]
    for z1 in range(-8, 35):
        for z2 in range(-8, 35):
            want = z1 == z2 and z1 >= 0
            assert contains(G, (z1, z2, -7)) == want


def test_halfspace_projection_paths():
    for d, site in ((2, (3, 5)), (3, (4, -2, 7))):
        v = halfspace_projection(site)
        assert v == (0,) + site[1:]
        paths = projection_paths(site)
        assert len(paths) == 2 * d - 1
        lengths = sorted(len(p) - 1 for p in paths)
        assert lengths == sorted([site[0]] + [site[0] + 2] * (2 * d - 2))
        region = halfspace(tuple([1] + [0] * (d - 1)))
        seen = set()
        for path in paths:
            assert path[0] == site and path[-1] == v
            for a, b in zip(path, path[1:]):
                assert l1(geometry.sub(b, a)) == 1
            assert all(contains(region, p) for p in path)
            assert all(p[0] >= 0 for p in path)
            edges = set(path_edges(path))
            assert not edges & seen
            seen |= edges
    assert projection_paths((0, 4)) == []
    with pytest.raises(ValueError):
        halfspace_projection((-1, 2))


def test_canonical_edge():
    assert canonical_edge((2, 3), (3, 3)) == ((2, 3), 0)
    assert canonical_edge((3, 3), (2, 3)) == ((2, 3), 0)
    assert canonical_edge((0, 0), (0, -1)) == ((0, -1), 1)
    with pytest.raises(ValueError):
        canonical_edge((0, 0), (1, 1))


def test_region_json_round_trip():
    regions = [lattice(3), cone((1, 2), 0.5), cone_interior((1, 0, 0), 0.3),
               cylinder((2, 1), 6.5), capsule((0, 0), (5, 5), 5.7),
               halfspace((0, 1), offset=2.0), logwedge(2.0)]
    for region in regions:
        back = Region.from_json(region.to_json())
        assert back == region
        assert back.encode() == region.encode()


@settings(max_examples=80, deadline=None)
@given(st.integers(-30, 30), st.integers(-30, 30))
def test_classify_property(z1, z2):
    region = cone((1, 0), 0.5)
    label = classify(region, (z1, z2))
    assert label in (INTERIOR, BOUNDARY, OUTSIDE)
    assert (label != OUTSIDE) == contains(region, (z1, z2))
