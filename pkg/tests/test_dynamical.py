"""Exactness of dynamical travel-time trajectories and their envelopes.

The trajectory engine claims bit-level agreement with brute-force
snapshot searches at every time, not statistical agreement, so most
tests compare against metric.travel_time directly.
"""
import math

import numpy as np
import pytest
from scipy import stats

from conefpp import dynamical, estimators, geometry, metric
from conefpp.dynamical import (DynamicalEnvironment, envelope_travel_times,
                               dynamical_deviation_probability,
                               subcritical_window, subwindow_envelopes,
                               sup_travel_time, travel_time_at)
from conefpp.errors import BudgetExceeded
from conefpp.randomness import (bernoulli_zero, derive_seed, exponential,
                                point_mass, uniform)


def test_environment_validation():
    with pytest.raises(ValueError):
        DynamicalEnvironment(1, exponential(1.0), horizon=-1.0)
    with pytest.raises(ValueError):
        DynamicalEnvironment(1, exponential(1.0), rate=0.0)
    dyn = DynamicalEnvironment(1, exponential(1.0), horizon=0.5)
    with pytest.raises(ValueError):
        travel_time_at(dyn, geometry.lattice(2), (0, 0), (1, 0), 0.7)
    with pytest.raises(ValueError):
        travel_time_at(dyn, geometry.lattice(2), (0, 0), (1, 0), -0.1)


def test_subcritical_window_values():
    # d=2: zero density 0.35 * 1/2, so delta = -log(1 - 0.175)
    assert subcritical_window(2, 1.0) == pytest.approx(0.19237, abs=1e-4)
    assert subcritical_window(2, 2.0) == pytest.approx(0.19237 / 2, abs=1e-4)
    assert subcritical_window(3, 1.0) == pytest.approx(
        -math.log(1.0 - 0.35 * 0.2488), abs=1e-4)
    # an existing zero atom shortens the window
    assert subcritical_window(2, 1.0, zero_mass=0.1) == pytest.approx(
        math.log(0.9 / 0.825), abs=1e-5)
    with pytest.raises(ValueError):
        subcritical_window(2, 1.0, zero_mass=0.3)


@pytest.mark.parametrize("region,dst", [
    (geometry.lattice(2), (4, 1)),
    (geometry.cone((1, 0), 0.5), (5, 0)),
    (geometry.capsule((0.0, 0.0), (4.0, 0.0), 4 * math.sqrt(2)), (4, 0)),
], ids=["lattice", "cone", "capsule"])
def test_trajectory_matches_brute_force(region, dst):
    dyn = DynamicalEnvironment(1301, exponential(1.0), horizon=0.8)
    traj = sup_travel_time(dyn, region, (0, 0), dst, window=(0.0, 0.8))
    assert traj.values[0] == travel_time_at(dyn, region, (0, 0), dst,
                                            0.0).cost
    assert traj.breakpoints == sorted(traj.breakpoints)
    assert all(0.0 < t <= 0.8 for t in traj.breakpoints)
    assert len(traj.values) == len(traj.breakpoints) + 1
    assert traj.events == len(traj.breakpoints)
    probes = list(traj.breakpoints)
    probes += [t + 1e-7 for t in traj.breakpoints[:-1]]
    probes += list(np.random.default_rng(7).uniform(0.0, 0.8, size=30))
    for s in probes:
        s = min(s, 0.8)
        want = travel_time_at(dyn, region, (0, 0), dst, s).cost
        assert traj.value_at(s) == pytest.approx(want, rel=1e-9), s
    assert traj.sup == max(traj.values)
    assert traj.inf == min(traj.values)


def test_trajectory_point_mass_is_constant():
    dyn = DynamicalEnvironment(5, point_mass(1.0), horizon=1.0, rate=2.0)
    region = geometry.lattice(2)
    traj = sup_travel_time(dyn, region, (0, 0), (3, 2))
    assert traj.sup == traj.inf == 5.0
    assert all(v == 5.0 for v in traj.values)
    # clocks still ring: events count activity, not value changes
    assert traj.events == len(traj.breakpoints)
    assert traj.recomputes >= 2  # one seam resolve per sub-window


def test_trajectory_same_site_is_zero():
    dyn = DynamicalEnvironment(5, exponential(1.0))
    traj = sup_travel_time(dyn, geometry.lattice(2), (2, 2), (2, 2))
    assert traj.sup == 0.0 and traj.values == [0.0] and traj.events == 0


def test_breakpoints_are_ring_times_of_region_edges():
    dyn = DynamicalEnvironment(77, uniform(0.2, 1.0), horizon=0.6)
    region = geometry.capsule((0.0, 0.0), (3.0, 0.0), 4 * math.sqrt(2))
    traj = sup_travel_time(dyn, region, (0, 0), (3, 0), window=(0.0, 0.6))
    sites = [tuple(int(c) for c in row) for row in
             geometry.l1_ball_sites(2, 12)
             if geometry.contains(region, tuple(int(c) for c in row))]
    all_rings = set()
    for z in sites:
        for ax in range(2):
            nb = (z[0] + (ax == 0), z[1] + (ax == 1))
            if geometry.contains(region, nb):
                all_rings.update(dyn.field.ring_times(z, ax, 0.0, 0.6))
    for t in traj.breakpoints:
        assert t in all_rings


def test_envelopes_bracket_the_trajectory():
    dyn = DynamicalEnvironment(909, exponential(1.0), horizon=0.6)
    region = geometry.lattice(2)
    src, dst = (0, 0), (4, 0)
    traj = sup_travel_time(dyn, region, src, dst, window=(0.0, 0.6))
    pieces = subwindow_envelopes(dyn, region, src, dst, (0.0, 0.6), 0.15)
    assert [p[0] for p in pieces] == pytest.approx([0.0, 0.15, 0.3, 0.45])
    for t0, t1, bar, hat in pieces:
        seg = [traj.value_at(t0)]
        seg += [v for t, v in zip(traj.breakpoints, traj.values[1:])
                if t0 < t <= t1]
        assert bar <= min(seg) + 1e-9
        assert hat >= max(seg) - 1e-9


def test_degenerate_envelope_window_equals_snapshot():
    dyn = DynamicalEnvironment(11, exponential(1.0), horizon=1.0)
    region = geometry.lattice(2)
    snap = travel_time_at(dyn, region, (0, 0), (3, 1), 0.25).cost
    bar, hat = envelope_travel_times(dyn, region, (0, 0), (3, 1), 0.0,
                                     start=0.25)
    assert bar == snap and hat == snap
    with pytest.raises(ValueError):
        envelope_travel_times(dyn, region, (0, 0), (3, 1), -0.1)


def test_supercritical_bar_field_surfaces_as_budget_error():
    # a 0.6 zero atom percolates, so the lower envelope of a long
    # window floods an infinite zero cluster instead of certifying
    dist = bernoulli_zero(0.6, 1.0)
    dyn = DynamicalEnvironment(3, dist, horizon=1.0)
    region = geometry.lattice(2)
    with pytest.raises(ValueError):
        subcritical_window(2, 1.0, zero_mass=dist.zero_mass())
    with pytest.raises(BudgetExceeded):
        sup_travel_time(dyn, region, (0, 0), (8, 0), delta=1.0, cap=30_000)


def test_marginal_stationarity_ks():
    # independent replica banks at s=0 and s=0.9: same marginal law
    region = geometry.lattice(2)
    z = (5, 0)
    n = 150

    def sample(bank, s):
        out = []
        for k in range(n):
            dyn = DynamicalEnvironment(derive_seed(5050 + bank, k),
                                       exponential(1.0), horizon=1.0)
            out.append(travel_time_at(dyn, region, (0, 0), z, s).cost)
        return np.array(out)

    at0 = sample(0, 0.0)
    late = sample(1, 0.9)
    assert stats.ks_2samp(at0, late).pvalue > 0.01


def test_dynamical_deviation_dominates_static():
    dist = exponential(1.0)
    region = geometry.lattice(2)
    mu_ref = estimators.estimate_time_constant(dist, (1, 0), 64, 48,
                                               seed=5, jobs=4)
    z, eps, reps, seed = (5, 0), 0.35, 24, 777
    stat = estimators.deviation_probability(dist, region, z, eps, reps,
                                            mu_ref, seed=seed)
    dyn = dynamical_deviation_probability(dist, region, z, eps, reps,
                                          mu_ref, seed=seed, jobs=4)
    # same derived seeds and the s=0 snapshot is the static field, so
    # domination holds replica by replica
    for d_hit, s_hit in zip(dyn.values, stat.values):
        assert d_hit or not s_hit
    assert dyn.p_hat >= stat.p_hat
    assert dyn.wilson_ci[0] <= dyn.p_hat <= dyn.wilson_ci[1]


def test_deviation_plugin_gate():
    dist = exponential(1.0)
    rough = estimators.estimate_time_constant(dist, (1, 0), 4, 2, seed=1)
    with pytest.raises(ValueError, match="plug-in"):
        dynamical_deviation_probability(dist, geometry.lattice(2), (4, 0),
                                        0.05, 4, rough, seed=2)


def test_trajectory_serialization():
    dyn = DynamicalEnvironment(21, exponential(1.0), horizon=0.5)
    traj = sup_travel_time(dyn, geometry.lattice(2), (0, 0), (3, 0),
                           window=(0.0, 0.5))
    csv_text = traj.to_csv()
    lines = csv_text.strip().split("\n")
    assert lines[0] == "time,cost"
    assert len(lines) == 1 + len(traj.values)
    first_t, first_v = lines[1].split(",")
    assert float(first_t) == 0.0
    assert float(first_v) == traj.values[0]
    doc = traj.to_json()
    assert doc["sup"] == traj.sup and doc["events"] == traj.events
    assert len(doc["box_edges"]) == traj.recomputes or \
        len(doc["box_edges"]) >= 1
    with pytest.raises(ValueError):
        traj.value_at(0.7)
