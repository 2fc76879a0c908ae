"""Config-driven experiment runner with content-addressed outputs.

One JSON config fully determines a run; results land under
out/<kind>/<config-hash>/ as result.json (+ data.csv, plot.svg where
applicable) so reruns never clobber.  Timestamps live in a separate
meta.json, keeping result.json byte-identical across reruns.
"""

import argparse
import hashlib
import json
import math
import os
import random
import sys
import time
from pathlib import Path

from . import __version__, dynamical, estimators, geometry, metric, \
    randomness, shape, svgplot
from .errors import BudgetExceeded, NoPlot, ValidationError
from .randomness import derive_seed

KINDS = ("mu", "cylinder-mu", "deviation", "tail-sum", "lp", "shape",
         "log-wedge", "dynamical", "verify-geometry", "mu-continuity")

# seed branch for internal plug-in estimates, distinct from replica
# branches k = 0, 1, ... used by the estimators themselves
_MU_BRANCH = 0x6D75


def _fail(field, msg):
    raise ValidationError(f"{field}: {msg}")


def _need(cfg, field, types, pred=None, what=""):
    if field not in cfg:
        _fail(field, "required for this experiment kind")
    v = cfg[field]
    if not isinstance(v, types):
        _fail(field, f"expected {what or types}, got {type(v).__name__}")
    if pred is not None and not pred(v):
        _fail(field, f"invalid value {v!r}")
    return v


def _int_list(cfg, field):
    v = _need(cfg, field, list, lambda xs: len(xs) > 0, "non-empty list")
    if not all(isinstance(x, int) for x in v):
        _fail(field, "expected a list of integers")
    return v


def _site(cfg, field="z"):
    v = _int_list(cfg, field)
    if all(x == 0 for x in v):
        _fail(field, "must be a nonzero site")
    return tuple(v)


def _dist(cfg):
    doc = _need(cfg, "dist", dict, what="distribution object")
    try:
        return randomness.Distribution.from_json(doc)
    except (KeyError, TypeError, ValueError) as e:
        _fail("dist", str(e))


def _region(cfg, d, default=None):
    doc = cfg.get("region")
    if doc is None:
        return default if default is not None else geometry.lattice(d)
    try:
        reg = geometry.Region.from_json(doc)
    except (KeyError, TypeError, ValueError) as e:
        _fail("region", str(e))
    if reg.d != d:
        _fail("region", f"dimension {reg.d} does not match sites of "
              f"dimension {d}")
    return reg


def normalize_config(doc, seed=None, jobs=None, out=None):
    """Fill defaults, apply flag overrides, validate what is cheap."""
    if not isinstance(doc, dict):
        _fail("config", "top level must be a JSON object")
    cfg = dict(doc)
    kind = cfg.get("kind")
    if kind not in KINDS:
        _fail("kind", f"must be one of {', '.join(KINDS)}")
    if seed is not None:
        cfg["seed"] = seed
    if "seed" not in cfg:
        env = os.environ.get("CONEFPP_SEED")
        if env is None:
            _fail("seed", "missing (set in config, --seed, or CONEFPP_SEED)")
        try:
            cfg["seed"] = int(env)
        except ValueError:
            _fail("seed", f"CONEFPP_SEED={env!r} is not an integer")
    if not isinstance(cfg["seed"], int):
        _fail("seed", "must be an integer")
    if jobs is not None:
        cfg["jobs"] = jobs
    cfg.setdefault("jobs", 1)
    if not isinstance(cfg["jobs"], int) or cfg["jobs"] < 1:
        _fail("jobs", "must be a positive integer")
    if out is not None:
        cfg["out"] = out
    cfg.setdefault("out", "out")
    cfg.setdefault("cap", metric.DEFAULT_CAP)
    if not isinstance(cfg["cap"], int) or cfg["cap"] < 1:
        _fail("cap", "must be a positive integer")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _replicas(cfg, default=None):
    if default is not None:
        cfg.setdefault("replicas", default)
    return _need(cfg, "replicas", int, lambda v: v >= 1,
                 "positive integer")


def _mu_ref(cfg, dist, z, region):
    n = _need(cfg, "n", int, lambda v: v >= 1, "positive integer")
    mu_reps = cfg.get("mu_replicas", cfg.get("replicas", 32))
    return estimators.estimate_time_constant(
        dist, z, n, mu_reps, derive_seed(cfg["seed"], _MU_BRANCH),
        region=region, cap=cfg["cap"], jobs=cfg["jobs"])


def _csv(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(repr(x) if isinstance(x, float) else str(x)
                              for x in row))
    return "\n".join(lines) + "\n"


def _run_mu(cfg):
    dist = _dist(cfg)
    z = _site(cfg)
    region = _region(cfg, len(z))
    n = _need(cfg, "n", int, lambda v: v >= 1, "positive integer")
    reps = _replicas(cfg)
    est = estimators.estimate_time_constant(
        dist, z, n, reps, cfg["seed"], region=region, cap=cfg["cap"],
        jobs=cfg["jobs"])
    metrics = {"mu": est.to_json()}
    raw = {"values": [float(v) for v in est.values]}
    csv = _csv(("replica", "value"),
               [(k, float(v)) for k, v in enumerate(est.values)])
    return metrics, raw, csv


def _run_cylinder_mu(cfg):
    dist = _dist(cfg)
    z = _site(cfg)
    rs = cfg.get("r")
    if isinstance(rs, (int, float)):
        rs = [rs]
    if not isinstance(rs, list) or not rs or \
            not all(isinstance(r, (int, float)) for r in rs):
        _fail("r", "expected a radius or list of radii")
    n = _need(cfg, "n", int, lambda v: v >= 1, "positive integer")
    reps = _replicas(cfg)
    per_r = {}
    values = {}
    for r in rs:
        est = estimators.estimate_cylinder_constant(
            dist, z, float(r), n, reps, cfg["seed"], cap=cfg["cap"],
            jobs=cfg["jobs"])
        per_r[str(r)] = {"mean": est.mean, "stderr": est.stderr}
        values[str(r)] = [float(v) for v in est.values]
    lat = estimators.estimate_time_constant(
        dist, z, n, reps, cfg["seed"], cap=cfg["cap"], jobs=cfg["jobs"])
    metrics = {
        "per_radius": per_r,
        "lattice": {"mean": lat.mean, "stderr": lat.stderr},
        "trend": [[float(r), per_r[str(r)]["mean"]] for r in rs],
        "xlabel": "cylinder radius",
        "ylabel": "mu_hat per unit l1",
    }
    raw = {"values": values, "lattice_values": [float(v)
                                                for v in lat.values]}
    csv = _csv(("radius", "mean", "stderr"),
               [(float(r), per_r[str(r)]["mean"], per_r[str(r)]["stderr"])
                for r in rs])
    return metrics, raw, csv


def _run_deviation(cfg):
    dist = _dist(cfg)
    z = _site(cfg)
    region = _region(cfg, len(z))
    eps = _need(cfg, "epsilon", (int, float), lambda v: v > 0,
                "positive number")
    reps = _replicas(cfg)
    mu = _mu_ref(cfg, dist, z, region)
    dev = estimators.deviation_probability(
        dist, region, z, float(eps), reps, mu, cfg["seed"],
        cap=cfg["cap"], jobs=cfg["jobs"])
    metrics = {"deviation": dev.to_json()}
    raw = {"hits": [bool(v) for v in dev.values]}
    csv = _csv(("replica", "deviates"),
               [(k, int(v)) for k, v in enumerate(dev.values)])
    return metrics, raw, csv


def _run_tail_sum(cfg):
    dist = _dist(cfg)
    d = _need(cfg, "d", int, lambda v: v >= 2, "dimension >= 2") \
        if "z" not in cfg else len(_site(cfg))
    region = _region(cfg, d)
    eps = _need(cfg, "epsilon", (int, float), lambda v: v > 0,
                "positive number")
    p = _need(cfg, "p", (int, float), lambda v: v > 0, "positive number")
    radius = _need(cfg, "R", int, lambda v: v >= 2, "radius >= 2")
    reps = _replicas(cfg)
    site_set = cfg.get("site_set", "interior")
    if site_set not in ("interior", "boundary"):
        _fail("site_set", "must be 'interior' or 'boundary'")
    cfg.setdefault("n", 64)
    zref = tuple([1] + [0] * (d - 1))
    mu = _mu_ref(cfg, dist, zref, region)
    diag = estimators.tail_sum(
        dist, region, float(p), float(eps), radius, reps, mu,
        cfg["seed"], site_set=site_set, cap=cfg["cap"], jobs=cfg["jobs"])
    metrics = {
        "slope": diag.slope,
        "verdict": diag.verdict,
        "p": float(p),
        "epsilon": float(eps),
        "R": radius,
        "site_set": site_set,
        "trend": [[float(r), float(diag.partial_sums[r])]
                  for r in sorted(diag.partial_sums)],
        "loglog": True,
        "xlabel": "l1 radius",
        "ylabel": "partial tail sum",
    }
    raw = {"partial_sums": {str(r): float(v)
                            for r, v in sorted(diag.partial_sums.items())},
           "p_hat": [float(v) for v in diag.p_hat]}
    csv = _csv(("radius", "partial_sum"),
               [(float(r), float(diag.partial_sums[r]))
                for r in sorted(diag.partial_sums)])
    return metrics, raw, csv


def _run_lp(cfg):
    dist = _dist(cfg)
    z = _site(cfg)
    region = _region(cfg, len(z))
    p = _need(cfg, "p", (int, float), lambda v: v > 0, "positive number")
    reps = _replicas(cfg)
    mu = _mu_ref(cfg, dist, z, region)
    mean, ci, stderr = estimators.lp_deviation(
        dist, region, z, float(p), reps, mu, cfg["seed"],
        cap=cfg["cap"], jobs=cfg["jobs"])
    metrics = {"lp_mean": mean, "ci": list(ci), "stderr": stderr,
               "p": float(p), "mu": mu.to_json()}
    return metrics, {}, None


def _run_shape(cfg):
    dist = _dist(cfg)
    d = cfg.get("d", 2)
    if d != 2:
        _fail("d", "shape experiments are 2d (angular interpolation)")
    t = _need(cfg, "t", (int, float), lambda v: v > 0, "positive number")
    eps = _need(cfg, "epsilon", (int, float), lambda v: v > 0,
                "positive number")
    n = _need(cfg, "n", int, lambda v: v >= 4, "target scale >= 4")
    reps = _replicas(cfg)
    region = _region(cfg, d, default=geometry.lattice(d))
    ls = shape.limit_shape(dist, shape.full_fan(d), n, reps,
                           derive_seed(cfg["seed"], _MU_BRANCH),
                           cap=cfg["cap"], jobs=cfg["jobs"])
    reference = ls
    if region.kind == "cone":
        reference = shape.restrict_shape(ls, region)
    shape_reps = cfg.get("shape_replicas", 1)
    sups, lowers, uppers = [], [], []
    first_cells = None
    for k in range(shape_reps):
        fld = randomness.WeightField(derive_seed(cfg["seed"], k), dist)
        se = shape.empirical_shape(region, fld, float(t), cap=cfg["cap"])
        rep = shape.shape_deviation(se, reference, float(eps))
        sups.append(rep.sup_deviation)
        lowers.append(rep.lower_included)
        uppers.append(rep.upper_included)
        if first_cells is None:
            first_cells = se.sites.tolist()
    metrics = {
        "t": float(t),
        "epsilon": float(eps),
        "lower_included": lowers,
        "upper_included": uppers,
        "sup_deviation": sups,
        "polygon": [[x, y] for x, y in ls.polygon_points()],
        "mu_stderr": ls.stderr,
    }
    if region.kind == "cone":
        metrics["cone"] = {"c": region.c, "axis": list(region.axis)}
    raw = {"cells": first_cells}
    csv = _csv(("z1", "z2"), [tuple(z) for z in first_cells])
    return metrics, raw, csv


def _run_log_wedge(cfg):
    dist = _dist(cfg)
    a = _need(cfg, "a", (int, float), lambda v: v > 0, "positive slope")
    ns = _int_list(cfg, "ns")
    reps = _replicas(cfg, default=8)
    region = geometry.logwedge(float(a))
    values = {}
    for n in ns:
        target = (n, 1)
        def one(k, n=n, target=target):
            fld = randomness.WeightField(derive_seed(cfg["seed"], k), dist)
            return metric.travel_time(region, fld, (0, 0), target,
                                      cap=cfg["cap"]).cost / n
        values[str(n)] = [float(v) for v in
                          estimators.replica_map(one, reps, cfg["jobs"])]
    medians = {n: sorted(values[str(n)])[len(values[str(n)]) // 2]
               for n in ns}
    metrics = {
        "a": float(a),
        "medians": {str(n): medians[n] for n in ns},
        "ratio_last_first": medians[ns[-1]] / medians[ns[0]]
        if medians[ns[0]] > 0 else 0.0,
        "trend": [[float(n), medians[n]] for n in ns],
        "loglog": True,
        "xlabel": "n",
        "ylabel": "T(0, n e1 + e2) / n",
    }
    csv = _csv(("n", "median"), [(float(n), medians[n]) for n in ns])
    return metrics, {"values": values}, csv


def _run_dynamical(cfg):
    dist = _dist(cfg)
    z = _site(cfg)
    region = _region(cfg, len(z))
    window = cfg.get("window", [0.0, 1.0])
    if not (isinstance(window, list) and len(window) == 2):
        _fail("window", "expected [start, end]")
    rate = cfg.get("rate", 1.0)
    if not isinstance(rate, (int, float)) or rate <= 0:
        _fail("rate", "must be a positive number")
    delta = cfg.get("delta")
    origin = tuple([0] * len(z))
    dyn = dynamical.DynamicalEnvironment(
        cfg["seed"], dist, horizon=float(window[1]), rate=float(rate))
    traj = dynamical.sup_travel_time(
        dyn, region, origin, z, window=(float(window[0]),
                                        float(window[1])),
        delta=delta, cap=cfg["cap"])
    guide_delta = delta if delta is not None else \
        dynamical.subcritical_window(len(z), float(rate),
                                     dist.zero_mass())
    envelopes = dynamical.subwindow_envelopes(
        dyn, region, origin, z, (float(window[0]), float(window[1])),
        guide_delta, cap=cfg["cap"])
    metrics = {
        "sup": traj.sup,
        "inf": traj.inf,
        "events": traj.events,
        "recomputes": traj.recomputes,
        "envelopes": [[t0, t1, lo, hi] for t0, t1, lo, hi in envelopes],
    }
    raw = {"trajectory": traj.to_json()}
    return metrics, raw, traj.to_csv()


def geometry_battery(d, seed, witness_radius=60, segment_length=50,
                     pairs=50):
    """Constructive geometry checks: returns (name, passed, detail)."""
    checks = []
    rng = random.Random(seed)

    ok = True
    n_pairs = 0
    for _ in range(pairs):
        z = tuple(rng.randint(-20, 20) for _ in range(d))
        if all(c == 0 for c in z):
            z = tuple([1] + [0] * (d - 1))
        rep = geometry.verify_connectivity(z, math.sqrt(d))
        n_pairs += 1
        if not rep.connected:
            ok = False
            break
    checks.append(("sausage-connectivity", ok,
                   f"{n_pairs} random segments, radius sqrt({d})"))

    ok = True
    count = 0
    dirs = [tuple([1] + [0] * (d - 1)), tuple([1, 1] + [0] * (d - 2))]
    if d >= 3:
        dirs.append(tuple([1] * d))
    dirs.append(tuple([3, 1] + [0] * (d - 2)))
    for v in dirs:
        length = segment_length // geometry.l1(v)
        z = geometry.scale(v, length)
        sausage = geometry.capsule(tuple([0] * d), z,
                                   4.0 * math.sqrt(d))
        path = geometry.segment_path(tuple([0] * d), z)
        for a, b in zip(path, path[1:]):
            detours = geometry.disjoint_detours(a, b, sausage)
            count += 1
            used = set()
            if len(detours) != 2 * d:
                ok = False
            for p in detours:
                if len(p) - 1 > 9:
                    ok = False
                edges = {geometry.canonical_edge(u, w)
                         for u, w in zip(p, p[1:])}
                if used & edges:
                    ok = False
                used |= edges
            if not ok:
                break
        if not ok:
            break
    checks.append(("disjoint-detours", ok,
                   f"{count} consecutive pairs, {len(dirs)} directions"))

    ok = True
    detail = ""
    cone = geometry.cone(tuple([1] + [0] * (d - 1)), 0.5)
    inner = geometry.interior_of(cone)
    try:
        witnesses = geometry.boundary_partition(cone, witness_radius)
        for w in witnesses:
            if not geometry.contains(inner, w.witness):
                ok = False
            if len(w.paths) < max(w.q, 1):
                ok = False
            used = set()
            for p in w.paths:
                edges = {geometry.canonical_edge(u, v)
                         for u, v in zip(p, p[1:])}
                if used & edges:
                    ok = False
                used |= edges
        detail = f"{len(witnesses)} boundary sites, sup norm <= " \
                 f"{witness_radius}"
    except Exception as e:  # WitnessNotFound or validation failure
        ok = False
        detail = str(e)
    checks.append(("boundary-witnesses", ok, detail))
    return checks


def _run_verify_geometry(cfg):
    d = _need(cfg, "d", int, lambda v: v in (2, 3), "2 or 3")
    checks = geometry_battery(
        d, cfg["seed"], witness_radius=cfg.get("R", 60),
        segment_length=cfg.get("segment_length", 50),
        pairs=cfg.get("pairs", 50))
    metrics = {
        "checks": [{"name": n, "pass": p, "detail": det}
                   for n, p, det in checks],
        "all_pass": all(p for _, p, _ in checks),
    }
    csv = _csv(("check", "pass", "detail"),
               [(n, int(p), det) for n, p, det in checks])
    return metrics, {}, csv


def _run_mu_continuity(cfg):
    docs = _need(cfg, "dists", list, lambda v: len(v) >= 2,
                 "list of at least two distributions")
    dists = [randomness.Distribution.from_json(doc) for doc in docs]
    z = _site(cfg)
    n = _need(cfg, "n", int, lambda v: v >= 1, "positive integer")
    reps = _replicas(cfg)
    ests = estimators.mu_continuity_probe(
        dists, z, n, reps, cfg["seed"], cap=cfg["cap"], jobs=cfg["jobs"])
    means = [e.mean for e in ests]
    metrics = {
        "means": means,
        "stderrs": [e.stderr for e in ests],
        "max_gap": max(abs(a - b) for a, b in zip(means, means[1:])),
    }
    csv = _csv(("index", "mean", "stderr"),
               [(i, e.mean, e.stderr) for i, e in enumerate(ests)])
    return metrics, {"values": [[float(v) for v in e.values]
                                for e in ests]}, csv


_RUNNERS = {
    "mu": _run_mu,
    "cylinder-mu": _run_cylinder_mu,
    "deviation": _run_deviation,
    "tail-sum": _run_tail_sum,
    "lp": _run_lp,
    "shape": _run_shape,
    "log-wedge": _run_log_wedge,
    "dynamical": _run_dynamical,
    "verify-geometry": _run_verify_geometry,
    "mu-continuity": _run_mu_continuity,
}

_PLOTTABLE = {"shape", "dynamical", "tail-sum", "log-wedge",
              "cylinder-mu"}


def run(cfg, write=True):
    """Execute a normalized config; returns (record, output_dir)."""
    started = time.time()
    metrics, raw, csv = _RUNNERS[cfg["kind"]](cfg)
    record = {
        "config": cfg,
        "metrics": metrics,
        "raw": raw,
        "provenance": {"version": __version__,
                       "config_hash": config_hash(cfg)},
    }
    outdir = Path(cfg["out"]) / cfg["kind"] / config_hash(cfg)[:16]
    if write:
        outdir.mkdir(parents=True, exist_ok=True)
        (outdir / "result.json").write_text(
            json.dumps(record, sort_keys=True, indent=2) + "\n")
        if csv:
            (outdir / "data.csv").write_text(csv)
        if cfg["kind"] in _PLOTTABLE:
            (outdir / "plot.svg").write_text(emit_plot(record))
        meta = {"created_at": time.strftime("%Y-%m-%dT%H:%M:%SZ",
                                            time.gmtime()),
                "elapsed_s": round(time.time() - started, 3)}
        (outdir / "meta.json").write_text(
            json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return record, outdir


def emit_plot(record):
    """Render a result record to a standalone SVG document."""
    kind = record.get("config", {}).get("kind")
    if kind == "shape":
        return svgplot.plot_shape(record)
    if kind == "dynamical":
        return svgplot.plot_trajectory(record)
    if kind in ("tail-sum", "log-wedge", "cylinder-mu"):
        return svgplot.plot_trend(record)
    raise NoPlot(f"experiment kind {kind!r} has no plot")


def _load_json(path):
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        _fail("config", f"no such file: {path}")
    except json.JSONDecodeError as e:
        _fail("config", f"invalid JSON in {path}: {e}")


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="conefpp",
        description="First-passage percolation experiments on lattice "
                    "and cone subgraphs")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config", help="path to the JSON config")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--jobs", type=int, default=None)
    p_run.add_argument("--out", default=None)

    p_ver = sub.add_parser("verify-geometry",
                           help="run the constructive geometry checks")
    p_ver.add_argument("--d", type=int, choices=(2, 3), default=2)
    p_ver.add_argument("--seed", type=int, default=None)
    p_ver.add_argument("--radius", type=int, default=60,
                       help="sup-norm radius for boundary witnesses")
    p_ver.add_argument("--out", default=None)

    p_plot = sub.add_parser("plot", help="render a result to SVG")
    p_plot.add_argument("result", help="path to result.json")
    p_plot.add_argument("-o", "--output", default=None)

    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            cfg = normalize_config(_load_json(args.config),
                                   seed=args.seed, jobs=args.jobs,
                                   out=args.out)
            record, outdir = run(cfg)
            print(outdir)
            if record["metrics"].get("all_pass") is False:
                for c in record["metrics"]["checks"]:
                    print(f"{'PASS' if c['pass'] else 'FAIL'} "
                          f"{c['name']}: {c['detail']}")
                return 4
            return 0
        if args.command == "verify-geometry":
            cfg = normalize_config(
                {"kind": "verify-geometry", "d": args.d,
                 "R": args.radius, "seed": args.seed
                 if args.seed is not None else 0},
                out=args.out)
            record, outdir = run(cfg, write=args.out is not None)
            ok = True
            for c in record["metrics"]["checks"]:
                print(f"{'PASS' if c['pass'] else 'FAIL'} "
                      f"{c['name']}: {c['detail']}")
                ok = ok and c["pass"]
            return 0 if ok else 4
        if args.command == "plot":
            record = _load_json(args.result)
            svg = emit_plot(record)
            out = args.output or str(Path(args.result).parent / "plot.svg")
            Path(out).write_text(svg)
            print(out)
            return 0
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NoPlot as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except BudgetExceeded as e:
        print(f"budget exceeded: {e}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
