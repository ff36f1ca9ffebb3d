"""``cflab`` command line: run scenarios, sweeps and verification.

Every command writes its files under ``--out`` together with a
``manifest.json`` listing the artifacts and the SHA-256 of the effective
configuration.  Exit codes: 0 success, 1 failed checks (``verify``),
2 configuration error.
"""

from __future__ import annotations

import argparse
import hashlib
import os
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from . import scenarios as S
from .diagnostics import (
    asymptotic_cycle,
    basin_map,
    basin_to_csv,
    classify_samples,
    labels_agree,
    leaf_trace,
    recurrence_distances,
)
from .integrator import default_threads, format_float, integrate, integrate_many, sample_analytic
from .lyapunov import lyapunov_spectrum
from .serialize import config_hash, dumps
from .svg import line_plot, raster_plot

VERBS = ("simulate", "classify", "basin", "lyapunov", "leaf", "recurrence", "cycle", "scenario-list", "verify")


class UsageError(Exception):
    """A request the chosen scenario cannot serve."""


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="registered scenario name ('all' for verify)")
    common.add_argument("--config", help="JSON scenario config {name, params, integrator}")
    common.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                        help="override a scenario parameter (repeatable)")
    common.add_argument("--out", default="cflab-out", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: CFLAB_THREADS or all cores)")
    common.add_argument("--seed", type=int, default=0, help="seed for sampled initial conditions")

    p = argparse.ArgumentParser(prog="cflab", description="Numerical laboratory for conformal Hamiltonian flows.")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("simulate", parents=[common], help="integrate orbits; trajectory CSV and SVG plots")
    s.add_argument("--x0", action="append", help="initial point as comma-separated coordinates (repeatable)")
    s.add_argument("--t", type=float, help="time horizon (negative for backward)")
    s.add_argument("--samples", type=int, default=401, help="output samples per orbit")

    s = sub.add_parser("classify", parents=[common], help="forward/backward winding labels")
    s.add_argument("--x0", action="append")
    s.add_argument("--n", type=int, default=100, help="number of sampled points when no --x0 is given")
    s.add_argument("--t", type=float)

    s = sub.add_parser("basin", parents=[common], help="label a grid by attractor")
    s.add_argument("--grid", type=int, help="cells per axis")
    s.add_argument("--t", type=float)

    s = sub.add_parser("lyapunov", parents=[common], help="Lyapunov spectrum and symmetry residuals")
    s.add_argument("--x0")
    s.add_argument("--t", type=float, default=200.0)
    s.add_argument("--renorm-dt", type=float, default=0.5)

    s = sub.add_parser("leaf", parents=[common], help="trace a leaf of ker(dH - H eta)")
    s.add_argument("--x0", action="append")
    s.add_argument("--arclen", type=float, default=2.0)
    s.add_argument("--steps", type=int, default=1000)

    s = sub.add_parser("recurrence", parents=[common], help="fraction of eps-recurrent samples")
    s.add_argument("--n", type=int, default=100)
    s.add_argument("--t", type=float)
    s.add_argument("--eps", type=float, default=0.05)

    s = sub.add_parser("cycle", parents=[common], help="asymptotic cycle against the coordinate 1-forms")
    s.add_argument("--x0")
    s.add_argument("--t", type=float, default=1000.0)

    sub.add_parser("scenario-list", parents=[common], help="list scenarios and their parameters")

    sub.add_parser("verify", parents=[common], help="run expected checks; exit 1 on failure")
    return p


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def _overrides(items):
    out = {}
    for item in items:
        if "=" not in item:
            raise S.ConfigError(f"param {item!r}", "expected KEY=VALUE")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _config(args, name: Optional[str] = None) -> S.ScenarioConfig:
    if args.config:
        if not os.path.exists(args.config):
            raise S.ConfigError("config", f"no such file {args.config!r}")
        cfg = S.ScenarioConfig.from_json(args.config)
        if name is not None and name != cfg.name:
            cfg = S.ScenarioConfig(name, {}, cfg.integrator)
    else:
        name = name or args.scenario
        if not name:
            raise S.ConfigError("scenario", "give --scenario or --config")
        cfg = S.ScenarioConfig.from_dict({"name": name})
    params = {**cfg.params, **_overrides(args.param)}
    return S.ScenarioConfig(cfg.name, params, cfg.integrator, cfg.expected)


def _effective(cfg: S.ScenarioConfig, sc: S.Scenario) -> dict:
    d = cfg.to_dict()
    d["params"] = sc.params
    d["integrator"] = sc.options.to_dict()
    return d


def _vector(text, key, dim):
    try:
        v = np.array([float(c) for c in text.split(",")])
    except ValueError:
        raise S.ConfigError(key, f"expected comma-separated numbers, got {text!r}") from None
    if v.shape != (dim,):
        raise S.ConfigError(key, f"expected {dim} coordinates, got {len(v)}")
    return v


def _points(args, sc, attr="x0"):
    raw = getattr(args, attr, None)
    if raw is None:
        return None
    raw = raw if isinstance(raw, list) else [raw]
    return np.array([_vector(t, f"--{attr}", sc.dim) for t in raw])


class _Out:
    def __init__(self, root):
        self.root = root
        self.files = []
        os.makedirs(root, exist_ok=True)

    def write(self, name, text):
        path = os.path.join(self.root, name)
        with open(path, "w", newline="") as fh:
            fh.write(text)
        self.files.append(name)

    def manifest(self, verb, config, seed, extra=None):
        arts = []
        for name in self.files:
            with open(os.path.join(self.root, name), "rb") as fh:
                arts.append({"path": name, "sha256": hashlib.sha256(fh.read()).hexdigest()})
        doc = {"command": verb, "config": config, "config_sha256": config_hash(config), "seed": seed,
               "artifacts": arts}
        if extra:
            doc.update(extra)
        with open(os.path.join(self.root, "manifest.json"), "w") as fh:
            fh.write(dumps(doc))


def _need_system(sc, what):
    if sc.system is None:
        raise UsageError(f"scenario {sc.name!r} is given by a closed-form flow; {what} needs an integrable field")


def _phase_curves(x, mask, axes=(0, 1)):
    xs = np.array(x[:, list(axes)], dtype=float)
    for k, ax in enumerate(axes):
        if mask is not None and mask[ax]:
            xs[:, k] = np.mod(xs[:, k], 1.0)
    # break the polyline where a reduced angle wraps
    jumps = np.any(np.abs(np.diff(xs, axis=0)) > 0.5, axis=1)
    out = []
    for i, row in enumerate(xs):
        out.append(row)
        if i < len(jumps) and jumps[i]:
            out.append([np.nan, np.nan])
    out = np.array(out)
    return out[:, 0], out[:, 1]


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------


def _simulate(args, sc, out):
    T = sc.horizon if args.t is None else args.t
    pts = _points(args, sc)
    pts = sc.default_x0[None] if pts is None else pts
    times = np.linspace(0.0, T, max(2, args.samples))
    trajs = []
    for k, x0 in enumerate(pts):
        if sc.system is not None:
            tr = integrate(sc.system, x0, T, sc.options, times)
        else:
            tr = sample_analytic(sc.flow_model, x0, times)
        trajs.append(tr)
        out.write("trajectory.csv" if len(pts) == 1 else f"trajectory_{k}.csv", tr.to_csv())
    labels = getattr(sc.system.model if sc.system is not None else sc.flow_model, "labels", ()) or ()
    mask = sc.periodic_mask
    curves = [_phase_curves(tr.x, mask) for tr in trajs]
    xl = labels[0] if labels else "x_0"
    yl = labels[1] if len(labels) > 1 else "x_1"
    lim = (0.0, 1.0) if mask is not None and mask[0] else None
    limy = (0.0, 1.0) if mask is not None and mask[1] else None
    out.write("phase.svg", line_plot(curves, xl, yl, f"{sc.name}: phase portrait", xlim=lim, ylim=limy))
    out.write("winding.svg", line_plot([(tr.t, tr.r) for tr in trajs], "t", "r_t", f"{sc.name}: winding"))
    return 0


def _classify(args, sc, out):
    T = sc.horizon if args.t is None else args.t
    pts = _points(args, sc)
    pts = sc.sample(args.n, args.seed) if pts is None else pts
    times = np.linspace(0.0, T, 401)
    if sc.system is not None:
        f = integrate_many(sc.system, pts, T, sc.options, times, threads=args.threads)
        b = integrate_many(sc.system, pts, -T, sc.options, -times, threads=args.threads)
        fr, br = f.r, b.r
    else:
        fr = np.array([sample_analytic(sc.flow_model, z, times).r for z in pts]).T
        br = np.array([sample_analytic(sc.flow_model, z, -times).r for z in pts]).T
    fwd = classify_samples(times, fr)
    bwd = classify_samples(-times, br)
    records = [{"x0": p, "forward": f_.to_dict(), "backward": b_.to_dict(),
                "agree": labels_agree(f_, b_)} for p, f_, b_ in zip(pts, fwd, bwd)]
    counts = {}
    for r in records:
        counts[r["forward"]["label"]] = counts.get(r["forward"]["label"], 0) + 1
    summary = {"horizon": T, "count": len(records), "forward_labels": dict(sorted(counts.items())),
               "agreement": float(np.mean([r["agree"] for r in records])), "records": records}
    out.write("classification.json", dumps(summary))
    return 0


def _basin(args, sc, out):
    _need_system(sc, "basin")
    if sc.grid is None or not sc.attractors:
        raise UsageError(f"scenario {sc.name!r} has no grid or attractor descriptors")
    T = sc.horizon if args.t is None else args.t
    grid = sc.grid if args.grid is None else replace(sc.grid, n=(args.grid, args.grid))
    cells = basin_map(sc.system, grid, sc.attractors, T, sc.options, threads=args.threads)
    out.write("basin.csv", basin_to_csv(cells, grid))
    labels = np.empty(grid.n, dtype=object)
    for c in cells:
        labels[c.i, c.j] = c.label
    names = [a.name for a in sc.attractors]
    ax, ay = grid.axes
    axis_names = sc.system.model.labels
    out.write("basin.svg", raster_plot(labels, names, (grid.lo[0], grid.hi[0]), (grid.lo[1], grid.hi[1]),
                                       axis_names[ax], axis_names[ay], f"{sc.name}: basins at T={format_float(T)}"))
    counts = {}
    for c in cells:
        counts[c.label] = counts.get(c.label, 0) + 1
    out.write("basin.json", dumps({"horizon": T, "grid": list(grid.n), "labels": dict(sorted(counts.items()))}))
    return 0


def _lyapunov(args, sc, out):
    _need_system(sc, "lyapunov")
    if args.x0 is not None:
        x0 = _vector(args.x0, "--x0", sc.dim)
    elif sc.periodic_orbits:
        # the spectrum of the distinguished periodic orbit is the interesting default
        x0 = next(iter(sc.periodic_orbits.values()))[0]
    else:
        x0 = sc.default_x0
    rep = lyapunov_spectrum(sc.system, x0, args.t, args.renorm_dt, sc.options)
    out.write("lyapunov.json", dumps({"x0": x0, **rep.to_dict()}))
    return 0


def _leaf(args, sc, out):
    _need_system(sc, "leaf")
    if sc.dim != 2:
        raise UsageError("leaf tracing is defined on surfaces only")
    pts = _points(args, sc)
    pts = sc.default_x0[None] if pts is None else pts
    results = []
    curves = []
    for k, x0 in enumerate(pts):
        lt = leaf_trace(sc.system, x0, args.arclen, args.steps)
        s = np.linspace(0.0, args.arclen, args.steps + 1)
        lines = ["s,x,y,eta_integral,residual"]
        for row in zip(s, lt.curve[:, 0], lt.curve[:, 1], lt.eta_integral, lt.residuals):
            lines.append(",".join(format_float(v) for v in row))
        out.write("leaf.csv" if len(pts) == 1 else f"leaf_{k}.csv", "\n".join(lines) + "\n")
        results.append({"x0": x0, "arclen": args.arclen, "steps": args.steps, "residual": lt.residual})
        curves.append(_phase_curves(lt.curve, sc.periodic_mask))
    labels = sc.system.model.labels
    out.write("leaf.svg", line_plot(curves, labels[0], labels[1], f"{sc.name}: leaves of ker(dH - H eta)",
                                    xlim=(0.0, 1.0), ylim=(0.0, 1.0)))
    out.write("leaf.json", dumps({"leaves": results}))
    return 0


def _recurrence(args, sc, out):
    _need_system(sc, "recurrence")
    if not args.eps > 0:
        raise S.ConfigError("--eps", "must be positive")
    T = sc.horizon if args.t is None else args.t
    pts = sc.sample(args.n, args.seed)
    d = recurrence_distances(sc.system, pts, T, opts=sc.options)
    out.write("recurrence.json", dumps({"horizon": T, "eps": args.eps, "count": len(pts),
                                        "fraction": float(np.mean(d <= args.eps)),
                                        "min_distance": d}))
    return 0


def _cycle(args, sc, out):
    _need_system(sc, "cycle")
    x0 = sc.default_x0 if args.x0 is None else _vector(args.x0, "--x0", sc.dim)
    tr = integrate(sc.system, x0, args.t, sc.options)
    basis = list(np.eye(sc.dim))
    A = asymptotic_cycle(tr, basis)
    eta = sc.system.model.eta(x0)
    out.write("cycle.json", dumps({"x0": x0, "horizon": args.t, "basis": list(sc.system.model.labels),
                                   "cycle": A, "eta_pairing": float(np.dot(eta, A))}))
    return 0


def _scenario_list(args):
    for name, spec in S.REGISTRY.items():
        print(f"{name}: {spec.doc}")
        for key, ps in spec.params.items():
            extra = f" [{ps.range_doc}]" if ps.range_doc else ""
            print(f"    {key} ({ps.kind}, default {ps.default}): {ps.doc}{extra}")
    return 0


def _verify(args, out):
    names = S.names() if (args.scenario == "all" and not args.config) else [None]
    reports, configs = [], []
    for name in names:
        cfg = _config(args, name)
        sc = S.build_from_config(cfg)
        rep = S.verify(sc, seed=args.seed, threads=args.threads or 1)
        reports.append(rep)
        configs.append(_effective(cfg, sc))
        for r in rep.results:
            print(f"{'PASS' if r.passed else 'FAIL'} {sc.name} {r.id} deviation={format_float(r.deviation)} tol={format_float(r.tol)}")
    ok = all(r.passed for r in reports)
    out.write("verify.json", dumps({"seed": args.seed, "passed": ok, "scenarios": [r.to_dict() for r in reports]}))
    config = configs[0] if len(configs) == 1 else {"scenarios": configs}
    out.manifest("verify", config, args.seed)
    print("verify:", "all checks passed" if ok else "some checks failed")
    return 0 if ok else 1


_HANDLERS = {
    "simulate": _simulate,
    "classify": _classify,
    "basin": _basin,
    "lyapunov": _lyapunov,
    "leaf": _leaf,
    "recurrence": _recurrence,
    "cycle": _cycle,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.threads is None:
        args.threads = default_threads()
    if args.threads < 1:
        print("error: --threads: must be >= 1", file=sys.stderr)
        return 2
    try:
        if args.verb == "scenario-list":
            return _scenario_list(args)
        out = _Out(args.out)
        if args.verb == "verify":
            return _verify(args, out)
        cfg = _config(args)
        sc = S.build_from_config(cfg)
        code = _HANDLERS[args.verb](args, sc, out)
        out.manifest(args.verb, _effective(cfg, sc), args.seed)
        return code
    except S.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
