"""Command-line scenario runner.

    kgbohm run <config|bundled-name> [--workers N] [--seed S] [--out DIR]
    kgbohm list [--json]

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import congruence as cg
from . import interference as itf
from .config import ConfigError, ScenarioConfig, bundled_scenarios, load_config
from .current import CurrentField, NParticleCurrent
from .geometry import Hypersurface
from .trajectories import CSV_COLUMNS, integrate_many, integrate_n_particle, trajectory_rows

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
RETRY_SCALE = 100.0


class NumericalFailure(RuntimeError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _write_json(path: Path, doc) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _check_underflow(flags) -> None:
    if np.any(flags):
        raise NumericalFailure(f"integrator step size underflow on {int(np.sum(flags))} trajectories")


def _launch_points(cfg: ScenarioConfig, cf: CurrentField) -> np.ndarray:
    ls = cfg.launch
    w = cf.source
    if ls.points is not None:
        pts = np.array(ls.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 4:
            raise ConfigError("launch.points: expected a list of four-vectors")
    else:
        if ls.n_points <= 0:
            raise ConfigError("launch.n_points must be positive")
        pts = np.zeros((ls.n_points, 4))
        pts[:, 0] = ls.t0
        pts[:, 1] = (np.arange(ls.n_points) + 0.5) * w.box[0] / ls.n_points
        for i in range(1, w.dim):
            pts[:, 1 + i] = 0.5 * w.box[i]
    if ls.select == "negative-j0":
        pts = pts[cf.signed_time_component(pts) < 0]
        if len(pts) == 0:
            raise ConfigError("launch.select: no launch point has j^0 < 0")
    elif ls.select != "all":
        raise ConfigError("launch.select must be 'all' or 'negative-j0'")
    return pts


def _run_single(cfg: ScenarioConfig, out: Path, workers: int, tol_scale: float) -> dict:
    w = cfg.wavefunction.build()
    cf = CurrentField(w)
    pts = _launch_points(cfg, cf)
    batch = integrate_many(cf, pts, cfg.integrator.build(tol_scale), workers=workers)
    _check_underflow(batch.underflow)
    trs = batch.trajectories()
    _write_csv(out / "trajectories.csv", CSV_COLUMNS, trajectory_rows(trs))
    lo, hi = cf.time_component_range(cfg.launch.t0)
    speed_dev = 0.0
    for tr in trs:
        d = np.diff(tr.x, axis=0)
        ok = np.abs(d[:, 0]) > 0
        if ok.any():
            v = np.linalg.norm(d[ok, 1:], axis=1) / np.abs(d[ok, 0])
            speed_dev = max(speed_dev, float(np.max(np.abs(v - 1.0))))
    statuses = {}
    for tr in trs:
        statuses[tr.status] = statuses.get(tr.status, 0) + 1
    return {
        "n_trajectories": len(trs),
        "min_V_j0": lo * w.volume,
        "max_V_j0": hi * w.volume,
        "time_reversal_events": sum(len(tr.events_of("time-reversal")) for tr in trs),
        "trajectories_with_time_reversal": sum(bool(tr.events_of("time-reversal")) for tr in trs),
        "max_abs_speed_minus_one": speed_dev,
        "status_counts": statuses,
    }


def _run_congruence(cfg: ScenarioConfig, out: Path, workers: int, tol_scale: float, seed: int) -> dict:
    w = cfg.wavefunction.build()
    cf = CurrentField(w)
    cs = cfg.congruence
    launch_surface = Hypersurface.constant_time(cs.launch_t, w.box)
    try:
        c = cg.launch(cf, launch_surface, cs.n_samples, cs.sampler, seed, cfg.integrator.build(tol_scale),
                      workers=workers, resolution=cs.resolution, chunk=cs.chunk)
    except ValueError as exc:
        raise ConfigError(f"congruence: {exc}") from exc
    _check_underflow(c.batch.underflow)
    reports = []
    for i, tq in enumerate(cs.query_t):
        q = Hypersurface.constant_time(tq, w.box)
        r = cg.crossing_report(c, q, resolution=cs.resolution)
        cg.write_crossings_csv(r, out / f"crossings_{i}.csv")
        reports.append(dict(r.to_dict(), query_t=tq))
    completes = []
    for strategy in cs.strategies:
        try:
            completes.append(cg.complete_surface(c, strategy, resolution=cs.resolution).to_dict())
        except ValueError as exc:
            raise ConfigError(f"congruence.strategies: {exc}") from exc
    doc = {"launch": {"n_samples": len(c), "sampler": c.sampler, "seed": seed, "launch_t": cs.launch_t,
                      "launch_mass": float(np.sum(c.weights))},
           "queries": reports, "complete_surfaces": completes}
    _write_json(out / "report.json", doc)
    return {
        "n_trajectories": len(c),
        "queries": [{k: r[k] for k in ("query_t", "signed_flux", "signed_flux_se", "unsigned_flux",
                                       "unsigned_flux_se", "quadrature_unsigned", "first_crossing_mass",
                                       "multiplicity_histogram")} for r in reports],
        "coverage_masses": {d["strategy"]: d["coverage_mass"] for d in completes},
    }


def _run_interference(cfg: ScenarioConfig, out: Path) -> dict:
    spec = cfg.interference
    sc = spec.build()
    beat_period = 2 * np.pi / abs(sc.beat) if sc.beat else 2 * np.pi / sc.omega1
    T = spec.T if spec.T is not None else 2.25 * beat_period
    axes = [(np.arange(spec.grid) + 0.5) * L / spec.grid for L in sc.box]
    rows = list(itf.grid_rows(sc, axes, spec.t, T))
    itf.write_grid_csv(out / "grid.csv", rows)
    arr = np.array(rows)
    summary = {
        "alpha": sc.alpha,
        "eta": sc.eta,
        "max_abs_rho_minus_j0": float(np.max(np.abs(arr[:, 4] - arr[:, 5]))),
        "max_abs_j0_minus_rho_minus_(alpha-1)I": float(np.max(np.abs(arr[:, 5] - arr[:, 4] - (sc.alpha - 1) * arr[:, 3]))),
        "min_j0": float(np.min(arr[:, 5])),
        "window_T": T,
    }
    if spec.deviation and sc.beat != 0:
        try:
            dm = itf.deviation_map(sc, axes, T)
            summary["deviation_max"] = float(np.max(np.abs(dm.values)))
            summary["deviation_correlation_length"] = dm.correlation_length
            summary["beat_length"] = dm.beat_length
        except ValueError as exc:
            summary["deviation_skipped"] = str(exc)
    return summary


def _run_nparticle(cfg: ScenarioConfig, out: Path, tol_scale: float) -> dict:
    spec = cfg.nparticle
    wf, fol = spec.build()
    npc = NParticleCurrent(wf, fol)
    x0s = np.array(spec.points, dtype=float)
    if x0s.shape != (npc.n, 4):
        raise ConfigError("nparticle.points: expected one four-vector per particle")
    try:
        trs = integrate_n_particle(npc, x0s, spec.mode, cfg.integrator.build(tol_scale))
    except ValueError as exc:
        raise ConfigError(f"nparticle: {exc}") from exc
    _check_underflow([tr.underflow for tr in trs])
    _write_csv(out / "trajectories.csv", CSV_COLUMNS, trajectory_rows(trs))
    summary = {"n": npc.n, "mode": spec.mode, "status": [tr.status for tr in trs],
               "samples": len(trs[0].s)}
    if not spec.symmetrize:
        # product state: the contracted current factorizes into j_a times the others' N.j_b
        factors = [t for _, t in wf.terms][0]
        cfs = [CurrentField(f) for f in factors]
        worst = 0.0
        pts = np.stack([t.x for t in trs], axis=1)
        got = npc.all_contracted_currents(pts, check=False)
        for a in range(npc.n):
            expect = cfs[a].current(pts[:, a])
            for b in range(npc.n):
                if b != a:
                    expect = expect * np.sum(fol.normal(pts[:, b]) * cfs[b].current_lower(pts[:, b]),
                                             axis=-1)[:, None]
            worst = max(worst, float(np.max(np.abs(got[:, a] - expect))))
        summary["max_abs_factorization_residual"] = worst
    return summary


def run_scenario(cfg: ScenarioConfig, out: Path, workers: int = 1, seed=None) -> dict:
    out.mkdir(parents=True, exist_ok=True)
    seed = cfg.seed if seed is None else seed
    last = None
    for tol_scale in (1.0, RETRY_SCALE):
        try:
            if cfg.kind == "single-trajectory":
                summary = _run_single(cfg, out, workers, tol_scale)
            elif cfg.kind == "congruence-analysis":
                summary = _run_congruence(cfg, out, workers, tol_scale, seed)
            elif cfg.kind == "interference":
                summary = _run_interference(cfg, out)
            else:
                summary = _run_nparticle(cfg, out, tol_scale)
            break
        except NumericalFailure as exc:
            last = exc
    else:
        raise last
    summary = {"scenario": cfg.name, "kind": cfg.kind, "claim": cfg.claim, **summary}
    _write_json(out / "summary.json", summary)
    return summary


def _resolve(target: str) -> Path:
    p = Path(target)
    if p.exists():
        return p
    bundled = bundled_scenarios()
    name = target[:-5] if target.endswith(".json") else target
    if name in bundled:
        return bundled[name]
    raise ConfigError(f"no such config file or bundled scenario: {target}")


def cmd_run(args) -> int:
    try:
        cfg = load_config(_resolve(args.config))
        out = Path(args.out) if args.out else Path("out") / cfg.name
        summary = run_scenario(cfg, out, workers=args.workers or cfg.workers, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(summary, indent=2, sort_keys=True))
    return EXIT_OK


def scenario_table() -> list:
    rows = []
    for name, path in bundled_scenarios().items():
        cfg = load_config(path)
        rows.append({"name": name, "kind": cfg.kind, "claim": cfg.claim})
    return rows


def cmd_list(args) -> int:
    rows = scenario_table()
    if args.json:
        print(json.dumps(rows, indent=2))
        return EXIT_OK
    width = max(len(r["name"]) for r in rows)
    kw = max(len(r["kind"]) for r in rows)
    for r in rows:
        print(f"{r['name']:<{width}}  {r['kind']:<{kw}}  {r['claim']}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kgbohm", description="Bohmian Klein-Gordon trajectory and interference scenarios")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    run = sub.add_parser("run", help="run a scenario config (file path or bundled name)")
    run.add_argument("config")
    run.add_argument("--workers", type=int, default=None, help="worker threads for congruence integration")
    run.add_argument("--seed", type=int, default=None, help="override the config's sampler seed")
    run.add_argument("--out", default=None, help="output directory (default out/<name>)")
    run.set_defaults(func=cmd_run)
    ls = sub.add_parser("list", help="list bundled scenarios")
    ls.add_argument("--json", action="store_true", help="machine-readable output")
    ls.set_defaults(func=cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("--workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
