"""Command line entry point: ``stochac {simulate,ensemble,verify,convergence}``.

Exit codes: 0 success, 2 configuration error, 3 step failure, 4 failed
verification.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import output
from .config import bundled_config, bundled_configs, load_config
from .ensemble import run_ensemble, tau_refinement_check, yosida_cauchy_check
from .errors import ConfigError, StepFailure
from .stepper import run_realization
from .verify import SUITES, run_suites

log = logging.getLogger("stochac")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_STEP = 3
EXIT_VERIFY = 4


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _load(args):
    path = Path(args.config)
    if path.exists():
        cfg = load_config(path)
    elif args.config in bundled_configs() or f"{args.config}.cfg" in bundled_configs():
        cfg = bundled_config(args.config)
    else:
        raise ConfigError(f"config not found: {args.config}", "config")
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "snapshots", None) is not None:
        changes["snapshots"] = args.snapshots
    if getattr(args, "realizations", None) is not None:
        changes["realizations"] = args.realizations
    if getattr(args, "workers", None) is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes).validate() if changes else cfg


def _write_run(cfg, parts, rec, run_dir, failure=None):
    output.write_record_csv(rec, run_dir / "record.csv")
    if cfg.record_events:
        output.write_events_csv(rec.events, run_dir / "events.csv")
    for t, field in sorted(rec.snapshots.items()):
        output.write_snapshot_csv(field, parts.mesh, run_dir / output.snapshot_name(t))
        if cfg.write_pgm:
            output.write_pgm(field, parts.mesh, run_dir / f"snap_t{t:g}.pgm", L=cfg.L)
        if cfg.write_vtk:
            output.write_vtk(field, parts.mesh, run_dir / f"snap_t{t:g}.vtk")
    extra = {"status": "ok" if failure is None else "step-failure"}
    if failure:
        extra["failure"] = failure
    output.write_manifest(cfg, run_dir / "manifest.txt", **extra)


def cmd_simulate(args):
    cfg = _load(args)
    parts = cfg.build()
    run_dir = Path(args.out) / cfg.run_id
    try:
        rec = run_realization(cfg.scenario, parts.scheme, parts.mesh, parts.split, parts.wiener,
                              parts.jump, seed=cfg.seed, realization=0,
                              snapshot_times=cfg.snapshots, record_events=cfg.record_events,
                              init_amplitude=cfg.init_amplitude)
    except StepFailure as exc:
        if getattr(exc, "record", None) is not None:
            _write_run(cfg, parts, exc.record, run_dir, failure=str(exc))
        raise
    _write_run(cfg, parts, rec, run_dir)
    print(f"wrote {run_dir}  steps={rec.n_steps}  u in [{rec.u_min.min():.3e}, {rec.u_max.max():.6f}]")
    return EXIT_OK


def cmd_ensemble(args):
    cfg = _load(args)
    parts = cfg.build()
    run_dir = Path(args.out) / cfg.run_id
    stats = run_ensemble(cfg, cfg.realizations)
    output.write_stats_csv(stats, run_dir / "stats.csv")
    for i, rec in enumerate(stats.records):
        output.write_record_csv(rec, run_dir / f"record_{i:03d}.csv")
        if cfg.record_events:
            output.write_events_csv(rec.events, run_dir / f"events_{i:03d}.csv")
    for t in cfg.snapshots:
        if t in stats.records[0].snapshots:
            output.write_snapshot_csv(stats.records[0].snapshots[t], parts.mesh,
                                      run_dir / output.snapshot_name(t))
    output.write_manifest(cfg, run_dir / "manifest.txt",
                          failed_realizations=",".join(str(i) for i, _ in stats.failures) or "none")
    print(f"wrote {run_dir}  realizations={stats.n}  failures={len(stats.failures)}")
    return EXIT_STEP if stats.failures else EXIT_OK


def cmd_verify(args):
    names = args.suite or ["all"]
    unknown = [n for n in names if n != "all" and n not in SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s): {', '.join(unknown)}", "suite")
    failed = []
    for name, checks in run_suites(names).items():
        for c in checks:
            print(f"[{name}] {c.line()}")
            if not c.passed:
                failed.append(f"{name}: {c.name}")
    if failed:
        print("failed checks:\n  " + "\n  ".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


def cmd_convergence(args):
    cfg = _load(args)
    run_dir = Path(args.out) / cfg.run_id
    status = EXIT_OK
    if args.lambdas:
        rep = yosida_cauchy_check(cfg, args.lambdas)
        pair = rep["pairwise"] + [float("nan")]
        output.write_table(run_dir / "yosida_cauchy.csv",
                           ["lambda", "sup_sq_diff_to_exact", "sup_sq_diff_to_next"],
                           [rep["lambdas"], rep["to_exact"], pair])
        print(f"yosida: to_exact={rep['to_exact']} decreasing={rep['decreasing']} c_fit={rep['c_fit']:.3g}")
        if not rep["decreasing"]:
            status = EXIT_VERIFY
    if args.taus:
        rep = tau_refinement_check(cfg, args.taus, t_final=args.t_final)
        output.write_table(run_dir / "tau_refinement.csv", ["tau", "diff_to_next"],
                           [rep["taus"], rep["diffs"] + [float("nan")]])
        print(f"tau refinement: diffs={rep['diffs']} orders={rep['orders']}")
    output.write_manifest(cfg, run_dir / "manifest.txt")
    return status


def build_parser():
    p = argparse.ArgumentParser(prog="stochac", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, seed=True):
        sp.add_argument("--config", required=True,
                        help="config file, or the name of a bundled recipe (see 'stochac list')")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        if seed:
            sp.add_argument("--seed", type=int)

    s = sub.add_parser("simulate", help="run one realization")
    common(s)
    s.add_argument("--snapshots", type=_floats, help="comma-separated snapshot times")
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("ensemble", help="run an ensemble and write statistics")
    common(e)
    e.add_argument("--realizations", type=int)
    e.add_argument("--workers", type=int)
    e.add_argument("--snapshots", type=_floats)
    e.set_defaults(func=cmd_ensemble)

    v = sub.add_parser("verify", help="run property suites")
    v.add_argument("suite", nargs="*", help=f"any of: all, {', '.join(SUITES)}")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("convergence", help="Yosida-lambda and time-step refinement studies")
    common(c)
    c.add_argument("--lambdas", type=_floats, default=None)
    c.add_argument("--taus", type=_floats, default=None)
    c.add_argument("--t-final", type=float, default=1.0, dest="t_final")
    c.set_defaults(func=cmd_convergence)

    ls = sub.add_parser("list", help="list bundled recipe configs")
    ls.set_defaults(func=lambda a: print("\n".join(bundled_configs())) or EXIT_OK)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StepFailure as exc:
        print(f"step failure: {exc}", file=sys.stderr)
        return EXIT_STEP


if __name__ == "__main__":
    sys.exit(main())
