"""Command line front-end: ``mstrack simulate``, ``mstrack converge``, ``mstrack exact``."""

import argparse
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace

import numpy as np

from . import io
from .config import PRESETS, ConvergeSpec, load_spec
from .curve import enclosed_volume
from .errors import ConfigError, DomainError, MSTrackError
from .reference import AnnulusState, extinction_time, r1_at, r2_at
from .shapes import concentric_pair, make_curve
from .stepper import run_simulation

log = logging.getLogger("mstrack")


def _err(msg):
    print(f"mstrack: error: {msg}", file=sys.stderr)


# --------------------------------------------------------------------------
# simulate


def cmd_simulate(args):
    try:
        spec = load_spec(args.spec)
        if args.T is not None:
            spec.scheme = replace(spec.scheme, T=args.T)
        curve = make_curve(spec.shape, spec.scheme.H)
    except MSTrackError as exc:
        _err(exc)
        return 2
    outdir = args.out or spec.output_dir
    every = spec.snapshot_every if args.snapshot_every is None else args.snapshot_every
    times = [t for t in spec.snapshot_times if t <= spec.scheme.T + 1e-12]
    if spec.scheme.T not in times:
        times.append(spec.scheme.T)

    def progress(d, _curve):
        if args.verbose and d.m % 100 == 0:
            print(f"step {d.m} t={d.t:.6f} energy={d.energy_aniso:.10e} v_rel={d.v_rel:.3e} "
                  f"fp={d.fp_iters}", file=sys.stderr)

    try:
        res = run_simulation(curve, spec.scheme, snapshot_times=times, snapshot_every=every,
                             on_step=progress)
    except MSTrackError as exc:
        _err(f"simulation failed: {exc}")
        return 1

    os.makedirs(outdir, exist_ok=True)
    io.write_diagnostics(os.path.join(outdir, "diagnostics.csv"), res.diagnostics)
    snapdir = os.path.join(outdir, "snapshots")
    for t, c in sorted(res.snapshots.items()):
        io.write_polylines(os.path.join(snapdir, io.snapshot_name(t) + ".txt"), c)
    if spec.svg:
        shown = [t for t in sorted(res.snapshots) if any(abs(t - s) < 1e-9 for s in times)]
        io.write_text(os.path.join(outdir, "curves.svg"), io.curves_svg(
            [res.snapshots[t] for t in shown], labels=[f"t={t:g}" for t in shown]))
        tt = [d.t for d in res.diagnostics]
        io.write_text(os.path.join(outdir, "energy.svg"), io.series_svg(
            tt, {"energy": [d.energy_aniso for d in res.diagnostics]}, title="interface energy"))
        io.write_text(os.path.join(outdir, "volume.svg"), io.series_svg(
            tt, {"v_rel": [d.v_rel for d in res.diagnostics]}, title="relative volume loss"))
    last = res.diagnostics[-1]
    print(f"steps {last.m}")
    print(f"t {io.fmt(last.t)}")
    print(f"energy {io.fmt(last.energy_aniso)}")
    print(f"v_rel {io.fmt(last.v_rel)}")
    print(f"max_stability_violation {io.fmt(res.max_stability_violation)}")
    print(f"wall_time {io.fmt(res.wall_time)}")
    for w in res.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"outputs in {outdir}")
    return 0


# --------------------------------------------------------------------------
# converge


def run_level(spec_scheme, conv, level):
    """One rung of the annulus ladder; returns the table row as a dict."""
    p = ConvergeSpec.level_params(level)
    cfg = replace(spec_scheme, N_f=p["N_f"], N_c=p["N_c"], dt=p["dt"], T=conv.T)
    curve = concentric_pair(conv.r1, conv.r2, p["K"])
    res = run_simulation(curve, cfg, reference=AnnulusState(conv.r1, conv.r2),
                         check_simple_every=0)
    vol0 = enclosed_volume(curve)
    return {
        "h_f": 2.0 * cfg.H / cfg.N_f,
        "h_Gamma_M": float(res.curve.lengths.max()),
        "bulk_error": res.bulk_error,
        "curve_error": res.curve_error,
        "K_Omega_M": res.mesh.n_vertices,
        "K": curve.n_vertices,
        "v_Delta_M": abs(vol0 - enclosed_volume(res.curve)) / vol0,
        "wall_time": res.wall_time,
    }


def _failed_row(level, conv):
    p = ConvergeSpec.level_params(level)
    return {"h_f": 8.0 / p["N_f"], "h_Gamma_M": math.nan, "bulk_error": math.nan,
            "curve_error": math.nan, "K_Omega_M": -1, "K": p["K"], "v_Delta_M": math.nan,
            "wall_time": math.nan}


def cmd_converge(args):
    try:
        spec = load_spec(args.spec)
        conv = spec.converge or ConvergeSpec()
        levels = conv.levels if args.levels is None else tuple(
            int(x) for x in args.levels.split(",") if x.strip())
        bad = [i for i in levels if not 0 <= i <= conv.max_level]
        if bad or not levels:
            raise ConfigError(f"levels must lie in 0..{conv.max_level}, got {list(levels)}")
        scheme = spec.scheme
        if args.scheme:
            scheme = replace(scheme, scheme=args.scheme.replace("-", "_"))
        if args.integration:
            scheme = replace(scheme, integration=args.integration)
    except (MSTrackError, ValueError) as exc:
        _err(exc)
        return 2
    for i in levels:
        if i >= 3:
            print(f"note: level {i} is long-running", file=sys.stderr)

    rows, failed = {}, []
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            futs = {i: ex.submit(run_level, scheme, conv, i) for i in levels}
            for i, f in futs.items():
                try:
                    rows[i] = f.result()
                except MSTrackError as exc:
                    failed.append(i)
                    _err(f"level {i} failed: {exc}")
                    rows[i] = _failed_row(i, conv)
    else:
        for i in levels:
            try:
                rows[i] = run_level(scheme, conv, i)
            except MSTrackError as exc:
                failed.append(i)
                _err(f"level {i} failed: {exc}")
                rows[i] = _failed_row(i, conv)

    out = args.out or os.path.join(spec.output_dir,
                                   f"converge_{scheme.scheme}_{scheme.integration}.csv")
    table = [[rows[i][c] for c in io.CONVERGE_COLUMNS] for i in levels]
    io.write_csv(out, io.CONVERGE_COLUMNS, table)
    print(",".join(io.CONVERGE_COLUMNS))
    for r in table:
        print(",".join(io.fmt(v) for v in r))
    print(f"table written to {out}", file=sys.stderr)
    return 1 if failed else 0


# --------------------------------------------------------------------------
# exact


def cmd_exact(args):
    try:
        T0 = extinction_time(args.r1, args.r2)
        r1 = r1_at(args.t, args.r1, args.r2)
        r2 = r2_at(args.t, args.r1, args.r2)
    except DomainError as exc:
        _err(exc)
        return 2
    print(f"t {io.fmt(args.t)}")
    print(f"r1 {io.fmt(r1)}")
    print(f"r2 {io.fmt(r2)}")
    print(f"extinction_time {io.fmt(T0)}")
    return 0


# --------------------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="mstrack", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="progress on stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run one experiment")
    s.add_argument("spec", help=f"TOML spec file or preset ({', '.join(PRESETS)})")
    s.add_argument("--out", help="output directory (default from spec)")
    s.add_argument("--snapshot-every", type=int, default=None, metavar="N",
                   help="also write every N-th step")
    s.add_argument("--T", type=float, default=None, help="override the final time")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("converge", help="annulus convergence study")
    c.add_argument("spec", help="TOML spec file or preset (e.g. annulus-converge)")
    c.add_argument("--levels", default=None, help="comma separated, e.g. 0,1,2")
    c.add_argument("--scheme", choices=("bgn-linear", "sp-fixed-point"), default=None)
    c.add_argument("--integration", choices=("lumped", "true"), default=None)
    c.add_argument("--jobs", type=int, default=1, help="levels to run in parallel")
    c.add_argument("--out", help="CSV path")
    c.set_defaults(func=cmd_converge)

    e = sub.add_parser("exact", help="radii of the exact two-circle solution")
    e.add_argument("--t", type=float, required=True)
    e.add_argument("--r1", type=float, required=True)
    e.add_argument("--r2", type=float, required=True)
    e.set_defaults(func=cmd_exact)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
