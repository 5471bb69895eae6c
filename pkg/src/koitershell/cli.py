"""Command line entry point: ``koitershell {simulate,ensemble,verify,geometry}``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure.
"""
import argparse
import hashlib
import json
import os
import sys
import time

import numpy as np

from .errors import FormatError, NumericalError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


def _config_text(args):
    text = ""
    if args.config:
        with open(args.config) as fh:
            text = fh.read()
    overrides = dict(kv.split("=", 1) for kv in (args.set or []))
    overrides = {k.strip(): v.strip() for k, v in overrides.items()}
    if args.preset:
        overrides["preset"] = args.preset
    if args.out:
        overrides["output_dir"] = args.out
    kept = []
    for line in text.splitlines():
        key = line.split("#", 1)[0].partition("=")[0].strip()
        if key not in overrides:
            kept.append(line)
    kept += [f"{k} = {v}" for k, v in overrides.items()]
    return "\n".join(kept) + "\n"


def _load_config(args):
    from .config import parse_config

    for kv in args.set or []:
        if "=" not in kv:
            raise ValidationError(f"--set expects key=value, got {kv!r}")
    return parse_config(_config_text(args))


def cmd_simulate(args):
    from .solver import run_simulation

    cfg = _load_config(args)
    t0 = time.perf_counter()
    result = run_simulation(cfg, cfg.output_dir, path=args.path, figures=not args.no_figures)
    last = result.diagnostics[-1]
    print(f"simulated {cfg.equation} to t = {last[0]:g} in {time.perf_counter() - t0:.1f} s; "
          f"{len(result.snapshots)} snapshots, eta in [{last[5]:.4g}, {last[6]:.4g}]")
    print(f"outputs in {cfg.output_dir}")
    return EXIT_OK


def cmd_ensemble(args):
    from .ensemble import exceedance_probability, run_ensemble, write_ensemble_outputs
    from .report import write_manifest

    cfg = _load_config(args)
    t0 = time.perf_counter()
    stats = run_ensemble(cfg, n_paths=args.paths, first_path=args.first_path,
                         workers=args.workers)
    files = write_ensemble_outputs(stats, cfg, cfg.output_dir, figures=not args.no_figures)
    write_manifest(cfg.output_dir, files, cfg)
    print(f"{stats.n_paths} paths in {time.perf_counter() - t0:.1f} s")
    for x in stats.thresholds:
        p, lo, hi = exceedance_probability(stats, x)
        print(f"P(sup max|eta| > {x:g}) = {p:.4f}  [{lo:.4f}, {hi:.4f}]")
    print(f"outputs in {cfg.output_dir}")
    return EXIT_OK


def cmd_verify(args):
    from .verify import SUITES, format_table, run_all

    suites = args.suite or list(SUITES)
    for s in suites:
        if s not in SUITES:
            raise ValidationError(f"unknown suite {s!r}; choose from {sorted(SUITES)}")
    results = run_all(suites)
    print(format_table(results))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_OK if not failed else EXIT_NUMERICAL


def _fmt_matrix(m):
    return "[" + ", ".join("[" + ", ".join(f"{v: .6g}" for v in row) + "]" for row in m) + "]"


def cmd_geometry(args):
    from . import geometry as geo
    from .charts import get_chart
    from .fields import parse_number
    from .gridio import DumpMeta, write_grid_dump
    from .report import write_manifest

    chart = get_chart(args.chart)
    parts = args.at.split(",")
    if len(parts) != 2:
        raise ValidationError(f"--at expects y1,y2, got {args.at!r}")
    y = tuple(parse_number(p) for p in parts)
    frame = geo.evaluate_frame(chart, y)
    A, B = geo.fundamental_forms(chart, y)
    a_inv = np.linalg.inv(A.matrix())
    b_up = a_inv @ B.matrix() @ a_inv
    info = {
        "chart": args.chart,
        "y": list(y),
        "w": float(frame.w),
        "n": frame.n.tolist(),
        "A": A.matrix().tolist(),
        "B": B.matrix().tolist(),
        "A_contra": a_inv.tolist(),
        "B_contra": b_up.tolist(),
    }
    print(f"chart {args.chart} at y = ({y[0]:.6g}, {y[1]:.6g})")
    print(f"  w      = {frame.w:.10g}")
    print(f"  n      = {np.array2string(frame.n, precision=6)}")
    print(f"  A_ij   = {_fmt_matrix(A.matrix())}")
    print(f"  B_ij   = {_fmt_matrix(B.matrix())}")
    print(f"  A^ij   = {_fmt_matrix(a_inv)}")
    print(f"  B^ij   = {_fmt_matrix(b_up)}")
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        files = []
        p = os.path.join(args.out, "geometry.json")
        with open(p, "w") as fh:
            json.dump(info, fh, indent=2)
            fh.write("\n")
        files.append(p)
        n = args.n
        l1, l2 = chart.extents
        # cell centres avoid the coordinate singularities of the sphere chart
        g1 = chart.origin[0] + l1 * (np.arange(n) + 0.5) / n
        g2 = chart.origin[1] + l2 * (np.arange(n) + 0.5) / n
        mesh = np.meshgrid(g1, g2, indexing="ij")
        fr = geo.evaluate_frame(chart, mesh)
        Ag, Bg = geo.fundamental_forms(chart, mesh)
        fields = {"w": fr.w, "A11": Ag.a11, "A12": Ag.a12, "A22": Ag.a22,
                  "B11": Bg.a11, "B12": Bg.a12, "B22": Bg.a22}
        for name, f in fields.items():
            p = os.path.join(args.out, f"{name}.ksh")
            write_grid_dump(np.broadcast_to(f, (n, n)), DumpMeta(l1, l2, 0.0), p)
            files.append(p)
        key = hashlib.sha256(f"geometry {args.chart} {args.at} {n}".encode()).hexdigest()
        write_manifest(args.out, files, None, config_key=key)
        print(f"outputs in {args.out}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="koitershell",
                                     description="Stochastic Koiter shell simulations.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config_args(p):
        p.add_argument("config", nargs="?", help="config file (key = value lines)")
        p.add_argument("--preset", help="named preset, e.g. figure3")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--no-figures", action="store_true", help="skip PNG figures")

    p = sub.add_parser("simulate", help="run one noise path")
    add_config_args(p)
    p.add_argument("--path", type=int, default=0, help="noise path index")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ensemble", help="run a Monte Carlo ensemble")
    add_config_args(p)
    p.add_argument("--paths", type=int, help="number of paths (overrides ensemble.n_paths)")
    p.add_argument("--first-path", type=int, default=0)
    p.add_argument("--workers", type=int, help="worker processes (overrides ensemble.workers)")
    p.set_defaults(func=cmd_ensemble)

    p = sub.add_parser("verify", help="run the oracle self-test suites")
    p.add_argument("--suite", action="append", help="run only this suite (repeatable)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("geometry", help="evaluate frame and fundamental forms of a chart")
    p.add_argument("--chart", required=True, help="chart id, e.g. sphere:2")
    p.add_argument("--at", required=True, help="point y1,y2")
    p.add_argument("--out", help="also write JSON and grid dumps here")
    p.add_argument("--n", type=int, default=64, help="grid size for dumps")
    p.set_defaults(func=cmd_geometry)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
