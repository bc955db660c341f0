"""Command-line interface: ``stochcurve run|converge|vanish|ritz|presets|schema``.

Exit codes: 0 success, 2 invalid configuration, 3 blow-up.
"""
import argparse
import datetime
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import config, geometry
from .experiments import spacetime_convergence, temporal_convergence, vanish_probability
from .geometry import Mesh
from .noise import BrownianLattice, NoiseContext, NoiseSpectrum
from .ritz import ritz_convergence_report
from .stepper import BlowUpError, run_path

EXIT_CONFIG = 2
EXIT_BLOWUP = 3
OUTPUT_ENV = "STOCHCURVE_OUTPUT_DIR"

log = logging.getLogger("stochcurve")


def fmt(v):
    """CSV cell: 17 significant digits for floats, empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.16e}"


def write_csv(path, header, rows, timestamp=True):
    lines = []
    if timestamp:
        lines.append(f"# generated {datetime.datetime.now().isoformat(timespec='seconds')}")
    lines.append(",".join(header))
    lines.extend(",".join(fmt(v) for v in row) for row in rows)
    Path(path).write_text("\n".join(lines) + "\n")


def _load_config(args):
    if args.preset:
        return config.load_preset(args.config)
    return config.load(args.config)


def _out_dir(args, doc):
    d = args.out or doc.get("output", {}).get("dir") or os.environ.get(OUTPUT_ENV) or "out"
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args):
    doc = _load_config(args)
    physics = config.build_physics(doc)
    grid = doc["grid"]
    S, seed, path, _ = config.sampling(doc)
    if args.path is not None:
        path = args.path
    mesh = Mesh(grid["N"])
    try:
        cfg = physics.stepper_config(grid["dt"], grid["T"])
    except ValueError as exc:
        raise config.ConfigError(f"grid: {exc}") from None
    L = config.resolve_L(doc)
    lattice = BrownianLattice(seed, max(S, path + 1), L, cfg.M, grid["dt"])
    noise = NoiseContext(lattice, NoiseSpectrum(physics.b1, physics.rbar, L), physics.sigma, mesh)
    snapshots = doc.get("output", {}).get("snapshots", [grid["T"]])
    try:
        for t in snapshots:
            cfg.step_of(t)
    except ValueError as exc:
        raise config.ConfigError(f"output/snapshots: {exc}") from None
    traj = run_path(cfg, physics.curve, mesh, noise, path, snapshots)

    out = _out_dir(args, doc)
    stamp = not args.no_timestamp
    idx = np.arange(1, mesh.N + 1)
    for t, c in traj.snapshots.items():
        k = cfg.step_of(t)
        write_csv(out / f"snapshot_{k:07d}.csv", ["node_index", "x", "c"],
                  zip(idx, mesh.nodes, c), stamp)
    write_csv(out / "diagnostics.csv", ["step", "time", "weighted_mass", "l2_norm"],
              zip(range(cfg.M + 1), traj.times, traj.weighted_mass, traj.l2), stamp)
    print(f"wrote {len(traj.snapshots)} snapshots and diagnostics to {out}")
    return 0


def cmd_converge(args):
    doc = _load_config(args)
    study = config.build_study(doc, args.mode)
    if args.workers:
        from dataclasses import replace
        study = replace(study, workers=args.workers)
    if study.mode == "Temporal":
        table = temporal_convergence(study)
    else:
        table = spacetime_convergence(study)
    out = _out_dir(args, doc)
    name = "errors_temporal.csv" if study.mode == "Temporal" else "errors_spacetime.csv"
    write_csv(out / name, ["h", "dt", "E_S", "eoc"], table.rows(), not args.no_timestamp)
    for h, dt, err, e in table.rows():
        print(f"h={h:.6g} dt={dt:.6g} E_S={fmt(err) or 'excluded'} eoc={fmt(e) or '--'}")
    print(f"mean eoc {table.mean_eoc():.4f}; wrote {out / name}")
    return 0


def cmd_vanish(args):
    doc = _load_config(args)
    physics = config.build_physics(doc)
    grid = doc["grid"]
    S, seed, _, workers = config.sampling(doc)
    threshold = args.threshold or doc.get("vanish", {}).get("threshold", 0.1)
    try:
        res = vanish_probability(physics, grid["N"], grid["dt"], grid["T"], S, threshold,
                                 L=config.resolve_L(doc), master_seed=seed,
                                 workers=args.workers or workers)
    except ValueError as exc:
        raise config.ConfigError(str(exc)) from None
    summary = {"fraction": res.fraction, "S": res.S, "threshold": res.threshold,
               "blowups": res.blowups}
    out = _out_dir(args, doc)
    text = json.dumps(summary, indent=2)
    (out / "vanish.json").write_text(text + "\n")
    write_csv(out / "vanish_norms.csv", ["path", "final_l2_norm"],
              zip(range(res.S), res.norms), not args.no_timestamp)
    print(text)
    return 0


RITZ_FUNCTIONS = {
    "sin": (np.sin, np.cos),
    "sin3": (lambda x: np.sin(3 * x), lambda x: 3 * np.cos(3 * x)),
    "const": (lambda x: np.ones_like(x), lambda x: np.zeros_like(x)),
}
RITZ_CURVES = {
    "StationaryCircle": geometry.stationary_circle,
    "ShrinkingCircle": geometry.shrinking_circle,
    "Flower": geometry.flower,
}


def cmd_ritz(args):
    z, dz = RITZ_FUNCTIONS[args.function]
    curve = RITZ_CURVES[args.curve]()
    levels = [int(v) for v in args.levels.split(",")]
    rep = ritz_convergence_report(z, dz, curve, args.time, levels)
    out = Path(args.out or os.environ.get(OUTPUT_ENV) or "out")
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"ritz_{args.curve}_{args.function}.csv"
    header, *rows = rep.csv_rows()
    write_csv(path, header, rows, not args.no_timestamp)
    l2 = "undefined" if rep.l2_slope is None else f"{rep.l2_slope:.4f}"
    h1 = "undefined" if rep.h1_slope is None else f"{rep.h1_slope:.4f}"
    print(f"L2 slope {l2}, H1 slope {h1}; wrote {path}")
    return 0


def cmd_presets(args):
    for name in config.preset_names():
        print(f"{name}: {config.load_preset(name).get('description', '')}")
    return 0


def cmd_schema(args):
    print(json.dumps(config.SCHEMA, indent=2))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="stochcurve", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("config", help="JSON config path, or preset name with --preset")
        p.add_argument("--preset", action="store_true", help="treat CONFIG as a shipped preset")
        p.add_argument("--out", help=f"output directory (default: config, then ${OUTPUT_ENV})")
        p.add_argument("--no-timestamp", action="store_true",
                       help="omit the timestamp line so output is byte-reproducible")
        return p

    p = with_config(sub.add_parser(
        "run", help="run one sample path; write snapshots and diagnostics",
        description="Advection only discretises -<c w_T, phi_x>; fold any c*d_x(w_T) "
                    "term into the reaction."))
    p.add_argument("--path", type=int, help="sample-path index (default: sampling.path)")
    p.set_defaults(func=cmd_run)

    p = with_config(sub.add_parser("converge", help="strong-error convergence table"))
    p.add_argument("--mode", choices=["temporal", "spacetime"])
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_converge)

    p = with_config(sub.add_parser("vanish", help="fraction of paths whose signal vanishes"))
    p.add_argument("--threshold", type=float)
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_vanish)

    p = sub.add_parser("ritz", help="Ritz projection convergence report")
    p.add_argument("--curve", choices=sorted(RITZ_CURVES), default="StationaryCircle")
    p.add_argument("--time", type=float, default=0.0)
    p.add_argument("--levels", default="16,32,64,128")
    p.add_argument("--function", choices=sorted(RITZ_FUNCTIONS), default="sin")
    p.add_argument("--out")
    p.add_argument("--no-timestamp", action="store_true")
    p.set_defaults(func=cmd_ritz)

    sub.add_parser("presets", help="list shipped presets").set_defaults(func=cmd_presets)
    sub.add_parser("schema", help="print the config JSON schema").set_defaults(func=cmd_schema)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except config.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BlowUpError as exc:
        print(f"blow-up: {exc} (path {exc.path}, step {exc.step})", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
