"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 failed verification check.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .calculus import (
    FractalGrid,
    SampledFunction,
    cumulative_integral,
    falpha_derivative_all,
    falpha_integral,
)
from .config import ExperimentConfig, load_config
from .errors import AlignmentError, ConfigError, FractalKPPError, StageError
from .fractal_set import build_prefractal, coarse_grained_mass, staircase
from .reference import compare
from .runner import read_csv, run_alpha, run_experiment, write_csv
from .spatial import SpatialGrid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_CHECK = 0, 2, 3, 4

log = logging.getLogger("fractal_kpp")


def _global_flags() -> argparse.ArgumentParser:
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", default=argparse.SUPPRESS, help="JSON experiment configuration")
    p.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    p.add_argument("--workers", type=int, default=argparse.SUPPRESS, help="parallel alpha runs")
    p.add_argument("--closure", choices=("strict", "paper"), default=argparse.SUPPRESS,
                   help="moment closure used by the FlEES solver")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = argparse.ArgumentParser(prog="fractal-kpp", parents=[common],
                                     description="Fractal-time nonlocal Fisher-KPP toolkit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("staircase", parents=[common], help="tabulate the staircase S(t)")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--generation", type=int, default=5)
    p.add_argument("--samples", "--points", dest="samples", type=int, default=1001)

    p = sub.add_parser("verify-calculus", parents=[common], help="check the F^alpha calculus identities")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--generation", type=int, default=5)

    p = sub.add_parser("flees", parents=[common], help="solve the moment system")
    p.add_argument("--alpha", type=float, required=True)

    p = sub.add_parser("simulate", parents=[common], help="assemble asymptotic fields at snapshot times")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--snapshots", type=_time_list, default=None, help="comma-separated times in [0, 1]")

    p = sub.add_parser("reference", parents=[common], help="direct solver at snapshot times")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--snapshots", type=_time_list, default=None)

    p = sub.add_parser("compare", parents=[common], help="error report between two snapshot directories")
    p.add_argument("--a", dest="dir_a", required=True)
    p.add_argument("--b", dest="dir_b", required=True)

    sub.add_parser("run", parents=[common], help="full alpha sweep with manifest")
    return parser


def _time_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig.default()
    changes = {}
    if getattr(args, "closure", None):
        changes["closure_mode"] = args.closure
    if getattr(args, "snapshots", None) is not None:
        changes["snapshots"] = args.snapshots
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _out_dir(args, default: str) -> Path:
    return Path(getattr(args, "out", None) or default)


def cmd_staircase(args) -> int:
    F = build_prefractal(args.alpha, args.generation)
    t = np.linspace(0.0, 1.0, args.samples)
    S = staircase(F)(t)
    out = getattr(args, "out", None)
    if out:
        write_csv(Path(out), ["t", "S"], [t, S])
    else:
        sys.stdout.write("t,S\n")
        for row in zip(t, S):
            sys.stdout.write("%.17g,%.17g\n" % row)
    log.info("mass over [0, 1]: %.17g", coarse_grained_mass(F, 0.0, 1.0))
    return EXIT_OK


def calculus_checks(alpha: float, generation: int = 5) -> list[tuple[str, float, float]]:
    """``(name, error, tolerance)`` for the core identities on the default grid."""
    F = build_prefractal(alpha, generation)
    grid = FractalGrid.build(F)
    on = grid.indicator_values == 1
    S = grid.staircase_values
    const = SampledFunction(grid, np.full(len(grid), 3.0))
    stair = SampledFunction(grid, S.copy())
    chi = SampledFunction(grid, grid.indicator_values.copy())
    poly = SampledFunction(grid, S**3 - 2.0 * S)
    a, b = 0.2, 0.9
    sa, sb = staircase(F)(a), staircase(F)(b)
    ftc = cumulative_integral(SampledFunction(grid, falpha_derivative_all(poly)))
    return [
        ("derivative of a constant", float(np.max(np.abs(falpha_derivative_all(const)))), 1e-12),
        ("derivative of the staircase", float(np.max(np.abs(falpha_derivative_all(stair)[on] - 1.0))), 1e-8),
        ("integral of the indicator", abs(falpha_integral(chi, a, b) - (sb - sa)), 1e-9),
        ("fundamental theorem", float(np.max(np.abs(ftc.values - (poly.values - poly.values[0])))), 1e-6),
    ]


def cmd_verify_calculus(args) -> int:
    ok = True
    for name, err, tol in calculus_checks(args.alpha, args.generation):
        passed = err <= tol
        ok &= passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: error {err:.3e} (tolerance {tol:.0e})")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_flees(args) -> int:
    cfg = _config(args)
    out = _out_dir(args, cfg.output)
    if out.suffix == ".csv":
        files = run_alpha(cfg, args.alpha, out.parent, asymptotic=False, reference=False, moments_name=out.name)
    else:
        files = run_alpha(cfg, args.alpha, out, asymptotic=False, reference=False)
    print("\n".join(files))
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config(args)
    files = run_alpha(cfg, args.alpha, _out_dir(args, cfg.output), asymptotic=True, reference=False)
    print("\n".join(files))
    return EXIT_OK


def cmd_reference(args) -> int:
    cfg = _config(args)
    files = run_alpha(cfg, args.alpha, _out_dir(args, cfg.output), asymptotic=False, reference=True)
    print("\n".join(files))
    return EXIT_OK


def cmd_compare(args) -> int:
    da, db = Path(args.dir_a), Path(args.dir_b)
    names = sorted(p.name for p in da.glob("snapshot_t*.csv") if (db / p.name).exists())
    if not names:
        raise ConfigError([f"no common snapshot files in {da} and {db}"])
    rows = []
    for name in names:
        ha, A = read_csv(da / name)
        hb, B = read_csv(db / name)
        if A.shape[0] != B.shape[0] or not np.array_equal(A[:, 0], B[:, 0]):
            raise AlignmentError(f"{name}: spatial grids differ")
        x = A[:, 0]
        grid = SpatialGrid(float(x[0]), float(x[-1]), len(x))
        t = float(name[len("snapshot_t"):-len(".csv")])
        rep = compare(grid, A[:, ha.index("u")], B[:, hb.index("u")], [t])
        rows.append(next(rep.rows()))
    out = getattr(args, "out", None) or "report.csv"
    write_csv(Path(out), ["t", "l2", "linf", "l2_rel", "linf_rel"], list(np.array(rows).T))
    print(out)
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    workers = getattr(args, "workers", None) or 1
    manifest = run_experiment(cfg, _out_dir(args, cfg.output), workers=workers)
    print(f"{len(manifest['files'])} files, config hash {manifest['config_hash']}")
    return EXIT_OK


COMMANDS = {
    "staircase": cmd_staircase,
    "verify-calculus": cmd_verify_calculus,
    "flees": cmd_flees,
    "simulate": cmd_simulate,
    "reference": cmd_reference,
    "compare": cmd_compare,
    "run": cmd_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc.cause, ConfigError) else EXIT_NUMERICAL
    except (FractalKPPError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
