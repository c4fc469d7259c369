"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 unknown preset.
"""
from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, build_config, load_config, parse_config
from .lindblad import NumericalError
from .presets import UnknownPreset, preset_jobs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PRESET = 0, 2, 3, 4


def _common(p):
    p.add_argument("--config", metavar="PATH", help="TOML run configuration")
    p.add_argument("--seed", type=int, metavar="U64")
    p.add_argument("--threads", type=int, metavar="N",
                   help="worker threads (fallback: DIPOLAR_SIM_THREADS)")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted override, e.g. dtwa.n_traj=2000 (repeatable)")


def build_parser():
    parser = argparse.ArgumentParser(prog="dipolar-sim",
                                     description="Driven multilevel atomic arrays: ED, GSM, XY, SWA, DTWA, cumulants")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("ed", "full master equation"), ("gsm", "ground-state-manifold model"),
                       ("xy", "anisotropic XY model, exact"), ("swa", "linear spin waves"),
                       ("dtwa", "discrete truncated Wigner"), ("cumulant", "second-order cumulants")):
        p = sub.add_parser(name, help=text)
        _common(p)
        if name == "xy":
            p.add_argument("--dump-coeffs", action="store_true", help="also write C^x, C^y matrices")
    p = sub.add_parser("preset", help="run a named figure preset")
    p.add_argument("name")
    _common(p)
    p = sub.add_parser("dump-couplings", help="write the dipolar coupling tensors")
    _common(p)
    return parser


def _check_int_args(args):
    errs = []
    if args.seed is not None and not 0 <= args.seed < 2**64:
        errs.append("--seed: must be an unsigned 64-bit integer")
    if args.threads is not None and args.threads < 1:
        errs.append("--threads: must be at least 1")
    if errs:
        raise ConfigError(errs)


def _flag_overrides(args):
    out = list(args.overrides)
    if args.seed is not None:
        out.append(f"seed={args.seed}")
    if args.threads is not None:
        out.append(f"threads={args.threads}")
    if args.out is not None:
        out.append(f"out='{args.out}'")         # TOML literal string, no escapes
    return out


def _solver_config(args, solver):
    overrides = _flag_overrides(args) + [f'solver="{solver}"']
    if args.config:
        return load_config(args.config, overrides)
    return parse_config("", overrides)


def _run_job(cfg, out_dir: Path, extra=None):
    from .io import write_csv, write_sidecar
    from .runners import run_config
    t0 = time.perf_counter()
    table = run_config(cfg)
    wall = time.perf_counter() - t0
    csv_path = write_csv(table, out_dir / f"{cfg.label}.csv")
    write_sidecar(out_dir / f"{cfg.label}.json", cfg.model_dump(mode="json"), cfg.seed, wall, extra)
    print(f"wrote {csv_path} ({len(table.rows)} rows, {wall:.1f} s)")
    return csv_path


def _dump_couplings(cfg, out_dir: Path):
    from .green import couplings
    from .runners import geometry_of, polarization_of
    geom = geometry_of(cfg)
    cpl = couplings(geom, polarization_of(cfg))
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "couplings.csv"
    with open(path, "w", newline="") as fh:
        fh.write("# delta (coherent) and gamma (dissipative) couplings in units of Gamma; q index -1, 0, 1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "q", "qp", "delta_re", "delta_im", "gamma_re", "gamma_im"])
        n = geom.n_atoms
        for i in range(n):
            for j in range(n):
                for q in range(3):
                    for qp in range(3):
                        d, g = cpl.delta[i, j, q, qp], cpl.gamma[i, j, q, qp]
                        w.writerow([i, j, q - 1, qp - 1] + [format(float(x), ".15g")
                                                           for x in (d.real, d.imag, g.real, g.imag)])
    print(f"wrote {path}")


def _dump_xy(cfg, out_dir: Path):
    from .runners import _xy
    _, xy = _xy(cfg, True)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "xy_coefficients.csv"
    with open(path, "w", newline="") as fh:
        fh.write("# C^x_ij, C^y_ij in units of Gamma (Hamiltonian sums over ordered pairs i != j)\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "cx", "cy"])
        for i in range(xy.n_atoms):
            for j in range(xy.n_atoms):
                if i != j:
                    w.writerow([i, j, format(xy.cx[i, j], ".15g"), format(xy.cy[i, j], ".15g")])
    print(f"wrote {path}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _check_int_args(args)
        if args.command == "preset":
            jobs = preset_jobs(args.name)
            flags = _flag_overrides(args)
            from .config import apply_override
            for job in jobs:
                data = job.model_dump()
                for item in flags:
                    data = apply_override(data, item)
                cfg = build_config(data)
                _run_job(cfg, Path(cfg.out) / args.name, {"preset": args.name})
            return EXIT_OK
        if args.command == "dump-couplings":
            cfg = _solver_config(args, "ed")
            _dump_couplings(cfg, Path(cfg.out))
            return EXIT_OK
        cfg = _solver_config(args, args.command)
        if args.command == "xy" and args.dump_coeffs:
            _dump_xy(cfg, Path(cfg.out))
        _run_job(cfg, Path(cfg.out))
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnknownPreset as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_PRESET
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FileNotFoundError, ValueError) as exc:
        # parameter combinations rejected by the model builders
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
