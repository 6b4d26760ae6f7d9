"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 numeric failure,
3 partial sweep failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, config as cfgmod
from .bounds import (
    CLRConstants,
    equilibrium_lyapunov_dim,
    lower_bound_scaling,
    upper_bound_d1,
    upper_bound_d1_simple,
    upper_bound_d2,
    upper_bound_d3plus,
)
from .config import ConfigError
from .dynamics import InstabilityError, simulate
from .ineq import run_campaign
from .lyapunov import compute_exponents
from .report import emit_report, parse_manifest
from .sweep import SweepConfig, SweepError, run_sweep

log = logging.getLogger("wavedim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_PARTIAL = 0, 1, 2, 3


def _emit(text: str, out: Path | None, name: str) -> None:
    """Print ``text`` and, with ``--out``, also save it as ``out/name``."""
    sys.stdout.write(text)
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / name).write_text(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _doc(args) -> dict:
    doc = cfgmod.load(args.config)
    if getattr(args, "sides", None):
        doc.setdefault("domain", {})["sides"] = args.sides
    for key in ("gamma", "M", "N", "scenario", "b"):
        val = getattr(args, key, None)
        if val is not None:
            doc.setdefault("model", {})[key] = val
    return doc


def cmd_spectrum(args) -> int:
    doc = _doc(args)
    spec = cfgmod.spectrum_from(doc)
    rows = []
    for k, lam in enumerate(spec.bold_lambdas):
        rows.append((k // spec.N + 1, float(lam), k + 1))
    _emit(_csv(("index", "lambda", "bold_lambda_index"), rows), args.out, "spectrum.csv")
    return EXIT_OK


def cmd_simulate(args) -> int:
    doc = _doc(args)
    model = cfgmod.model_from(doc)
    if model.domain.d > 2:
        raise ConfigError("nonlinear simulation is supported for d = 1, 2")
    run = doc.get("run", {})
    dt = float(run.get("dt") or model.max_dt())
    xi0 = model.random_state(float(run.get("energy", 1.0)), seed=args.seed)
    traj = simulate(xi0, model, float(run.get("T", 10.0)), dt,
                    stride=int(run.get("stride", 1)), t_burn=float(run.get("t_burn", 0.0)))
    _emit(_csv(traj.COLUMNS, [[float(x) for x in r] for r in zip(
        traj.times, traj.energy, traj.psi, traj.lyapunov, traj.u_linf)]), args.out, "trajectory.csv")
    return EXIT_OK


def cmd_lyapunov(args) -> int:
    doc = _doc(args)
    model = cfgmod.model_from(doc)
    ly = doc.get("lyapunov", {})
    start = ly.get("start", "random")
    if start == "zero":
        xi0 = model.zero_state()
    elif start == "random":
        xi0 = model.random_state(float(doc.get("run", {}).get("energy", 1.0)), seed=args.seed)
    else:
        raise ConfigError(f"unknown start {start!r}")
    rep = compute_exponents(
        model, xi0, int(ly.get("k", min(8, model.dim))), float(ly.get("T", 100.0)),
        qr_interval=float(ly.get("qr_interval", 0.5)), dt=ly.get("dt"),
        epsilon=ly.get("epsilon"), t_burn=ly.get("t_burn"), method=ly.get("method", "auto"),
        seed=args.seed,
    )
    payload = rep.to_dict()
    rows = [(i + 1, mu, c, q) for i, (mu, c, q) in enumerate(
        zip(rep.exponents, rep.cumulative, rep.q_samples))]
    text = _json(payload)
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "lyapunov.json").write_text(text)
        (args.out / "lyapunov.csv").write_text(
            _csv(("index", "exponent", "cumulative", "q"), rows))
    return EXIT_OK


def cmd_bounds(args) -> int:
    B = args.B
    if args.estimate_file:
        try:
            B = float(json.loads(Path(args.estimate_file).read_text())["B_d"])
        except (OSError, KeyError, ValueError) as exc:
            raise ConfigError(f"cannot read B_d from {args.estimate_file}: {exc}") from exc
    if B is None:
        raise ConfigError("give --B or --estimate-file")
    d, g, N = args.d, args.gamma, args.N
    inputs = {"gamma": g, "N": N, "d": d, "B_d": B}
    if d == 1:
        length = cfgmod.parse_length(args.length)
        root, maj = upper_bound_d1(g, N, length, B)
        report = {"upper_bound": root, "formula": "d1_root", "majorant": maj,
                  "elementary": upper_bound_d1_simple(g, N, length, B),
                  "inputs": {**inputs, "length": length}}
    elif d == 2:
        measure = cfgmod.parse_length(args.measure)
        report = {"upper_bound": upper_bound_d2(g, N, measure, B), "formula": "d2",
                  "inputs": {**inputs, "measure": measure}}
    else:
        clr = CLRConstants(d, args.L0d)
        report = upper_bound_d3plus(g, N, d, B, clr).to_dict()
        report["c_d"] = clr.c_d
    _emit(_json(report), args.out, "bounds.json")
    return EXIT_OK


def cmd_lower_bound(args) -> int:
    gammas = sorted(args.gammas, reverse=True)
    length = cfgmod.parse_length(args.length)
    domain = cfgmod.Domain((length,) * args.d)
    counts, fit = lower_bound_scaling(gammas, args.a, args.b, domain)
    eq = [equilibrium_lyapunov_dim(g, abs(args.b), length) if args.d == 1 else None for g in gammas]
    rows = [(g, c, 2 * c, e if e is not None else "", fit.slope, fit.r2)
            for g, c, e in zip(gammas, counts, eq)]
    _emit(_csv(("gamma", "count", "instability_index", "equilibrium_lyapunov_dim", "slope", "r2"),
               rows), args.out, "lower_bound.csv")
    return EXIT_OK


def cmd_ineq(args) -> int:
    seeds = range(args.seed, args.seed + args.seeds)
    rows = run_campaign(args.d, seeds, n_max=args.n_max, grid=args.grid, N=args.components)
    text = _csv(("seed", "n", "lhs", "rhs", "margin", "pass"),
                [(r.seed, r.n, r.lhs, r.rhs, r.margin, r.passed) for r in rows])
    summary = {
        "kind": args.d, "families": len(rows), "passed": sum(r.passed for r in rows),
        "min_margin": min((r.margin for r in rows), default=None),
        "modes": {m: sum(r.mode == m for r in rows) for m in ("orthonormal", "contracted", "projected")},
    }
    _emit(text, args.out, "ineq.csv")
    if args.out is not None:
        (args.out / "ineq_summary.json").write_text(_json(summary))
    return EXIT_OK if summary["passed"] == len(rows) else EXIT_NUMERIC


def cmd_sweep(args) -> int:
    doc = cfgmod.load(args.config)
    config = SweepConfig.from_dict(doc, seed=args.seed)
    out = args.out or Path("out")
    record = run_sweep(config, out, force=args.force, threads=args.threads)
    emit_report(record, out / config.hash)
    sys.stdout.write(f"{out / config.hash}\n")
    return EXIT_PARTIAL if record.failed else EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.record)
    try:
        record = parse_manifest(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    files = emit_report(record, args.out or path.parent)
    for f in files:
        sys.stdout.write(f"{f}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML configuration file")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--seed", type=int, help="random seed (default 0; sweeps: overrides [sweep].seeds)")
    common.add_argument("--threads", type=int, default=1)
    common.add_argument("--force", action="store_true", help="recompute existing sweeps")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="wavedim",
                                description="Damped wave attractor dimension laboratory")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def model_args(sp):
        sp.add_argument("--sides", nargs="+", help="box side lengths, e.g. pi or 2pi")
        sp.add_argument("--gamma", type=float)
        sp.add_argument("-M", type=int, dest="M")
        sp.add_argument("-N", type=int, dest="N")
        sp.add_argument("--scenario", choices=cfgmod.SCENARIOS)
        sp.add_argument("--b", type=float)

    sp = sub.add_parser("spectrum", parents=[common], help="Dirichlet eigenvalues as CSV")
    model_args(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("simulate", parents=[common], help="trajectory diagnostics as CSV")
    model_args(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("lyapunov", parents=[common], help="Lyapunov exponents as JSON")
    model_args(sp)
    sp.set_defaults(func=cmd_lyapunov)

    sp = sub.add_parser("bounds", parents=[common], help="closed-form upper bounds as JSON")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--gamma", type=float, required=True)
    sp.add_argument("-N", type=int, dest="N", default=1)
    sp.add_argument("--length", default="pi")
    sp.add_argument("--measure", default="9.869604401089358", help="domain area or volume")
    sp.add_argument("--B", type=float)
    sp.add_argument("--estimate-file", help="JSON file with a B_d entry")
    sp.add_argument("--L0d", type=float)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("lower-bound", parents=[common], help="unstable mode counts as CSV")
    sp.add_argument("--gammas", type=float, nargs="+", default=[0.2, 0.1, 0.05, 0.025])
    sp.add_argument("--d", type=int, default=1)
    sp.add_argument("--length", default="pi", help="side of the interval or cube")
    sp.add_argument("--a", type=float, default=0.0)
    sp.add_argument("--b", type=float, default=1.0)
    sp.set_defaults(func=cmd_lower_bound)

    sp = sub.add_parser("ineq-test", parents=[common], help="randomized inequality campaign")
    sp.add_argument("--d", default="1", choices=("sub", "1", "2", "3", "inv_sqrt"))
    sp.add_argument("--n-max", type=int, default=16)
    sp.add_argument("--seeds", type=int, default=1000)
    sp.add_argument("--grid", type=int)
    sp.add_argument("--components", type=int, default=1)
    sp.set_defaults(func=cmd_ineq)

    sp = sub.add_parser("sweep", parents=[common], help="gamma sweep from a config file")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("report", parents=[common], help="re-emit tables and figures")
    sp.add_argument("record", help="path to a manifest.json")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed is None and args.command != "sweep":
        args.seed = 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "d", None) in ("1", "2", "3"):
        args.d = "d" + args.d
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SweepError as exc:
        print(f"sweep failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InstabilityError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
