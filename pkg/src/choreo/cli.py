"""Command-line front end: solve, sweep, verify, plot.

Exit codes: 0 success, 2 malformed flags, 3 inadmissible sign word,
4 verification failure.  The ``CHOREO_LOG`` environment variable sets
the log level (DEBUG/INFO/WARNING; default WARNING).
"""

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .constraints import enumerate_admissible_omega, validate_omega
from .model import (OmegaSequence, export_csv, load_trajectory, resample,
                    save_trajectory)
from .optimizer import SolveResult, SolverConfig, minimize, refine, sweep
from .symmetry import SymmetrySpec, reconstruct_full_loop
from .verify import Thresholds, certificate_from_dict, certify

log = logging.getLogger("choreo")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_INFEASIBLE = 3
EXIT_VERIFY = 4


def _config_from_args(args) -> SolverConfig:
    cfg = SolverConfig(node_count=args.nodes,
                       gradient_tolerance=args.tol,
                       max_iters=args.max_iters,
                       seed=args.seed)
    return cfg


def _solver_metadata(args, result: SolveResult) -> dict:
    return {
        "command": "solve",
        "nodes": args.nodes,
        "tol": args.tol,
        "max_iters": args.max_iters,
        "seed": args.seed,
        "status": result.status,
        "action": result.report.action if result.report else None,
        "gradient_inf_norm": result.report.gradient_inf_norm if result.report else None,
        "iterations": int(len(result.trace)),
    }


def _emit_run_log(result: SolveResult):
    trace = result.trace
    for i, a in enumerate(trace):
        log.info("iteration %d: action %.12f", i, a)
    if result.report:
        log.info("final: action %.12f, gradient %.3e, min distance %.6f",
                 result.report.action, result.report.gradient_inf_norm,
                 result.report.min_pairwise_distance)


def _write_solution(path, result: SolveResult, resample_to=None):
    spec = SymmetrySpec.for_n(result.n)
    loop = reconstruct_full_loop(spec, result.arc)
    el_stride = 1
    cert = certify(loop, result.omega, el_stride=el_stride)
    out_loop = loop if not resample_to else resample(loop, resample_to)
    save_trajectory(path, out_loop, n=result.n, omega=result.omega,
                    arc_node_count=result.arc.node_count,
                    provenance={"status": result.status,
                                "action": result.report.action,
                                "gradient_inf_norm": result.report.gradient_inf_norm},
                    certificate=cert.as_dict())
    return cert


def cmd_solve(args) -> int:
    try:
        omega = OmegaSequence.from_word(args.n, args.omega)
        check = validate_omega(args.n, omega.signs)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not check.valid:
        print(f"inadmissible omega for n={args.n}: {check.reason}", file=sys.stderr)
        return EXIT_INFEASIBLE
    cfg = _config_from_args(args)
    result = minimize(args.n, omega, cfg)
    if result.status == "infeasible_omega":
        print(f"inadmissible omega for n={args.n}: {result.message}", file=sys.stderr)
        return EXIT_INFEASIBLE
    _emit_run_log(result)
    cert = _write_solution(args.out, result, args.samples)
    print(f"status: {result.status}; action {result.report.action:.9f}; "
          f"min distance {result.report.min_pairwise_distance:.6f}; "
          f"certificate {'PASS' if cert.passed else 'FAIL'}; wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    words = enumerate_admissible_omega(args.n, modulo_flip=args.modulo_flip)
    if not words:
        print(f"no admissible omega for n={args.n}", file=sys.stderr)
        return EXIT_INFEASIBLE
    results = sweep(args.n, cfg, modulo_flip=args.modulo_flip, jobs=args.jobs)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for omega, result in results.items():
        name = omega.word.replace(",", "").replace("+", "p").replace("-", "m")
        path = outdir / f"n{args.n}_{name}.traj"
        _write_solution(path, result)
        rows.append([omega.word, result.report.action,
                     result.report.min_pairwise_distance, result.status])
    summary = outdir / f"n{args.n}_summary.csv"
    with open(summary, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega", "action", "min_distance", "status"])
        writer.writerows(rows)
    for row in rows:
        print(f"omega {row[0]}: action {row[1]:.9f}, min distance {row[2]:.6f}, {row[3]}")
    print(f"wrote {len(rows)} trajectories and {summary}")
    return EXIT_OK


def cmd_verify(args) -> int:
    loop, doc = load_trajectory(args.trajectory)
    n = doc.get("n")
    omega_signs = doc.get("omega")
    if n is None or omega_signs is None:
        print("trajectory file lacks n/omega metadata", file=sys.stderr)
        return EXIT_USAGE
    omega = OmegaSequence(n, tuple(omega_signs))
    cert = certify(loop, omega, el_stride=1)
    print(cert.render())
    embedded = doc.get("certificate")
    if embedded is not None:
        prior = certificate_from_dict(embedded)
        agree = all(c.passed == prior.check(c.name).passed for c in cert.checks)
        print(f"embedded certificate agreement: {'yes' if agree else 'NO'}")
        if not agree:
            return EXIT_VERIFY
    return EXIT_OK if cert.passed else EXIT_VERIFY


def cmd_plot(args) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    loop, doc = load_trajectory(args.trajectory)
    n = doc.get("n") or loop.mass_system.body_count // 2
    fig, ax = plt.subplots(figsize=(7, 7))
    proj = args.proj
    cols = {"xy": (0, 1), "xz": (0, 2), "yz": (1, 2)}
    s = loop.sample_count

    def coords(track):
        if proj == "3d-oblique":
            # simple cavalier projection
            return track[:, 0] + 0.35 * track[:, 2], track[:, 1] + 0.35 * track[:, 2]
        cx, cy = cols[proj]
        return track[:, cx], track[:, cy]

    nbody = loop.mass_system.body_count
    for i in range(nbody):
        track = np.vstack([loop.track(i), loop.track(i)[:1]])
        x, y = coords(track)
        style = "-" if i in (0, n) else "-"
        lw = 2.0 if i in (0, n) else 0.6
        color = "C0" if i < n else "C3"
        ax.plot(x, y, style, lw=lw, color=color, alpha=1.0 if i in (0, n) else 0.5)
        x0, y0 = coords(loop.track(i)[:1])
        ax.plot(x0, y0, "o", ms=4, color=color)
    ax.axhline(0.0, color="0.6", lw=0.6, ls="--")
    ax.axvline(0.0, color="0.6", lw=0.6, ls="--")
    ax.set_aspect("equal")
    labels = {"xy": ("x", "y"), "xz": ("x", "z"), "yz": ("y", "z"),
              "3d-oblique": ("x + 0.35 z", "y + 0.35 z")}
    ax.set_xlabel(labels[proj][0])
    ax.set_ylabel(labels[proj][1])
    word = ",".join("+" if s_ > 0 else "-" for s_ in doc.get("omega") or [])
    ax.set_title(f"2n = {nbody} bodies, omega = {word}, {proj} projection")
    fig.savefig(args.out, bbox_inches="tight")
    csv_path = os.path.splitext(args.out)[0] + ".csv"
    export_csv(csv_path, loop)
    print(f"wrote {args.out} and {csv_path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="choreo",
        description="Spatial double choreographies of the 2n-body problem "
                    "by constrained action minimization.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--nodes", type=int, default=128,
                       help="arc nodes M (default 128; snapped up for grid "
                            "compatibility when n does not divide 2M)")
        p.add_argument("--tol", type=float, default=1e-7,
                       help="gradient tolerance (default 1e-7)")
        p.add_argument("--max-iters", type=int, default=4000,
                       help="projected-gradient iteration budget (default 4000)")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for optional initialization jitter (default 0)")

    p_solve = sub.add_parser("solve", help="minimize the action for one (n, omega)")
    p_solve.add_argument("--n", type=int, required=True, help="half the body count")
    p_solve.add_argument("--omega", type=str, required=True,
                         help="sign word, e.g. '+,-' (length floor(n/2)+1)")
    common(p_solve)
    p_solve.add_argument("--samples", type=int, default=None,
                         help="resample the stored loop to this many samples")
    p_solve.add_argument("--out", type=str, default="run.traj",
                         help="output trajectory file (default run.traj)")
    p_solve.set_defaults(func=cmd_solve)

    p_sweep = sub.add_parser("sweep", help="solve every admissible omega for n")
    p_sweep.add_argument("--n", type=int, required=True)
    common(p_sweep)
    p_sweep.add_argument("--modulo-flip", action="store_true",
                         help="solve one representative of each {omega, -omega} pair")
    p_sweep.add_argument("--jobs", type=int, default=1,
                         help="parallel solver processes (default 1)")
    p_sweep.add_argument("--out", type=str, default="sweep_out",
                         help="output directory (default sweep_out)")
    p_sweep.set_defaults(func=cmd_sweep)

    p_verify = sub.add_parser("verify", help="re-certify a stored trajectory")
    p_verify.add_argument("trajectory", type=str)
    p_verify.set_defaults(func=cmd_verify)

    p_plot = sub.add_parser("plot", help="render body tracks to a vector image")
    p_plot.add_argument("trajectory", type=str)
    p_plot.add_argument("--proj", type=str, default="xy",
                        choices=["xy", "xz", "yz", "3d-oblique"],
                        help="projection plane (default xy)")
    p_plot.add_argument("--out", type=str, default="orbit.svg",
                        help="output image, svg/pdf (default orbit.svg)")
    p_plot.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    level = os.environ.get("CHOREO_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
