"""Command-line front end: simulate, null-check, and shrink subcommands.

Exit codes: 0 success, 2 usage/validation failures, 3 mathematical
precondition failures.  Every successful command writes a manifest capturing
the exact configuration, so a run can be replayed bit-for-bit.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from . import __version__
from .detectors import DetectorKind
from .errors import DomainError, StructuralError
from .shrinkage import lw_covariance, shrink_eigenvalues
from .simulation import (
    SimulationConfig,
    normality_check,
    null_z_samples,
    roc_curve,
    run_trials,
    write_roc_csv,
    write_scores_csv,
)
from .spectral import (
    SymMatrix,
    read_matrix_csv,
    spectral_decompose,
    write_matrix_csv,
)

_HIST_BINS = 50
_HIST_RANGE = (-5.0, 5.0)


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int
    tool_version: str
    outputs: list
    duration_seconds: float

    def as_dict(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "tool_version": self.tool_version,
            "outputs": self.outputs,
            "duration_seconds": self.duration_seconds,
        }


def _write_json_atomic(path, payload: dict) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hdtest",
        description="High-dimensional two-sample mean tests and their Monte Carlo harness.",
    )
    parser.add_argument("--version", action="version", version=f"hdtest {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="two-hypothesis Monte Carlo with ROC output")
    _add_common(sim)
    sim.add_argument(
        "--detectors",
        default=",".join(k.value for k in DetectorKind),
        help="comma-separated detector names",
    )
    sim.add_argument("--trials", type=int, default=2000, help="trials per hypothesis")

    null = sub.add_parser("null-check", help="null distribution of the shrinkage Z score")
    _add_common(null, p=200, n1=200, n2=200, cov_order=4)
    null.add_argument("--trials", type=int, default=1000, help="number of null trials")

    shrink = sub.add_parser("shrink", help="shrink a sample covariance matrix from CSV")
    shrink.add_argument("--matrix", required=True, help="CSV file, one row per line, no header")
    shrink.add_argument("--n", type=int, required=True, help="effective sample size")
    shrink.add_argument("--out-prefix", required=True, help="prefix for output files")
    return parser


def _add_common(sub, p=200, n1=150, n2=150, cov_order=0):
    sub.add_argument("--p", type=int, default=p, help="dimension")
    sub.add_argument("--n1", type=int, default=n1, help="group 1 size")
    sub.add_argument("--n2", type=int, default=n2, help="group 2 size")
    sub.add_argument("--cov-order", type=int, default=cov_order, help="spike order P >= 0")
    sub.add_argument("--seed", type=int, default=0, help="root RNG seed")
    sub.add_argument("--radius", type=float, default=1.0, help="mean-shift sphere radius")
    sub.add_argument(
        "--base-dist",
        choices=("uniform", "gaussian"),
        default="uniform",
        help="base noise distribution",
    )
    sub.add_argument("--out-dir", required=True, help="output directory")


def _fail(msg: str, code: int) -> int:
    print(f"hdtest: error: {msg}", file=sys.stderr)
    return code


def _build_config(args, detectors=None) -> SimulationConfig:
    kwargs = dict(
        p=args.p,
        n1=args.n1,
        n2=args.n2,
        cov_order=args.cov_order,
        trials=args.trials,
        seed=args.seed,
        radius=args.radius,
        base_dist=args.base_dist,
    )
    if detectors is not None:
        kwargs["detectors"] = detectors
    return SimulationConfig(**kwargs)


def cmd_simulate(args) -> int:
    try:
        names = [d.strip() for d in args.detectors.split(",") if d.strip()]
        detectors = tuple(DetectorKind.from_name(n) for n in names)
        config = _build_config(args, detectors=detectors)
    except StructuralError as exc:
        return _fail(str(exc), 2)
    try:
        os.makedirs(args.out_dir, exist_ok=True)
    except OSError as exc:
        return _fail(str(exc), 2)
    t0 = time.perf_counter()
    try:
        table = run_trials(config)
    except DomainError as exc:
        return _fail(str(exc), 3)
    outputs = []

    scores_path = os.path.join(args.out_dir, "scores.csv")
    write_scores_csv(table, scores_path)
    outputs.append(scores_path)

    curves = {}
    for kind in table.present():
        curves[kind] = roc_curve(table.h0[kind], table.h1[kind])
        roc_path = os.path.join(args.out_dir, f"roc_{kind.value}.csv")
        write_roc_csv(curves[kind], roc_path)
        outputs.append(roc_path)

    summary = {
        "command": "simulate",
        "config": config.as_dict(),
        "covariance": {
            "order": table.model.order,
            "seed": list(table.model.seed) if table.model.seed else None,
            "diag": [float(x) for x in table.model.diag],
        },
        "detectors": {
            kind.value: {
                "detector": kind.value,
                "auc": curves[kind].auc,
                "trials": config.trials,
                "seed": config.seed,
            }
            for kind in curves
        },
        "absent": {k.value: v for k, v in table.absent.items()},
    }
    summary_path = os.path.join(args.out_dir, "summary.json")
    _write_json_atomic(summary_path, summary)
    outputs.append(summary_path)

    _finish_manifest(args.out_dir, "simulate", config.as_dict(), config.seed, outputs, t0)
    for kind in curves:
        print(f"{kind.value}: auc={curves[kind].auc:.4f}")
    for kind, reason in table.absent.items():
        print(f"{kind.value}: absent ({reason})")
    return 0


def cmd_null_check(args) -> int:
    try:
        config = _build_config(args, detectors=(DetectorKind.PROPOSED_LW,))
    except StructuralError as exc:
        return _fail(str(exc), 2)
    try:
        os.makedirs(args.out_dir, exist_ok=True)
    except OSError as exc:
        return _fail(str(exc), 2)
    t0 = time.perf_counter()
    try:
        z = null_z_samples(config)
        stats = normality_check(z)  # needs >= 2 samples: trials=1 is a usage error
    except StructuralError as exc:
        return _fail(str(exc), 2)
    except DomainError as exc:
        return _fail(str(exc), 3)
    outputs = []

    samples_path = os.path.join(args.out_dir, "z_samples.csv")
    with open(samples_path, "w", encoding="utf-8") as fh:
        fh.write("z\n")
        for v in z:
            fh.write(repr(float(v)) + "\n")
    outputs.append(samples_path)

    counts, edges = np.histogram(z, bins=_HIST_BINS, range=_HIST_RANGE)
    width = edges[1] - edges[0]
    hist_path = os.path.join(args.out_dir, "z_hist.csv")
    with open(hist_path, "w", encoding="utf-8") as fh:
        fh.write("bin_lo,bin_hi,count,density,normal_density\n")
        for i in range(_HIST_BINS):
            center = 0.5 * (edges[i] + edges[i + 1])
            density = counts[i] / (z.size * width)
            normal = math.exp(-0.5 * center * center) / math.sqrt(2.0 * math.pi)
            fh.write(
                f"{repr(float(edges[i]))},{repr(float(edges[i + 1]))},"
                f"{counts[i]},{repr(float(density))},{repr(float(normal))}\n"
            )
    outputs.append(hist_path)

    summary = {
        "command": "null-check",
        "config": config.as_dict(),
        "mean": stats.mean,
        "variance": stats.variance,
        "ks_statistic": stats.ks_statistic,
    }
    summary_path = os.path.join(args.out_dir, "summary.json")
    _write_json_atomic(summary_path, summary)
    outputs.append(summary_path)

    _finish_manifest(args.out_dir, "null-check", config.as_dict(), config.seed, outputs, t0)
    print(
        f"null z: mean={stats.mean:.4f} variance={stats.variance:.4f} "
        f"ks={stats.ks_statistic:.4f}"
    )
    return 0


def cmd_shrink(args) -> int:
    t0 = time.perf_counter()
    try:
        if args.n < 1:
            raise StructuralError(f"--n must be >= 1, got {args.n}")
        raw = read_matrix_csv(args.matrix)
        sym = SymMatrix(raw)
    except (StructuralError, OSError) as exc:
        return _fail(str(exc), 2)
    try:
        decomp = spectral_decompose(sym)
        dhat = shrink_eigenvalues(decomp, args.n, sym.p)
        estimate = lw_covariance(decomp, args.n, sym.p)
    except StructuralError as exc:
        return _fail(str(exc), 2)
    except DomainError as exc:
        return _fail(str(exc), 3)

    prefix = args.out_prefix
    dhat_path = f"{prefix}dhat.csv"
    write_matrix_csv(dhat_path, dhat.reshape(-1, 1))
    rlw_path = f"{prefix}rlw.csv"
    write_matrix_csv(rlw_path, estimate.matrix())

    lam = decomp.eigenvalues
    cond_in = float("inf") if lam[-1] <= 0.0 else float(lam[0] / lam[-1])
    cond_out = float(np.max(dhat) / np.min(dhat))
    print(f"input condition number: {cond_in:.6g}")
    print(f"output condition number: {cond_out:.6g}")

    config = {"matrix": args.matrix, "n": args.n, "out_prefix": prefix}
    manifest = RunManifest(
        command="shrink",
        config=config,
        seed=0,
        tool_version=__version__,
        outputs=[dhat_path, rlw_path],
        duration_seconds=time.perf_counter() - t0,
    )
    _write_json_atomic(f"{prefix}manifest.json", manifest.as_dict())
    return 0


def _finish_manifest(out_dir, command, config, seed, outputs, t0) -> None:
    manifest = RunManifest(
        command=command,
        config=config,
        seed=seed,
        tool_version=__version__,
        outputs=outputs,
        duration_seconds=time.perf_counter() - t0,
    )
    _write_json_atomic(os.path.join(out_dir, "manifest.json"), manifest.as_dict())


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    if args.command == "simulate":
        return cmd_simulate(args)
    if args.command == "null-check":
        return cmd_null_check(args)
    if args.command == "shrink":
        return cmd_shrink(args)
    return _fail(f"unknown command {args.command!r}", 2)  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
