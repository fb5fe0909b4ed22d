"""Command-line entry points.

Subcommands: ``coherence`` (basis table as CSV), ``synth`` (generate a
field), ``hurst`` (per-row estimates), ``ingest`` (sensor log to matrix
and mask), ``recover`` (fill one matrix), ``sweep`` (full experiment from
a key=value file).  Every random choice is controlled by ``--seed``, so
repeated invocations write identical files.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import coherence, data, pipeline
from .solvers import RegularizationWeights, SolverConfig, SolverError


def _cmd_coherence(args) -> int:
    print("basis,mu,mu_over_sqrtN")
    for row in coherence.coherence_table(args.n):
        print(f"{row.basis},{row.mu!r},{row.mu_over_sqrt_n!r}")
    return 0


def _cmd_synth(args) -> int:
    spec = data.SyntheticSpec(hurst=args.hurst, n=args.rows, t=args.cols,
                              seed=args.seed, amplitude=args.amplitude)
    data.write_matrix_csv(args.out, data.generate_fgn_field(spec))
    return 0


def _cmd_hurst(args) -> int:
    X = data.read_matrix_csv(args.infile)
    print("row,hurst")
    for i in range(X.shape[0]):
        row = X[i][np.isfinite(X[i])]
        try:
            est = repr(data.estimate_hurst(row))
        except ValueError as exc:
            est = f"error: {exc}"
        print(f"{i},{est}")
    return 0


def _cmd_ingest(args) -> int:
    coverage = data.scan_node_coverage(args.infile)
    if len(coverage) < args.nodes:
        raise SystemExit(f"log has readings from {len(coverage)} nodes, "
                         f"fewer than the {args.nodes} requested")
    node_ids = sorted(coverage)[: args.nodes]
    with data.open_sensor_log(args.infile) as fh:
        X, m1, skipped = data.parse_sensor_log(fh, node_ids, args.start,
                                               args.cols, args.interval)
    if skipped:
        print(f"skipped {skipped} malformed lines", file=sys.stderr)
    data.write_matrix_csv(args.out, X, missing=m1)
    if args.mask_out:
        data.write_mask_csv(args.mask_out, m1)
    print(f"nodes={X.shape[0]} cols={X.shape[1]} "
          f"missing={int(m1.sum())} of {m1.size}", file=sys.stderr)
    return 0


def _cmd_recover(args) -> int:
    Y = data.read_matrix_csv(args.infile)
    observed = np.isfinite(Y)
    if args.mask:
        observed &= data.read_mask_csv(args.mask)
    Yz = np.where(observed, np.nan_to_num(Y), 0.0)
    cfg = SolverConfig(max_iters=args.max_iters, tolerance=args.tolerance,
                       seed=args.seed)
    method = args.method
    try:
        if method in pipeline._CS_METHODS:
            formulation, denoise = pipeline._CS_METHODS[method]
            lam = args.lam
            weights = RegularizationWeights(
                lambda1=lam, lambda2=lam, lambda3=lam, lambda4=lam,
                lambda5=args.lambda5)
            X_hat, _ = pipeline.pci_mdr(Yz, observed, weights,
                                        formulation=formulation,
                                        denoise=denoise, config=cfg)
        elif method == "svt":
            from .solvers import svt_complete
            X_hat, _ = svt_complete(Yz, observed, config=cfg)
        else:
            m = pipeline._MF_RE.match(method)
            if not m:
                raise SystemExit(f"unknown method {method!r}")
            from .solvers import mf_complete
            X_hat, _ = mf_complete(Yz, observed, int(m.group(1)),
                                   args.lam if args.lam is not None else 1e-6, cfg)
    except (SolverError, ValueError) as exc:
        raise SystemExit(f"recovery failed: {exc}")
    data.write_matrix_csv(args.out, X_hat)
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config, "r", encoding="utf-8") as fh:
        cfg, out = pipeline.parse_experiment_config(fh.read())
    if args.out:
        out = args.out
    if not out:
        raise SystemExit("no output path: set out= in the config or pass --out")
    report = pipeline.run_sweep(cfg)
    pipeline.emit_csv(report, out)
    failures = [r for r in report.rows if r.error]
    for r in failures:
        print(f"{r.method} at loss {r.loss_pct} trial {r.trial} failed: {r.error}",
              file=sys.stderr)
    print(f"wrote {len(report.rows)} rows to {out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wsnrecover",
                                description="Missing-data recovery toolkit for "
                                            "matrix-shaped sensor data")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("coherence", help="print the basis coherence table as CSV")
    c.add_argument("--n", type=int, required=True, help="transform size (power of two, >= 32)")
    c.set_defaults(func=_cmd_coherence)

    s = sub.add_parser("synth", help="generate a synthetic sensor field")
    s.add_argument("--hurst", type=float, required=True)
    s.add_argument("--rows", type=int, required=True)
    s.add_argument("--cols", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--amplitude", type=float, default=700.0,
                   help="baseline sensor level (default 700)")
    s.add_argument("--out", required=True)
    s.set_defaults(func=_cmd_synth)

    h = sub.add_parser("hurst", help="print per-row Hurst estimates")
    h.add_argument("--in", dest="infile", required=True)
    h.set_defaults(func=_cmd_hurst)

    g = sub.add_parser("ingest", help="bucket a sensor log onto a node-time grid")
    g.add_argument("--in", dest="infile", required=True)
    g.add_argument("--nodes", type=int, required=True,
                   help="use the first k mote ids with any coverage")
    g.add_argument("--start", type=int, required=True,
                   help="POSIX seconds (UTC) of the first time slot")
    g.add_argument("--cols", type=int, required=True)
    g.add_argument("--interval", type=int, default=60, help="slot width in seconds")
    g.add_argument("--out", required=True)
    g.add_argument("--mask-out", dest="mask_out")
    g.set_defaults(func=_cmd_ingest)

    r = sub.add_parser("recover", help="fill the missing entries of one matrix")
    r.add_argument("--in", dest="infile", required=True,
                   help="matrix CSV; empty cells are missing")
    r.add_argument("--mask", help="optional 0/1 mask CSV of observed cells")
    r.add_argument("--method", required=True,
                   help="pci-mdr-{spatial,temporal,kron,kron-denoised,row-dct,col-dct}, "
                        "svt, or mf(r)")
    r.add_argument("--lambda", dest="lam", type=float,
                   help="regularization strength (default: auto)")
    r.add_argument("--lambda5", type=float, help="denoising strength (default: auto)")
    r.add_argument("--max-iters", type=int, default=2000)
    r.add_argument("--tolerance", type=float, default=1e-8)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.set_defaults(func=_cmd_recover)

    w = sub.add_parser("sweep", help="run a sweep described by a key=value file")
    w.add_argument("--config", required=True)
    w.add_argument("--out", help="override the out= key of the config")
    w.set_defaults(func=_cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
