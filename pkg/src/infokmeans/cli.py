"""Command-line front end: ``cluster``, ``bound``, ``validate`` and ``synth``.

Exit codes: 0 success, 1 a validation suite failed, 2 invalid input or
arguments, 3 clustering stopped at ``max_iters`` without converging.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import bounds as bnd
from .core import InvalidInput, ReferenceMeasure, log_normalize, validate_pointset
from .harness import (GENERATORS, SUITES, THREADS_ENV, SynthSpec, generate, run_suite)
from .quantize import (INITS, POLICIES, FiniteHistogram, GaussianLocation, LloydConfig,
                       lloyd_info, lloyd_quadratic, lloyd_robust)

EXIT_OK, EXIT_FAIL, EXIT_INVALID, EXIT_NOT_CONVERGED = 0, 1, 2, 3


def fmt(v) -> str:
    return format(float(v), ".17g")


def jsonable(obj):
    """Replace non-finite floats by strings so the output stays strict JSON."""
    if isinstance(obj, dict):
        return {k: jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else ("inf" if f > 0 else "-inf" if f < 0 else "nan")
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, allow_nan=False)


def write_csv(path: Path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(",".join(r if isinstance(r, str) else fmt(r) for r in row) + "\n")


def read_dense(path) -> np.ndarray:
    arr = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if arr.size == 0:
        raise InvalidInput(f"{path}: no data")
    return arr


def read_sparse(path, m=None) -> np.ndarray:
    trip = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    if trip.shape[1] != 3:
        raise InvalidInput(f"{path}: sparse input needs row,col,weight triplets")
    rows, cols = trip[:, 0].astype(int), trip[:, 1].astype(int)
    if np.any(rows < 0) or np.any(cols < 0):
        raise InvalidInput(f"{path}: negative index")
    m = int(cols.max()) + 1 if m is None else m
    if cols.max() >= m:
        raise InvalidInput(f"{path}: column index exceeds support size {m}")
    out = np.zeros((int(rows.max()) + 1, m))
    np.add.at(out, (rows, cols), trip[:, 2])
    return out


def read_nu(path):
    return ReferenceMeasure.from_masses(np.loadtxt(path, delimiter=",", dtype=float).ravel())


def histogram_log_matrix(weights: np.ndarray, nu: ReferenceMeasure) -> np.ndarray:
    if weights.shape[1] != nu.support_size:
        raise InvalidInput("histogram width differs from the reference measure size")
    if not np.all(np.isfinite(weights)) or np.any(weights < 0):
        raise InvalidInput("histogram weights must be finite and nonnegative")
    empty = np.flatnonzero(~np.any(weights > 0, axis=1))
    if empty.size:
        raise InvalidInput(f"row {empty[0]} has no mass")
    with np.errstate(divide="ignore"):
        return log_normalize(np.log(weights), nu)


# ----------------------------------------------------------- commands

def cmd_cluster(args) -> int:
    cfg = LloydConfig(k=args.k, max_iters=args.max_iters, rel_tol=args.rel_tol,
                      abs_tol=args.abs_tol, seed=args.seed, init=args.init,
                      empty_cluster_policy=args.empty_policy)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"criterion": args.criterion, "k": args.k, "seed": args.seed}
    family = None
    if args.criterion == "info" and args.family == "finite_histogram":
        nu_given = read_nu(args.nu) if args.nu else None
        if args.format == "sparse":
            w = read_sparse(args.input, nu_given.support_size if nu_given else None)
        else:
            w = read_dense(args.input)
        nu = nu_given or ReferenceMeasure.uniform(w.shape[1])
        family = FiniteHistogram(nu)
        data = histogram_log_matrix(w, nu)
    else:
        data = validate_pointset(read_dense(args.input), args.B)
        report["bound_B"] = data.bound_B

    if args.criterion == "quadratic":
        rep = lloyd_quadratic(data, cfg)
    elif args.criterion == "robust":
        rep = lloyd_robust(data, cfg, args.sigma)
        report.update(c2=rep.extras["c2"], r2=rep.extras["r2"], sigma=args.sigma,
                      descent_margins=rep.extras["descent_margins"])
    else:
        if family is None:
            family = GaussianLocation(args.sigma)
        rep = lloyd_info(data, cfg, family)
        report.update(family=family.kind, log_normalizers=rep.log_normalizers)

    report.update(criterion_trace=rep.criterion_trace, final_criterion=rep.criterion,
                  iterations=rep.iterations, converged=rep.converged, flags=rep.flags)
    write_csv(out / "labels.csv", ([str(i), str(int(l))] for i, l in enumerate(rep.labels)))
    if isinstance(family, FiniteHistogram):
        write_csv(out / "centers.csv", np.exp(rep.centers) * family.nu.weights)
    else:
        write_csv(out / "centers.csv", rep.centers)
    (out / "report.json").write_text(dumps(report) + "\n")
    return EXIT_OK if rep.converged else EXIT_NOT_CONVERGED


def _bound_report(kind: str, a, n: int, k: int) -> bnd.BoundReport:
    if kind == "linear":
        return bnd.linear_bound(n, k, a.theta_norm, a.w_norm, a.a, a.b, a.delta, a.mode,
                                a.epsilon)
    if kind == "quadratic":
        return bnd.quadratic_bound(n, k, a.B, a.delta, a.mode, a.epsilon)
    if kind == "robust":
        return bnd.robust_bound(n, k, a.sigma, a.delta, a.mode, a.epsilon)
    return bnd.info_bound(n, k, a.B, a.C, a.delta, a.mode, a.epsilon)


def parse_sweep(text: str):
    """``n=1000:10000:1000`` (inclusive range) or ``k=2,4,8``."""
    if "=" not in text:
        raise InvalidInput("sweep must look like n=start:stop:step or k=v1,v2")
    var, spec = text.split("=", 1)
    if var not in ("n", "k"):
        raise InvalidInput("sweep variable must be n or k")
    try:
        if ":" in spec:
            start, stop, step = (int(s) for s in spec.split(":"))
            values = list(range(start, stop + 1, step)) if step > 0 else []
        else:
            values = [int(s) for s in spec.split(",")]
    except ValueError as exc:
        raise InvalidInput(f"bad sweep values: {exc}") from None
    if not values:
        raise InvalidInput("empty sweep")
    return var, values


def cmd_bound(args) -> int:
    if args.sweep:
        var, values = parse_sweep(args.sweep)
        rows = []
        header = None
        for v in values:
            n, k = (v, args.k) if var == "n" else (args.n, v)
            rep = _bound_report(args.kind, args, n, k)
            if header is None:
                header = [var, "total", *rep.terms]
            rows.append([str(v), rep.total, *rep.terms.values()])
        target = open(args.sweep_out, "w") if args.sweep_out else sys.stdout
        try:
            target.write(",".join(header) + "\n")
            for row in rows:
                target.write(",".join(r if isinstance(r, str) else fmt(r) for r in row) + "\n")
        finally:
            if args.sweep_out:
                target.close()
        return EXIT_OK
    rep = _bound_report(args.kind, args, args.n, args.k)
    print(dumps(rep.as_dict()))
    return EXIT_OK


def cmd_validate(args) -> int:
    names = list(SUITES) if args.suite == "all" else [args.suite]
    if any(s not in SUITES for s in names):
        print(f"unknown suite {args.suite!r}; choose from all, {', '.join(SUITES)}",
              file=sys.stderr)
        return EXIT_INVALID
    all_ok = True
    target = open(args.out, "w") if args.out else sys.stdout
    try:
        for name in names:
            ok, cases = run_suite(name, args.seed, threads=args.threads)
            all_ok &= ok
            for case in cases:
                target.write(dumps(case) + "\n")
    finally:
        if args.out:
            target.close()
    return EXIT_OK if all_ok else EXIT_FAIL


def cmd_synth(args) -> int:
    spec = SynthSpec(args.generator, args.n, args.seed, B=args.B, d=args.d,
                     components=args.components, spread=args.spread, m=args.m,
                     alpha=args.alpha, topic_count=args.topic_count,
                     doc_length=args.doc_length, smoothing=args.smoothing)
    data = generate(spec)
    # histograms are written as probability masses (uniform reference measure)
    rows = np.exp(data) / spec.m if spec.is_histogram else data.points
    write_csv(Path(args.out), rows)
    return EXIT_OK


# ------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="infokmeans",
                                description="Quadratic, robust and information k-means.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("cluster", help="run a Lloyd-style engine on a data file")
    c.add_argument("criterion", choices=("quadratic", "robust", "info"))
    c.add_argument("--in", dest="input", required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--max-iters", type=int, default=200)
    c.add_argument("--rel-tol", type=float, default=1e-9)
    c.add_argument("--abs-tol", type=float, default=1e-12)
    c.add_argument("--init", choices=INITS, default="dsq_seeding")
    c.add_argument("--empty-policy", choices=POLICIES, default="farthest_point_reseed")
    c.add_argument("--sigma", type=float, default=1.0)
    c.add_argument("--B", type=float, default=None, help="claimed norm bound for points")
    c.add_argument("--family", choices=("finite_histogram", "gaussian_location"),
                   default="finite_histogram")
    c.add_argument("--format", choices=("dense", "sparse"), default="dense")
    c.add_argument("--nu", default=None, help="reference measure masses (CSV)")
    c.add_argument("--out-dir", default=".")
    c.set_defaults(func=cmd_cluster)

    b = sub.add_parser("bound", help="evaluate a generalization bound")
    b.add_argument("kind", choices=("linear", "quadratic", "robust", "info"))
    b.add_argument("--n", type=int, default=1000)
    b.add_argument("--k", type=int, default=2)
    b.add_argument("--B", type=float, default=1.0)
    b.add_argument("--C", type=float, default=0.0)
    b.add_argument("--sigma", type=float, default=1.0)
    b.add_argument("--delta", type=float, default=0.05)
    b.add_argument("--mode", choices=bnd.MODES, default="uniform")
    b.add_argument("--epsilon", type=float, default=0.0)
    b.add_argument("--theta-norm", type=float, default=1.0)
    b.add_argument("--w-norm", type=float, default=1.0)
    b.add_argument("--a", type=float, default=0.0)
    b.add_argument("--b", type=float, default=1.0)
    b.add_argument("--sweep", default=None, help="n=start:stop:step or k=v1,v2,...")
    b.add_argument("--sweep-out", default=None)
    b.set_defaults(func=cmd_bound)

    v = sub.add_parser("validate", help="run property suites, JSON lines out")
    v.add_argument("suite", help=f"all or one of: {', '.join(SUITES)}")
    v.add_argument("--seed", type=int, default=42)
    v.add_argument("--out", default=None)
    v.add_argument("--threads", type=int, default=None,
                   help=f"worker cap (default from ${THREADS_ENV} or 1)")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("synth", help="generate synthetic data")
    s.add_argument("generator", choices=GENERATORS)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--B", type=float, default=1.0)
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--components", type=int, default=3)
    s.add_argument("--spread", type=float, default=0.05)
    s.add_argument("--m", type=int, default=10)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--topic-count", type=int, default=3)
    s.add_argument("--doc-length", type=int, default=200)
    s.add_argument("--smoothing", type=float, default=0.5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidInput, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
