"""Command-line frontend.

Subcommands: ``inspect`` (continued-fraction coefficients and pencil files),
``poles`` / ``pfe`` (pencil spectrum and partial-fraction table), ``solve``
(r(A)v through the CF and/or PFE route), ``bench`` (the convergence and
error-oracle experiments, as CSV files plus a JSON manifest).

Exit codes: 0 success, 2 configuration error, 3 analysis infeasible
(multiple poles / irregular pencil), 4 non-convergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from .confrac import builder_exp, builder_sqrt1p, to_text
from .errors import CFMatrixError, IrregularPencil, MultiplePoleDetected
from .linalg import laplace2d, random_mmatrix, read_matrix_market, read_vector, validate_csr, write_vector
from .matfun import (
    FunctionSpec,
    SolverConfig,
    bench_residuals,
    build_pencil,
    cf_apply,
    invsqrt_error_oracle,
    pfe_apply,
)
from .pencil import finite_poles, pencil_to_text, pfe

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ANALYSIS = 3
EXIT_NONCONVERGED = 4


class ConfigError(Exception):
    pass


def _build_parser():
    p = argparse.ArgumentParser(
        prog="cf",
        description="Rational matrix functions via continued-fraction block systems",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp, matrix=False):
        sp.add_argument("--fn", choices=("exp", "invsqrt"), default="exp",
                        help="built-in function family")
        sp.add_argument("--n", type=int, default=20, help="degree of the diagonal Pade approximation")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=int, default=42, help="seed for generated data")
        if matrix:
            sp.add_argument("--matrix", default="laplace2d:100",
                            help="matrix source: laplace2d:k | mmatrix:m:density:seed | file:path")
            sp.add_argument("--tol", type=float, default=1e-12)
            sp.add_argument("--maxit", type=int, default=500)
            sp.add_argument("--precond", choices=("none", "ilu0"), default="ilu0",
                            help="preconditioner for the CF route")
            sp.add_argument("--pfe-precond", choices=("none", "ilu0"), default="none",
                            help="preconditioner for the shifted systems")
            sp.add_argument("--route", choices=("cf", "pfe", "both"), default="both")
            sp.add_argument("--shift", type=float, default=0.01,
                            help="diagonal shift constant (M-matrix generator, error oracle)")
            sp.add_argument("--rhs", default=None, help="right-hand side vector file (default: seeded uniform)")

    add_common(sub.add_parser("inspect", help="print CF coefficients, write CF and pencil files"))
    sp = sub.add_parser("poles", help="finite pencil eigenvalues (= poles of r)")
    add_common(sp)
    sp.add_argument("--csv", action="store_true", help="also write poles.csv")
    sp = sub.add_parser("pfe", help="partial fraction expansion table")
    add_common(sp)
    sp.add_argument("--csv", action="store_true", help="also write pfe.csv")
    add_common(sub.add_parser("solve", help="compute r(A)v"), matrix=True)
    sp = sub.add_parser("bench", help="reproduce the convergence experiments")
    sp.add_argument("experiment", choices=("exp", "invsqrt", "invsqrt_error"))
    add_common(sp, matrix=True)
    return p


def _function_spec(args) -> FunctionSpec:
    if args.n < 1:
        raise ConfigError("--n must be >= 1")
    kind = {"exp": "exp_neg", "invsqrt": "inv_sqrt"}[args.fn]
    return FunctionSpec(kind, args.n)


def _builder_cf(args):
    if args.fn == "exp":
        return builder_exp(2 * args.n)
    return builder_sqrt1p(2 * args.n)


def _load_matrix(args):
    spec = args.matrix
    parts = spec.split(":")
    if parts[0] == "laplace2d" and len(parts) == 2:
        k = int(parts[1])
        if k < 1:
            raise ConfigError("--matrix laplace2d:k needs k >= 1")
        return laplace2d(k), {"source": spec, "k": k}
    if parts[0] == "mmatrix" and len(parts) == 4:
        m, density, seed = int(parts[1]), float(parts[2]), int(parts[3])
        if not 0 < density <= 1:
            raise ConfigError("--matrix mmatrix density must be in (0, 1]")
        return random_mmatrix(m, density, seed, shift=args.shift), {
            "source": spec, "m": m, "density": density, "matrix_seed": seed, "shift": args.shift,
        }
    if parts[0] == "file" and len(parts) >= 2:
        path = spec.split(":", 1)[1]
        if not os.path.exists(path):
            raise ConfigError(f"--matrix file not found: {path}")
        return read_matrix_market(path), {"source": spec, "path": path}
    raise ConfigError(f"--matrix spec not understood: {spec}")


def _load_rhs(args, m):
    if args.rhs is not None:
        if not os.path.exists(args.rhs):
            raise ConfigError(f"--rhs file not found: {args.rhs}")
        v = read_vector(args.rhs)
        if len(v) != m:
            raise ConfigError(f"--rhs has length {len(v)}, matrix needs {m}")
        return v
    return np.random.default_rng(args.seed).uniform(size=m)


def _write_csv(path, history, value_name):
    with open(path, "w") as fh:
        fh.write(f"iteration,{value_name}\n")
        for k, val in enumerate(history):
            fh.write(f"{k},{repr(float(val))}\n")


def _write_manifest(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def cmd_inspect(args) -> int:
    spec = _function_spec(args)
    cf = _builder_cf(args)
    cs = cf.cfraction_coefficients()
    print(f"continued fraction for fn={args.fn}, levels 1..{len(cs)} (b_i = 1):")
    print(f"  b_0 = {cf.b[0].coef[0]!r}")
    for i, c in enumerate(cs, start=1):
        print(f"  c_{i} = {c!r}")
    pencil = build_pencil(spec)
    os.makedirs(args.out, exist_ok=True)
    cf_path = os.path.join(args.out, "cf.txt")
    pencil_path = os.path.join(args.out, "pencil.txt")
    with open(cf_path, "w") as fh:
        fh.write(to_text(cf))
    with open(pencil_path, "w") as fh:
        fh.write(pencil_to_text(pencil))
    print(f"wrote {cf_path} and {pencil_path} ({pencil.n_plus_1} blocks)")
    return EXIT_OK


def cmd_poles(args) -> int:
    spec = _function_spec(args)
    pencil = build_pencil(spec)
    taus, n_inf = finite_poles(pencil)
    order = np.lexsort((taus.imag, taus.real))
    print(f"{len(taus)} finite eigenvalues, {n_inf} infinite")
    for t in taus[order]:
        print(f"  {t.real:+.16e} {t.imag:+.16e}j")
    if args.csv:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "poles.csv")
        with open(path, "w") as fh:
            fh.write("re,im\n")
            for t in taus[order]:
                fh.write(f"{repr(t.real)},{repr(t.imag)}\n")
        print(f"wrote {path}")
    return EXIT_OK


def cmd_pfe(args) -> int:
    spec = _function_spec(args)
    pencil = build_pencil(spec)
    expansion = pfe(pencil)
    order = np.lexsort((expansion.poles.imag, expansion.poles.real))
    print(f"{'tau':>44s}  {'omega':>44s}")
    for t, w in zip(expansion.poles[order], expansion.weights[order]):
        print(f"  {t.real:+.16e}{t.imag:+.16e}j  {w.real:+.16e}{w.imag:+.16e}j")
    print(f"sigma = {expansion.constant.real:+.16e}{expansion.constant.imag:+.16e}j")
    if args.csv:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "pfe.csv")
        with open(path, "w") as fh:
            fh.write("tau_re,tau_im,omega_re,omega_im\n")
            for t, w in zip(expansion.poles[order], expansion.weights[order]):
                fh.write(f"{repr(t.real)},{repr(t.imag)},{repr(w.real)},{repr(w.imag)}\n")
            fh.write(f"sigma,{repr(expansion.constant.real)},{repr(expansion.constant.imag)},\n")
        print(f"wrote {path}")
    return EXIT_OK


def cmd_solve(args) -> int:
    spec = _function_spec(args)
    if not 0 < args.tol < 1:
        raise ConfigError("--tol must be in (0, 1)")
    A, meta = _load_matrix(args)
    v = _load_rhs(args, A.shape[0])
    cfg = SolverConfig(tol=args.tol, maxit=args.maxit, preconditioner=args.precond,
                       pfe_preconditioner=args.pfe_precond)
    pencil = build_pencil(spec)
    os.makedirs(args.out, exist_ok=True)
    results = {}
    all_converged = True
    if args.route in ("cf", "both"):
        t0 = time.perf_counter()
        y, rep = cf_apply(pencil, A, v, cfg)
        results["cf"] = {
            "y": y,
            "history": rep.residual_history,
            "iterations": rep.iterations,
            "converged": rep.converged,
            "seconds": time.perf_counter() - t0,
        }
        all_converged &= rep.converged
    if args.route in ("pfe", "both"):
        t0 = time.perf_counter()
        y, hist, ok = pfe_apply(pencil, A, v, cfg)
        results["pfe"] = {
            "y": y,
            "history": hist,
            "iterations": len(hist) - 1,
            "converged": ok,
            "seconds": time.perf_counter() - t0,
        }
        all_converged &= ok
    primary = "cf" if "cf" in results else "pfe"
    write_vector(os.path.join(args.out, "y.txt"), np.real_if_close(results[primary]["y"]))
    for method, res in results.items():
        _write_csv(os.path.join(args.out, f"solve_{method}.csv"), res["history"], "relres")
    manifest = {
        "command": "solve",
        "fn": args.fn,
        "n": args.n,
        "matrix": meta,
        "tol": args.tol,
        "maxit": args.maxit,
        "precond": args.precond,
        "pfe_precond": args.pfe_precond,
        "seed": args.seed,
        "iterations": {m: r["iterations"] for m, r in results.items()},
        "converged": {m: r["converged"] for m, r in results.items()},
        "seconds": {m: r["seconds"] for m, r in results.items()},
    }
    if len(results) == 2:
        ycf, ypfe = results["cf"]["y"], results["pfe"]["y"]
        rel = float(np.linalg.norm(ycf - ypfe) / max(np.linalg.norm(ycf), 1e-300))
        manifest["route_relative_difference"] = rel
        print(f"relative difference between routes: {rel:.3e}")
    _write_manifest(os.path.join(args.out, "solve_manifest.json"), manifest)
    for method, res in results.items():
        status = "converged" if res["converged"] else "NOT converged"
        print(f"{method}: {res['iterations']} iterations, final relres "
              f"{res['history'][-1]:.3e} ({status})")
    return EXIT_OK if all_converged else EXIT_NONCONVERGED


def cmd_bench(args) -> int:
    if not 0 < args.tol < 1:
        raise ConfigError("--tol must be in (0, 1)")
    A, meta = _load_matrix(args)
    v = _load_rhs(args, A.shape[0])
    cfg = SolverConfig(tol=args.tol, maxit=args.maxit, pfe_preconditioner=args.pfe_precond)
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    if args.experiment == "invsqrt_error":
        A = validate_csr(A + args.shift * __import__("scipy.sparse", fromlist=["eye"]).eye(A.shape[0]))
        result = invsqrt_error_oracle(A, v, args.n, cfg)
        value_name = "relerr"
        bench_name = "invsqrt_error"
    else:
        kind = "exp_neg" if args.experiment == "exp" else "inv_sqrt"
        result = bench_residuals(FunctionSpec(kind, args.n), A, v, cfg)
        value_name = "relres"
        bench_name = args.experiment
    wall = time.perf_counter() - t0
    for method, hist in result.histories.items():
        _write_csv(os.path.join(args.out, f"{bench_name}_{method}.csv"), hist, value_name)
    manifest = {
        "command": f"bench {args.experiment}",
        "matrix": meta,
        "n": args.n,
        "tol": args.tol,
        "maxit": args.maxit,
        "seed": args.seed,
        "shift": args.shift,
        "iterations": result.iterations,
        "converged": result.converged,
        "seconds": result.timings,
        "total_seconds": wall,
        "meta": result.meta,
    }
    _write_manifest(os.path.join(args.out, f"{bench_name}_manifest.json"), manifest)
    for method in result.histories:
        print(f"{method}: {result.iterations[method]} iterations, "
              f"final {value_name} {result.histories[method][-1]:.3e}, "
              f"converged={result.converged[method]}")
    ok = all(result.converged.values()) if args.experiment != "invsqrt_error" else True
    return EXIT_OK if ok else EXIT_NONCONVERGED


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "inspect": cmd_inspect,
        "poles": cmd_poles,
        "pfe": cmd_pfe,
        "solve": cmd_solve,
        "bench": cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MultiplePoleDetected, IrregularPencil) as exc:
        print(f"analysis infeasible: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except CFMatrixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS


if __name__ == "__main__":
    sys.exit(main())
