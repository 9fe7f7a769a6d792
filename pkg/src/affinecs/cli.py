"""Command-line front end: runs one experiment, writes JSON + CSV + SVG artifacts.

Config comes from an optional key=value file (--config) overridden by flags.
Every JSON record embeds the fully resolved configuration; timestamps live in
a separate "meta" object so records are byte-reproducible given the same
config and seed.  Exit codes: 0 success, 1 numeric failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time

import numpy as np

from . import __version__, acceptance, dynamics, kernel, pathmc, semigroup
from .errors import AffineCSError, ParameterError
from .fiducial import FiducialSpec, is_admissible, moment, uncertainty_product
from .kernel import PhasePoint

USAGE_ERROR = 2
NUMERIC_ERROR = 1


def _parse_point(text: str) -> PhasePoint:
    try:
        p, q = (float(x) for x in text.split(","))
        return PhasePoint(p, q)
    except (ValueError, ParameterError) as exc:
        raise ParameterError(f"bad phase point {text!r}: {exc}") from exc


def _parse_floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",")]


def _load_config_file(path: str) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, val = line.partition("=")
            if not _:
                raise ParameterError(f"config line without '=': {line!r}")
            out[key.strip()] = val.strip()
    return out


def _json_default(obj):
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)}")


def _write_record(outdir: str, name: str, config: dict, result: dict) -> str:
    os.makedirs(outdir, exist_ok=True)
    record = {
        "command": name,
        "config": config,
        "result": result,
        "meta": {"timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
                 "version": __version__},
    }
    path = os.path.join(outdir, f"{name}.json")
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    return path


def _write_csv(outdir: str, name: str, header: list[str], rows) -> str:
    path = os.path.join(outdir, f"{name}.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    return path


def cmd_fiducial(args, outdir):
    spec = (FiducialSpec(args.alpha, args.beta) if args.alpha is not None
            else FiducialSpec.one_parameter(args.beta))
    moments = {}
    for k in (-1, 0, 1, 2):
        rep = moment(k, spec)
        moments[str(k)] = None if rep.divergent else rep.value
    result = {
        "alpha": spec.alpha, "beta": spec.beta, "norm_const": spec.norm_const,
        "moments": moments,
        "uncertainty_product": uncertainty_product(spec),
        "admissible": is_admissible(spec),
    }
    config = {"beta": args.beta, "alpha": args.alpha}
    print(json.dumps(result, indent=2, default=_json_default))
    _write_record(outdir, "fiducial", config, result)
    return 0


def cmd_kernel(args, outdir):
    a, b = _parse_point(args.a), _parse_point(args.b)
    val = kernel.overlap_closed(a, b, args.beta).value
    result = {"re": val.real, "im": val.imag, "abs": abs(val)}
    if args.quadrature:
        spec = FiducialSpec.one_parameter(args.beta)
        qv = kernel.overlap_quadrature(a, b, spec)
        result["quadrature_re"] = qv.real
        result["quadrature_im"] = qv.imag
        result["closed_vs_quadrature"] = abs(val - qv)
    config = {"beta": args.beta, "a": args.a, "b": args.b,
              "quadrature": args.quadrature}
    print(json.dumps(result, indent=2))
    _write_record(outdir, "kernel", config, result)
    return 0


def cmd_gram(args, outdir):
    points = [_parse_point(t) for t in args.points.split(";")]
    g = kernel.gram(points, args.beta)
    eigs = np.linalg.eigvalsh(g)
    result = {"n": len(points), "min_eigenvalue": float(eigs.min()),
              "max_eigenvalue": float(eigs.max()),
              "eigenvalues": [float(e) for e in eigs]}
    config = {"beta": args.beta, "points": args.points}
    print(json.dumps(result, indent=2))
    _write_record(outdir, "gram", config, result)
    return 0


def cmd_resolution(args, outdir):
    a, b = _parse_point(args.a), _parse_point(args.b)
    rep = kernel.resolution_check(a, b, args.beta, tol=args.tol)
    result = {
        "verdict": rep.verdict,
        "lhs": rep.lhs, "rhs": rep.rhs,
        "residual": None if rep.residual == float("inf") else rep.residual,
        "slope": rep.slope,
    }
    config = {"beta": args.beta, "a": args.a, "b": args.b, "tol": args.tol}
    print(json.dumps(result, indent=2, default=_json_default))
    _write_record(outdir, "resolution", config, result)
    rows = [(s, v.real, v.imag) for s, v in rep.cutoff_trace]
    _write_csv(outdir, "resolution_trace", ["s_max", "lhs_re", "lhs_im"], rows)
    if not args.no_plot:
        from . import plotting
        xs = [r[0] for r in rows]
        ys = [abs(complex(r[1], r[2])) for r in rows]
        plotting.save_trace_plot(os.path.join(outdir, "resolution_trace.svg"),
                                 xs, ys, "s cutoff", "|lhs|",
                                 f"resolution trace (beta={args.beta}, {rep.verdict})",
                                 logx=True, logy=rep.verdict == "diverging")
    return 0


def cmd_polarize(args, outdir):
    from . import rkhs
    at = _parse_point(args.at)
    src = _parse_point(args.source)
    elem = rkhs.kernel_element(src, args.beta)
    op_beta = args.operator_beta if args.operator_beta is not None else args.beta
    res = rkhs.polarization_residual(elem, at, args.step, operator_beta=op_beta)
    result = {"residual_abs": abs(res.value), "re": res.value.real,
              "im": res.value.imag, "step": res.step}
    config = {"beta": args.beta, "source": args.source, "at": args.at,
              "step": args.step, "operator_beta": op_beta}
    print(json.dumps(result, indent=2))
    _write_record(outdir, "polarize", config, result)
    return 0


def cmd_semigroup(args, outdir):
    beta = args.beta
    spec = semigroup.default_grid(beta)
    if args.mode == "knu":
        value = semigroup.knu(beta, args.nu, args.T, spec)
        result = {"knu": value, "nu": args.nu, "T": args.T}
    elif args.mode == "limit":
        a, b = _parse_point(args.a), _parse_point(args.b)
        lim = semigroup.projection_limit(a, b, beta, _parse_floats(args.nus), T=args.T)
        exact = kernel.overlap_closed(a, b, beta).value
        result = {
            "nu_schedule": list(lim.nu_schedule),
            "rescaled": [{"re": v.real, "im": v.imag} for v in lim.rescaled()],
            "knu": list(lim.knu),
            "extrapolated": lim.extrapolated,
            "error_estimate": lim.error_estimate,
            "closed_form": exact,
            "flags": list(lim.flags),
        }
        rows = [(n, (k * r).real, (k * r).imag, k)
                for n, r, k in zip(lim.nu_schedule, lim.raw, lim.knu)]
        _write_csv(outdir, "semigroup_limit", ["nu", "re", "im", "knu"], rows)
        if not args.no_plot:
            from . import plotting
            plotting.save_convergence_plot(
                os.path.join(outdir, "semigroup_limit.svg"),
                list(lim.nu_schedule), np.array(lim.rescaled()),
                np.zeros(len(lim.knu)), exact=exact,
                title=f"projection limit beta={beta}")
    else:  # evolve
        b = _parse_point(args.b)
        gen = semigroup.build_A(beta, spec)
        start = semigroup.delta_surrogate(spec, b)
        out = semigroup.evolve(start, gen, args.nu, args.T)
        field_csv = os.path.join(outdir, "semigroup_field.csv")
        out.to_csv(field_csv)
        result = {"wnorm": out.wnorm(), "boundary_ratio": out.boundary_ratio(),
                  "warnings": list(out.warnings), "field_csv": field_csv}
        if not args.no_plot:
            from . import plotting
            plotting.save_field_heatmap(os.path.join(outdir, "semigroup_field.svg"),
                                        out, title=f"evolved field beta={beta}")
    config = {"beta": beta, "mode": args.mode, "nu": getattr(args, "nu", None),
              "T": args.T, "nus": getattr(args, "nus", None),
              "a": getattr(args, "a", None), "b": getattr(args, "b", None)}
    print(json.dumps(result, indent=2, default=_json_default))
    _write_record(outdir, "semigroup", config, result)
    return 0


def cmd_toy(args, outdir):
    exact = semigroup.toy_heat(args.dx, 0.0, args.nu, args.T)
    rescaled = semigroup.toy_selfconsistent(args.dx, 0.0, args.nu, args.T)
    result = {"kernel": exact, "rescaled": rescaled}
    if args.grid:
        g = semigroup.toy_heat_grid(args.dx, 0.0, args.nu, args.T)
        result["grid_kernel"] = g
        result["grid_rel_error"] = abs(g - exact) / exact
    config = {"nu": args.nu, "T": args.T, "dx": args.dx, "grid": args.grid}
    print(json.dumps(result, indent=2))
    _write_record(outdir, "toy", config, result)
    return 0


def cmd_mc(args, outdir):
    a, b = _parse_point(args.a), _parse_point(args.b)
    h = None
    if args.h_constant or args.h_rq or args.h_spq:
        h = pathmc.AffineSymbol(r=args.h_rq, s=args.h_spq, k=args.h_constant)
    nus = _parse_floats(args.nus)
    estimates = []
    for nu in nus:
        est = pathmc.propagator_mc(a, b, args.beta, nu, args.T, h=h,
                                   n_samples=args.samples, seed=args.seed)
        estimates.append(est)
    rows = [(e.nu, e.value.real, e.value.imag, e.stderr) for e in estimates]
    _write_csv(outdir, "mc_convergence", ["nu", "re", "im", "err"], rows)
    result = {
        "estimates": [{"nu": e.nu, "re": e.value.real, "im": e.value.imag,
                       "stderr": e.stderr, "flags": list(e.flags)}
                      for e in estimates],
    }
    if len(estimates) >= 3 and all(e.reliable for e in estimates):
        ext = pathmc.extrapolate_nu(estimates)
        result["extrapolated"] = ext.value
        result["error"] = ext.error
        result["chi2_per_dof"] = ext.chi2_per_dof
    if h is None:
        result["closed_form"] = kernel.overlap_closed(a, b, args.beta).value
    if not args.no_plot:
        from . import plotting
        plotting.save_convergence_plot(
            os.path.join(outdir, "mc_convergence.svg"),
            [e.nu for e in estimates],
            np.array([e.value for e in estimates]),
            np.array([e.stderr for e in estimates]),
            exact=result.get("closed_form"),
            title=f"MC propagator beta={args.beta}")
    config = {"beta": args.beta, "a": args.a, "b": args.b, "nus": args.nus,
              "T": args.T, "samples": args.samples, "seed": args.seed,
              "h": {"k": args.h_constant, "rq": args.h_rq, "spq": args.h_spq}}
    print(json.dumps(result, indent=2, default=_json_default))
    _write_record(outdir, "mc", config, result)
    return 0


def cmd_dynamics(args, outdir):
    H = dynamics.AffineHamiltonian(args.R, args.S)
    b = _parse_point(args.b)
    flowed = dynamics.flow_labels(b, H, args.T)
    result = {"flowed_p": flowed.p, "flowed_q": flowed.q}
    if args.a:
        a = _parse_point(args.a)
        val = dynamics.propagator_affine(a, b, H, args.T, args.beta)
        result["propagator"] = val
        if args.oracle:
            ora = dynamics.propagator_affine_quadrature(a, b, H, args.T, args.beta)
            result["oracle"] = ora
            result["oracle_gap"] = abs(val - ora)
    config = {"R": args.R, "S": args.S, "T": args.T, "b": args.b,
              "a": args.a, "beta": args.beta, "oracle": args.oracle}
    print(json.dumps(result, indent=2, default=_json_default))
    _write_record(outdir, "dynamics", config, result)
    return 0


def cmd_selftest(args, outdir):
    if args.quick:
        results = acceptance.run_quick()
    elif args.criteria:
        results = acceptance.run_all(args.criteria.split(","))
    else:
        results = acceptance.run_all()
    n_pass = sum(r.passed for r in results)
    summary = {"passed": n_pass, "total": len(results),
               "criteria": [{"index": r.index, "name": r.name, "passed": r.passed,
                             "seconds": round(r.seconds, 2), "details": r.details}
                            for r in results]}
    config = {"quick": args.quick, "criteria": args.criteria}
    print(f"{n_pass}/{len(results)} checks passed")
    _write_record(outdir, "selftest", config, summary)
    return 0 if n_pass == len(results) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="affinecs",
        description="Affine coherent-state overlap, semigroup, and path-integral lab")
    parser.add_argument("--config", help="key=value file; flags override it")
    parser.add_argument("--outdir", default=None,
                        help="artifact directory (default $AFFINECS_OUTDIR or ./affinecs-out)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fiducial", help="moments, uncertainty, admissibility")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.set_defaults(func=cmd_fiducial)

    p = sub.add_parser("kernel", help="coherent-state overlap")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--a", required=True, help="p,q")
    p.add_argument("--b", required=True, help="p,q")
    p.add_argument("--quadrature", action="store_true",
                   help="also run the independent quadrature route")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("gram", help="Gram matrix spectrum")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--points", required=True, help="p1,q1;p2,q2;...")
    p.set_defaults(func=cmd_gram)

    p = sub.add_parser("resolution", help="resolution-of-unity check")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--a", default="0,1")
    p.add_argument("--b", default="0,1")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_resolution)

    p = sub.add_parser("polarize", help="polarization residual of a kernel element")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--source", default="0,1", help="kernel label p,q")
    p.add_argument("--at", required=True, help="evaluation point p,q")
    p.add_argument("--step", type=float, default=1e-3)
    p.add_argument("--operator-beta", type=float, default=None)
    p.set_defaults(func=cmd_polarize)

    p = sub.add_parser("semigroup", help="grid evolution / K_nu / projection limit")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--mode", choices=("evolve", "knu", "limit"), default="limit")
    p.add_argument("--nu", type=float, default=8.0)
    p.add_argument("--nus", default="4,8,16")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--a", default="0,2")
    p.add_argument("--b", default="0,1")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_semigroup)

    p = sub.add_parser("toy", help="exactly solvable 1-D heat model")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--dx", type=float, required=True)
    p.add_argument("--grid", action="store_true", help="also run the grid route")
    p.set_defaults(func=cmd_toy)

    p = sub.add_parser("mc", help="Monte Carlo propagator with nu extrapolation")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--nus", default="4,8,16")
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--samples", type=int, default=100000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--h-constant", type=float, default=0.0)
    p.add_argument("--h-rq", type=float, default=0.0)
    p.add_argument("--h-spq", type=float, default=0.0)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("dynamics", help="affine flows and propagators")
    p.add_argument("--R", type=float, required=True)
    p.add_argument("--S", type=float, required=True)
    p.add_argument("--T", type=float, default=1.0)
    p.add_argument("--b", required=True, help="label to flow, p,q")
    p.add_argument("--a", default=None, help="bra label for the propagator")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--oracle", action="store_true",
                   help="cross-check with the x-representation quadrature")
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("selftest", help="run the acceptance suite")
    p.add_argument("--quick", action="store_true", help="trivial-tier checks only")
    p.add_argument("--criteria", default=None,
                   help="comma-separated criterion keys (e.g. 1,2,10a)")
    p.set_defaults(func=cmd_selftest)
    return parser


def _apply_config_file(parser, argv):
    """Inject file values as defaults so that explicit flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    cfg = _load_config_file(argv[idx + 1])
    extra = []
    for key, val in cfg.items():
        flag = "--" + key.replace("_", "-")
        if flag not in argv:
            extra.extend([flag, val])
    return argv + extra


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return USAGE_ERROR if exc.code not in (0, None) else 0
    except (OSError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    outdir = args.outdir or os.environ.get("AFFINECS_OUTDIR", "affinecs-out")
    try:
        return args.func(args, outdir)
    except ParameterError as exc:
        print(json.dumps({"error": "parameter", "message": str(exc)}), file=sys.stderr)
        return USAGE_ERROR
    except AffineCSError as exc:
        diag = getattr(exc, "diagnostics", {})
        print(json.dumps({"error": "numeric", "message": str(exc),
                          "diagnostics": {k: str(v) for k, v in diag.items()}}),
              file=sys.stderr)
        return NUMERIC_ERROR


if __name__ == "__main__":
    sys.exit(main())
