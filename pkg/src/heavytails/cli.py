"""Command-line front end.

Exit codes: 0 success, 2 usage or malformed input, 3 domain error or failed
verification, 4 insufficient Monte Carlo data.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io as hio
from .certificates import CertificateGrids, measure_certificate
from .chaos import (
    BoundCurve,
    CoefficientTensor,
    fuk_nagaev_bound,
    fuk_nagaev_optimized,
    hwi_fn_combined,
    hwi_tail,
    prop31_bounds,
    prop32_bounds,
)
from .constructions import (
    EpsilonProfile,
    checkpoint_table,
    constructed_tail,
    preset_profile,
    verify_logconvex,
)
from .errors import DataError, DescriptorError, HeavyTailsError, TheoremViolation
from .mc_harness import ExperimentConfig, dominance_check, run_experiment, tail_slope, target_bound
from .tails_core import ParetoSpec, as_tail_function, pareto_moment, pareto_tail, sample
from .transforms import fractional_moment

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_DATA = 0, 2, 3, 4
CHECKPOINT_TOL = 1e-9


class _Output:
    """Collects text for stdout or the ``--output`` file."""

    def __init__(self, path):
        self.path = path
        self.parts = []

    def write(self, text: str):
        self.parts.append(text)

    def flush(self):
        text = "".join(self.parts)
        if self.path:
            Path(self.path).write_text(text)
        else:
            sys.stdout.write(text)


def _emit(args, out: _Output, header, rows, obj=None):
    if args.format == "json":
        out.write(hio.dumps_json(obj if obj is not None else [dict(zip(header, r)) for r in rows]))
    else:
        hio.write_csv(header, rows, out)


def _distribution(args):
    if args.dist:
        return hio.parse_distribution(args.dist)
    if args.alpha is None:
        raise DescriptorError("give --dist or --alpha")
    return ParetoSpec(args.alpha, args.b, args.symmetric)


# --------------------------------------------------------------------------- dist


def cmd_dist(args, out: _Output) -> int:
    dist = _distribution(args)
    if args.action == "tail":
        if not args.t:
            raise DescriptorError("dist tail needs --t")
        t = np.asarray(args.t, dtype=float)
        vals = pareto_tail(dist, t) if isinstance(dist, ParetoSpec) else as_tail_function(dist).sf(t)
        vals = np.atleast_1d(vals)
        if len(t) == 1 and args.format == "csv":
            out.write(hio.format_number(vals[0]) + "\n")
        else:
            _emit(args, out, ["t", "tail"], zip(t, vals))
        return EXIT_OK
    if args.action == "moment":
        if not args.p:
            raise DescriptorError("dist moment needs --p")
        if isinstance(dist, ParetoSpec):
            vals = [pareto_moment(dist, p) for p in args.p]
        else:
            vals = [fractional_moment(dist, p) for p in args.p]
        if len(vals) == 1 and args.format == "csv":
            out.write(hio.format_number(vals[0]) + "\n")
        else:
            _emit(args, out, ["p", "moment"], zip(args.p, vals))
        return EXIT_OK
    batch = sample(dist, args.seed, args.n)
    obj = {"seed": batch.seed, "count": batch.count, "source": batch.source, "values": batch.values}
    _emit(args, out, ["index", "value"], enumerate(batch.values), obj)
    return EXIT_OK


# --------------------------------------------------------------------------- construct


def _profile(args) -> EpsilonProfile:
    if args.config:
        obj = hio.load_config(args.config)
        obj = obj.get("profile", obj)
        if "preset" in obj:
            return preset_profile(obj["preset"], float(obj["alpha"]), float(obj["rho"]),
                                  bool(obj.get("smoothed", False)))
        return EpsilonProfile.from_descriptor(obj)
    if args.alpha is None or args.rho is None:
        raise DescriptorError("construct needs --config or --alpha and --rho")
    return preset_profile(args.preset, args.alpha, args.rho, args.smoothed)


def cmd_construct(args, out: _Output) -> int:
    profile = _profile(args)
    tail = constructed_tail(profile)
    failures = []
    rows = checkpoint_table(profile, args.checkpoints)
    for r in rows:
        if r["residual"] > CHECKPOINT_TOL:
            failures.append(f"checkpoint n={r['n']}: residual {r['residual']:.3g}")
    ell = np.linspace(0.0, args.curve_max, args.curve_points)
    log_sf = np.asarray(tail.log_sf(ell))
    if np.any(np.diff(log_sf) > 0):
        failures.append("tail is not non-increasing on the grid")
    if profile.smoothed:
        report = verify_logconvex(profile)
        if not report.passed:
            failures.append(f"log-convexity fails on blocks {report.failing_blocks}")
    if args.curve:
        hio.write_csv(["log_t", "log_tail"], zip(ell, log_sf), _FileSink(args.curve))
    header = ["n", "log_b", "log_L", "L", "target", "residual"]
    table = [[r["n"], r["log_b"], r["log_L"], math.exp(r["log_L"]), r["target"], r["residual"]] for r in rows]
    obj = {"profile": profile.descriptor(), "n_min": profile.n_min, "checkpoints": rows,
           "failures": failures}
    _emit(args, out, header, table, obj)
    if failures:
        raise TheoremViolation("; ".join(failures))
    return EXIT_OK


class _FileSink:
    def __init__(self, path):
        self.path = path

    def write(self, text):
        Path(self.path).write_text(text)


# --------------------------------------------------------------------------- verify


def cmd_verify(args, out: _Output) -> int:
    dist = hio.parse_distribution(args.dist)
    alpha = args.alpha if args.alpha is not None else (
        dist.alpha if isinstance(dist, ParetoSpec) else dist.tail_index)
    grids = CertificateGrids.default(alpha)
    if args.refine:
        grids = grids.refined()
    cert = measure_certificate(dist, alpha, grids)
    rows = [[name, getattr(cert, name), "", ""] for name in ("C1", "C2", "C3", "C4")]
    rows += [[r.name, r.lhs, r.rhs, r.passed] for r in cert.relations]
    _emit(args, out, ["quantity", "value", "bound", "passed"], rows, cert.to_dict())
    if not cert.passed:
        raise TheoremViolation("certificate relations fail: " + "; ".join(
            [r.name for r in cert.relations if not r.passed] + cert.failures))
    return EXIT_OK


# --------------------------------------------------------------------------- chaos


def _grid(spec: str) -> np.ndarray:
    try:
        if ":" in spec:
            lo, hi, count = spec.split(":")
            return np.geomspace(float(lo), float(hi), int(count))
        return np.array([float(v) for v in spec.split(",")])
    except ValueError:
        raise DescriptorError(f"cannot parse grid {spec!r}; use lo:hi:count or a comma list") from None


def _curve_rows(curve: BoundCurve):
    names = list(curve.columns)
    header = ["t", "bound", *names, "established"]
    rows = [[t, v, *[curve.columns[k][i] for k in names], bool(curve.established[i])]
            for i, (t, v) in enumerate(zip(curve.thresholds, curve.values))]
    return header, rows


def cmd_chaos(args, out: _Output) -> int:
    A = hio.load_tensor(args.tensor)
    formula = args.formula
    if args.t_grid is None:
        if formula not in ("prop31", "prop32") or args.p is None:
            raise DescriptorError("give --t-grid, or --p with prop31/prop32 for a moment bound")
        fn = prop31_bounds if formula == "prop31" else prop32_bounds
        value = fn(A, args.alpha, args.b, args.C, p=args.p)
        _emit(args, out, ["formula", "p", "moment_bound"], [[formula, args.p, value]],
              {"formula": formula, "p": args.p, "moment_bound": value})
        return EXIT_OK
    t = _grid(args.t_grid)
    if formula == "prop31":
        curve = prop31_bounds(A, args.alpha, args.b, args.C, t=t)
    elif formula == "prop32":
        curve = prop32_bounds(A, args.alpha, args.b, args.C, t=t)
    elif formula == "hwi":
        curve = hwi_tail(A, args.alpha, args.b, t, args.C)
    elif formula == "hwi_fn":
        if args.p is None:
            raise DescriptorError("hwi_fn needs --p")
        curve = hwi_fn_combined(A, args.alpha, args.b, args.p, t, args.C, args.C_prime)
    else:
        if A.d != 1:
            raise DescriptorError("fuk_nagaev needs a weight vector (d = 1 tensor)")
        if args.p is None:
            vals, p_opt = fuk_nagaev_optimized(A.entries, args.alpha, args.b, t, args.two_sided)
        else:
            vals = np.atleast_1d(fuk_nagaev_bound(A.entries, args.alpha, args.b, args.p, t, args.two_sided))
            p_opt = np.full_like(t, args.p)
        curve = BoundCurve(t, vals, "fuk_nagaev", {"alpha": args.alpha, "b": args.b}, {"p": p_opt})
    header, rows = _curve_rows(curve)
    obj = {"formula_id": curve.formula_id, "parameters": curve.parameters,
           "thresholds": curve.thresholds, "values": curve.values, "columns": curve.columns,
           "established": curve.established}
    _emit(args, out, header, rows, obj)
    return EXIT_OK


# --------------------------------------------------------------------------- compare


def _tensor_from_config(spec, base: Path) -> CoefficientTensor:
    if isinstance(spec, str):
        return hio.load_tensor(base / spec)
    kind = spec.get("kind", "inline")
    n = int(spec.get("n", 0))
    if kind == "inline":
        return CoefficientTensor(int(spec["d"]), int(spec["n"]), np.asarray(spec["entries"], dtype=float))
    if kind == "file":
        return hio.load_tensor(base / spec["path"])
    if kind == "uniform":
        return CoefficientTensor(1, n, np.full(n, 1 / math.sqrt(n)))
    if kind == "coordinate":
        e = np.zeros(n)
        e[int(spec.get("index", 0))] = 1.0
        return CoefficientTensor(1, n, e)
    if kind == "identity":
        return CoefficientTensor(2, n, np.eye(n))
    if kind == "star":
        M = np.zeros((n, n))
        M[0, 1:] = M[1:, 0] = 1.0
        return CoefficientTensor(2, n, M)
    raise DescriptorError(f"unknown tensor kind {kind!r}")


def build_experiment(obj: dict, base: Path, seed=None) -> tuple[ExperimentConfig, list, dict | None]:
    """Experiment, bound targets and optional slope window from a config mapping."""
    try:
        dist = hio.parse_distribution(obj["distribution"])
        tensor = _tensor_from_config(obj["tensor"], base)
        cfg = ExperimentConfig(
            distribution=dist,
            tensor=tensor,
            N=int(obj["N"]),
            seed=int(seed if seed is not None else obj["seed"]),
            chunk_size=int(obj.get("chunk_size", 50_000)),
            thresholds=obj.get("thresholds"),
            p_grid=tuple(float(p) for p in obj.get("p_grid", ())),
            statistic=obj.get("statistic", "value"),
            allow_extrapolation=bool(obj.get("allow_extrapolation", False)),
            workers=int(obj.get("workers", 1)),
        )
    except KeyError as exc:
        raise DescriptorError(f"experiment config is missing {exc}") from None
    return cfg, list(obj.get("targets", [])), obj.get("slope")


def cmd_compare(args, out: _Output) -> int:
    path = Path(args.config)
    cfg, targets, slope = build_experiment(hio.load_config(path), path.parent, args.seed)
    result = run_experiment(cfg)
    emp = result.tail
    header = ["threshold", "count", "estimate", "ci_lo", "ci_hi"]
    cols = [emp.thresholds, emp.counts, emp.estimates, emp.ci_lo, emp.ci_hi]
    summary = {"metadata": result.metadata, "warnings": result.warnings, "targets": []}
    failed = []
    for target in targets:
        curve = target_bound(target, cfg, emp.thresholds)
        rep = dominance_check(curve, emp)
        fid = curve.formula_id
        header += [f"bound_{fid}", f"pass_{fid}"]
        cols += [rep.bound, rep.passed]
        required = bool(target.get("required", False))
        summary["targets"].append({"formula_id": fid, "pass_fraction": rep.pass_fraction, "required": required})
        if required and not rep.pass_fraction == 1.0:
            failed.append(f"{fid}: pass fraction {rep.pass_fraction:.4g}")
    if slope is not None:
        window = tuple(slope.get("window", (1e-4, 1e-2)))
        summary["slope"] = {"window": window, "value": tail_slope(emp, window)}
    summary["moments"] = [m.__dict__ for m in result.moments]
    rows = list(zip(*cols))
    _emit(args, out, header, rows, {**summary, "table": [dict(zip(header, r)) for r in rows]})
    if args.report:
        Path(args.report).write_text(hio.dumps_json(summary))
    if failed:
        raise TheoremViolation("dominance fails for " + "; ".join(failed))
    return EXIT_OK


# --------------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavytails", description="Heavy-tail moments, tails and chaos bounds.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--verbose", "-v", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", parents=[common], help="tail, moment or samples of a distribution")
    p.add_argument("action", choices=("tail", "moment", "sample"))
    p.add_argument("--dist", help="descriptor such as pareto:2,1 or pareto_s:3,1")
    p.add_argument("--alpha", type=float)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--t", type=float, nargs="+")
    p.add_argument("--p", type=float, nargs="+")
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_dist)

    p = sub.add_parser("construct", parents=[common], help="build and verify a constructed tail")
    p.add_argument("--config", help="profile JSON/TOML")
    p.add_argument("--preset", choices=("inverse", "sqrt"), default="inverse")
    p.add_argument("--alpha", type=float)
    p.add_argument("--rho", type=float)
    p.add_argument("--smoothed", action="store_true")
    p.add_argument("--checkpoints", type=int, default=6)
    p.add_argument("--curve", help="write the log-tail curve CSV here")
    p.add_argument("--curve-points", type=int, default=10_000)
    p.add_argument("--curve-max", type=float, default=60.0, help="largest log t on the curve grid")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("verify", parents=[common], help="measure moment-growth constants")
    p.add_argument("--dist", required=True)
    p.add_argument("--alpha", type=float, help="index for the certificate (default: tail index)")
    p.add_argument("--refine", action="store_true", help="use doubled grids")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("chaos", parents=[common], help="chaos bound curves")
    p.add_argument("--tensor", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--formula", choices=("prop31", "prop32", "hwi", "hwi_fn", "fuk_nagaev"), required=True)
    p.add_argument("--t-grid", help="lo:hi:count (geometric) or a comma list")
    p.add_argument("--p", type=float)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--C-prime", dest="C_prime", type=float, default=1.0)
    p.add_argument("--two-sided", action="store_true")
    p.set_defaults(func=cmd_chaos)

    p = sub.add_parser("compare", parents=[common], help="Monte Carlo experiment against bounds")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--report", help="write the JSON summary here")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    out = _Output(args.output)
    try:
        code = args.func(args, out)
    except DescriptorError as exc:
        out.flush()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        out.flush()
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except HeavyTailsError as exc:
        out.flush()
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    out.flush()
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
