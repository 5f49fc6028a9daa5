"""Command-line entry point: ``gausslm frames|sample|check|sweep``.

Exit codes: 0 success/HOLDS, 1 VIOLATED, 2 invalid input, 3 INDETERMINATE,
4 VACUOUS, 5 unexpected error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from gausslm.errors import GaussLMError
from gausslm.estimate import Budget
from gausslm.frames import (
    EXACT_TOL,
    correlation_frame,
    frame_to_dict,
    identity_decomposition,
    lift_identity_residuals,
    tensor_lift,
)
from gausslm.functions import parse_function_spec
from gausslm.gaussian import (
    GaussianSampler,
    build_block_covariance,
    sample_correlated_frame,
    sample_correlated_mixture,
    write_samples_csv,
)
from gausslm.sweep import (
    SweepPlan,
    bundled_plan,
    run_sweep,
    status_counts,
    verdict_line,
    write_digest,
    write_report,
)
from gausslm.verify import (
    Status,
    check_average_identity,
    check_block_holder,
    check_chain,
    check_entropy_laplacian,
    check_entropy_stein,
    check_integration_by_parts,
    check_log_sobolev_sandwich,
    check_sqrt_moment,
    worst_status,
)

EXIT_CODES = {
    Status.HOLDS: 0,
    Status.VIOLATED: 1,
    Status.INDETERMINATE: 3,
    Status.VACUOUS: 4,
    Status.ERROR: 5,
}


class UsageError(Exception):
    pass


def _fmt(x: float) -> str:
    return f"{x:.5f}"


def cmd_frames(args) -> int:
    if args.n < 2 or args.k < 1:
        raise UsageError("need n >= 2 and k >= 1")
    frame = correlation_frame(args.n, args.t)
    decomp = tensor_lift(identity_decomposition(frame), args.k)
    residuals = {
        **{f"simplex.{k}": v for k, v in frame.simplex.residuals().items()},
        **{f"frame.{k}": v for k, v in frame.residuals().items()},
        "decomposition": decomp.residual(),
        "isometry": decomp.isometry_residual(),
        **{f"lift.{k}": v for k, v in lift_identity_residuals(frame, args.k).items()},
    }
    worst = max(residuals.values())
    spectrum = sorted({round(float(e), 10) for e in build_block_covariance(args.n, args.k, args.t).eigenvalues()}, reverse=True)
    if args.json:
        doc = frame_to_dict(frame, identity_decomposition(frame))
        doc.update({"k": args.k, "residuals": residuals, "max_residual": worst, "spectrum": spectrum})
        print(json.dumps(doc, indent=2))
    else:
        print(f"n={frame.n} t={frame.t:g} k={args.k} p={frame.p:g} q={frame.q:g}")
        for i, u in enumerate(frame.u):
            print(f"  u{i + 1} = ({', '.join(_fmt(x) for x in u)})")
        dec = identity_decomposition(frame)
        for c, label in zip(dec.coefficients, dec.labels):
            print(f"  coefficient {label}: {c:.6g}")
        print(f"max residual: {worst:.3e}")
        print(f"spectrum of T: {{{', '.join(f'{e:g}' for e in spectrum)}}}")
    return 0 if worst < EXACT_TOL else 1


def cmd_sample(args) -> int:
    sampler = GaussianSampler(args.seed)
    if args.construction == "frame":
        tuples = sample_correlated_frame(correlation_frame(args.n, args.t), args.k, sampler, args.count)
    else:
        tuples = sample_correlated_mixture(args.t, args.n, args.k, sampler, args.count)
    if args.out:
        write_samples_csv(tuples, args.out)
        print(f"wrote {args.count} samples to {args.out}")
    else:
        write_samples_csv(tuples, "/dev/stdout")
    return 0


def _budget(args) -> Budget:
    return Budget(nodes=args.nodes, samples=args.samples, seed=args.seed)


def _single(args, fn):
    backend, budget = args.backend, _budget(args)
    order = args.s if args.s is not None else args.q
    check = args.check
    if check == "sqrt-moment":
        if order is None:
            raise UsageError("sqrt-moment needs --s (or --q)")
        return [check_sqrt_moment(fn, order, args.concavity, backend, budget)]
    if check == "chain":
        return list(check_chain(fn, args.n, args.t, args.k, backend, budget))
    if check == "block-holder":
        return list(check_block_holder(fn, args.n, args.t, args.k, backend, budget))
    if check == "average-identity":
        return [check_average_identity(fn, args.n, args.t, args.k, backend, budget)]
    if check == "entropy-stein":
        return [check_entropy_stein(fn, args.concavity, backend, budget)]
    if check == "entropy-laplacian":
        return [check_entropy_laplacian(fn, args.concavity, backend, budget)]
    if check == "ibp":
        return [check_integration_by_parts(fn, None, backend, budget, form=args.form)]
    if check == "log-sobolev":
        return list(check_log_sobolev_sandwich(fn, backend, budget))
    raise UsageError(f"unknown check {check!r}")


def cmd_check(args) -> int:
    fn = parse_function_spec(args.fn)
    verdicts = _single(args, fn)
    for v in verdicts:
        if args.json:
            print(verdict_line(v))
            continue
        print(f"{v.check}: {v.status.value}")
        if v.lhs is not None:
            print(f"  lhs   {v.lhs.value:.5f} +- {v.lhs.error:.1e} [{v.lhs.method.value}]")
            print(f"  rhs   {v.rhs.value:.5f} +- {v.rhs.error:.1e} [{v.rhs.method.value}]")
            print(f"  slack {v.slack:.5g} (tol {v.tolerance:.2e}, {v.relation.value})")
        if "deficit_gap" in v.params:
            print(f"  deficit gap {v.params['deficit_gap']:.5f}")
        if v.note:
            print(f"  note: {v.note}")
    return EXIT_CODES[worst_status(verdicts)]


def cmd_sweep(args) -> int:
    path = Path(args.plan)
    if not path.exists():
        candidate = bundled_plan(args.plan)
        if not candidate.exists():
            raise UsageError(f"plan not found: {args.plan}")
        path = candidate
    plan = SweepPlan.load(path)
    if args.seed is not None:
        plan.seed = args.seed
    if args.backend is not None:
        plan.backend = args.backend
    verdicts = run_sweep(plan)
    out = Path(args.out or plan.output or f"{plan.name}.jsonl")
    write_report(verdicts, out, plan.name)
    write_digest(verdicts, out.with_suffix(".csv"))
    counts = status_counts(verdicts)
    print(f"{plan.name}: {len(verdicts)} verdicts " + " ".join(f"{k}={v}" for k, v in counts.items() if v))
    for v in verdicts:
        if v.status in (Status.VIOLATED, Status.ERROR):
            print(f"  {v.status.value} {v.check} {json.dumps(v.params, sort_keys=True)} slack={v.slack:.4g}")
    print(f"report: {out}")
    return 1 if counts["VIOLATED"] else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="gausslm", description="Gaussian moment inequalities for log-concave functions")
    sub = ap.add_subparsers(dest="command", required=True)

    fr = sub.add_parser("frames", help="build a correlation frame and audit its identities")
    fr.add_argument("--n", type=int, required=True)
    fr.add_argument("--t", type=float, required=True)
    fr.add_argument("--k", type=int, default=1)
    fr.add_argument("--json", action="store_true")
    fr.set_defaults(func=cmd_frames)

    sa = sub.add_parser("sample", help="dump correlated Gaussian tuples as CSV")
    sa.add_argument("--n", type=int, required=True)
    sa.add_argument("--t", type=float, required=True)
    sa.add_argument("--k", type=int, default=1)
    sa.add_argument("--count", type=int, default=1000)
    sa.add_argument("--seed", type=int, default=0)
    sa.add_argument("--construction", choices=["frame", "mixture"], default="frame")
    sa.add_argument("--out")
    sa.set_defaults(func=cmd_sample)

    ch = sub.add_parser("check", help="run one inequality check")
    ch.add_argument("check", choices=[
        "sqrt-moment", "chain", "block-holder", "average-identity",
        "entropy-stein", "entropy-laplacian", "ibp", "log-sobolev",
    ])
    ch.add_argument("--fn", required=True, help="e.g. gauss:A=1,a=0,c=0 or builtin:monomial,power=3")
    ch.add_argument("--s", type=float)
    ch.add_argument("--q", type=float, help="alias of --s")
    ch.add_argument("--n", type=int, default=2)
    ch.add_argument("--t", type=float, default=0.0)
    ch.add_argument("--k", type=int)
    ch.add_argument("--concavity", choices=["LOG_CONCAVE", "LOG_CONVEX"])
    ch.add_argument("--form", choices=["lemma", "corollary"], default="lemma")
    ch.add_argument("--backend", choices=["closed", "quad", "mc"])
    ch.add_argument("--seed", type=int, default=0)
    ch.add_argument("--samples", type=int, default=1_000_000)
    ch.add_argument("--nodes", type=int, default=64)
    ch.add_argument("--json", action="store_true")
    ch.set_defaults(func=cmd_check)

    sw = sub.add_parser("sweep", help="run a sweep plan (file path or bundled plan name)")
    sw.add_argument("plan")
    sw.add_argument("--out")
    sw.add_argument("--seed", type=int)
    sw.add_argument("--backend", choices=["closed", "quad", "mc"])
    sw.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, GaussLMError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 5


if __name__ == "__main__":
    sys.exit(main())
