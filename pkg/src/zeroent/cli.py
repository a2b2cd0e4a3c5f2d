"""Batch command-line frontend: zeroent {wtd,block,weights,lambda,synthesize,checks}."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import asymptotics as AS
from . import blocksys as BS
from . import weights as W
from . import wtd as WT
from .output import write_csv, write_json
from .source import invert_branch
from .specfile import SpecError, build, load_spec, spec_hash

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2
EXIT_UNREACHABLE = 3


def _int(s: str) -> int:
    """Integers written as 1e6 or 1000000."""
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}")
    if v != int(v):
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}")
    return int(v)


def _int_list(s: str) -> list[int]:
    return [_int(x) for x in s.split(",") if x.strip()]


def _float_list(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x.strip()]


def _range(s: str) -> tuple[int, int]:
    lo, _, hi = s.partition(":")
    return _int(lo), _int(hi)


class Run:
    def __init__(self, args):
        self.args = args
        self.spec = load_spec(args.source)
        self.src, self.mu = build(self.spec)
        self.out = Path(args.out)
        self.meta = {"spec_hash": spec_hash(self.spec), "seed": args.seed}


def _density(run: Run, grid: int, tol: float = 1e-10):
    bs = BS.BlockSystem(run.src)
    return bs, BS.invariant_density(bs, grid, tol)


# ------------------------------------------------------------------- commands


def cmd_wtd(run: Run) -> int:
    a = run.args
    src = run.src
    q = WT.wtd_uniform(src.a, a.n_max)
    qmu = WT.wtd_pushforward(q, run.mu.cdf)
    cols = [q.n, q.q, qmu.q]
    if a.nu_grid > 0:
        _, psi = _density(run, a.nu_grid)
        cols.append(WT.wtd_pushforward(q, psi.to_measure().cdf, "block_invariant").q)
    else:
        cols.append([None] * q.n.size)
    r = np.full(q.n.size, np.nan)
    if q.n.size > 1:
        prev = invert_branch(src.a, q.q[1:])
        r[1:] = np.asarray(src.a.defect(prev), float)
    cols.append(r)
    write_csv(run.out / "wtd.csv", ["n", "q_tau", "q_mu", "q_nu", "r"], cols, run.meta)
    if a.fit:
        lo, hi = a.fit
        if hi > a.n_max:
            q = WT.wtd_uniform(src.a, hi)
        law = WT.fit_law(q, lo, hi)
        write_json(run.out / "law.json", law.to_dict(), run.meta)
    return EXIT_OK


def cmd_block(run: Run) -> int:
    a = run.args
    bs = BS.BlockSystem(run.src, tail_tol=a.tail_tol, M_max=a.m_max)
    try:
        psi = BS.invariant_density(bs, a.grid, a.tol)
    except BS.ConvergenceError as exc:
        write_json(run.out / "block.json", {"converged": False, "residual": exc.residual,
                                            "sweeps": exc.sweeps}, run.meta)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED
    H = BS.block_entropy(bs, psi)
    EW = BS.expected_block_time(bs, psi)
    diag = BS.good_class_diagnostics(bs)
    write_csv(run.out / "density.csv", ["node", "value"], [psi.nodes, psi.values], run.meta)
    payload = {
        "converged": True, "grid_n": a.grid, "sweeps": psi.sweeps, "residual": psi.residual,
        "M_max": bs.M_max, "tail_mass": bs.tail_mass, "tail_within_tolerance": bs.tail_ok,
        "psi0": psi.psi0, "entropy": H.value, "entropy_tail_bound": H.tail_bound,
        "expected_W": {"status": EW.status, "value": EW.value, "partial_sum": EW.partial_sum,
                       "law": EW.law.to_dict() if EW.law else None},
        "good_class": diag.to_dict(),
    }
    write_json(run.out / "block.json", payload, run.meta)
    return EXIT_OK


def cmd_weights(run: Run) -> int:
    a = run.args
    if a.exact:
        depth = a.depth if a.depth is not None else 16
        if depth > W.EXACT_MAX_DEPTH:
            print(f"error: exact mode supports depth <= {W.EXACT_MAX_DEPTH}", file=sys.stderr)
            return EXIT_USAGE
        prof = W.exact_profile(run.src, run.mu, depth)
        se_m = se_n = [0.0] * prof.depths.size
        samples = [None] * prof.depths.size
    else:
        depths = a.depths or ([a.depth] if a.depth is not None else [100, 1000, 10000])
        try:
            prof = W.mc_profile(run.src, run.mu, depths, a.samples, a.seed, a.threads)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        se_m, se_n = prof.stderr_m, prof.stderr_nbar
        samples = [prof.samples] * prof.depths.size
    d = prof.depths.astype(float)
    with np.errstate(divide="ignore", invalid="ignore"):
        shannon = np.where(d >= 2, prof.m * np.log(d) / d, np.nan)
    write_csv(run.out / "profile.csv",
              ["depth", "m", "stderr_m", "nbar", "stderr_nbar", "samples", "m_logn_over_n"],
              [prof.depths, prof.m, se_m, prof.nbar, se_n, samples, shannon], run.meta)
    side = {"method": prof.method, "samples": prof.samples}
    if prof.q999 is not None:
        side["quantile_999_neglogp"] = prof.q999
    side.update(prof.meta)
    write_json(run.out / "profile.json", side, run.meta)
    return EXIT_OK


def cmd_lambda(run: Run) -> int:
    a = run.args
    val = W.lambda_truncated(run.src, run.mu, a.v, a.t, a.s, a.n_max)
    write_json(run.out / "lambda.json", {"v": a.v, "t": a.t, "s": a.s, "n_max": a.n_max,
                                         "value": val}, run.meta)
    return EXIT_OK


def cmd_synthesize(args) -> int:
    try:
        src, rep = AS.synthesize_source(args.beta, args.delta, n_max=args.n_max)
    except AS.UnreachableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except WT.DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    spec = dict(rep.source_spec)
    spec["measure"] = {"kind": "uniform"}
    from .specfile import parse_spec
    meta = {"spec_hash": spec_hash(parse_spec(spec)), "seed": args.seed}
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "source.json").write_text(json.dumps(spec, sort_keys=True, indent=2) + "\n")
    write_json(out / "synthesis.json", {
        "beta_M": args.beta, "delta_M": args.delta, "gamma": rep.gamma, "delta": rep.delta,
        "target_q": rep.target_q, "fitted_q": rep.fitted.to_dict(),
        "err_beta": rep.err_beta, "err_delta": rep.err_delta, "recovered_M": rep.recovered_m,
    }, meta)
    return EXIT_OK


def _check_lambda(run: Run) -> dict:
    worst = 0.0
    for v in (0.3, 0.7, 0.95):
        for N in (4, 8, 12):
            val = W.lambda_truncated(run.src, run.mu, v, 1.0, 1.0, N)
            worst = max(worst, abs(val - (1 - v ** (N + 1)) / (1 - v)))
    return {"max_error": worst, "tolerance": 1e-12, "passed": worst < 1e-12}


def _check_tauberian(run: Run) -> dict:
    rep = AS.abelian_tauberian_roundtrip(WT.AsymptoticLaw(1.0, 0.5, 0.0), [1 - 1e-4], [10 ** 6],
                                         n_terms=10 ** 7)
    dev = max(rep.v_deviation + rep.n_deviation)
    return {"v_deviation": rep.v_deviation, "n_deviation": rep.n_deviation,
            "tolerance": 0.01, "passed": dev < 0.01}


def _check_v(run: Run) -> dict:
    sp = run.spec.a
    gamma = 1.0 if sp.kind == "farey" else sp.gamma
    q = WT.wtd_uniform(run.src.a, 10 ** 6)
    rep = WT.check_v_asymptotic(run.src, q, gamma, (1000, 10 ** 6))
    return {"gamma": gamma, "window_max": rep.window_max, "last_deviation": rep.last_deviation,
            "passed": rep.decreasing}


def _check_renewal(run: Run) -> dict:
    a = run.args
    rep = AS.renewal_check(run.src, run.mu, a.v_list, a.samples, a.seed, threads=a.threads)
    return {"v": rep.v, "product": rep.product, "stderr": rep.stderr, "D": rep.D,
            "deviation": rep.deviation, "trend_decreasing": rep.decreasing,
            "final_deviation": rep.final_deviation, "tolerance": 0.2,
            "passed": rep.final_deviation < 0.2}


CHECKS = {"lambda": _check_lambda, "tauberian": _check_tauberian,
          "v-asymptotic": _check_v, "renewal": _check_renewal}


def cmd_checks(run: Run) -> int:
    names = run.args.check or list(CHECKS)
    ok = True
    for name in names:
        if name not in CHECKS:
            print(f"error: unknown check {name!r}", file=sys.stderr)
            return EXIT_USAGE
        res = CHECKS[name](run)
        ok &= bool(res["passed"])
        write_json(run.out / f"check_{name}.json", res, run.meta)
        print(f"{name}: {'pass' if res['passed'] else 'FAIL'}")
    return EXIT_OK if ok else EXIT_FAILED


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zeroent", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--source", help="JSON source spec (default: Farey, uniform measure)")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--seed", type=_int, default=0)
        sp.add_argument("--threads", type=_int, default=None,
                        help="worker threads (default: $ZEROENT_THREADS or all cores)")

    sp = sub.add_parser("wtd", help="waiting-time tail and fitted law")
    common(sp)
    sp.add_argument("--n-max", type=_int, default=10 ** 6)
    sp.add_argument("--fit", type=_range, default=None, metavar="LO:HI")
    sp.add_argument("--nu-grid", type=_int, default=256,
                    help="grid for the block-invariant column (0 disables it)")

    sp = sub.add_parser("block", help="block density, entropy, E[W] and diagnostics")
    common(sp)
    sp.add_argument("--grid", type=_int, default=1024)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.add_argument("--tail-tol", type=float, default=1e-6)
    sp.add_argument("--m-max", type=_int, default=None)

    sp = sub.add_parser("weights", help="Shannon weight and ones-count profiles")
    common(sp)
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--exact", action="store_true")
    mode.add_argument("--mc", action="store_true")
    sp.add_argument("--depth", type=_int, default=None)
    sp.add_argument("--depths", type=_int_list, default=None)
    sp.add_argument("--samples", type=_int, default=10 ** 5)

    sp = sub.add_parser("lambda", help="truncated trivariate sum")
    common(sp)
    sp.add_argument("--v", type=float, required=True)
    sp.add_argument("--t", type=float, default=1.0)
    sp.add_argument("--s", type=float, default=1.0)
    sp.add_argument("--n-max", type=_int, default=12)

    sp = sub.add_parser("synthesize", help="source with prescribed weight law")
    common(sp)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--delta", type=float, required=True)
    sp.add_argument("--n-max", type=_int, default=10 ** 6)

    sp = sub.add_parser("checks", help="renewal, Tauberian, v-asymptotic and identity checks")
    common(sp)
    sp.add_argument("--check", action="append", choices=sorted(CHECKS))
    sp.add_argument("--samples", type=_int, default=10 ** 6)
    sp.add_argument("--v-list", type=_float_list, default=list(AS.V_DEFAULT))
    return p


COMMANDS = {"wtd": cmd_wtd, "block": cmd_block, "weights": cmd_weights,
            "lambda": cmd_lambda, "checks": cmd_checks}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "synthesize":
        return cmd_synthesize(args)
    try:
        run = Run(args)
    except SpecError as exc:
        print(f"error: invalid source spec: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](run)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
