"""Batch front end: generate, solve, recover, evaluate, threshold sweeps.

All randomness flows from ``--seed`` (overridable by the ``PPS_SEED``
environment variable); rerunning a command with identical flags rewrites
identical data files. ``PPS_THREADS`` caps the compiled kernels' thread
count without changing any output.
"""

import argparse
import math
import os
import sys

import numpy as np

from . import fileio, metrics, recovery, spectral, synth
from .errors import NoConvergence, PPSyncError
from .operators import EffectiveCostStrong, EffectiveCostWeak, PrimalOracle
from .solvers import DualStrong, solve_strong, solve_weak


def _beta_from_scale(scale, n_images):
    return scale * math.log(max(n_images, 2)) / n_images


def _resolve_seed(args):
    env = os.environ.get("PPS_SEED", "").strip()
    if env:
        return int(env)
    return args.seed


def cmd_gen(args):
    seed = _resolve_seed(args)
    cfg = synth.SynthConfig(
        N=args.n, M=args.m, K_min=args.kmin, K_max=args.kmax, q=args.q, seed=seed
    )
    gt = synth.gen_ground_truth(cfg)
    Q = synth.corrupt(gt, cfg.q, seed=seed)
    fileio.write_registration(args.truth, gt)
    fileio.write_correspondence(args.matches, Q)
    print(f"wrote {args.truth} and {args.matches} (L={gt.partition.total}, nnz={Q.nnz})")
    return 0


def cmd_solve(args):
    seed = _resolve_seed(args)
    Q = fileio.read_correspondence(args.matches)
    n = Q.partition.n_images
    beta = args.beta if args.beta is not None else _beta_from_scale(args.beta_scale, n)
    if args.formulation == "strong":
        max_iter = args.max_iter if args.max_iter is not None else 10
        duals, report = solve_strong(
            Q, beta, S=args.s, gamma=args.gamma, max_iter=max_iter, tol=args.tol, seed=seed
        )
    else:
        max_iter = args.max_iter if args.max_iter is not None else 20
        s = args.s if args.s is not None else 20
        duals, report = solve_weak(
            Q, beta, S=s, gamma=args.gamma, max_iter=max_iter, tol=args.tol, seed=seed
        )
    fileio.write_duals(args.duals, duals, Q.partition, beta)
    s_used = args.s if args.s is not None else (20 if args.formulation == "weak" else 20 * int(np.max(Q.partition.block_sizes)))
    rows = [
        (t + 1, report.residuals[t], s_used * report.degrees[t], report.iter_seconds[t])
        for t in range(report.iterations)
    ]
    fileio.write_csv(args.report, ["iteration", "residual", "matvecs", "seconds"], rows)
    print(
        f"{args.formulation} solve: {report.iterations} iterations, "
        f"final residual {report.residuals[-1]:.4g}, {report.matvecs} matvecs"
    )
    return 0


def _primal_oracle(args, Q, half=False):
    duals, part, beta = fileio.read_duals(args.duals)
    if part.total != Q.partition.total or list(part.block_sizes) != list(Q.partition.block_sizes):
        raise fileio.FormatError("duals and matches describe different instances")
    if isinstance(duals, DualStrong):
        eff = EffectiveCostStrong(Q, duals.lambdas)
    else:
        eff = EffectiveCostWeak(Q, duals.lam, duals.mu)
    return PrimalOracle(eff, beta / 2 if half else beta, seed=_resolve_seed(args))


def cmd_recover(args):
    seed = _resolve_seed(args)
    Q = fileio.read_correspondence(args.matches)
    selection = {"auto": "auto", "max-overlap": "max_overlap", "random": "random"}[args.selection]
    if args.recovery == "thresh":
        oracle = _primal_oracle(args, Q, half=True)
        mode = args.threshold_mode
        if mode is None:
            mode = "percentile" if args.percentile_given else "gmm"
        scores = recovery.masked_recover(
            oracle,
            Q,
            S=args.samples,
            threshold_mode=mode,
            percentile=100.0 - args.percentile,
            seed=seed,
        )
        fileio.write_correspondence(args.out, scores.filtered())
        if args.hist:
            counts, edges = np.histogram(scores.values, bins=50)
            rows = [(edges[b], edges[b + 1], int(counts[b])) for b in range(len(counts))]
            fileio.write_csv(args.hist, ["bin_lo", "bin_hi", "count"], rows)
        note = " (gmm degenerate, used percentile)" if scores.gmm_fallback else ""
        print(
            f"kept {int(scores.keep.sum())}/{len(scores.pairs)} matches "
            f"at cutoff {scores.threshold:.6g}{note}"
        )
        return 0
    oracle = _primal_oracle(args, Q, half=False)
    if args.recovery == "slow":
        reg = recovery.recover_partial_slow(oracle, Q, selection=selection, seed=seed)
    else:
        encodings = recovery.make_encodings(
            Q.partition, k_tilde=args.k_tilde_factor * int(np.max(Q.partition.block_sizes)), seed=seed
        )
        reg = recovery.recover_partial_fast(oracle, Q, encodings, selection=selection, seed=seed)
    fileio.write_registration(args.out, reg)
    print(f"registered {Q.partition.total} keypoints onto {reg.M} registry points")
    return 0


def _read_prediction(path, Q):
    with open(path) as fh:
        magic = fh.readline().strip()
    if magic == fileio.R_MAGIC:
        reg = fileio.read_registration(path)
        return recovery.induced_matches(reg, Q)
    return fileio.read_correspondence(path)


def cmd_eval(args):
    from .blocks import ground_truth_product

    Q = fileio.read_correspondence(args.matches)
    truth = fileio.read_registration(args.truth)
    qstar = ground_truth_product(truth)
    zhat = _read_prediction(args.pred, Q)
    ev = metrics.evaluate(zhat, qstar, Q)
    fileio.write_csv(
        args.out,
        ["precision", "recall", "f1", "retained", "true_retained", "total_true"],
        [(ev.precision, ev.recall, ev.f1, ev.retained, ev.true_retained, ev.total_true)],
    )
    print(f"precision={ev.precision:.4f} recall={ev.recall:.4f} f1={ev.f1:.4f}")
    return 0


def cmd_prcurve(args):
    from .blocks import ground_truth_product

    seed = _resolve_seed(args)
    Q = fileio.read_correspondence(args.matches)
    truth = fileio.read_registration(args.truth)
    qstar = ground_truth_product(truth)
    n = Q.partition.n_images
    beta = args.beta if args.beta is not None else _beta_from_scale(args.beta_scale, n)
    all_scores = []
    for trial in range(args.trials):
        tseed = seed + trial
        if args.method == "spectral":
            try:
                emb = spectral.top_eigvecs(Q, spectral.default_rank(Q.partition), seed=tseed)
            except NoConvergence as exc:
                if exc.partial is None:
                    raise
                print("warning: eigensolver returned a partial basis", file=sys.stderr)
                emb = exc.partial
            all_scores.append(spectral.spectral_scores(emb, Q))
        else:
            if args.formulation == "strong":
                duals, _ = solve_strong(Q, beta, seed=tseed)
                eff = EffectiveCostStrong(Q, duals.lambdas)
            else:
                duals, _ = solve_weak(Q, beta, seed=tseed)
                eff = EffectiveCostWeak(Q, duals.lam, duals.mu)
            oracle = PrimalOracle(eff, beta / 2, seed=tseed)
            all_scores.append(recovery.score_support(oracle, Q, S=args.samples, seed=tseed))
    lo = min(float(s.values.min()) for s in all_scores)
    hi = max(float(s.values.max()) for s in all_scores)
    grid = np.linspace(lo, hi, args.thresholds)
    curves = [metrics.pr_curve(s, qstar, grid) for s in all_scores]
    rows = []
    for idx, theta in enumerate(grid):
        prec = np.array([c[idx][1] for c in curves])
        rec = np.array([c[idx][2] for c in curves])
        kept = np.array([c[idx][3] for c in curves], dtype=np.float64)
        rows.append(
            (
                float(theta),
                float(prec.mean()),
                float(prec.std()),
                float(rec.mean()),
                float(rec.std()),
                float(kept.mean()),
            )
        )
    fileio.write_csv(
        args.out,
        ["threshold", "precision_mean", "precision_std", "recall_mean", "recall_std", "retained_mean"],
        rows,
    )
    print(f"wrote {len(rows)} thresholds x {args.trials} trials to {args.out}")
    return 0


def build_parser():
    top = argparse.ArgumentParser(prog="ppsync", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic instance")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--m", type=int, required=True)
    gen.add_argument("--kmin", type=int, required=True)
    gen.add_argument("--kmax", type=int, required=True)
    gen.add_argument("--q", type=float, default=0.0)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--truth", required=True)
    gen.add_argument("--matches", required=True)
    gen.set_defaults(func=cmd_gen)

    solve = sub.add_parser("solve", help="run a dual solver on a matches file")
    solve.add_argument("--matches", required=True)
    solve.add_argument("--formulation", choices=["weak", "strong"], default="weak")
    solve.add_argument("--beta-scale", type=float, default=5.0)
    solve.add_argument("--beta", type=float, default=None, help="explicit beta override")
    solve.add_argument("--s", type=int, default=None, help="panel width override")
    solve.add_argument("--gamma", type=float, default=5.0)
    solve.add_argument("--max-iter", type=int, default=None)
    solve.add_argument("--tol", type=float, default=1e-3)
    solve.add_argument("--seed", type=int, default=0)
    solve.add_argument("--duals", required=True)
    solve.add_argument("--report", required=True)
    solve.set_defaults(func=cmd_solve)

    rec = sub.add_parser("recover", help="round the implicit primal solution")
    rec.add_argument("--matches", required=True)
    rec.add_argument("--duals", required=True)
    rec.add_argument("--recovery", choices=["fast", "slow", "thresh"], default="fast")
    rec.add_argument("--selection", choices=["auto", "max-overlap", "random"], default="auto")
    rec.add_argument("--k-tilde-factor", type=int, default=10)
    rec.add_argument("--samples", type=int, default=200, help="sketch width for thresh")
    rec.add_argument("--threshold-mode", choices=["gmm", "percentile"], default=None)
    rec.add_argument("--percentile", type=float, default=None, help="percent of matches kept by thresh")
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--out", required=True)
    rec.add_argument("--hist", default=None)
    rec.set_defaults(func=cmd_recover)

    ev = sub.add_parser("eval", help="precision/recall/F1 of a prediction")
    ev.add_argument("--pred", required=True, help="registration or filtered-matches file")
    ev.add_argument("--truth", required=True)
    ev.add_argument("--matches", required=True)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    pr = sub.add_parser("prcurve", help="precision-recall sweep over thresholds")
    pr.add_argument("--matches", required=True)
    pr.add_argument("--truth", required=True)
    pr.add_argument("--method", choices=["sdp", "spectral"], default="sdp")
    pr.add_argument("--formulation", choices=["weak", "strong"], default="weak")
    pr.add_argument("--beta-scale", type=float, default=5.0)
    pr.add_argument("--beta", type=float, default=None)
    pr.add_argument("--samples", type=int, default=200)
    pr.add_argument("--trials", type=int, default=10)
    pr.add_argument("--thresholds", type=int, default=50)
    pr.add_argument("--seed", type=int, default=0)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_prcurve)

    return top


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "recover":
        args.percentile_given = args.percentile is not None
        if args.percentile is None:
            args.percentile = 90.0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: missing file: {exc.filename}", file=sys.stderr)
        return 2
    except (fileio.FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PPSyncError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
