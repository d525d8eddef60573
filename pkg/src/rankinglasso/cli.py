"""Command-line interface.

Exit status is 0 on success, 1 for usage errors and 2 for data or
convergence errors.  Tables print abilities with two decimals; TSV
outputs (paths, probability matrices, cross-validation runs) use full
precision.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .estimators import ALL_ESTIMATORS, Estimator, fit_estimators
from .evaluation import cross_validate
from .inference import BootstrapError, MatchSpec, bootstrap
from .io import DataError, load_tournament, write_tsv
from .lasso import compute_path, fit_lasso, hybrid_fit, select
from .mle import ConvergenceError, adaptive_weights, fit_mle
from .model import ModelParams, Tournament, probability_matrix


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _record(t: Tournament) -> list[str]:
    rec = t.record()
    if t.ties_allowed:
        return [f"{w}-{d}-{l}" for w, d, l in rec]
    return [f"{w}-{l}" for w, _, l in rec]


def _ranking(t: Tournament, mu, extra=None, extra_name=None, out=sys.stdout):
    order = np.argsort(-np.asarray(mu), kind="stable")
    rec = _record(t)
    header = ["team", "record", "mu"] + ([extra_name] if extra_name else [])
    out.write("\t".join(header) + "\n")
    for a in order:
        row = [t.teams[a], rec[a], f"{mu[a]:.2f}"]
        if extra is not None:
            row.append(extra[a])
        out.write("\t".join(row) + "\n")


def _params_note(p: ModelParams, se=None, out=sys.stdout):
    k = p.k
    tau = f"# tau = {p.tau:.3f}"
    if se is not None and np.isfinite(se[k]):
        tau += f" (se {se[k]:.3f})"
    out.write(tau + "\n")
    if p.ties:
        d = f"# delta1 = {p.delta1:.3f}"
        if se is not None and np.isfinite(se[k + 1]):
            d += f" (se {se[k + 1]:.3f})"
        out.write(d + "\n")


def cmd_fit_mle(args, out):
    t = load_tournament(args.csv, args.ties)
    fit = fit_mle(t, ridge_eps=args.ridge)
    _ranking(t, fit.mu, [f"{s:.2f}" for s in fit.se[:t.k]], "se", out)
    _params_note(fit.params, fit.se, out)
    out.write(f"# neg_loglik = {fit.neg_loglik:.4f}\n")


def _group_labels(fit) -> list[str]:
    return [str(g + 1) for g in fit.grouping.assignment]


def cmd_fit_lasso(args, out):
    t = load_tournament(args.csv, args.ties)
    w = adaptive_weights(t)
    if args.lam is not None:
        if args.lam < 0:
            raise UsageError("--lambda must be nonnegative")
        fit = fit_lasso(t, args.lam, w)
        refit = hybrid_fit(t, fit) if args.hybrid else None
        header = f"# lambda = {fit.lam!r}  df = {fit.df}  aic = {fit.aic:.4f}  bic = {fit.bic:.4f}"
    else:
        path = compute_path(t, w)
        rows = [[p.lam, r, p.df, p.aic, p.bic, *p.mu]
                for p, r in zip(path.points, path.relative_bound)]
        cols = ["lambda", "rel_bound", "df", "aic", "bic"] + [f"mu_{a + 1}" for a in range(t.k)]
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                write_tsv(cols, rows, fh)
        else:
            write_tsv(cols, rows, out)
            out.write("\n")
        fit, refit = select(path, args.criterion, hybrid=args.selection == "hybrid", t=t)
        if args.hybrid and refit is None:
            refit = hybrid_fit(t, fit)
        header = (f"# selected by {args.criterion} ({args.selection} criterion): "
                  f"lambda = {fit.lam!r}  df = {fit.df}")
    out.write(header + "\n")
    params = refit.params if refit is not None else fit.params
    _ranking(t, params.mu, _group_labels(fit), "group", out)
    _params_note(params, refit.se if refit is not None else None, out)


def cmd_probmatrix(args, out):
    t = load_tournament(args.csv, args.ties)
    mle = fit_mle(t)
    at = args.at.strip().lower()
    if at == "mle":
        params = mle.params
    elif at in ("aic", "bic"):
        params = fit_estimators(t, [f"LASSO_{at.upper()}"]).params[Estimator.parse(at)]
    elif at.startswith("rel_bound="):
        try:
            r = float(at.split("=", 1)[1])
        except ValueError:
            raise UsageError(f"bad --at value {args.at!r}") from None
        if not 0 <= r <= 1:
            raise UsageError("rel_bound must lie in [0, 1]")
        path = compute_path(t, adaptive_weights(t))
        idx = int(np.argmin(np.abs(path.relative_bound - r)))
        params = path.points[idx].params
    else:
        raise UsageError(f"--at must be mle, aic, bic or rel_bound=r, not {args.at!r}")
    order = np.argsort(-mle.mu, kind="stable")
    P = probability_matrix(params)[np.ix_(order, order)]
    names = [t.teams[a] for a in order]
    write_tsv(["team"] + names, [[names[r], *P[r]] for r in range(t.k)], out)


def _parse_match(text: str, t: Tournament) -> MatchSpec:
    parts = [p.strip() for p in text.rsplit(",", 2)]
    if len(parts) != 3:
        raise UsageError(f"--match expects i,j,h; got {text!r}")

    def team(s):
        if s.lstrip("-").isdigit():
            a = int(s)
            if not 0 <= a < t.k:
                raise UsageError(f"team index {a} out of range")
            return a
        try:
            return t.index(s)
        except ValueError:
            raise UsageError(f"unknown team {s!r}") from None

    try:
        h = int(parts[2])
    except ValueError:
        raise UsageError(f"venue must be -1, 0 or 1, got {parts[2]!r}") from None
    if h not in (-1, 0, 1):
        raise UsageError(f"venue must be -1, 0 or 1, got {h}")
    i, j = team(parts[0]), team(parts[1])
    if i == j:
        raise UsageError("a team cannot play itself")
    return MatchSpec(i, j, h)


def cmd_bootstrap(args, out):
    t = load_tournament(args.csv, args.ties)
    if args.reps < 2:
        raise UsageError("--reps must be at least 2")
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    matches = [_parse_match(m, t) for m in args.match or []]
    s = bootstrap(args.estimator, t, reps=args.reps, seed=args.seed, level=args.level,
                  matches=matches, n_jobs=args.n_jobs)
    if matches:
        rows = [[s.labels[q], f"{s.point[q]:.2f}", f"{s.intervals[q][0]:.2f}",
                 f"{s.intervals[q][1]:.2f}"] for q in range(len(matches))]
    else:
        off = s.n_probabilities
        order = np.argsort(-s.point[off:], kind="stable")
        rows = [[t.teams[a], f"{s.point[off + a]:.2f}", f"{s.intervals[off + a][0]:.2f}",
                 f"{s.intervals[off + a][1]:.2f}"] for a in order]
    write_tsv(["quantity", "estimate", "lower", "upper"], rows, out)
    out.write(f"# estimator = {s.method_tag}  reps = {args.reps}  seed = {s.seed}  "
              f"level = {s.level}  failed = {s.failures}  ridge_fallbacks = {s.fallbacks}\n")


def cmd_cv(args, out):
    t = load_tournament(args.csv, args.ties)
    if args.reps < 1:
        raise UsageError("--reps must be positive")
    ests = [Estimator.parse(e) for e in args.estimators.split(",")] if args.estimators \
        else list(ALL_ESTIMATORS)
    res = cross_validate(t, reps=args.reps, seed=args.seed, estimators=ests, n_jobs=args.n_jobs)
    write_tsv(["rep"] + res.estimators,
              [[r + 1, *res.per_rep_negloglik[r]] for r in range(args.reps)], out)
    out.write("\n")
    write_tsv(["summary"] + res.estimators,
              [["mean", *res.mean], ["median", *res.median], ["coin", *res.coin_fraction]], out)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rankinglasso", description="Bradley-Terry rankings with the adaptive ranking lasso.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("csv", help="match file with header team_i,team_j,venue,outcome[,date]")
        sp.add_argument("--ties", action="store_true", help="allow tied matches (three-outcome model)")

    sp = sub.add_parser("fit-mle", help="maximum likelihood ranking table")
    common(sp)
    sp.add_argument("--ridge", type=float, default=0.0, metavar="EPS",
                    help="ridge penalty on pairwise differences (default 0)")
    sp.set_defaults(func=cmd_fit_mle)

    sp = sub.add_parser("fit-lasso", help="adaptive ranking lasso at one penalty or along the path")
    common(sp)
    g = sp.add_mutually_exclusive_group(required=True)
    g.add_argument("--lambda", dest="lam", type=float, help="single penalty value")
    g.add_argument("--path", action="store_true", help="compute the path and select a point")
    sp.add_argument("--criterion", choices=["aic", "bic"], default="aic")
    sp.add_argument("--selection", choices=["hybrid", "lasso"], default="hybrid",
                    help="score the criterion at the refit (default) or at the lasso estimate")
    sp.add_argument("--hybrid", action="store_true", help="report the constrained refit abilities")
    sp.add_argument("--out", help="write the path TSV here instead of stdout")
    sp.set_defaults(func=cmd_fit_lasso)

    sp = sub.add_parser("probmatrix", help="neutral-field win probability matrix")
    common(sp)
    sp.add_argument("--at", default="mle", help="mle, aic, bic or rel_bound=r")
    sp.set_defaults(func=cmd_probmatrix)

    sp = sub.add_parser("bootstrap", help="parametric bootstrap intervals")
    common(sp)
    sp.add_argument("--estimator", default="MLE", type=str.upper,
                    choices=[e.value for e in ALL_ESTIMATORS])
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--level", type=float, default=0.90)
    sp.add_argument("--match", action="append", metavar="I,J,H",
                    help="track P(I beats J) at venue H (team names or 0-based indices); repeatable")
    sp.add_argument("--n-jobs", type=int, default=1)
    sp.set_defaults(func=cmd_bootstrap)

    sp = sub.add_parser("cv", help="split-half cross-validation")
    common(sp)
    sp.add_argument("--reps", type=int, default=100)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--estimators", help="comma-separated subset (default all five)")
    sp.add_argument("--n-jobs", type=int, default=1)
    sp.set_defaults(func=cmd_cv)
    return p


def run_cli(argv=None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        args.func(args, out)
    except (UsageError, ValueError) as exc:
        if isinstance(exc, DataError):
            print(f"rankinglasso: {exc}", file=sys.stderr)
            return 2
        print(f"rankinglasso: error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ConvergenceError, BootstrapError) as exc:
        print(f"rankinglasso: {exc}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
