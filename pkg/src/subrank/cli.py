"""``subrank`` command line.

Exit codes: 0 success, 2 bad arguments or inputs, 3 size guard, 4 non-convergence.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .approximation import ProjectionOptions, best_elementary_rank_r_approximation
from .cones import (SignVector, elementary_submodular_rank, facet_rows, submodular_rank,
                    supermodular_rank)
from .errors import ConvergenceError, SizeGuardError
from .experiments import (ExperimentResult, run_approx_curves, run_metric_curves,
                          run_split_study, volume_bound, volume_bound_check, volume_table)
from .lattice import SetFunctionTable, dumps_json, elements_of, load, mask_of
from .metrics import alpha_r, gamma_r, metric_report
from .objectives import column_subset_from_csv, make_instance
from .optimize import (CardinalityMatroid, best_seeded_greedy, greedy, r_split,
                       r_split_ratio, ratio_greedy)


def _emit(args, payload) -> None:
    """Write a dict or ExperimentResult to ``--out`` (or stdout) in ``--format``."""
    if isinstance(payload, ExperimentResult):
        text = payload.to_csv() if args.format == "csv" else payload.to_json()
    elif args.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        flat = {k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in payload.items()}
        w.writerow(list(flat))
        w.writerow([repr(v) if isinstance(v, float) else v for v in flat.values()])
        text = buf.getvalue()
    else:
        text = json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _parse_mask(text: str | None, n: int) -> int | None:
    """``"1,3"`` (element labels) or ``"0b101"`` / ``"5"`` (mask)."""
    if text is None:
        return None
    if "," in text or text.startswith("{"):
        return mask_of(int(t) for t in text.strip("{}").split(",") if t.strip())
    mask = int(text, 0)
    if mask >> n:
        raise ValueError(f"mask {text} outside ground set of size {n}")
    return mask


def _constraint(text: str, n: int) -> CardinalityMatroid:
    kind, _, val = text.partition(":")
    if kind != "card" or not val:
        raise ValueError(f"unsupported constraint {text!r}; use card:m")
    return CardinalityMatroid(n, int(val))


def cmd_gen(args):
    if args.family == "col" and args.matrix:
        inst = column_subset_from_csv(args.matrix)
    else:
        overrides = {"d": args.d, "sigma": args.sigma, "beta": args.beta}
        if args.family == "det":
            overrides["normalize"] = args.normalize
        inst = make_instance(args.family, args.n, args.seed, args.preset,
                             **({} if args.family == "random" else overrides))
    if isinstance(inst, SetFunctionTable):
        f, meta = inst, {"family": "random", "n": args.n}
    elif args.family == "col" and args.residual:
        f, meta = inst.residual_table(), {**inst.metadata(), "form": "residual"}
    else:
        f, meta = inst.table(), inst.metadata()
    meta.update({"seed": args.seed, "preset": args.preset})
    text = dumps_json(f)
    if args.out:
        Path(args.out).write_text(text + "\n")
        Path(args.out + ".meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    else:
        sys.stdout.write(text + "\n")
    return 0


def cmd_rank(args):
    f = load(args.input)
    if args.elementary:
        rank, B = elementary_submodular_rank(f, args.tol)
        out = {"kind": "elementary-submodular", "rank": rank, "witness": elements_of(B), "witness_mask": B}
    else:
        fn = submodular_rank if args.submodular else supermodular_rank
        rank, taus = fn(f, args.tol)
        out = {"kind": "submodular" if args.submodular else "supermodular", "rank": rank,
               "witness": [list(t.taus) for t in taus]}
    _emit(args, out)
    return 0


def cmd_facets(args):
    tau = SignVector.parse(args.tau)
    rows = facet_rows(args.n, tau)
    res = ExperimentResult("facets", {"n": args.n, "tau": list(tau.taus)})
    for c in rows:
        (p0, p1), (m0, m1) = c.plus, c.minus
        res.rows.append({"i": c.pair.i, "j": c.pair.j, "z": c.z, "orientation": c.orientation,
                         "plus_a": p0, "plus_b": p1, "minus_a": m0, "minus_b": m1})
    args.format = args.format or "csv"
    _emit(args, res)
    return 0


def cmd_approx(args):
    f = load(args.input)
    opts = ProjectionOptions(oracle=args.oracle, samples_per_pair=args.samples_per_pair,
                             max_iterations=args.max_iter, seed=args.seed)
    res = best_elementary_rank_r_approximation(f, args.rank, opts)
    g_path = args.g_out or (str(Path(args.out).with_suffix("")) + ".g.json" if args.out else None)
    if g_path:
        Path(g_path).write_text(dumps_json(res.g) + "\n")
    _emit(args, {"r": args.rank, "B": elements_of(res.B), "B_mask": res.B, "rel_error": res.rel_error,
                 "iterations": res.iterations, "converged": res.converged, "g": g_path})
    if not res.converged:
        raise ConvergenceError("projection did not converge for some split")
    return 0


def cmd_metrics(args):
    f = load(args.input)
    X = _parse_mask(args.X, f.n)
    out = metric_report(f, X).to_dict()
    if args.r is not None:
        out["splits"] = [{"r": r, "alpha_r": alpha_r(f, r), "gamma_r": gamma_r(f, r)}
                         for r in range(args.r + 1)]
    _emit(args, out)
    return 0


def cmd_optimize(args):
    f = load(args.input)
    M = _constraint(args.constraint, f.n)
    if args.algo == "greedy":
        tr = greedy(f, M)
    elif args.algo == "seeded":
        tr = best_seeded_greedy(f, M, args.r)
    else:
        tr = r_split(f, args.r, M)
    _emit(args, tr.to_dict())
    return 0


def cmd_ratio(args):
    f, g = load(args.num), load(args.den)
    tr = ratio_greedy(f, g) if args.algo == "ratio" else r_split_ratio(f, g, args.r, args.mode)
    _emit(args, tr.to_dict())
    return 0


def cmd_volume(args):
    res = volume_table(args.n, args.samples, args.seed)
    if args.family:
        res.rows = [r for r in res.rows if r["family"] == args.family and (args.r is None or r["r"] == args.r)]
    for row in res.rows:
        if row["family"] == "single-cone":
            row["bound"] = volume_bound(args.n)
            row["bound_ok"] = volume_bound_check(args.n, row["fraction"], row["stderr"])
    _emit(args, res)
    return 0


def cmd_study(args):
    if args.kind == "metrics":
        res = run_metric_curves(args.family, args.n, args.r_max, args.trials, args.seed)
    elif args.kind == "approx":
        res = run_approx_curves(args.family, args.n, args.trials, args.seed)
    else:
        r_list = [int(x) for x in args.r_list.split(",")] if args.r_list else [1]
        res = run_split_study(args.family, args.n, args.m, r_list, args.trials, args.seed,
                              preset=args.preset, with_opt=False if args.no_opt else None)
    _emit(args, res)
    return 0


def _global_flags(p, default):
    # accepted both before and after the subcommand
    p.add_argument("--seed", type=int, default=default)
    p.add_argument("--threads", type=int, default=default, help="accepted for compatibility; runs are sequential")
    p.add_argument("--out", default=default, help="output path (default stdout)")
    p.add_argument("--format", choices=("json", "csv"), default=default, help="default json (csv for facets)")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="subrank", description="Cone ranks, approximations and optimization of set functions.")
    p.add_argument("--version", action="version", version=__version__)
    _global_flags(p, argparse.SUPPRESS)
    p.set_defaults(seed=0, threads=1, out=None, format=None)
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, argparse.SUPPRESS)
    sub = p.add_subparsers(dest="command", required=True)
    _add = sub.add_parser
    sub.add_parser = lambda *a, **k: _add(*a, parents=[common], **k)

    s = sub.add_parser("gen", help="generate a set-function table")
    s.add_argument("--family", choices=("det", "bayes", "col", "random"), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--preset", choices=("curves", "approx", "split", "large"), default="split")
    s.add_argument("--d", type=int)
    s.add_argument("--sigma", type=float)
    s.add_argument("--beta", type=float)
    s.add_argument("--normalize", action="store_true", help="det: emit f - 1")
    s.add_argument("--residual", action="store_true", help="col: emit the residual form")
    s.add_argument("--matrix", help="col: CSV matrix instead of a random one")
    s.set_defaults(func=cmd_gen)

    s = sub.add_parser("rank", help="supermodular or elementary submodular rank")
    s.add_argument("--input", required=True)
    s.add_argument("--elementary", action="store_true")
    s.add_argument("--submodular", action="store_true")
    s.add_argument("--tol", type=float, default=1e-9)
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("facets", help="dump the signed rows of one cone as CSV")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--tau", required=True, help="comma-separated signs, e.g. 1,-1,1")
    s.set_defaults(func=cmd_facets)

    s = sub.add_parser("approx", help="best elementary rank r+1 approximation")
    s.add_argument("--input", required=True)
    s.add_argument("--rank", type=int, required=True, help="r (size of the split set)")
    s.add_argument("--oracle", choices=("deterministic", "random"), default="deterministic")
    s.add_argument("--samples-per-pair", type=int)
    s.add_argument("--max-iter", type=int, default=100_000)
    s.add_argument("--g-out", help="where to write the approximation table")
    s.set_defaults(func=cmd_approx)

    s = sub.add_parser("metrics", help="curvatures and submodularity ratio")
    s.add_argument("--input", required=True)
    s.add_argument("--r", type=int)
    s.add_argument("--X", help="set for curvature_wrt (labels like 1,3 or a mask)")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("optimize", help="constrained maximization")
    s.add_argument("--input", required=True)
    s.add_argument("--constraint", default="card:1")
    s.add_argument("--algo", choices=("greedy", "rsplit", "seeded"), default="greedy")
    s.add_argument("--r", type=int, default=1)
    s.add_argument("--subroutine", choices=("greedy",), default="greedy")
    s.set_defaults(func=cmd_optimize)

    s = sub.add_parser("ratio", help="ratio minimization f/g")
    s.add_argument("--num", required=True)
    s.add_argument("--den", required=True)
    s.add_argument("--algo", choices=("ratio", "rsplit"), default="ratio")
    s.add_argument("--r", type=int, default=1)
    s.add_argument("--mode", choices=("split-f", "split-both"), default="split-f")
    s.set_defaults(func=cmd_ratio)

    s = sub.add_parser("volume", help="Monte Carlo cone volumes")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--samples", type=int, default=500_000)
    s.add_argument("--family", choices=("supermodular-rank", "submodular-rank", "elementary-rank", "single-cone"))
    s.add_argument("--r", type=int)
    s.set_defaults(func=cmd_volume)

    s = sub.add_parser("study", help="experiment sweeps")
    s.add_argument("kind", choices=("metrics", "approx", "split"))
    s.add_argument("--family", choices=("det", "bayes", "col", "random"), required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--m", type=int, default=5)
    s.add_argument("--r-max", type=int, default=4)
    s.add_argument("--r-list", default=None, help="comma-separated r values for split")
    s.add_argument("--trials", type=int, default=5)
    s.add_argument("--preset", choices=("split", "large"))
    s.add_argument("--no-opt", action="store_true")
    s.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command != "facets":
        args.format = args.format or "json"
    try:
        return args.func(args)
    except SizeGuardError as exc:
        print(f"subrank: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"subrank: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError, OSError) as exc:
        print(f"subrank: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
