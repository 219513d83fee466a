"""Command line entry point: ``qdiag solve | run | report``.

Exit codes: 0 success, 1 runtime failure (including failed sweep cells),
2 usage or configuration error.
"""
import argparse
import sys
import warnings

import numpy as np

from qdiag.errors import ConfigurationError, NormalizationError

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


def _cmd_solve(args):
    from qdiag.envs import make_env
    from qdiag.mdp import value_iteration

    _, mdp, obs = make_env(args.env, args.seed, args.discount)
    q, sweeps = value_iteration(mdp, args.tol)
    print(f"env: {args.env}")
    print(f"S={mdp.num_states} A={mdp.num_actions} D={obs.dim} gamma={mdp.discount:g}")
    print(f"expert_returns={mdp.expert_returns:.12g}")
    print(f"q_star_max_abs={np.abs(q).max():.12g}")
    print(f"value_iteration_sweeps={sweeps}")
    return EXIT_OK


def _cmd_run(args):
    from qdiag.config import load_config
    from qdiag.runner import run

    cfg = load_config(args.config)
    total = len(cfg.cells())
    done = [0]

    def progress(rec):
        done[0] += 1
        status = f"error: {rec.error}" if rec.error else (
            "diverged" if rec.diverged else f"return {rec.rows[-1]['return_norm']:.3f}")
        print(f"[{done[0]}/{total}] {rec.env} {rec.arch} {rec.weighting} seed={rec.seed} "
              f"{status} ({rec.wall_time:.1f}s)", file=sys.stderr)

    records = run(cfg, out=args.out, jobs=args.jobs, progress=None if args.quiet else progress)
    print(f"{args.out}/{cfg.hash}")
    failed = [r for r in records if r.error]
    if failed:
        print(f"{len(failed)} of {len(records)} cells failed", file=sys.stderr)
        return EXIT_FAILURE
    return EXIT_OK


def _cmd_report(args):
    from qdiag.report import report
    from qdiag.runner import expected_cells, find_sweep, load_records

    manifest, records = load_records(args.input)
    expected = list(dict.fromkeys((e, a, w) for e, a, w, _ in expected_cells(manifest)))
    out = args.out or find_sweep(args.input)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        paths = report(records, args.kind, out, expected=expected)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="qdiag", description="Oracle diagnostics for fitted Q-iteration.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="print oracle facts for a named environment")
    s.add_argument("env")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--discount", type=float, default=0.95)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=_cmd_solve)

    r = sub.add_parser("run", help="execute a sweep described by a TOML file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default="out")
    r.add_argument("--jobs", type=int, default=None)
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=_cmd_run)

    rep = sub.add_parser("report", help="aggregate a finished sweep")
    rep.add_argument("--in", dest="input", required=True)
    rep.add_argument("--kind", choices=("summary", "table1", "plots"), required=True)
    rep.add_argument("--out", default=None, help="output directory (default: the input directory)")
    rep.set_defaults(func=_cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    if getattr(args, "jobs", None) is not None and args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ConfigurationError, NormalizationError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
