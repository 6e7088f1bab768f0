"""graphbench: generate power-law graphs and benchmark the algorithms."""
import argparse
import sys

from .errors import TabletError
from .genbench import (ALGORITHMS, DEFAULT_PROBS, ENGINES, GenParams, emit_metrics, generate,
                       run_experiment, symmetrize, verify)
from .tsv import read_triples, write_triples


def _params(args):
    return GenParams(args.scale, args.epv, args.seed, tuple(args.probs))


def _add_graph_args(p, scale_required=True):
    p.add_argument("--scale", type=int, required=scale_required, help="log2 of the vertex count")
    p.add_argument("--epv", type=int, default=16, help="edges per vertex (default 16)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--probs", type=float, nargs=4, default=list(DEFAULT_PROBS),
                   metavar=("A", "B", "C", "D"), help="R-MAT quadrant probabilities")


def cmd_generate(args):
    raw = generate(_params(args))
    n = write_triples(args.out, raw)
    print(f"wrote {n} triples to {args.out}")
    return 0


def _inputs(args):
    if args.input is None:
        return None
    return symmetrize(read_triples(args.input))


def cmd_run(args):
    m = run_experiment(args.alg, _params(args), args.tablets, args.engine, args.k,
                       inputs=_inputs(args), force=args.force)
    if args.metrics:
        emit_metrics([m], args.metrics, append=args.append)
    print(",".join(f"{k}={v}" for k, v in m.row().items()))
    return 0


def cmd_verify(args):
    eng, ora = verify(args.alg, _params(args), args.tablets, args.k, inputs=_inputs(args))
    print(f"{args.alg} scale {args.scale}: engine and oracle agree on "
          f"{eng.nnz_output} entries (overhead {eng.overhead:.2f}x)")
    if args.metrics:
        emit_metrics([eng, ora], args.metrics, append=args.append)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="graphbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write raw R-MAT edges as a TSV triple file")
    _add_graph_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    for name, func, helptext in (("run", cmd_run, "run one experiment"),
                                 ("verify", cmd_verify, "run both engines and compare")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--alg", choices=ALGORITHMS, required=True)
        p.add_argument("--k", type=int, default=3, help="truss parameter (default 3)")
        _add_graph_args(p)
        p.add_argument("--tablets", type=int, choices=(1, 2), default=1)
        p.add_argument("--input", help="raw triple file to use instead of generating")
        p.add_argument("--metrics", help="CSV file for the metrics row(s)")
        p.add_argument("--append", action="store_true", help="append to an existing CSV")
        if name == "run":
            p.add_argument("--engine", choices=ENGINES, default="graphulo")
            p.add_argument("--force", action="store_true",
                           help="allow scales above the desk-scale ceiling")
        p.set_defaults(func=func)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TabletError as exc:
        print(f"graphbench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"graphbench: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
