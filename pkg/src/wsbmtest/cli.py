"""Command-line surface.

Subcommands: generate, cluster, test, simulate, ingest. Errors print a
machine-readable JSON object on stderr and exit with a documented code:

    0  success (for ``test``: null not rejected)
    2  usage error (argparse)
    3  ``test`` rejected the null
    4  validation or domain error
    5  dimension mismatch
    6  insufficient data / clustering failure / degenerate test
    1  unexpected failure
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import WsbmError
from .experiments import load_grid, run_experiment
from .graphio import (
    DEFAULT_WEIGHT_CAP,
    ingest_edge_list,
    load_spec_json,
    read_graph_csv,
    write_graph_csv,
    write_membership_tsv,
)
from .inference import two_sample_test
from .clustering import spectral_cluster
from .model import check_weight_matrix, sample_graph
from .spectral import top_k_spectrum

EXIT_REJECT = 3

_EMBEDDINGS = {"adjacency": "adjacency_svd", "laplacian": "normalized_laplacian"}


def _fail(exc: Exception) -> int:
    code = getattr(exc, "exit_code", 1)
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    return code


def _cmd_generate(args) -> int:
    spec = load_spec_json(args.spec)
    W = sample_graph(spec, args.seed)
    write_graph_csv(W, args.out)
    if args.membership:
        write_membership_tsv(spec.membership, args.membership)
    return 0


def _cmd_cluster(args) -> int:
    W = check_weight_matrix(read_graph_csv(args.graph))
    result = spectral_cluster(
        W,
        args.k,
        embedding=_EMBEDDINGS[args.embedding],
        seed=args.seed,
        restarts=args.restarts,
        row_normalize=args.row_normalize,
    )
    if args.dump_embedding:
        # 2-d singular-vector coordinates for external plotting
        coords = np.asarray(top_k_spectrum(W, 2).vectors)
        with open(args.dump_embedding, "w", encoding="utf-8") as fh:
            fh.write("node,x,y\n")
            for i, (x, y) in enumerate(coords.tolist()):
                fh.write(f"{i},{x!r},{y!r}\n")
    if args.out and args.out != "-":
        write_membership_tsv(result.membership, args.out)
    else:
        for node, label in enumerate(result.membership.labels.tolist()):
            print(f"{node}\t{label}")
    print(
        json.dumps(
            {"inertia": result.inertia, "restarts_used": result.restarts_used,
             "embedding": result.embedding, "block_sizes": result.membership.block_sizes.tolist()},
            sort_keys=True,
        ),
        file=sys.stderr,
    )
    return 0


def _parse_moments(text: str):
    if text == "plugin" or text == "plug_in":
        return "plug_in"
    if text.startswith("oracle:"):
        paths = text[len("oracle:"):].split(",")
        if len(paths) == 1:
            spec = load_spec_json(paths[0])
            return (spec, spec)
        if len(paths) == 2:
            return (load_spec_json(paths[0]), load_spec_json(paths[1]))
    raise argparse.ArgumentTypeError(
        "moments must be 'plugin' or 'oracle:spec.json[,spec2.json]'"
    )


def _cmd_test(args) -> int:
    W1 = check_weight_matrix(read_graph_csv(args.graph1), "graph1")
    W2 = check_weight_matrix(read_graph_csv(args.graph2), "graph2")
    report = two_sample_test(
        W1,
        W2,
        args.k,
        args.alpha,
        statistic=args.statistic,
        transform=args.transform,
        moments=args.moments,
        seed=args.seed,
    )
    print(report.to_json(indent=2))
    return EXIT_REJECT if report.reject else 0


def _cmd_simulate(args) -> int:
    grid = load_grid(args.grid)
    result = run_experiment(grid, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    base = os.path.join(args.out, f"{grid.mode}")
    with open(base + ".json", "w", encoding="utf-8") as fh:
        fh.write(result.to_json(with_timing=args.timing, indent=2) + "\n")
    with open(base + ".csv", "w", encoding="utf-8") as fh:
        fh.write(result.to_csv())
    print(result.to_csv(), end="")
    return 0


def _cmd_ingest(args) -> int:
    if args.split_date_column != "none":
        raise WsbmError(
            "temporal splitting is out of scope for ingestion; pre-split the "
            "edge file by date and ingest each part"
        )
    W, node_index = ingest_edge_list(args.edges, cap=args.cap)
    write_graph_csv(W, args.out)
    index_path = args.node_index or (os.path.splitext(args.out)[0] + ".nodes.tsv")
    with open(index_path, "w", encoding="utf-8") as fh:
        for node, idx in node_index.items():
            fh.write(f"{node}\t{idx}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsbmtest",
        description="Two-sample test of community memberships for weighted SBMs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a graph from a model spec")
    p.add_argument("--spec", required=True, help="model spec JSON file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output graph CSV")
    p.add_argument("--membership", help="also write the true membership TSV")
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("cluster", help="spectral clustering of a graph")
    p.add_argument("--graph", required=True, help="graph CSV")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--embedding", choices=sorted(_EMBEDDINGS), default="laplacian")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--row-normalize", action="store_true")
    p.add_argument("--out", default="-", help="membership TSV ('-' for stdout)")
    p.add_argument("--dump-embedding", help="write 2-d spectral coordinates CSV")
    p.set_defaults(func=_cmd_cluster)

    p = sub.add_parser("test", help="two-sample membership test")
    p.add_argument("--graph1", required=True)
    p.add_argument("--graph2", required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--statistic", choices=("subspace", "expansion"), default="subspace")
    p.add_argument("--transform", choices=("procrustes", "projection", "inverse"),
                   default="procrustes")
    p.add_argument("--moments", type=_parse_moments, default="plug_in",
                   help="'plugin' (default) or 'oracle:spec.json[,spec2.json]'")
    p.add_argument("--seed", type=int, default=0, help="clustering seed for plug-in moments")
    p.set_defaults(func=_cmd_test)

    p = sub.add_parser("simulate", help="run a Monte Carlo experiment grid")
    p.add_argument("--grid", required=True, help="grid config (.toml or .json)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--timing", action="store_true", help="include wall times in JSON")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("ingest", help="build a graph from a TSV edge list")
    p.add_argument("--edges", required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_WEIGHT_CAP)
    p.add_argument("--split-date-column", default="none",
                   help="only 'none' is supported; pre-split files by date")
    p.add_argument("--out", required=True, help="output graph CSV")
    p.add_argument("--node-index", help="node index TSV (default: <out>.nodes.tsv)")
    p.set_defaults(func=_cmd_ingest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WsbmError as exc:
        return _fail(exc)
    except OSError as exc:
        return _fail(exc)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    sys.exit(main())
