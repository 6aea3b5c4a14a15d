"""Command-line driver.

Exit codes: 0 ok, 1 usage/configuration, 2 I/O or malformed input,
3 disconnected graph, 4 ill-posed or degenerate slope, 5 internal error.
"""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .datasets import KINDS, PointCloud, SyntheticSpec, generate, load_csv, save_csv
from .errors import ConfigurationError, GmstError
from .estimator import (
    BETA_MODES,
    ResamplingPlan,
    run_pipeline,
    size_grid,
    write_beta_table,
)
from .geodesics import all_pairs_geodesics, dump_matrix
from .mst import estimate_beta
from .neighborhood import NeighborRule, build_graph, dump_edges, rescale_conformal

EXIT_USAGE, EXIT_IO, EXIT_INTERNAL = 1, 2, 5


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_source(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", metavar="PATH", help="CSV file, one point per row")
    src.add_argument("--generate", metavar="KIND", choices=KINDS, help="synthetic manifold instead of a file")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--n", type=int, default=1000, help="generated sample count")
    p.add_argument("--m", type=int, default=2, help="generated intrinsic dimension")
    p.add_argument("--d", type=int, default=None, help="generated ambient dimension (default m+1)")
    p.add_argument("--gen-seed", type=int, default=None, help="generator seed (default: --seed)")
    p.add_argument("--scale", type=float, default=1.0, help="global scale of generated points")


def _add_graph(p: argparse.ArgumentParser) -> None:
    rule = p.add_mutually_exclusive_group()
    rule.add_argument("--k", type=int, help="k-rule neighborhood (default 7)")
    rule.add_argument("--epsilon", type=float, help="epsilon-rule neighborhood radius")
    p.add_argument("--conformal", action="store_true", help="C-ISOMAP edge rescaling")
    p.add_argument("--fast-neighbors", action="store_true", help="k-d tree neighbour search")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gmst", description="Intrinsic dimension and entropy from geodesic MST growth.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (0 = auto)")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="sample a synthetic manifold to CSV")
    g.add_argument("--kind", choices=KINDS, required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--m", type=int, default=2)
    g.add_argument("--d", type=int, default=None)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--out", metavar="PATH")
    g.add_argument("--params-out", metavar="PATH", help="also write latent parameters")

    e = sub.add_parser("estimate", help="estimate dimension and entropy")
    _add_source(e)
    _add_graph(e)
    e.add_argument("--gamma", type=float, default=1.0)
    sizes = e.add_mutually_exclusive_group()
    sizes.add_argument("--sizes", help='"p1,p2,..." or "min:max:count"')
    sizes.add_argument("--size-range", help='"min:max:count"')
    e.add_argument("--size-spacing", choices=("linear", "log"), default="linear")
    e.add_argument("--trials", type=int, default=25)
    fit = e.add_mutually_exclusive_group()
    fit.add_argument("--fit-top-fraction", type=float, default=0.5)
    fit.add_argument("--fit-min-size", type=int, help="fit only sizes strictly above this value")
    e.add_argument("--beta-mode", choices=BETA_MODES, default="montecarlo")
    e.add_argument("--beta-table", metavar="PATH")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--log-base", choices=("e", "2"), default="e")
    e.add_argument("--disconnect", choices=("fail", "largest"), default="fail")
    e.add_argument("--rounding", choices=("nearest", "floor"), default="nearest")
    e.add_argument("--per-subset-graph", action="store_true", help="rebuild the graph on every subset")
    e.add_argument("--json", action="store_true", help="JSON report instead of key: value text")
    e.add_argument("--out", metavar="PATH")
    e.add_argument("--dump-curve", metavar="PATH", help='growth curve CSV "p,mean,std"')
    e.add_argument("--dump-trials", metavar="PATH", help='per-trial CSV "p,trial,length"')

    b = sub.add_parser("beta", help="Monte Carlo BHH constants")
    b.add_argument("--m", required=True, help='dimension or list "2,3,4"')
    b.add_argument("--gamma", type=float, default=1.0)
    b.add_argument("--n", type=int, default=2048)
    b.add_argument("--trials", type=int, default=32)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", metavar="PATH")

    d = sub.add_parser("graph-dump", help="write the neighborhood graph and geodesic matrix")
    _add_source(d)
    _add_graph(d)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--edges-out", metavar="PATH", required=True)
    d.add_argument("--geodesics-out", metavar="PATH")
    return parser


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"expected comma-separated integers, got {text!r}") from None


def parse_sizes(text: str | None, n: int, spacing: str = "linear") -> tuple[int, ...]:
    if text is None:
        return size_grid(max(2, n // 5), n, 10, spacing)
    if ":" in text:
        try:
            lo, hi, count = (int(v) for v in text.split(":"))
        except ValueError:
            raise ConfigurationError(f"size range must be min:max:count, got {text!r}") from None
        return size_grid(lo, hi, count, spacing)
    return tuple(_int_list(text))


def _load(args) -> tuple[PointCloud, dict]:
    if args.input:
        return load_csv(args.input, args.delimiter), {"input": args.input}
    d = args.d if args.d is not None else args.m + 1
    seed = args.gen_seed if args.gen_seed is not None else args.seed
    spec = SyntheticSpec(args.generate, args.m, d, args.n, seed=seed, scale_factor=args.scale)
    echo = {"input": f"generate:{spec.kind}", "gen_m": spec.intrinsic_dim, "gen_d": d, "gen_n": spec.n, "gen_seed": seed, "gen_scale": spec.scale_factor}
    if spec.ground_truth_entropy is not None:
        echo["gen_true_entropy_nats"] = spec.ground_truth_entropy
    return generate(spec), echo


def _rule(args) -> NeighborRule:
    if args.epsilon is not None:
        return NeighborRule.epsilon(args.epsilon)
    return NeighborRule.knn(7 if args.k is None else args.k)


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def cmd_generate(args) -> int:
    d = args.d if args.d is not None else args.m + 1
    spec = SyntheticSpec(args.kind, args.m, d, args.n, seed=args.seed, scale_factor=args.scale)
    cloud = generate(spec)
    save_csv(cloud, args.out if args.out else sys.stdout)
    if args.params_out:
        save_csv(PointCloud(cloud.params), args.params_out)
    if spec.ground_truth_entropy is not None:
        print(f"true entropy: {spec.ground_truth_entropy!r} nats", file=sys.stderr)
    return 0


def cmd_estimate(args) -> int:
    cloud, echo = _load(args)
    sizes = parse_sizes(args.sizes or args.size_range, cloud.n, args.size_spacing)
    window = None
    if args.fit_min_size is not None:
        window = tuple(p for p in sizes if p > args.fit_min_size)
    plan = ResamplingPlan(
        sizes, trials=args.trials, seed=args.seed, gamma=args.gamma, fit_window=window, fit_fraction=args.fit_top_fraction
    )
    echo.update(
        {
            "fit_top_fraction": args.fit_top_fraction,
            "fit_min_size": args.fit_min_size,
            "beta_table": args.beta_table,
            "fast_neighbors": args.fast_neighbors,
        }
    )
    report = run_pipeline(
        cloud,
        _rule(args),
        plan,
        conformal=args.conformal,
        beta_mode=args.beta_mode,
        log_base=args.log_base,
        disconnect_policy="largest_component" if args.disconnect == "largest" else "fail",
        rounding=args.rounding,
        per_subset_graph=args.per_subset_graph,
        beta_table=args.beta_table,
        fast_neighbors=args.fast_neighbors,
        threads=args.threads,
        extra_config=echo,
    )
    _write(report.to_json() if args.json else report.to_text(), args.out)
    if args.dump_curve:
        report.curve.write_summary_csv(args.dump_curve)
    if args.dump_trials:
        report.curve.write_trials_csv(args.dump_trials)
    return 0


def cmd_beta(args) -> int:
    rows = []
    for m in _int_list(args.m):
        beta, err = estimate_beta(m, args.gamma, n=args.n, trials=args.trials, seed=args.seed, threads=args.threads)
        rows.append({"m": m, "gamma": args.gamma, "n": args.n, "beta_hat": beta, "stderr": err})
    write_beta_table(rows, args.out if args.out else sys.stdout)
    return 0


def cmd_graph_dump(args) -> int:
    cloud, _ = _load(args)
    graph = build_graph(cloud, _rule(args), fast=args.fast_neighbors)
    if args.conformal:
        graph = rescale_conformal(graph)
    dump_edges(graph, args.edges_out)
    if args.geodesics_out:
        dump_matrix(all_pairs_geodesics(graph), args.geodesics_out)
    return 0


COMMANDS = {"generate": cmd_generate, "estimate": cmd_estimate, "beta": cmd_beta, "graph-dump": cmd_graph_dump}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except GmstError as exc:
        print(f"gmst: error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"gmst: error: {exc.strerror or exc}: {exc.filename or ''}".rstrip(": "), file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        print(f"gmst: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
