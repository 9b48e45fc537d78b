"""Command-line surface: generate streams, color them in one pass, verify
output, run the buffered baseline, sweep benchmark grids, and execute the
statistical self-checks.

Every subcommand prints its fully resolved configuration as one JSON line
on stderr; replaying the same invocation reproduces the output (wall-clock
fields excepted).  Exit codes: 0 success, 1 verification or check failure,
2 usage or input errors.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import math
import sys
import time
from dataclasses import asdict
from typing import IO, Iterator

from .audit import (
    TraceRecorder,
    assignment_structure_audit,
    color_budget_check,
    leftover_stats,
    offset_independence_check,
    saturated_index_audit,
    space_check,
    verify_proper,
)
from .model import EngineInvariantError, RunConfig, StreamInputError, resolve_config
from .pipeline import StreamColorer, run_baseline, run_stream
from .workload import (
    ORDER_POLICIES,
    colored_line,
    gen_multigraph,
    order_stream,
    read_colored,
    read_stream,
    write_stream,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

CHECK_TARGETS = ("ind", "crange", "leftover", "space", "depth")
DEFAULT_CHECK_RUNS = {"ind": 5, "crange": 5, "leftover": 20, "space": 10, "depth": 20}


@contextlib.contextmanager
def _open_in(path: str) -> Iterator[IO[str]]:
    if path == "-":
        yield sys.stdin
    else:
        with open(path, "r", encoding="ascii") as fh:
            yield fh


@contextlib.contextmanager
def _open_out(path: str) -> Iterator[IO[str]]:
    if path == "-":
        yield sys.stdout
    else:
        with open(path, "w", encoding="ascii") as fh:
            yield fh


def _effective(command: str, **fields: object) -> None:
    doc: dict = {"command": command}
    doc.update(fields)
    print(json.dumps(doc, sort_keys=False), file=sys.stderr)


def _config_fields(config: RunConfig) -> dict:
    return asdict(config)


def _resolve_from_args(args: argparse.Namespace, n: int, delta: int, m: int | None) -> RunConfig:
    return resolve_config(
        n=n,
        delta=delta,
        kappa=args.kappa,
        seed=args.seed,
        m=m,
        interval_factor=args.interval_factor,
        max_depth=args.max_depth,
        delta_mode="unknown" if getattr(args, "unknown_delta", False) else "known",
        sigma_seed=getattr(args, "sigma_seed", None),
        offset_seed=getattr(args, "offset_seed", None),
    )


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args: argparse.Namespace) -> int:
    edges = gen_multigraph(
        args.n, args.delta, args.m, allow_parallel=not args.simple, seed=args.seed
    )
    if args.order != "none":
        edges = order_stream(edges, args.order, seed=args.order_seed)
    _effective(
        "gen",
        n=args.n,
        delta=args.delta,
        m=args.m,
        seed=args.seed,
        allow_parallel=not args.simple,
        order=args.order,
        order_seed=args.order_seed,
        out=args.out,
    )
    with _open_out(args.out) as fh:
        write_stream(fh, args.n, args.delta, edges)
    return EXIT_OK


def _run_from_file(args: argparse.Namespace, baseline: bool) -> int:
    out_path = args.out
    if out_path is None:
        if args.stream == "-":
            raise StreamInputError("reading from stdin requires an explicit --out path")
        out_path = args.stream + ".colored"
    trace = TraceRecorder() if getattr(args, "trace", None) else None
    with _open_in(args.stream) as fh:
        header, body = read_stream(fh)
        config = _resolve_from_args(args, header.n, header.delta, header.m)
        _effective(
            "baseline" if baseline else "color",
            stream=args.stream,
            out=out_path,
            metrics=args.metrics,
            trace=getattr(args, "trace", None),
            config=_config_fields(config),
        )
        colorer = StreamColorer(config, trace=trace, baseline=baseline)
        start = time.perf_counter()
        with _open_out(out_path) as out_fh:
            for e in body:
                for edge, color in colorer.feed(e.u, e.v):
                    out_fh.write(colored_line(edge, color))
            for edge, color in colorer.finalize():
                out_fh.write(colored_line(edge, color))
        wall_ms = (time.perf_counter() - start) * 1000.0
    metrics = colorer.metrics(wall_ms=wall_ms)
    with _open_out(args.metrics) as mfh:
        mfh.write(metrics.to_json())
        mfh.write("\n")
    if trace is not None:
        with _open_out(args.trace) as tfh:
            trace.dump(tfh)
    return EXIT_OK


def cmd_color(args: argparse.Namespace) -> int:
    return _run_from_file(args, baseline=False)


def cmd_baseline(args: argparse.Namespace) -> int:
    return _run_from_file(args, baseline=True)


def cmd_verify(args: argparse.Namespace) -> int:
    with _open_in(args.colored) as fh:
        colored = read_colored(fh)
    with _open_in(args.stream) as fh:
        _, body = read_stream(fh)
        input_edges = list(body)
    _effective("verify", colored=args.colored, stream=args.stream)
    result = verify_proper(colored, input_edges)
    if result.ok:
        print(f"ok: {len(colored)} edges, coloring is proper")
        return EXIT_OK
    if result.status == "conflict":
        print(
            f"conflict: {result.detail}; edges ({result.first.u},{result.first.v}) "
            f"seq {result.first.seq} and ({result.second.u},{result.second.v}) "
            f"seq {result.second.seq}"
        )
    else:
        print(f"mismatch: {result.detail}")
    return EXIT_FAIL


BENCH_COLUMNS = [
    "n",
    "delta",
    "m",
    "kappa",
    "order",
    "seed",
    "algorithm",
    "colors_used",
    "depth",
    "leftover0",
    "peak_words_l0",
    "wall_ms",
]


def cmd_bench(args: argparse.Namespace) -> int:
    sizes = [int(x) for x in args.n.split(",")]
    deltas = [int(x) for x in args.delta.split(",")]
    orders = args.orders.split(",")
    algorithms = args.algorithms.split(",")
    for policy in orders:
        if policy not in ORDER_POLICIES:
            raise StreamInputError(f"unknown order policy {policy!r}")
    for algorithm in algorithms:
        if algorithm not in ("wse", "baseline"):
            raise StreamInputError(f"unknown algorithm {algorithm!r}; choose wse or baseline")
    _effective(
        "bench",
        n=sizes,
        delta=deltas,
        edge_factor=args.edge_factor,
        orders=orders,
        seeds=args.seeds,
        algorithms=algorithms,
        kappa=args.kappa,
        seed=args.seed,
        out=args.out,
    )
    with _open_out(args.out) as fh:
        writer = csv.writer(fh)
        writer.writerow(BENCH_COLUMNS)
        for n in sizes:
            for delta in deltas:
                m = int(n * delta * args.edge_factor)
                for policy in orders:
                    for s in range(args.seeds):
                        seed = args.seed + s
                        edges = gen_multigraph(n, delta, m, seed=seed)
                        edges = order_stream(edges, policy, seed=seed + 10_007)
                        config = resolve_config(
                            n=n, delta=delta, kappa=args.kappa, seed=seed, m=m
                        )
                        for algorithm in algorithms:
                            runner = run_baseline if algorithm == "baseline" else run_stream
                            _, metrics = runner(config, edges)
                            writer.writerow(
                                [
                                    n,
                                    delta,
                                    m,
                                    args.kappa,
                                    policy,
                                    seed,
                                    algorithm,
                                    metrics.colors_used,
                                    metrics.depth,
                                    metrics.level0_leftover(),
                                    metrics.level0_peak(),
                                    f"{metrics.wall_ms:.3f}",
                                ]
                            )
    return EXIT_OK


def _check_workload(args: argparse.Namespace, seed: int, n: int | None = None):
    n = args.n if n is None else n
    m = int(n * args.delta * args.edge_factor)
    edges = gen_multigraph(n, args.delta, m, seed=seed)
    edges = order_stream(edges, "arrival-random", seed=seed + 10_007)
    config = resolve_config(n=n, delta=args.delta, kappa=args.kappa, seed=seed, m=m)
    return config, edges


def cmd_check(args: argparse.Namespace) -> int:
    runs = args.runs if args.runs is not None else DEFAULT_CHECK_RUNS[args.target]
    _effective(
        "check",
        target=args.target,
        runs=runs,
        n=args.n,
        delta=args.delta,
        edge_factor=args.edge_factor,
        kappa=args.kappa,
        seed=args.seed,
    )
    handler = {
        "ind": _check_ind,
        "crange": _check_crange,
        "leftover": _check_leftover,
        "space": _check_space,
        "depth": _check_depth,
    }[args.target]
    ok, detail = handler(args, runs)
    print(f"check {args.target}: {'PASS' if ok else 'FAIL'} ({detail})")
    return EXIT_OK if ok else EXIT_FAIL


def _check_ind(args: argparse.Namespace, runs: int) -> tuple[bool, str]:
    failures = []
    for i in range(runs):
        config, edges = _check_workload(args, args.seed + i)
        ok, detail = offset_independence_check(
            config, edges, offset_seed_a=7_001 + i, offset_seed_b=9_103 + i
        )
        print(f"run {i}: {'identical' if ok else detail}")
        if not ok:
            failures.append(i)
    if failures:
        return False, f"counter traces diverged on runs {failures}"
    return True, f"{runs} dual runs with matching counter traces"


def _check_crange(args: argparse.Namespace, runs: int) -> tuple[bool, str]:
    total = 0
    for i in range(runs):
        config, edges = _check_workload(args, args.seed + i)
        trace = TraceRecorder()
        run_stream(config, edges, trace=trace)
        violations = assignment_structure_audit(trace.records, config)
        violations += saturated_index_audit(trace.records, config)
        for v in violations:
            print(f"run {i}: {v}")
        print(f"run {i}: {len(violations)} violations")
        total += len(violations)
    return total == 0, f"{total} structure violations over {runs} runs"


def _check_leftover(args: argparse.Namespace, runs: int) -> tuple[bool, str]:
    metrics_list = []
    for i in range(runs):
        config, edges = _check_workload(args, args.seed + i)
        _, metrics = run_stream(config, edges)
        metrics_list.append(metrics)
    report = leftover_stats(metrics_list, args.kappa)
    detail = (
        f"mean {report.mean:.4f}, 95% ci [{report.ci_low:.4f}, {report.ci_high:.4f}], "
        f"threshold {report.threshold:.4f}, {report.runs} runs"
    )
    return report.ok, detail


def _check_space(args: argparse.Namespace, runs: int) -> tuple[bool, str]:
    ratios = []
    findings = 0
    for i in range(runs):
        config_a, edges_a = _check_workload(args, args.seed + i)
        config_b, edges_b = _check_workload(args, args.seed + i, n=2 * args.n)
        _, small = run_stream(config_a, edges_a)
        _, big = run_stream(config_b, edges_b)
        for metrics, n in ((small, args.n), (big, 2 * args.n)):
            report = space_check(metrics, n, args.delta)
            for f in report.findings:
                print(f"run {i}: {f}")
            findings += len(report.findings)
        ratios.append(big.level0_peak() / small.level0_peak())
        print(f"run {i}: peak ratio {ratios[-1]:.3f}")
    mean = sum(ratios) / len(ratios)
    ok = findings == 0 and mean <= 2.5
    return ok, f"mean peak ratio {mean:.3f} (limit 2.5), {findings} structural findings"


def _check_depth(args: argparse.Namespace, runs: int) -> tuple[bool, str]:
    bound = 2 * int(math.log2(args.delta)) + 4
    within = 0
    fallbacks = 0
    for i in range(runs):
        config, edges = _check_workload(args, args.seed + i)
        _, metrics = run_stream(config, edges)
        print(f"run {i}: depth {metrics.depth}")
        if metrics.depth <= bound:
            within += 1
        fallbacks += metrics.fallback_intervals
    ok = within >= math.ceil(0.9 * runs) and fallbacks == 0
    return ok, f"{within}/{runs} runs within depth {bound}, {fallbacks} fallback intervals"


# ---------------------------------------------------------------------------
# parser


def _add_engine_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--kappa", type=int, default=32, help="palette multiplier, power of two >= 32")
    p.add_argument("--seed", type=int, default=0, help="master random seed")
    p.add_argument(
        "--interval-factor",
        default=None,
        help="interval size as a multiple of n: a number, or 'logn'",
    )
    p.add_argument("--max-depth", type=int, default=None, help="recursion depth cap override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wsecolor",
        description="single-pass bounded-memory edge coloring for multigraph streams",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random degree-bounded multigraph stream")
    p.add_argument("--n", type=int, required=True, help="vertex count")
    p.add_argument("--delta", type=int, required=True, help="max degree")
    p.add_argument("--m", type=int, required=True, help="edge count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--simple", action="store_true", help="disallow parallel edges")
    p.add_argument(
        "--order",
        default="none",
        choices=("none",) + ORDER_POLICIES,
        help="arrival order applied after generation",
    )
    p.add_argument("--order-seed", type=int, default=1, help="seed for the order policy")
    p.add_argument("out", help="output stream path, or - for stdout")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("color", help="color a stream file in one pass")
    p.add_argument("stream", help="input stream path, or - for stdin")
    p.add_argument("--out", default=None, help="colored output path (default: <stream>.colored)")
    p.add_argument("--metrics", default="-", help="metrics JSON path (default: stdout)")
    p.add_argument("--trace", default=None, help="write decision trace JSON lines here")
    p.add_argument("--unknown-delta", action="store_true", help="ignore the declared max degree")
    p.add_argument("--sigma-seed", type=int, default=None, help="palette index seed override")
    p.add_argument("--offset-seed", type=int, default=None, help="slot offset seed override")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_color)

    p = sub.add_parser("verify", help="verify a colored file against its stream")
    p.add_argument("colored", help="colored output path")
    p.add_argument("stream", help="input stream path")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("baseline", help="color with the per-interval fresh-palette reference")
    p.add_argument("stream", help="input stream path, or - for stdin")
    p.add_argument("--out", default=None, help="colored output path (default: <stream>.colored)")
    p.add_argument("--metrics", default="-", help="metrics JSON path (default: stdout)")
    _add_engine_flags(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("bench", help="run a benchmark grid and emit CSV")
    p.add_argument("--n", default="64,256", help="comma-separated vertex counts")
    p.add_argument("--delta", default="16,64,256", help="comma-separated degree bounds")
    p.add_argument("--edge-factor", type=float, default=0.25, help="m = n * delta * factor")
    p.add_argument("--orders", default=",".join(ORDER_POLICIES))
    p.add_argument("--seeds", type=int, default=10, help="number of seeds per grid point")
    p.add_argument("--algorithms", default="wse,baseline")
    p.add_argument("--kappa", type=int, default=32)
    p.add_argument("--seed", type=int, default=0, help="base seed")
    p.add_argument("--out", default="-", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("check", help="run one of the statistical self-checks")
    p.add_argument("target", choices=CHECK_TARGETS)
    p.add_argument("--runs", type=int, default=None, help="seeded runs (default depends on target)")
    p.add_argument("--n", type=int, default=256)
    p.add_argument("--delta", type=int, default=64)
    p.add_argument("--edge-factor", type=float, default=0.25)
    p.add_argument("--kappa", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StreamInputError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except EngineInvariantError as err:
        print(f"internal invariant violated: {err}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
