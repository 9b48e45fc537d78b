"""Shared test helpers, including a properness oracle that is deliberately
independent of the library's own verifier: plain pairwise comparison over
every vertex's incident edges."""

from __future__ import annotations

from wsecolor import (
    Edge,
    RunMetrics,
    encode_color,
    gen_multigraph,
    order_stream,
    resolve_config,
    run_stream,
)


def find_conflicts(colored):
    """All pairs of distinct edge instances that share an endpoint and a
    color token.  Quadratic per vertex; only for test-sized inputs."""
    at_vertex: dict[int, list] = {}
    for e, color in colored:
        token = encode_color(color)
        at_vertex.setdefault(e.u, []).append((e, token))
        at_vertex.setdefault(e.v, []).append((e, token))
    conflicts = []
    for v, incident in at_vertex.items():
        for i in range(len(incident)):
            for j in range(i + 1, len(incident)):
                e1, t1 = incident[i]
                e2, t2 = incident[j]
                if e1.seq != e2.seq and t1 == t2:
                    conflicts.append((v, t1, e1.seq, e2.seq))
    return conflicts


def color_run(n, delta, m, *, order="arrival-random", seed=0, trace=None, **overrides):
    """Generate, order, resolve, and color one stream; returns everything a
    test might want to inspect."""
    edges = gen_multigraph(n, delta, m, seed=seed)
    if order != "none":
        edges = order_stream(edges, order, seed=seed + 1)
    config = resolve_config(n=n, delta=delta, seed=seed, m=m, **overrides)
    emissions, metrics = run_stream(config, edges, trace=trace)
    return edges, emissions, metrics, config


def fake_metrics(*, input_edges, leftover0, peak0=100, colors=1):
    """A minimal RunMetrics for exercising the statistics helpers without a
    full engine run."""
    config = resolve_config(n=4, delta=4, m=input_edges or 1)
    return RunMetrics(
        config=config,
        input_edges=input_edges,
        colors_used=colors,
        colors_per_level={(0, 0): colors},
        colored_per_level={(0, 0): input_edges - leftover0},
        leftover_per_level={(0, 0): leftover0},
        depth=0,
        interval_count={(0, 0): 1},
        phase_count={(0, 0): 1},
        peak_words_per_level={(0, 0): peak0},
        peak_words_by_category={(0, 0): {"buffer": peak0}},
        fallback_intervals=0,
        base_cases={},
        scopes=[],
        class_phase_stats=[],
        wall_ms=0.0,
    )


def seqs_of(edges):
    return sorted(e.seq for e in edges)


def emitted_seqs(emissions):
    return sorted(e.seq for e, _ in emissions)


def make_edges(pairs):
    """Edges from (u, v) pairs, sequenced by position."""
    return [Edge(u, v, i) for i, (u, v) in enumerate(pairs)]
