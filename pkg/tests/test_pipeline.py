"""End-to-end single-pass behavior: recursion, base case, depth cap, epoch
routing, and determinism."""

import json

import pytest

from wsecolor import (
    Edge,
    StreamColorer,
    StreamInputError,
    encode_color,
    gen_multigraph,
    resolve_config,
    run_baseline,
    run_stream,
)
from wsecolor.phase_engine import compute_degrees

from support import emitted_seqs, find_conflicts, make_edges, seqs_of


def test_every_edge_colored_exactly_once():
    edges = gen_multigraph(64, 16, 256, seed=3)
    cfg = resolve_config(n=64, delta=16, seed=3, m=256)
    emissions, metrics = run_stream(cfg, edges)
    assert emitted_seqs(emissions) == seqs_of(edges)
    assert find_conflicts(emissions) == []
    assert metrics.input_edges == 256


def test_deeper_levels_tagged_and_counted():
    edges = gen_multigraph(64, 16, 256, seed=3)
    cfg = resolve_config(n=64, delta=16, seed=3, m=256)
    emissions, metrics = run_stream(cfg, edges)
    levels = {c.level for _, c in emissions}
    assert levels == set(range(metrics.depth + 1))
    for (epoch, level), count in metrics.colored_per_level.items():
        assert epoch == 0
        got = sum(1 for _, c in emissions if c.level == level)
        assert got == count
    # leftovers of one level are exactly the input of the next
    for level in range(metrics.depth):
        nxt = (0, level + 1)
        assert metrics.leftover_per_level[(0, level)] == metrics.colored_per_level.get(
            nxt, 0
        ) + metrics.leftover_per_level.get(nxt, 0)


def test_identical_runs_identical_output():
    edges = gen_multigraph(64, 16, 256, seed=5)
    cfg = resolve_config(n=64, delta=16, seed=5, m=256)
    first, _ = run_stream(cfg, edges)
    second, _ = run_stream(cfg, edges)
    assert [(e.seq, encode_color(c)) for e, c in first] == [
        (e.seq, encode_color(c)) for e, c in second
    ]


def test_seed_changes_output():
    edges = gen_multigraph(64, 16, 256, seed=5)
    a, _ = run_stream(resolve_config(n=64, delta=16, seed=5, m=256), edges)
    b, _ = run_stream(resolve_config(n=64, delta=16, seed=6, m=256), edges)
    assert [(e.seq, encode_color(c)) for e, c in a] != [(e.seq, encode_color(c)) for e, c in b]


def test_base_case_colors_within_twice_degree():
    edges = gen_multigraph(64, 16, 20, seed=7)
    bound = max(compute_degrees(edges).values())
    cfg = resolve_config(n=64, delta=16, seed=1, m=20)
    emissions, metrics = run_stream(cfg, edges)
    assert {c.kind for _, c in emissions} == {"BASE"}
    assert len({encode_color(c) for _, c in emissions}) <= 2 * bound - 1
    assert find_conflicts(emissions) == []
    assert metrics.base_cases == {(0, 0): bound}
    assert metrics.depth == 0


def test_depth_cap_zero_never_defers():
    edges = gen_multigraph(64, 16, 256, seed=7)
    cfg = resolve_config(n=64, delta=16, seed=1, m=256, max_depth=0)
    emissions, metrics = run_stream(cfg, edges)
    assert emitted_seqs(emissions) == seqs_of(edges)
    assert find_conflicts(emissions) == []
    assert metrics.fallback_intervals == 4  # 256 edges / 64 per interval
    assert metrics.depth == 0
    assert sum(metrics.leftover_per_level.values()) == 0


def test_fallback_rejects_degree_above_bound():
    # five parallel edges inside one buffered interval beat delta = 4
    cfg = resolve_config(n=4, delta=4, max_depth=0, interval_size=8)
    colorer = StreamColorer(cfg)
    for _ in range(5):
        colorer.feed(0, 1)
    with pytest.raises(StreamInputError, match="exceeds"):
        colorer.finalize()


# -- unknown degree bound ----------------------------------------------------


def test_epoch_routing_follows_running_max_degree():
    cfg = resolve_config(n=8, delta=1, delta_mode="unknown")
    colorer = StreamColorer(cfg)
    emissions = []
    for u, v in [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]:
        emissions.extend(colorer.feed(u, v))
    emissions.extend(colorer.finalize())
    # running max degree 1,2,3,4,5 lands in regimes 0,1,2,2,3
    by_seq = {e.seq: c.epoch for e, c in emissions}
    assert by_seq == {0: 0, 1: 1, 2: 2, 3: 2, 4: 3}
    assert find_conflicts(emissions) == []


def test_unknown_mode_proper_on_real_stream():
    edges = gen_multigraph(64, 16, 256, seed=11)
    cfg = resolve_config(n=64, delta=1, seed=4, m=256, delta_mode="unknown")
    emissions, metrics = run_stream(cfg, edges)
    assert emitted_seqs(emissions) == seqs_of(edges)
    assert find_conflicts(emissions) == []
    epochs = {e for (e, _) in metrics.colored_per_level}
    assert len(epochs) > 1  # the degree bound grew mid-stream


def test_unknown_mode_rejects_bad_edges_before_counting():
    cfg = resolve_config(n=8, delta=1, delta_mode="unknown")
    colorer = StreamColorer(cfg)
    with pytest.raises(StreamInputError):
        colorer.feed(3, 3)
    with pytest.raises(StreamInputError):
        colorer.feed(0, 99)
    colorer.feed(0, 1)  # the failed edges left no degree residue behind
    emissions = colorer.finalize()
    assert [c.epoch for _, c in emissions] == [0]


# -- baseline ----------------------------------------------------------------


def test_baseline_budget_and_properness():
    edges = gen_multigraph(64, 16, 256, seed=2)
    cfg = resolve_config(n=64, delta=16, seed=2, m=256)
    emissions, metrics = run_baseline(cfg, edges)
    assert emitted_seqs(emissions) == seqs_of(edges)
    assert find_conflicts(emissions) == []
    intervals = metrics.interval_count[(0, 0)]
    assert intervals == 4
    assert metrics.colors_used <= intervals * (2 * 16 - 1)
    assert metrics.depth == 0
    assert metrics.fallback_intervals == 0
    assert all(s.kind == "fresh" for s in metrics.scopes)


# -- metrics serialization ---------------------------------------------------


def test_metrics_json_shape():
    edges = gen_multigraph(64, 16, 256, seed=3)
    cfg = resolve_config(n=64, delta=16, seed=3, m=256)
    _, metrics = run_stream(cfg, edges)
    doc = json.loads(metrics.to_json())
    assert doc["schema"] == "wsecolor-metrics-v1"
    assert doc["config"]["n"] == 64
    assert "e0.l0" in doc["colored_per_level"]
    assert doc["input_edges"] == 256
    assert doc["wall_ms"] >= 0
    assert isinstance(doc["scopes"], list) and doc["scopes"]


def test_streaming_emission_is_online():
    # a full interval must yield output before the stream ends
    cfg = resolve_config(n=8, delta=4, interval_size=4)
    colorer = StreamColorer(cfg)
    got_early = False
    for i, (u, v) in enumerate([(0, 1), (2, 3), (4, 5), (6, 7), (0, 2)]):
        out = colorer.feed(u, v)
        if i == 3:
            got_early = bool(out)
    colorer.finalize()
    assert got_early


def test_feed_validates_before_buffering():
    cfg = resolve_config(n=8, delta=4)
    colorer = StreamColorer(cfg)
    with pytest.raises(StreamInputError):
        colorer.feed(0, 8)
    with pytest.raises(StreamInputError):
        colorer.feed(2, 2)
