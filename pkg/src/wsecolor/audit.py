"""Verification, oracles, space accounting, run metrics, decision traces,
and the statistical checks behind the acceptance suite.

Everything here observes the engine from the outside.  verify_proper is the
ground truth for output correctness; the trace audits re-derive the slot
structure that the colorer is supposed to maintain; the space meter counts
the words the algorithm is actually allowed to keep.
"""

from __future__ import annotations

import json
import math
import random
import statistics
from dataclasses import asdict, dataclass, field, replace
from typing import IO, Iterable

from .model import ColorId, Edge, EngineInvariantError, RunConfig, encode_color, normalize_delta
from .primitives import first_fit_slots

__all__ = [
    "ClassPhaseStat",
    "LeftoverReport",
    "MeterHandle",
    "MetricsCollector",
    "RunMetrics",
    "ScopeStat",
    "SpaceMeter",
    "SpaceReport",
    "TraceRecorder",
    "VerifyResult",
    "assignment_structure_audit",
    "color_budget_check",
    "counter_trace",
    "leftover_stats",
    "offset_independence_check",
    "oracle_min_greedy",
    "saturated_index_audit",
    "space_check",
    "verify_proper",
]


# ---------------------------------------------------------------------------
# decision traces


class TraceRecorder:
    """Collects structured decision records emitted by the engine.

    Record kinds: interval-degrees, class-interval, offset-draw,
    counter-init, counter-bump, high-assign, exile, and mixed-decision.
    Records are dicts with a 'kind' key, appended in processing order, and
    can be dumped as JSON lines.
    """

    __slots__ = ("records",)

    def __init__(self) -> None:
        self.records: list[dict] = []

    def emit(self, kind: str, **fields: object) -> None:
        record: dict = {"kind": kind}
        record.update(fields)
        self.records.append(record)

    def dump(self, fh: IO[str]) -> None:
        for record in self.records:
            fh.write(json.dumps(record, sort_keys=False))
            fh.write("\n")


# ---------------------------------------------------------------------------
# space accounting

METER_CATEGORIES = (
    "buffer",
    "offsets",
    "index_sets",
    "counters",
    "prior_counts",
    "window",
)


class SpaceMeter:
    """Tracked-word accounting for the persistent per-level stores.

    One word per buffered edge, map entry, or set element, across six
    categories: the interval buffer, slot offsets, palette index sets,
    per-(vertex, index) counters, prior-interval tallies, and the conflict
    window.  Transient per-interval scratch (the degree map, the classified
    buckets) is not tracked.  Keys are (epoch, level) pairs.
    """

    def __init__(self) -> None:
        self._current: dict[tuple[int, int], dict[str, int]] = {}
        self._total: dict[tuple[int, int], int] = {}
        self._peak: dict[tuple[int, int], int] = {}
        self._cat_peak: dict[tuple[int, int], dict[str, int]] = {}

    def add(self, epoch: int, level: int, category: str, amount: int) -> None:
        key = (epoch, level)
        cats = self._current.setdefault(key, {})
        value = cats.get(category, 0) + amount
        if value < 0:
            raise EngineInvariantError(f"space meter went negative: {key} {category}")
        cats[category] = value
        total = self._total.get(key, 0) + amount
        self._total[key] = total
        if total > self._peak.get(key, 0):
            self._peak[key] = total
        peaks = self._cat_peak.setdefault(key, {})
        if value > peaks.get(category, 0):
            peaks[category] = value

    def current(self, epoch: int, level: int) -> dict[str, int]:
        return dict(self._current.get((epoch, level), {}))

    def current_total(self, epoch: int, level: int) -> int:
        return self._total.get((epoch, level), 0)

    def peaks(self) -> dict[tuple[int, int], int]:
        return dict(self._peak)

    def category_peaks(self) -> dict[tuple[int, int], dict[str, int]]:
        return {key: dict(v) for key, v in self._cat_peak.items()}


class MeterHandle:
    """A SpaceMeter bound to one (epoch, level), so engine code just names
    the category."""

    __slots__ = ("_meter", "epoch", "level")

    def __init__(self, meter: SpaceMeter, epoch: int, level: int) -> None:
        self._meter = meter
        self.epoch = epoch
        self.level = level

    def add(self, category: str, amount: int) -> None:
        if amount:
            self._meter.add(self.epoch, self.level, category, amount)


# ---------------------------------------------------------------------------
# run metrics


@dataclass(frozen=True)
class ScopeStat:
    """Distinct-color usage of one palette scope against its budget."""

    kind: str  # "class" | "low" | "base" | "fresh"
    epoch: int
    level: int
    budget: int
    distinct: int
    phase: int | None = None
    d: int | None = None
    interval: int | None = None


@dataclass(frozen=True)
class ClassPhaseStat:
    """Per-(phase, class) structural tallies used by the space check."""

    epoch: int
    level: int
    phase: int
    d: int
    sqrt_delta: int
    index_inserts: int
    counter_creates: int
    phase_edges: int


def _level_key(epoch: int, level: int) -> str:
    return f"e{epoch}.l{level}"


@dataclass
class RunMetrics:
    """Everything a finished run reports about itself.

    Dict fields are keyed by (epoch, level) tuples in memory and by
    "e<epoch>.l<level>" strings in to_dict()/JSON form.
    """

    config: RunConfig
    input_edges: int
    colors_used: int
    colors_per_level: dict[tuple[int, int], int]
    colored_per_level: dict[tuple[int, int], int]
    leftover_per_level: dict[tuple[int, int], int]
    depth: int
    interval_count: dict[tuple[int, int], int]
    phase_count: dict[tuple[int, int], int]
    peak_words_per_level: dict[tuple[int, int], int]
    peak_words_by_category: dict[tuple[int, int], dict[str, int]]
    fallback_intervals: int
    base_cases: dict[tuple[int, int], int]
    scopes: list[ScopeStat]
    class_phase_stats: list[ClassPhaseStat]
    wall_ms: float

    def level0_peak(self) -> int:
        return self.peak_words_per_level.get((0, 0), 0)

    def level0_leftover(self) -> int:
        return self.leftover_per_level.get((0, 0), 0)

    def to_dict(self) -> dict:
        def keyed(mapping: dict[tuple[int, int], object]) -> dict[str, object]:
            return {_level_key(e, l): v for (e, l), v in sorted(mapping.items())}

        return {
            "schema": "wsecolor-metrics-v1",
            "config": asdict(self.config),
            "input_edges": self.input_edges,
            "colors_used": self.colors_used,
            "colors_per_level": keyed(self.colors_per_level),
            "colored_per_level": keyed(self.colored_per_level),
            "leftover_per_level": keyed(self.leftover_per_level),
            "depth": self.depth,
            "interval_count": keyed(self.interval_count),
            "phase_count": keyed(self.phase_count),
            "peak_words_per_level": keyed(self.peak_words_per_level),
            "peak_words_by_category": keyed(self.peak_words_by_category),
            "fallback_intervals": self.fallback_intervals,
            "base_cases": keyed(self.base_cases),
            "scopes": [asdict(s) for s in self.scopes],
            "class_phase_stats": [asdict(s) for s in self.class_phase_stats],
            "wall_ms": self.wall_ms,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


class MetricsCollector:
    """Accumulates run statistics as the engine emits colors and defers
    edges; build() freezes them into a RunMetrics."""

    def __init__(self) -> None:
        self._scopes: dict[tuple, tuple[int, set[str]]] = {}
        self._colored: dict[tuple[int, int], int] = {}
        self._leftover: dict[tuple[int, int], int] = {}
        self._intervals: dict[tuple[int, int], int] = {}
        self._phases: dict[tuple[int, int], int] = {}
        self._fallback_intervals = 0
        self._base_cases: dict[tuple[int, int], int] = {}
        self._class_phase_stats: list[ClassPhaseStat] = []

    def note_emission(self, scope: tuple, budget: int, color: ColorId) -> None:
        entry = self._scopes.get(scope)
        if entry is None:
            entry = self._scopes[scope] = (budget, set())
        entry[1].add(encode_color(color))
        key = (color.epoch, color.level)
        self._colored[key] = self._colored.get(key, 0) + 1

    def note_leftovers(self, epoch: int, level: int, count: int) -> None:
        key = (epoch, level)
        self._leftover[key] = self._leftover.get(key, 0) + count

    def note_interval(self, epoch: int, level: int) -> None:
        key = (epoch, level)
        self._intervals[key] = self._intervals.get(key, 0) + 1

    def note_phase(self, epoch: int, level: int) -> None:
        key = (epoch, level)
        self._phases[key] = self._phases.get(key, 0) + 1

    def note_fallback_interval(self, epoch: int, level: int) -> None:
        self._fallback_intervals += 1

    def note_base_case(self, epoch: int, level: int, delta_prime: int) -> None:
        self._base_cases[(epoch, level)] = delta_prime

    def note_class_phase(self, stat: ClassPhaseStat) -> None:
        self._class_phase_stats.append(stat)

    def build(
        self, *, config: RunConfig, meter: SpaceMeter, input_edges: int, wall_ms: float
    ) -> RunMetrics:
        scope_stats: list[ScopeStat] = []
        per_level_colors: dict[tuple[int, int], set[str]] = {}
        all_colors: set[str] = set()
        for scope, (budget, colors) in sorted(self._scopes.items(), key=lambda kv: repr(kv[0])):
            kind, epoch, level = scope[0], scope[1], scope[2]
            extra: dict = {}
            if kind == "class":
                extra = {"phase": scope[3], "d": scope[4]}
            elif kind in ("low", "fresh"):
                extra = {"interval": scope[3]}
            scope_stats.append(
                ScopeStat(kind=kind, epoch=epoch, level=level, budget=budget, distinct=len(colors), **extra)
            )
            per_level_colors.setdefault((epoch, level), set()).update(colors)
            all_colors.update(colors)
        depth = max((lvl for (_, lvl) in self._colored), default=0)
        return RunMetrics(
            config=config,
            input_edges=input_edges,
            colors_used=len(all_colors),
            colors_per_level={k: len(v) for k, v in per_level_colors.items()},
            colored_per_level=dict(self._colored),
            leftover_per_level=dict(self._leftover),
            depth=depth,
            interval_count=dict(self._intervals),
            phase_count=dict(self._phases),
            peak_words_per_level=meter.peaks(),
            peak_words_by_category=meter.category_peaks(),
            fallback_intervals=self._fallback_intervals,
            base_cases=dict(self._base_cases),
            scopes=scope_stats,
            class_phase_stats=list(self._class_phase_stats),
            wall_ms=wall_ms,
        )


# ---------------------------------------------------------------------------
# output verification


@dataclass(frozen=True)
class VerifyResult:
    """Outcome of verify_proper: ok, a color conflict, or a multiset
    mismatch between input and output."""

    status: str  # "ok" | "conflict" | "mismatch"
    detail: str = ""
    first: Edge | None = None
    second: Edge | None = None
    color: ColorId | None = None

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def verify_proper(colored: list[tuple[Edge, ColorId]], input_edges: list[Edge]) -> VerifyResult:
    """Check conservation and properness of a colored stream.

    Ok iff the multiset of colored (u, v, seq) triples equals the input
    multiset and no two distinct edge instances sharing an endpoint carry
    equal colors.  Scans ascending seq, so the first witness reported is
    deterministic.
    """
    got: dict[tuple[int, int, int], int] = {}
    for e, _ in colored:
        key = (e.u, e.v, e.seq)
        got[key] = got.get(key, 0) + 1
    want: dict[tuple[int, int, int], int] = {}
    for e in input_edges:
        key = (e.u, e.v, e.seq)
        want[key] = want.get(key, 0) + 1
    if got != want:
        missing = sorted(k for k in want if got.get(k, 0) < want[k])
        surplus = sorted(k for k in got if want.get(k, 0) < got[k])
        bits = []
        if missing:
            bits.append(f"missing {missing[0]}")
        if surplus:
            bits.append(f"unexpected {surplus[0]}")
        return VerifyResult(status="mismatch", detail="; ".join(bits) or "multiset mismatch")

    seen: dict[tuple[int, str], Edge] = {}
    for e, color in sorted(colored, key=lambda pair: pair[0].seq):
        token = encode_color(color)
        for x in (e.u, e.v):
            key = (x, token)
            other = seen.get(key)
            if other is not None and other.seq != e.seq:
                return VerifyResult(
                    status="conflict",
                    detail=f"color {token} repeats at vertex {x}",
                    first=other,
                    second=e,
                    color=color,
                )
            seen[key] = e
    return VerifyResult(status="ok")


def oracle_min_greedy(edges: list[Edge], tries: int, seed: int) -> dict[Edge, int]:
    """Best first-fit coloring over `tries` random edge orders.

    Returns integer slots; an upper-bound reference point for how few colors
    a buffered greedy pass can reach on the same edges.
    """
    if tries < 1:
        raise ValueError(f"tries must be >= 1, got {tries}")
    deg: dict[int, int] = {}
    for e in edges:
        deg[e.u] = deg.get(e.u, 0) + 1
        deg[e.v] = deg.get(e.v, 0) + 1
    limit = 2 * max(deg.values(), default=1) - 1
    rng = random.Random(seed)
    order = list(edges)
    best: dict[Edge, int] | None = None
    best_count = limit + 1
    for _ in range(tries):
        rng.shuffle(order)
        assignment = first_fit_slots(order, limit)
        count = len(set(assignment.values()))
        if count < best_count:
            best, best_count = dict(assignment), count
    assert best is not None
    return best


# ---------------------------------------------------------------------------
# trace-based structural audits


def counter_trace(records: Iterable[dict], *, epoch: int = 0, level: int = 0) -> list[tuple]:
    """Time-ordered counter events (creations and bumps) of one level.

    Restricted to a single level because deeper levels consume deferred
    edges, whose membership legitimately depends on the offset draws.
    """
    out: list[tuple] = []
    for r in records:
        if r["kind"] not in ("counter-init", "counter-bump"):
            continue
        if r["epoch"] != epoch or r["level"] != level:
            continue
        out.append(
            (r["kind"], r["phase"], r["d"], r["interval"], r["vertex"], r["index"], r.get("value", 0))
        )
    return out


def offset_independence_check(
    config: RunConfig,
    edges: list[Edge],
    *,
    offset_seed_a: int,
    offset_seed_b: int,
) -> tuple[bool, str]:
    """Run the colorer twice with identical index draws and different offset
    seeds; pass iff the level-0 counter traces match event for event."""
    from .pipeline import run_stream  # deferred: pipeline imports this module

    traces = []
    for offset_seed in (offset_seed_a, offset_seed_b):
        recorder = TraceRecorder()
        run_stream(replace(config, offset_seed=offset_seed), edges, trace=recorder)
        traces.append(counter_trace(recorder.records))
    if traces[0] == traces[1]:
        return True, f"{len(traces[0])} counter events identical"
    length = min(len(traces[0]), len(traces[1]))
    for i in range(length):
        if traces[0][i] != traces[1][i]:
            return False, f"first divergence at event {i}: {traces[0][i]} vs {traces[1][i]}"
    return False, f"trace lengths differ: {len(traces[0])} vs {len(traces[1])}"


def _epoch_delta(config: RunConfig, epoch: int) -> int:
    if config.delta_mode == "known":
        return config.delta
    return normalize_delta(max(1, 1 << epoch))


def assignment_structure_audit(records: Iterable[dict], config: RunConfig) -> list[str]:
    """Re-derive the slot structure of every counter-family and block-family
    assignment from the decision trace.

    Counter-family slots at a low endpoint must be its offset plus the
    counter value, with values strictly increasing and below 2d.  Block-
    family slots must decompose as offset + enumeration index + block
    width * prior-interval tally, with the index under the block width, the
    tally under its cap, one tally per interval, and tallies distinct across
    intervals.  Returns human-readable violations; empty means clean.
    """
    offsets: dict[tuple, int] = {}
    for r in records:
        if r["kind"] == "offset-draw":
            offsets[(r["epoch"], r["level"], r["phase"], r["d"], r["vertex"])] = r["offset"]

    violations: list[str] = []
    counter_groups: dict[tuple, list[dict]] = {}
    block_groups: dict[tuple, list[dict]] = {}
    for r in records:
        if r["kind"] != "mixed-decision":
            continue
        group = (r["epoch"], r["level"], r["phase"], r["d"], r["low"], r["index"])
        if r["case"] == "counter-assign":
            counter_groups.setdefault(group, []).append(r)
        elif r["case"] == "block-assign":
            block_groups.setdefault(group, []).append(r)

    for group, events in counter_groups.items():
        epoch, level, phase, d, low, _ = group
        size = 2 * config.kappa * d
        r_u = offsets.get((epoch, level, phase, d, low))
        if r_u is None:
            violations.append(f"counter-family at {group}: no offset draw recorded")
            continue
        last = -1
        for ev in events:
            value = ev["counter"]
            if not 0 <= value < 2 * d:
                violations.append(f"counter-family at {group}: counter {value} outside [0, {2 * d})")
            if value <= last:
                violations.append(f"counter-family at {group}: counter {value} not increasing past {last}")
            last = value
            if ev["slot"] != (r_u + value) % size:
                violations.append(
                    f"counter-family at {group}: slot {ev['slot']} != offset {r_u} + counter {value} mod {size}"
                )

    for group, events in block_groups.items():
        epoch, level, phase, d, low, _ = group
        size = 2 * config.kappa * d
        width = math.isqrt(_epoch_delta(config, epoch))
        cap = 2 * d // width
        r_u = offsets.get((epoch, level, phase, d, low))
        if r_u is None:
            violations.append(f"block-family at {group}: no offset draw recorded")
            continue
        tally_by_interval: dict[int, int] = {}
        for ev in events:
            b, prior = ev["b"], ev["prior"]
            if b >= width:
                violations.append(f"block-family at {group}: enumeration index {b} >= width {width}")
            if prior >= cap:
                violations.append(f"block-family at {group}: prior tally {prior} >= cap {cap}")
            if ev["slot"] != (r_u + b + width * prior) % size:
                violations.append(
                    f"block-family at {group}: slot {ev['slot']} != {r_u}+{b}+{width}*{prior} mod {size}"
                )
            known = tally_by_interval.get(ev["interval"])
            if known is not None and known != prior:
                violations.append(f"block-family at {group}: two tallies in interval {ev['interval']}")
            tally_by_interval[ev["interval"]] = prior
        tallies = list(tally_by_interval.values())
        if len(set(tallies)) != len(tallies):
            violations.append(f"block-family at {group}: tally reused across intervals")
    return violations


def saturated_index_audit(records: Iterable[dict], config: RunConfig) -> list[str]:
    """Check that, at every interval boundary, no vertex has more than
    delta/(2d) palette indices whose accumulated interval degree reached 2d.

    Reconstructed from the per-interval degree logs and the per-class
    interval records, so it exercises the degree bookkeeping end to end.
    """
    degs: dict[tuple[int, int, int], dict] = {}
    class_intervals: dict[tuple[int, int, int, int], list[dict]] = {}
    for r in records:
        if r["kind"] == "interval-degrees":
            degs[(r["epoch"], r["level"], r["interval"])] = r["deg"]
        elif r["kind"] == "class-interval":
            class_intervals.setdefault((r["epoch"], r["level"], r["phase"], r["d"]), []).append(r)

    violations: list[str] = []
    for (epoch, level, phase, d), events in class_intervals.items():
        delta = _epoch_delta(config, epoch)
        allowed = delta // (2 * d)
        sums: dict[tuple[int, int], int] = {}
        saturated: dict[int, set[int]] = {}
        for ev in sorted(events, key=lambda r: r["interval"]):
            deg = degs.get((epoch, level, ev["interval"]), {})
            index = ev["sigma"]
            for v, dv in deg.items():
                key = (v, index)
                total = sums.get(key, 0) + dv
                sums[key] = total
                if total >= 2 * d:
                    marks = saturated.setdefault(v, set())
                    marks.add(index)
                    if len(marks) > allowed:
                        violations.append(
                            f"class d={d} phase {phase} level {level}: vertex {v} saturated "
                            f"{len(marks)} indices, allowed {allowed}"
                        )
    return violations


# ---------------------------------------------------------------------------
# metric-level checks


def color_budget_check(metrics: RunMetrics) -> tuple[int, int, list[str]]:
    """Compare distinct emitted colors against the summed budgets of every
    palette scope that was actually touched.  Returns (used, budget,
    violations); clean runs have used <= budget and no per-scope overflow."""
    budget = sum(s.budget for s in metrics.scopes)
    violations = [
        f"scope {s.kind} e{s.epoch}.l{s.level} phase={s.phase} d={s.d} interval={s.interval}: "
        f"{s.distinct} distinct > budget {s.budget}"
        for s in metrics.scopes
        if s.distinct > s.budget
    ]
    if metrics.colors_used > budget:
        violations.append(f"{metrics.colors_used} colors used > total budget {budget}")
    return metrics.colors_used, budget, violations


@dataclass(frozen=True)
class SpaceReport:
    findings: list[str]
    peaks: dict[tuple[int, int], int]
    ratio: float | None

    @property
    def ok(self) -> bool:
        return not self.findings


def space_check(
    metrics: RunMetrics,
    n: int,
    delta: int,
    *,
    paired: RunMetrics | None = None,
    ratio_limit: float = 2.5,
) -> SpaceReport:
    """Structural space assertions plus optional paired-run scaling.

    Index-set growth needs a high-degree vertex per entry and counter
    creation needs an over-threshold degree, so both are bounded by the
    phase's edge volume.  With a paired run at doubled n, the level-0 peak
    ratio must stay under ratio_limit.
    """
    findings: list[str] = []
    for s in metrics.class_phase_stats:
        if s.index_inserts * s.d > 2 * s.phase_edges:
            findings.append(
                f"phase {s.phase} d={s.d} level {s.level}: {s.index_inserts} index inserts "
                f"exceed 2*{s.phase_edges}/{s.d}"
            )
        if s.counter_creates * s.sqrt_delta > 2 * s.phase_edges:
            findings.append(
                f"phase {s.phase} d={s.d} level {s.level}: {s.counter_creates} counter creations "
                f"exceed 2*{s.phase_edges}/{s.sqrt_delta}"
            )
    ratio: float | None = None
    if paired is not None:
        own = metrics.level0_peak()
        other = paired.level0_peak()
        if own <= 0:
            findings.append("no level-0 peak recorded for the smaller run")
        else:
            ratio = other / own
            if ratio > ratio_limit:
                findings.append(f"level-0 peak ratio {ratio:.3f} exceeds {ratio_limit}")
    return SpaceReport(findings=findings, peaks=metrics.peak_words_per_level, ratio=ratio)


@dataclass(frozen=True)
class LeftoverReport:
    runs: int
    mean: float
    ci_low: float
    ci_high: float
    threshold: float

    @property
    def ok(self) -> bool:
        return self.mean <= self.threshold


def leftover_stats(metrics_list: list[RunMetrics], kappa: int) -> LeftoverReport:
    """Mean level-0 leftover fraction across runs with a normal-theory 95%
    interval, judged against 7/kappa plus fixed slack.  Refuses fewer than
    20 runs: below that the mean is too noisy to gate on."""
    if len(metrics_list) < 20:
        raise ValueError(
            f"need at least 20 runs for a stable leftover mean, got {len(metrics_list)}"
        )
    fractions = []
    for m in metrics_list:
        if m.input_edges <= 0:
            raise ValueError("leftover fraction undefined for an empty stream")
        fractions.append(m.level0_leftover() / m.input_edges)
    mean = statistics.fmean(fractions)
    spread = statistics.stdev(fractions) if len(fractions) > 1 else 0.0
    half = 1.96 * spread / math.sqrt(len(fractions))
    return LeftoverReport(
        runs=len(fractions),
        mean=mean,
        ci_low=mean - half,
        ci_high=mean + half,
        threshold=7 / kappa + 0.05,
    )
