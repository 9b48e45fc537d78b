"""One recursion level's interval buffering, degree classification, phase
bookkeeping, and low-bucket coloring.

Edges are buffered until an interval fills, then the interval subgraph is
split by max endpoint degree: edges below the square-root threshold get a
fresh per-interval palette, the rest are routed to their degree class.
Classes keep per-phase state; a phase ends after phase_len intervals and
discards everything it held.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from math import isqrt

from .audit import ClassPhaseStat, MeterHandle, MetricsCollector, TraceRecorder
from .class_colorer import ClassState, step1_high_high, step2_high_low
from .model import ColorId, Edge, EngineInvariantError, RunConfig, StreamInputError
from .primitives import RandomSource, greedy_edge_color

__all__ = [
    "ClassBucket",
    "ClassifiedInterval",
    "IntervalSnapshot",
    "PhaseEngine",
    "classify_interval",
    "compute_degrees",
    "degree_classes",
]

Emissions = list[tuple[Edge, ColorId]]


def compute_degrees(edges: list[Edge]) -> dict[int, int]:
    deg: Counter[int] = Counter()
    for e in edges:
        deg[e.u] += 1
        deg[e.v] += 1
    return dict(deg)


@dataclass(frozen=True)
class IntervalSnapshot:
    """A full or final-partial interval buffer with its subgraph degrees."""

    index: int
    edges: list[Edge]
    deg: dict[int, int]

    @classmethod
    def collect(cls, index: int, edges: list[Edge]) -> IntervalSnapshot:
        return cls(index=index, edges=list(edges), deg=compute_degrees(edges))


@dataclass
class ClassBucket:
    d: int
    h1: list[Edge] = field(default_factory=list)  # both endpoints in [d, 2d)
    h2: list[Edge] = field(default_factory=list)  # one endpoint in [d, 2d), other < d


@dataclass
class ClassifiedInterval:
    low_bucket: list[Edge]
    per_class: dict[int, ClassBucket]


def degree_classes(delta: int) -> list[int]:
    """All power-of-two classes between the square-root threshold and delta."""
    root = isqrt(delta)
    return [root << k for k in range((delta // root).bit_length())]


def classify_interval(snapshot: IntervalSnapshot, delta: int) -> ClassifiedInterval:
    """Split an interval's edges by max endpoint degree.

    Below the square-root threshold an edge joins the shared low bucket;
    otherwise its class is the power of two d with the max endpoint degree
    in [d, 2d).  Degrees above delta break the input contract.
    """
    root = isqrt(delta)
    out = ClassifiedInterval(low_bucket=[], per_class={})
    for e in snapshot.edges:
        top = max(snapshot.deg[e.u], snapshot.deg[e.v])
        if top > delta:
            raise StreamInputError(
                f"interval degree {top} exceeds the configured bound {delta}"
            )
        if top < root:
            out.low_bucket.append(e)
            continue
        d = 1 << (top.bit_length() - 1)
        bucket = out.per_class.get(d)
        if bucket is None:
            bucket = out.per_class[d] = ClassBucket(d=d)
        both = min(snapshot.deg[e.u], snapshot.deg[e.v]) >= d
        (bucket.h1 if both else bucket.h2).append(e)
    return out


class PhaseEngine:
    """Drives one recursion level: ingest, interval processing, phase turns.

    The caller owns the recursion; this engine only reports leftovers.
    """

    def __init__(
        self,
        config: RunConfig,
        *,
        epoch: int,
        level: int,
        sigma_source: RandomSource,
        offset_source: RandomSource,
        meter: MeterHandle,
        collector: MetricsCollector,
        trace: TraceRecorder | None = None,
    ) -> None:
        self.config = config
        self.epoch = epoch
        self.level = level
        self._sigma = sigma_source
        self._offset = offset_source
        self._meter = meter
        self._collector = collector
        self._trace = trace
        self._buffer: list[Edge] = []
        self.interval_index = 0
        self._phase: int | None = None
        self._states: dict[int, ClassState] = {}
        self._phase_edges = 0

    @property
    def buffered(self) -> int:
        return len(self._buffer)

    def ingest(self, e: Edge) -> tuple[Emissions, list[Edge]]:
        if e.u == e.v:
            raise StreamInputError(f"self-loop at vertex {e.u} (seq {e.seq})")
        for x in (e.u, e.v):
            if not 0 <= x < self.config.n:
                raise StreamInputError(
                    f"vertex {x} outside [0, {self.config.n}) (seq {e.seq})"
                )
        self._buffer.append(e)
        self._meter.add("buffer", 1)
        if len(self._buffer) >= self.config.interval_size:
            return self._process_interval()
        return [], []

    def flush(self) -> tuple[Emissions, list[Edge]]:
        """Process the final partial interval, if any."""
        if self._buffer:
            return self._process_interval()
        return [], []

    def drain_buffer(self) -> list[Edge]:
        """Hand the untouched buffer back to the caller (base-case path)."""
        edges = self._buffer
        self._meter.add("buffer", -len(edges))
        self._buffer = []
        return edges

    def close(self) -> None:
        if self._phase is not None:
            self._end_phase()

    # -- internals ----------------------------------------------------------

    def _start_phase(self, phase: int) -> None:
        self._phase = phase
        self._phase_edges = 0
        self._collector.note_phase(self.epoch, self.level)
        cfg = self.config
        self._states = {
            d: ClassState(
                epoch=self.epoch,
                level=self.level,
                phase=phase,
                d=d,
                delta=cfg.delta,
                kappa=cfg.kappa,
                sigma_source=self._sigma.child("p", phase, "d", d),
                offset_source=self._offset.child("p", phase, "d", d),
                meter=self._meter,
                trace=self._trace,
            )
            for d in degree_classes(cfg.delta)
        }

    def _end_phase(self) -> None:
        assert self._phase is not None
        for d, state in sorted(self._states.items()):
            self._collector.note_class_phase(
                ClassPhaseStat(
                    epoch=self.epoch,
                    level=self.level,
                    phase=self._phase,
                    d=d,
                    sqrt_delta=self.config.sqrt_delta,
                    index_inserts=state.index_inserts,
                    counter_creates=state.counter_creates,
                    phase_edges=self._phase_edges,
                )
            )
            state.release()
        self._states = {}
        self._phase = None

    def _high_by_class(self, deg: dict[int, int]) -> dict[int, set[int]]:
        root = self.config.sqrt_delta
        out: dict[int, set[int]] = {}
        for v, dv in deg.items():
            if dv >= root:
                out.setdefault(1 << (dv.bit_length() - 1), set()).add(v)
        return out

    def _process_interval(self) -> tuple[Emissions, list[Edge]]:
        cfg = self.config
        index = self.interval_index
        phase = index // cfg.phase_len
        if self._phase is None:
            self._start_phase(phase)
        assert self._phase == phase

        snapshot = IntervalSnapshot.collect(index, self._buffer)
        self._meter.add("buffer", -len(self._buffer))
        self._buffer = []
        if self._trace is not None:
            self._trace.emit(
                "interval-degrees",
                epoch=self.epoch,
                level=self.level,
                interval=index,
                deg=dict(snapshot.deg),
            )
        self._collector.note_interval(self.epoch, self.level)

        classified = classify_interval(snapshot, cfg.delta)
        high_by_class = self._high_by_class(snapshot.deg)

        emissions: Emissions = []
        leftovers: list[Edge] = []

        low_palette = [
            ColorId.low(self.epoch, self.level, phase, index, s)
            for s in range(2 * cfg.sqrt_delta - 1)
        ]
        low_bound = max(compute_degrees(classified.low_bucket).values(), default=0)
        low_scope = ("low", self.epoch, self.level, index)
        for e, color in greedy_edge_color(classified.low_bucket, low_bound, low_palette).items():
            emissions.append((e, color))
            self._collector.note_emission(low_scope, len(low_palette), color)

        empty = ClassBucket(d=0)
        for d, state in sorted(self._states.items()):
            bucket = classified.per_class.get(d, empty)
            state.begin_interval(index)
            high = high_by_class.get(d, set())
            em1, left1, usable = step1_high_high(bucket.h1, bucket.h2, high, state)
            em2, left2 = step2_high_low(bucket.h2, usable, high, snapshot.deg, state)
            state.end_interval()
            scope = ("class", self.epoch, self.level, phase, d)
            budget = 3 * state.palette_count * state.palette_size
            for e, color in em1 + em2:
                emissions.append((e, color))
                self._collector.note_emission(scope, budget, color)
            leftovers.extend(left1)
            leftovers.extend(left2)

        leftovers.sort(key=lambda e: e.seq)
        self._collector.note_leftovers(self.epoch, self.level, len(leftovers))

        seen = {e.seq for e, _ in emissions} | {e.seq for e in leftovers}
        expect = {e.seq for e in snapshot.edges}
        if seen != expect or len(emissions) + len(leftovers) != len(snapshot.edges):
            raise EngineInvariantError(
                f"interval {index} at level {self.level}: "
                f"{len(emissions)} colored + {len(leftovers)} deferred "
                f"!= {len(snapshot.edges)} buffered"
            )

        self._phase_edges += len(snapshot.edges)
        self.interval_index = index + 1
        if self.interval_index % cfg.phase_len == 0:
            self._end_phase()
        return emissions, leftovers
