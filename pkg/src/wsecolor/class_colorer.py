"""Per-(phase, degree-class) coloring state and the two assignment steps.

A degree class d owns three color families (A for edges between two high
vertices, B and C for high-low edges), each split into palette_count
indexed palettes of palette_size slots.  One palette index is drawn per
interval; per-vertex random slot offsets, sparse per-(vertex, index)
counters, and per-index prior-interval tallies decide which slot an edge
gets or whether it is deferred to the next recursion level.
"""

from __future__ import annotations

from math import isqrt

from .audit import MeterHandle, TraceRecorder
from .model import ColorId, Edge
from .primitives import PaletteWindow, RandomSource, first_fit_slots, gap_check, mod_slot

__all__ = ["ClassState", "step1_high_high", "step2_high_low"]


class ClassState:
    """Mutable state of one degree class within one phase.

    Offsets are drawn lazily per vertex and fixed for the phase; index sets
    remember which palette indices already colored edges at a vertex;
    counters exist only for (vertex, index) pairs that crossed the degree
    threshold; prior tallies count earlier intervals per index.  The window
    tracks slots taken at high vertices within the current interval only.
    """

    def __init__(
        self,
        *,
        epoch: int,
        level: int,
        phase: int,
        d: int,
        delta: int,
        kappa: int,
        sigma_source: RandomSource,
        offset_source: RandomSource,
        meter: MeterHandle | None = None,
        trace: TraceRecorder | None = None,
    ) -> None:
        self.epoch = epoch
        self.level = level
        self.phase = phase
        self.d = d
        self.delta = delta
        self.kappa = kappa
        self.palette_size = 2 * kappa * d
        self.palette_count = kappa * delta // d
        self.block_width = isqrt(delta)
        self.prior_cap = 2 * d // self.block_width
        self.counter_cap = 2 * d
        self._sigma_source = sigma_source
        self._offset_source = offset_source
        self._meter = meter
        self._trace = trace
        self.offsets: dict[int, int] = {}
        self.index_sets: dict[int, set[int]] = {}
        self.counters: dict[tuple[int, int], int] = {}
        self.prior_counts: dict[int, int] = {}
        self.window = PaletteWindow()
        self.sigma: int | None = None
        self.interval: int | None = None
        self.index_inserts = 0
        self.counter_creates = 0

    # -- bookkeeping helpers ------------------------------------------------

    def _emit(self, kind: str, **fields: object) -> None:
        if self._trace is not None:
            self._trace.emit(
                kind, epoch=self.epoch, level=self.level, phase=self.phase, d=self.d, **fields
            )

    def _count(self, category: str, amount: int) -> None:
        if self._meter is not None:
            self._meter.add(category, amount)

    def offset_of(self, v: int) -> int:
        r = self.offsets.get(v)
        if r is None:
            r = self._offset_source.child("v", v).randrange(self.palette_size)
            self.offsets[v] = r
            self._count("offsets", 1)
            self._emit("offset-draw", vertex=v, offset=r)
        return r

    def begin_interval(self, interval: int) -> int:
        self.interval = interval
        self.sigma = self._sigma_source.child("i", interval).randrange(self.palette_count) + 1
        self._emit(
            "class-interval",
            interval=interval,
            sigma=self.sigma,
            prior=self.prior_counts.get(self.sigma, 0),
        )
        return self.sigma

    def prior(self) -> int:
        assert self.sigma is not None
        return self.prior_counts.get(self.sigma, 0)

    def index_fresh(self, v: int) -> bool:
        return self.sigma not in self.index_sets.get(v, ())

    def mark_index_used(self, v: int) -> None:
        used = self.index_sets.setdefault(v, set())
        if self.sigma not in used:
            used.add(self.sigma)
            self._count("index_sets", 1)
            self.index_inserts += 1

    def init_counter(self, u: int) -> None:
        key = (u, self.sigma)
        if key not in self.counters:
            self.counters[key] = 0
            self._count("counters", 1)
            self.counter_creates += 1
            self._emit("counter-init", interval=self.interval, vertex=u, index=self.sigma)

    def counter_of(self, u: int) -> int | None:
        return self.counters.get((u, self.sigma))

    def bump_counter(self, u: int, *, assigned: bool) -> None:
        # Runs after every enumerated high-low edge, deferred or not; the
        # counter's trajectory must depend only on the stream and the index
        # draws, never on the offsets.
        key = (u, self.sigma)
        value = self.counters.get(key)
        if value is None:
            return
        self.counters[key] = value + 1
        self._emit(
            "counter-bump",
            interval=self.interval,
            vertex=u,
            index=self.sigma,
            value=value + 1,
            assigned=assigned,
        )

    def record_slot(self, anchor: int, family: str, slot: int) -> None:
        self.window.record(anchor, family, slot)
        self._count("window", 1)

    def end_interval(self) -> None:
        assert self.sigma is not None
        if self.sigma not in self.prior_counts:
            self._count("prior_counts", 1)
        self.prior_counts[self.sigma] = self.prior_counts.get(self.sigma, 0) + 1
        self._count("window", -self.window.clear())
        self.sigma = None
        self.interval = None

    def release(self) -> None:
        """Phase end: hand every tracked word back to the meter."""
        self._count("offsets", -len(self.offsets))
        self._count("index_sets", -sum(len(s) for s in self.index_sets.values()))
        self._count("counters", -len(self.counters))
        self._count("prior_counts", -len(self.prior_counts))
        self._count("window", -self.window.clear())
        self.offsets.clear()
        self.index_sets.clear()
        self.counters.clear()
        self.prior_counts.clear()

    def color(self, family: str, slot: int) -> ColorId:
        assert self.sigma is not None
        return ColorId.palette(
            self.epoch, self.level, self.phase, self.d, family, self.sigma, slot
        )


def step1_high_high(
    h1: list[Edge], h2: list[Edge], high: set[int], state: ClassState
) -> tuple[list[tuple[Edge, ColorId]], list[Edge], set[int]]:
    """Color the high-high edges among vertices whose current palette index
    is unused, and defer everything touching the rest.

    U is the set of high vertices that have not seen this interval's index
    before.  The sub-multigraph induced on U is first-fit colored from the
    A family; every class edge (high-high or high-low) incident on a high
    vertex outside U is deferred wholesale.  Afterwards the index is marked
    used at every high vertex, so a repeat draw exiles the vertex next time.
    """
    usable = {v for v in high if state.index_fresh(v)}
    kept = [e for e in h1 if e.u in usable and e.v in usable]
    assignments = first_fit_slots(kept, state.palette_size)
    emissions: list[tuple[Edge, ColorId]] = []
    for e in kept:
        slot = assignments[e]
        emissions.append((e, state.color("A", slot)))
        state._emit(
            "high-assign", interval=state.interval, u=e.u, v=e.v, seq=e.seq, slot=slot
        )

    leftovers: list[Edge] = []

    def exile(e: Edge) -> None:
        leftovers.append(e)
        state._emit("exile", interval=state.interval, u=e.u, v=e.v, seq=e.seq)

    for e in h1:
        if e.u not in usable or e.v not in usable:
            exile(e)
    for e in h2:
        if (e.u in high and e.u not in usable) or (e.v in high and e.v not in usable):
            exile(e)
    for v in high:
        state.mark_index_used(v)
    return emissions, leftovers, usable


def step2_high_low(
    h2: list[Edge],
    usable: set[int],
    high: set[int],
    deg: dict[int, int],
    state: ClassState,
) -> tuple[list[tuple[Edge, ColorId]], list[Edge]]:
    """Color the high-low edges of the interval from the B and C families.

    Low endpoints are visited in ascending id.  A low endpoint whose
    interval degree exceeds the block width gets a counter for the current
    index (created at zero if absent).  Its edges are enumerated in a fixed
    order; each one either stays behind a deferral rule or lands on a slot
    derived from the low endpoint's offset.  Counter holders walk their
    slots consecutively (C family); the rest pack into per-interval blocks
    shifted by the prior-interval tally (B family).  Counters advance on
    every enumerated edge, assigned or not.
    """
    per_low: dict[int, list[Edge]] = {}
    for e in h2:
        low, _ = _split(e, high)
        per_low.setdefault(low, []).append(e)

    emissions: list[tuple[Edge, ColorId]] = []
    leftovers: list[Edge] = []
    size = state.palette_size

    def decide(e: Edge, low: int, hi: int, b: int, case: str, **fields: object) -> None:
        state._emit(
            "mixed-decision",
            interval=state.interval,
            index=state.sigma,
            low=low,
            high=hi,
            seq=e.seq,
            b=b,
            case=case,
            **fields,
        )

    for u in sorted(per_low):
        edges = sorted(per_low[u], key=lambda e: (_split(e, high)[1], e.seq))
        if deg[u] > state.block_width:
            state.init_counter(u)
        for b, e in enumerate(edges):
            _, v = _split(e, high)
            assigned = False
            if v not in usable:
                # already deferred by step 1; enumerate it anyway so the
                # counter keeps pace with the edge order
                decide(e, u, v, b, "skip-exiled")
            elif gap_check(state.offset_of(u), state.offset_of(v), state.d, size):
                leftovers.append(e)
                decide(e, u, v, b, "gap-leftover")
            else:
                counter = state.counter_of(u)
                r_u = state.offset_of(u)
                if counter is not None and counter >= state.counter_cap:
                    leftovers.append(e)
                    decide(e, u, v, b, "cap-leftover", counter=counter)
                elif counter is not None:
                    slot = mod_slot(r_u, counter, size)
                    if state.window.taken(v, "C", slot):
                        leftovers.append(e)
                        decide(e, u, v, b, "counter-conflict", counter=counter, slot=slot)
                    else:
                        emissions.append((e, state.color("C", slot)))
                        state.record_slot(v, "C", slot)
                        assigned = True
                        decide(e, u, v, b, "counter-assign", counter=counter, slot=slot)
                elif state.prior() >= state.prior_cap:
                    leftovers.append(e)
                    decide(e, u, v, b, "index-cap-leftover", prior=state.prior())
                else:
                    offset = b + state.block_width * state.prior()
                    assert offset < state.counter_cap  # b < block width when no counter exists
                    slot = mod_slot(r_u, offset, size)
                    if state.window.taken(v, "B", slot):
                        leftovers.append(e)
                        decide(e, u, v, b, "block-conflict", prior=state.prior(), slot=slot)
                    else:
                        emissions.append((e, state.color("B", slot)))
                        state.record_slot(v, "B", slot)
                        assigned = True
                        decide(e, u, v, b, "block-assign", prior=state.prior(), slot=slot)
            state.bump_counter(u, assigned=assigned)
    return emissions, leftovers


def _split(e: Edge, high: set[int]) -> tuple[int, int]:
    """Return (low endpoint, high endpoint) of a high-low edge."""
    if e.u in high:
        return e.v, e.u
    return e.u, e.v
