"""Low-level machinery shared across the engine.

First-fit multigraph edge coloring inside a bounded palette, modular slot
arithmetic, the circular offset-distance rule, the per-interval conflict
window, and deterministic label-scoped randomness.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass

from .model import ColorId, Edge, EngineInvariantError

__all__ = [
    "PaletteWindow",
    "RandomSource",
    "first_fit_slots",
    "gap_check",
    "greedy_edge_color",
    "greedy_slot_assign",
    "mod_slot",
]

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def mod_slot(base: int, offset: int, size: int) -> int:
    """Slot index `offset` positions after `base` on a circular palette."""
    if size < 1:
        raise EngineInvariantError(f"palette size must be positive, got {size}")
    return (base + offset) % size


def gap_check(r_u: int, r_v: int, d: int, size: int) -> bool:
    """True when two vertex offsets sit circularly too close to coexist.

    r_u belongs to the low endpoint, r_v to the high one.  The edge must be
    deferred when the clockwise distance from r_u to r_v is under 2d or over
    size - 2d; otherwise each endpoint's working range of 2d slots stays
    disjoint from the other's.  The outcome is symmetric in the two offsets.
    """
    gap = (r_v - r_u) % size
    return gap < 2 * d or gap > size - 2 * d


def first_fit_slots(edges: list[Edge], slot_limit: int) -> dict[Edge, int]:
    """Assign each edge, in the given order, the lowest slot free at both
    endpoints.  Running out of slots is an internal invariant violation:
    callers size the limit at 2D - 1 or better for max degree D.
    """
    used: dict[int, set[int]] = {}
    out: dict[Edge, int] = {}
    for e in edges:
        taken_u = used.setdefault(e.u, set())
        taken_v = used.setdefault(e.v, set())
        slot = 0
        while slot in taken_u or slot in taken_v:
            slot += 1
        if slot >= slot_limit:
            raise EngineInvariantError(
                f"palette exhausted: edge ({e.u},{e.v},{e.seq}) needs slot {slot} of {slot_limit}"
            )
        out[e] = slot
        taken_u.add(slot)
        taken_v.add(slot)
    return out


def greedy_slot_assign(edges: list[Edge], slot_limit: int) -> dict[Edge, int]:
    """first_fit_slots over edges in ascending arrival order."""
    return first_fit_slots(sorted(edges, key=lambda e: e.seq), slot_limit)


def greedy_edge_color(
    edges: list[Edge], degree_bound: int, palette: list[ColorId]
) -> dict[Edge, ColorId]:
    """Properly color a multigraph with first-fit over an explicit palette.

    Requires len(palette) >= 2 * degree_bound - 1, which guarantees a free
    entry always exists; at most 2D - 1 distinct entries are ever used.
    """
    if degree_bound >= 1 and len(palette) < 2 * degree_bound - 1:
        raise ValueError(
            f"palette of {len(palette)} entries cannot cover degree bound {degree_bound}"
        )
    slots = greedy_slot_assign(edges, len(palette))
    return {e: palette[s] for e, s in slots.items()}


class PaletteWindow:
    """Slots already handed out at high-degree anchor vertices during the
    current interval, keyed (anchor, family, slot).  Cleared on the interval
    boundary: later intervals are protected by index sets and counters, not
    by this window.
    """

    __slots__ = ("_used",)

    def __init__(self) -> None:
        self._used: set[tuple[int, str, int]] = set()

    def taken(self, anchor: int, family: str, slot: int) -> bool:
        return (anchor, family, slot) in self._used

    def record(self, anchor: int, family: str, slot: int) -> None:
        self._used.add((anchor, family, slot))

    def clear(self) -> int:
        released = len(self._used)
        self._used.clear()
        return released

    def __len__(self) -> int:
        return len(self._used)


@dataclass(frozen=True)
class RandomSource:
    """Deterministic randomness scoped by a label path.

    Draws depend only on (seed, path): equal seed and path always replay the
    same stream, and distinct paths behave as independent streams.  The
    engine hangs palette-index draws and offset draws off sibling scopes so
    either can be re-seeded without disturbing the other.
    """

    seed: int
    path: tuple[str, ...] = ()

    def child(self, *labels: object) -> RandomSource:
        return RandomSource(self.seed, self.path + tuple(str(x) for x in labels))

    def rng(self) -> random.Random:
        digest = hashlib.blake2b(
            "/".join(self.path).encode("utf-8"),
            digest_size=8,
            key=(self.seed & _SEED_MASK).to_bytes(8, "little"),
        ).digest()
        return random.Random(int.from_bytes(digest, "little"))

    def randrange(self, stop: int) -> int:
        return self.rng().randrange(stop)
