"""Reproducible degree-bounded multigraph generation, adversarial stream
orderings, and the text file formats for streams and colored output.

Stream file: `wse v1 <n> <delta> <m>` header, then one `<u> <v>` line per
edge.  Colored file: `<u> <v> <seq> <color>` per emission.  Both formats
are whitespace-separated decimal text so runs diff cleanly.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import IO, Iterable, Iterator

from .model import ColorId, Edge, StreamInputError, decode_color, encode_color

__all__ = [
    "ORDER_POLICIES",
    "StreamFormatError",
    "StreamHeader",
    "colored_line",
    "gen_multigraph",
    "order_stream",
    "read_colored",
    "read_stream",
    "write_colored",
    "write_stream",
]

MAGIC = "wse"
VERSION = "v1"

ORDER_POLICIES = ("arrival-random", "vertex-sorted", "degree-burst")


class StreamFormatError(StreamInputError):
    """A stream or colored file failed to parse; message carries the line."""


@dataclass(frozen=True)
class StreamHeader:
    n: int
    delta: int
    m: int


def gen_multigraph(
    n: int, delta: int, m: int, *, allow_parallel: bool = True, seed: int = 0
) -> list[Edge]:
    """Random degree-bounded multigraph via rejection sampling.

    Uniform endpoint pairs, rejecting self-loops, saturated endpoints, and
    (optionally) repeated pairs.  Degree caps can strand capacity on one
    vertex near the m = n*delta/2 ceiling, so sampling gives up after a
    generous attempt budget instead of spinning forever.
    """
    if n < 1:
        raise StreamInputError(f"vertex count must be >= 1, got {n}")
    if m < 0:
        raise StreamInputError(f"edge count must be >= 0, got {m}")
    if delta < 0:
        raise StreamInputError(f"degree bound must be >= 0, got {delta}")
    if m > n * delta // 2:
        raise StreamInputError(
            f"{m} edges cannot fit {n} vertices of degree at most {delta}"
        )
    if m > 0 and n < 2:
        raise StreamInputError("need at least 2 vertices for loop-free edges")

    rng = random.Random(seed)
    deg = [0] * n
    used: set[tuple[int, int]] = set()
    edges: list[Edge] = []
    attempts = 0
    budget = 1000 * m + 100_000
    while len(edges) < m:
        attempts += 1
        if attempts > budget:
            raise StreamInputError(
                f"gave up after {budget} attempts with {len(edges)}/{m} edges placed; "
                "the degree bound is too tight for rejection sampling"
            )
        u = rng.randrange(n)
        v = rng.randrange(n)
        if u == v or deg[u] >= delta or deg[v] >= delta:
            continue
        pair = (min(u, v), max(u, v))
        if not allow_parallel and pair in used:
            continue
        used.add(pair)
        deg[u] += 1
        deg[v] += 1
        edges.append(Edge(u, v, len(edges)))
    return edges


def order_stream(edges: list[Edge], policy: str, seed: int = 0) -> list[Edge]:
    """Permute a stream and re-sequence it by the new positions.

    arrival-random shuffles uniformly; vertex-sorted sorts by normalized
    endpoints; degree-burst emits each vertex's edges contiguously, highest
    total degree first, so one interval keeps hammering the same vertex.
    Only arrival-random consumes the seed.
    """
    if policy == "arrival-random":
        out = list(edges)
        random.Random(seed).shuffle(out)
    elif policy == "vertex-sorted":
        out = sorted(edges, key=lambda e: (min(e.u, e.v), max(e.u, e.v), e.seq))
    elif policy == "degree-burst":
        deg: dict[int, int] = {}
        for e in edges:
            deg[e.u] = deg.get(e.u, 0) + 1
            deg[e.v] = deg.get(e.v, 0) + 1
        def owner(e: Edge) -> int:
            return max(e.u, e.v, key=lambda x: (deg[x], x))
        groups: dict[int, list[Edge]] = {}
        for e in edges:
            groups.setdefault(owner(e), []).append(e)
        out = []
        for o in sorted(groups, key=lambda x: (-deg[x], x)):
            out.extend(groups[o])
    else:
        raise StreamInputError(
            f"unknown order policy {policy!r}; choose one of {', '.join(ORDER_POLICIES)}"
        )
    return [Edge(e.u, e.v, i) for i, e in enumerate(out)]


# ---------------------------------------------------------------------------
# file formats


def write_stream(fh: IO[str], n: int, delta: int, edges: list[Edge]) -> None:
    fh.write(f"{MAGIC} {VERSION} {n} {delta} {len(edges)}\n")
    for e in edges:
        fh.write(f"{e.u} {e.v}\n")


def _header_error(line: str) -> StreamFormatError:
    return StreamFormatError(
        f"line 1: expected header '{MAGIC} {VERSION} <n> <delta> <m>', got {line!r}"
    )


def read_stream(fh: IO[str]) -> tuple[StreamHeader, Iterator[Edge]]:
    """Parse the header eagerly and the body lazily, one line at a time."""
    first = fh.readline()
    parts = first.split()
    if len(parts) != 5 or parts[0] != MAGIC or parts[1] != VERSION:
        raise _header_error(first.rstrip("\n"))
    try:
        n, delta, m = int(parts[2]), int(parts[3]), int(parts[4])
    except ValueError:
        raise _header_error(first.rstrip("\n")) from None
    if n < 1 or delta < 0 or m < 0:
        raise _header_error(first.rstrip("\n"))
    header = StreamHeader(n=n, delta=delta, m=m)

    def body() -> Iterator[Edge]:
        count = 0
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.split()
            if len(fields) != 2:
                raise StreamFormatError(f"line {lineno}: expected '<u> <v>', got {line.rstrip()!r}")
            try:
                u, v = int(fields[0]), int(fields[1])
            except ValueError:
                raise StreamFormatError(
                    f"line {lineno}: endpoints must be integers, got {line.rstrip()!r}"
                ) from None
            for x in (u, v):
                if not 0 <= x < n:
                    raise StreamFormatError(f"line {lineno}: vertex {x} outside [0, {n})")
            if count >= m:
                raise StreamFormatError(f"line {lineno}: more than the declared {m} edges")
            yield Edge(u, v, count)
            count += 1
        if count != m:
            raise StreamFormatError(f"stream ended after {count} of {m} declared edges")

    return header, body()


def colored_line(e: Edge, color: ColorId) -> str:
    return f"{e.u} {e.v} {e.seq} {encode_color(color)}\n"


def write_colored(fh: IO[str], emissions: Iterable[tuple[Edge, ColorId]]) -> None:
    for e, color in emissions:
        fh.write(colored_line(e, color))


def read_colored(fh: IO[str]) -> list[tuple[Edge, ColorId]]:
    out: list[tuple[Edge, ColorId]] = []
    for lineno, line in enumerate(fh, start=1):
        if not line.strip():
            continue
        fields = line.split()
        if len(fields) != 4:
            raise StreamFormatError(
                f"line {lineno}: expected '<u> <v> <seq> <color>', got {line.rstrip()!r}"
            )
        try:
            u, v, seq = int(fields[0]), int(fields[1]), int(fields[2])
        except ValueError:
            raise StreamFormatError(
                f"line {lineno}: endpoints and seq must be integers, got {line.rstrip()!r}"
            ) from None
        try:
            color = decode_color(fields[3])
        except ValueError as err:
            raise StreamFormatError(f"line {lineno}: {err}") from None
        out.append((Edge(u, v, seq), color))
    return out
