"""Core domain types shared by every stage of the streaming colorer.

Vertices are dense non-negative integers below a declared count.  Colors are
structured names rather than pre-allocated integers: a color is identified by
where it was minted (epoch, recursion level, phase, degree class, palette
family, palette index, slot), and two colors are equal exactly when every
coordinate matches.  Palette disjointness is therefore a construction
property, and a color exists only once an edge actually receives it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "ColorFormatError",
    "ColorId",
    "Edge",
    "EngineInvariantError",
    "FAMILIES",
    "KIND_BASE",
    "KIND_LOW",
    "RunConfig",
    "StreamInputError",
    "decode_color",
    "encode_color",
    "normalize_delta",
    "resolve_config",
]


class StreamInputError(ValueError):
    """Stream input or configuration violates the declared contract."""


class ColorFormatError(ValueError):
    """A color string cannot be parsed back into a ColorId."""


class EngineInvariantError(RuntimeError):
    """An internal engine invariant broke; this is a bug, not bad input."""


KIND_BASE = "BASE"
KIND_LOW = "LOW"
FAMILIES = ("A", "B", "C")
_KINDS = frozenset((KIND_BASE, KIND_LOW, *FAMILIES))


@dataclass(frozen=True)
class Edge:
    """One arrival event: an endpoint pair plus its position in the stream.

    The seq value is the edge instance's identity; parallel edges share
    endpoints but never a seq.  Deferred edges keep their original seq all
    the way down the recursion, so conservation can be checked on exact
    (u, v, seq) triples.
    """

    u: int
    v: int
    seq: int


@dataclass(frozen=True)
class ColorId:
    """A structured color name.

    kind selects the namespace: BASE for the whole-buffer base case, LOW for
    per-interval fresh palettes (the under-threshold bucket, the baseline,
    and the depth-cap fallback), and A/B/C for the three per-class palette
    families.  Fields not used by a kind stay None.
    """

    epoch: int
    level: int
    kind: str
    slot: int
    phase: int | None = None
    interval: int | None = None
    d: int | None = None
    index: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown color kind {self.kind!r}")
        if self.epoch < 0 or self.level < 0 or self.slot < 0:
            raise ValueError("epoch, level, and slot must be non-negative")
        if self.kind == KIND_BASE:
            if (self.phase, self.interval, self.d, self.index) != (None, None, None, None):
                raise ValueError("base colors carry no phase/interval/class fields")
        elif self.kind == KIND_LOW:
            if self.phase is None or self.interval is None:
                raise ValueError("interval colors need phase and interval")
            if self.d is not None or self.index is not None:
                raise ValueError("interval colors carry no class fields")
        else:
            if self.phase is None or self.d is None or self.index is None:
                raise ValueError("palette-family colors need phase, class, and index")
            if self.interval is not None:
                raise ValueError("palette-family colors carry no interval field")
            if self.index < 1:
                raise ValueError("palette index is 1-based")

    @classmethod
    def base(cls, epoch: int, level: int, slot: int) -> ColorId:
        return cls(epoch, level, KIND_BASE, slot)

    @classmethod
    def low(cls, epoch: int, level: int, phase: int, interval: int, slot: int) -> ColorId:
        return cls(epoch, level, KIND_LOW, slot, phase=phase, interval=interval)

    @classmethod
    def palette(
        cls, epoch: int, level: int, phase: int, d: int, family: str, index: int, slot: int
    ) -> ColorId:
        return cls(epoch, level, family, slot, phase=phase, d=d, index=index)


def encode_color(color: ColorId) -> str:
    """Render a ColorId as its canonical dotted string."""
    head = f"E{color.epoch}.L{color.level}"
    if color.kind == KIND_BASE:
        return f"{head}.BASE.{color.slot}"
    if color.kind == KIND_LOW:
        return f"{head}.P{color.phase}.I{color.interval}.LOW.{color.slot}"
    return f"{head}.P{color.phase}.D{color.d}.{color.kind}{color.index}.{color.slot}"


_FAMILY_TOKEN = re.compile(r"([ABC])([0-9]+)\Z")


def _plain(token: str, field: str) -> int:
    if not token.isdigit():
        raise ColorFormatError(f"field {field!r}: expected a decimal integer, got {token!r}")
    return int(token)


def _tagged(token: str, tag: str, field: str) -> int:
    if not token.startswith(tag) or not token[len(tag) :].isdigit():
        raise ColorFormatError(f"field {field!r}: expected {tag}<int>, got {token!r}")
    return int(token[len(tag) :])


def decode_color(text: str) -> ColorId:
    """Parse a canonical color string; inverse of encode_color."""
    parts = text.split(".")
    if len(parts) < 4:
        raise ColorFormatError(f"color {text!r}: too few fields")
    epoch = _tagged(parts[0], "E", "epoch")
    level = _tagged(parts[1], "L", "level")
    tag = parts[2]
    if tag == KIND_BASE:
        if len(parts) != 4:
            raise ColorFormatError(f"color {text!r}: base colors have exactly one trailing slot field")
        return ColorId.base(epoch, level, _plain(parts[3], "slot"))
    if not tag.startswith("P"):
        raise ColorFormatError(f"field 'kind': expected BASE or P<phase>..., got {tag!r}")
    phase = _tagged(tag, "P", "phase")
    if len(parts) != 6:
        raise ColorFormatError(f"color {text!r}: interval and palette colors have six fields")
    selector = parts[3]
    if selector.startswith("I"):
        interval = _tagged(selector, "I", "interval")
        if parts[4] != KIND_LOW:
            raise ColorFormatError(f"field 'kind': expected LOW after an interval field, got {parts[4]!r}")
        return ColorId.low(epoch, level, phase, interval, _plain(parts[5], "slot"))
    if selector.startswith("D"):
        d = _tagged(selector, "D", "class")
        match = _FAMILY_TOKEN.fullmatch(parts[4])
        if match is None:
            raise ColorFormatError(f"field 'family': expected A/B/C plus an index, got {parts[4]!r}")
        return ColorId.palette(epoch, level, phase, d, match.group(1), int(match.group(2)), _plain(parts[5], "slot"))
    raise ColorFormatError(f"field 'scope': expected I<interval> or D<class>, got {selector!r}")


def normalize_delta(raw: int) -> int:
    """Round a degree bound up to the next power of four.

    Keeps the class threshold (the square root) a power of two, so degree
    classes, block widths, and the per-index cap all come out integral.
    """
    if raw < 1:
        raise StreamInputError(f"degree bound must be >= 1, got {raw}")
    value = 1
    while value < raw:
        value <<= 2
    return value


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run parameters.

    delta is already normalized.  sigma_seed and offset_seed default to the
    master seed; they exist so the two randomness consumers (per-interval
    palette indices and per-vertex slot offsets) can be re-seeded apart,
    which the independence check relies on.
    """

    n: int
    delta: int
    kappa: int
    interval_size: int
    phase_len: int
    max_depth: int
    seed: int
    delta_mode: str = "known"
    sigma_seed: int | None = None
    offset_seed: int | None = None

    @property
    def sqrt_delta(self) -> int:
        return math.isqrt(self.delta)


def _resolve_interval_size(n: int, factor: str | float | int | None) -> int:
    if factor is None:
        return n
    if isinstance(factor, str):
        if factor == "logn":
            return max(1, math.ceil(n * math.log2(max(n, 2))))
        try:
            factor = float(factor)
        except ValueError:
            raise StreamInputError(f"interval factor must be 1, 'logn', or a float, got {factor!r}") from None
    if factor <= 0:
        raise StreamInputError(f"interval factor must be positive, got {factor}")
    return max(1, math.ceil(n * float(factor)))


def resolve_config(
    *,
    n: int,
    delta: int,
    kappa: int = 32,
    seed: int = 0,
    m: int | None = None,
    interval_size: int | None = None,
    interval_factor: str | float | int | None = None,
    phase_len: int | None = None,
    max_depth: int | None = None,
    delta_mode: str = "known",
    sigma_seed: int | None = None,
    offset_seed: int | None = None,
) -> RunConfig:
    """Validate raw parameters and fill in every default."""
    if n < 1:
        raise StreamInputError(f"vertex count must be >= 1, got {n}")
    if kappa < 32 or kappa & (kappa - 1):
        raise StreamInputError(f"kappa must be a power of two >= 32, got {kappa}")
    if delta_mode not in ("known", "unknown"):
        raise StreamInputError(f"delta mode must be 'known' or 'unknown', got {delta_mode!r}")
    norm = normalize_delta(delta)
    if interval_size is None:
        interval_size = _resolve_interval_size(n, interval_factor)
    if interval_size < 1:
        raise StreamInputError(f"interval size must be >= 1, got {interval_size}")
    if phase_len is None:
        phase_len = math.isqrt(norm)
    if phase_len < 1:
        raise StreamInputError(f"phase length must be >= 1, got {phase_len}")
    if max_depth is None:
        max_depth = 4 * (max(m, 2) - 1).bit_length() + 10 if m is not None else 64
    if max_depth < 0:
        raise StreamInputError(f"recursion depth cap must be >= 0, got {max_depth}")
    return RunConfig(
        n=n,
        delta=norm,
        kappa=kappa,
        interval_size=interval_size,
        phase_len=phase_len,
        max_depth=max_depth,
        seed=seed & 0xFFFFFFFFFFFFFFFF,
        delta_mode=delta_mode,
        sigma_seed=sigma_seed,
        offset_seed=offset_seed,
    )
