"""Exact fixed-point model of number-partitioning instances.

An instance holds integers ``q_i`` standing for ``g_i = q_i * 2**-B``. Python
integers are arbitrary precision, so inner products never overflow and every
comparison against a solution threshold is an exact integer comparison.
Indices are 0-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, MarginError

DISTS = ("gaussian", "uniform_pm1")
MARGIN_BITS = 10
# |q_i| < 2**(B + SUPPORT_BITS)
SUPPORT_BITS = 8


@dataclass(frozen=True)
class Instance:
    """NPP input at fixed-point scale ``2**-scale_bits``.

    ``dist`` is ``None`` for hand-written exact-integer instances; those carry
    no quantization error, so the energy margin rule is not applied to them.
    """

    n: int
    scale_bits: int
    values: tuple[int, ...]
    dist: str | None = None
    seed: int = 0

    def __post_init__(self):
        values = tuple(int(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if self.n < 1 or len(values) != self.n:
            raise DimensionMismatch(f"expected {self.n} values, got {len(values)}")
        if self.scale_bits < 0:
            raise ValueError("scale_bits must be nonnegative")
        if self.dist is not None and self.dist not in DISTS:
            raise ValueError(f"unsupported dist {self.dist!r}")
        limit = 1 << (self.scale_bits + SUPPORT_BITS)
        if any(abs(v) >= limit for v in values):
            raise ValueError(f"value outside support |q| < 2**{self.scale_bits + SUPPORT_BITS}")

    @classmethod
    def from_ints(cls, values: Sequence[int], scale_bits: int = 0) -> "Instance":
        return cls(len(values), scale_bits, tuple(values))

    def as_float(self) -> np.ndarray:
        return np.array([math.ldexp(v, -self.scale_bits) for v in self.values])

    @property
    def total(self) -> int:
        return sum(abs(v) for v in self.values)


@dataclass(frozen=True)
class SignVector:
    """Point of the hypercube; bit ``i`` set means ``x_i = +1``."""

    n: int
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.n:
            raise ValueError("padding bits must be zero")

    @classmethod
    def from_signs(cls, signs: Iterable) -> "SignVector":
        bits = 0
        n = 0
        for i, s in enumerate(signs):
            if s > 0:
                bits |= 1 << i
            n = i + 1
        return cls(n, bits)

    @classmethod
    def all_plus(cls, n: int) -> "SignVector":
        return cls(n, (1 << n) - 1)

    def __getitem__(self, i: int) -> int:
        return 1 if self.bits >> i & 1 else -1

    def __len__(self) -> int:
        return self.n

    def signs(self) -> list[int]:
        return [1 if self.bits >> i & 1 else -1 for i in range(self.n)]

    def to_array(self) -> np.ndarray:
        return np.array(self.signs(), dtype=np.int8)

    def negate(self) -> "SignVector":
        return SignVector(self.n, self.bits ^ ((1 << self.n) - 1))

    def flip(self, i: int) -> "SignVector":
        if not 0 <= i < self.n:
            raise IndexError(i)
        return SignVector(self.n, self.bits ^ (1 << i))

    def hamming(self, other: "SignVector") -> int:
        _same_n(self.n, other.n)
        return (self.bits ^ other.bits).bit_count()

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" for s in self.signs())


@dataclass(frozen=True)
class EnergyLevel:
    """Solution threshold ``2**-e``; in q-units ``2**(B - e)``."""

    e: int

    def threshold(self, scale_bits: int) -> int:
        # for integer s, |s| <= 2**(B-e) iff |s| <= floor(2**(B-e))
        d = scale_bits - self.e
        return 1 << d if d >= 0 else 0

    def check_margin(self, g: Instance) -> None:
        if g.dist is not None and self.e + MARGIN_BITS > g.scale_bits:
            raise MarginError(
                f"energy {self.e} needs scale_bits >= {self.e + MARGIN_BITS}, got {g.scale_bits}"
            )


@dataclass(frozen=True)
class CoordinateSet:
    n: int
    members: int = field(default=0)

    def __post_init__(self):
        if self.members < 0 or self.members >> self.n:
            raise ValueError("members outside [0, n)")

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "CoordinateSet":
        m = 0
        for i in indices:
            if not 0 <= i < n:
                raise ValueError(f"index {i} outside [0, {n})")
            m |= 1 << i
        return cls(n, m)

    @classmethod
    def full(cls, n: int) -> "CoordinateSet":
        return cls(n, (1 << n) - 1)

    def complement(self) -> "CoordinateSet":
        return CoordinateSet(self.n, self.members ^ ((1 << self.n) - 1))

    def __contains__(self, i: int) -> bool:
        return bool(self.members >> i & 1)

    def __len__(self) -> int:
        return self.members.bit_count()

    def indices(self) -> list[int]:
        return [i for i in range(self.n) if self.members >> i & 1]


def _same_n(a: int, b: int) -> None:
    if a != b:
        raise DimensionMismatch(f"dimension mismatch: {a} != {b}")


def inner(g: Instance, x: SignVector) -> int:
    """Exact ``sum_i x_i q_i``; ``<g, x> = inner * 2**-B``."""
    _same_n(g.n, x.n)
    bits = x.bits
    s = 0
    for i, q in enumerate(g.values):
        if bits >> i & 1:
            s += q
        else:
            s -= q
    return s


def energy_of(s: int, scale_bits: int) -> float:
    """``B - log2|s|`` in binary64, ``inf`` for a perfect partition."""
    a = abs(s)
    if a == 0:
        return math.inf
    e = a.bit_length() - 1
    return scale_bits - (e + math.log2(a / (1 << e)))


def energy(g: Instance, x: SignVector) -> float:
    return energy_of(inner(g, x), g.scale_bits)


def is_solution(g: Instance, x: SignVector, lvl: EnergyLevel) -> bool:
    lvl.check_margin(g)
    return abs(inner(g, x)) <= lvl.threshold(g.scale_bits)


def flip_delta(g: Instance, s: int, x: SignVector, i: int) -> int:
    """Inner product after flipping coordinate ``i`` of ``x``, given ``s = inner(g, x)``."""
    _same_n(g.n, x.n)
    if not 0 <= i < g.n:
        raise IndexError(f"coordinate {i} outside [0, {g.n})")
    return s - 2 * x[i] * g.values[i]


def restrict(g: Instance, S: CoordinateSet) -> Instance:
    """Zero every coordinate outside ``S``."""
    _same_n(g.n, S.n)
    vals = tuple(v if S.members >> i & 1 else 0 for i, v in enumerate(g.values))
    return Instance(g.n, g.scale_bits, vals, g.dist, g.seed)


# --- JSON Lines ---------------------------------------------------------------


def hex_width(scale_bits: int) -> int:
    """Number of hex digits in the two's-complement encoding of one value."""
    return -(-(scale_bits + SUPPORT_BITS + 1) // 4)


def encode_value(v: int, scale_bits: int) -> str:
    w = hex_width(scale_bits)
    return format(v & ((1 << (4 * w)) - 1), f"0{w}x")


def decode_value(h: str, scale_bits: int) -> int:
    w = hex_width(scale_bits)
    if len(h) != w:
        raise ValueError(f"hex value {h!r} must have {w} digits")
    v = int(h, 16)
    if v >> (4 * w - 1):
        v -= 1 << (4 * w)
    return v


def instance_to_record(g: Instance) -> dict:
    return {
        "n": g.n,
        "scale_bits": g.scale_bits,
        "dist": g.dist,
        "seed": g.seed,
        "values": [encode_value(v, g.scale_bits) for v in g.values],
    }


def instance_from_record(rec: dict) -> Instance:
    try:
        b = int(rec["scale_bits"])
        vals = tuple(decode_value(h, b) for h in rec["values"])
        return Instance(int(rec["n"]), b, vals, rec.get("dist"), int(rec.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed instance record: {exc}") from exc


def dumps_instance(g: Instance) -> str:
    return json.dumps(instance_to_record(g), separators=(",", ":"))


def loads_instances(text: str) -> list[Instance]:
    out = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(instance_from_record(json.loads(line)))
        except (ValueError, json.JSONDecodeError) as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return out
