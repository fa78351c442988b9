"""Seeded instance sampling and coupled instance pairs."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

from . import rng as _rng
from .core import (
    DISTS,
    CoordinateSet,
    Instance,
    dumps_instance,
    instance_from_record,
)

# fixed-point precision (beyond B) used for the correlated-pair coefficients
_COEF_EXTRA_BITS = 64


def _gaussian_values(gen, n: int, scale_bits: int) -> list[int]:
    xs = gen.standard_normal(n).tolist()
    scale = 2.0**scale_bits
    out = []
    widths = []
    for x in xs:
        # width of the binary64 cell around x, in q-units; a power of two
        cell = math.ulp(x) * scale
        widths.append(int(cell) if cell >= 2 else 0)
    dither = {}
    big = [i for i, w in enumerate(widths) if w]
    if big:
        for i, u in zip(big, _dither(gen, [widths[i] for i in big])):
            dither[i] = u
    for i, x in enumerate(xs):
        w = widths[i]
        if w:
            # spread the binary64 cell uniformly over its q-grid points
            out.append(int(x * scale) + dither[i] - w // 2)
        else:
            out.append(round(x * scale))
    return out


def _dither(gen, widths: list[int]) -> list[int]:
    nbits = max(w.bit_length() - 1 for w in widths)
    raw = _rng.random_bits(gen, nbits, len(widths))
    return [r & (w - 1) for r, w in zip(raw, widths)]


def _uniform_values(gen, n: int, scale_bits: int) -> list[int]:
    half = 1 << scale_bits
    return [v - half for v in _rng.random_below(gen, 2 * half + 1, n)]


def _draw_values(dist: str, n: int, scale_bits: int, seed: int) -> list[int]:
    gen = _rng.stream(seed, "instance", dist, n, scale_bits)
    if dist == "gaussian":
        return _gaussian_values(gen, n, scale_bits)
    if dist == "uniform_pm1":
        return _uniform_values(gen, n, scale_bits)
    raise ValueError(f"unsupported dist {dist!r}; expected one of {DISTS}")


def sample_instance(n: int, dist: str, scale_bits: int, seed: int) -> Instance:
    """Draw ``n`` i.i.d. entries at scale ``2**-scale_bits``.

    ``gaussian`` draws a binary64 standard normal and fills the bits below
    binary64 resolution uniformly, so the law has a bounded density down to
    the grid.  ``uniform_pm1`` is exactly uniform on the ``2**(B+1) + 1``
    grid points of ``[-1, 1]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if scale_bits < 16:
        raise ValueError("scale_bits must be >= 16 for sampled instances")
    if dist not in DISTS:
        raise ValueError(f"unsupported dist {dist!r}; expected one of {DISTS}")
    vals = _draw_values(dist, n, scale_bits, seed)
    return Instance(n, scale_bits, tuple(vals), dist, seed & _rng.MASK64)


@dataclass(frozen=True)
class PairSample:
    g: Instance
    g_prime: Instance
    mode: str
    epsilon: float
    kept: CoordinateSet | None
    seed: int

    @property
    def differ(self) -> bool:
        return self.g.values != self.g_prime.values

    def header(self) -> dict:
        kept = None if self.kept is None else format(self.kept.members, "x")
        return {"mode": self.mode, "epsilon": self.epsilon, "kept": kept, "seed": self.seed}

    def dumps(self) -> str:
        return "\n".join(
            [json.dumps(self.header(), separators=(",", ":")), dumps_instance(self.g), dumps_instance(self.g_prime)]
        ) + "\n"

    @classmethod
    def loads(cls, text: str) -> "PairSample":
        lines = [l for l in text.splitlines() if l.strip()]
        if len(lines) != 3:
            raise ValueError("pair file needs a header and two instance records")
        head = json.loads(lines[0])
        g = instance_from_record(json.loads(lines[1]))
        gp = instance_from_record(json.loads(lines[2]))
        kept = None if head.get("kept") is None else CoordinateSet(g.n, int(head["kept"], 16))
        return cls(g, gp, head["mode"], float(head["epsilon"]), kept, int(head["seed"]))


def _check_eps(epsilon: float) -> None:
    if not 0.0 <= epsilon <= 1.0 or math.isnan(epsilon):
        raise ValueError(f"epsilon must lie in [0, 1], got {epsilon}")


def _fresh_copy(g: Instance, seed: int) -> Instance:
    dist = g.dist or "gaussian"
    child = _rng.derive_seed(seed, "fresh")
    return Instance(g.n, g.scale_bits, tuple(_draw_values(dist, g.n, g.scale_bits, child)), dist, child)


def correlated_pair(g: Instance, epsilon: float, seed: int) -> PairSample:
    """``g' = p g + sqrt(1 - p^2) g~`` with ``p = 1 - epsilon``, re-quantized to the grid.

    The coefficients are carried as integers at ``B + 64`` fractional bits and
    the result is rounded to nearest, so each entry is within about half a grid
    step of the exact combination.
    """
    _check_eps(epsilon)
    fresh = _fresh_copy(g, seed)
    k = g.scale_bits + _COEF_EXTRA_BITS
    one = 1 << k
    p = round((1 - Fraction(epsilon)) * one)
    c = math.isqrt(one * one - p * p)
    half = one >> 1
    vals = tuple((p * a + c * b + half) >> k for a, b in zip(g.values, fresh.values))
    gp = Instance(g.n, g.scale_bits, vals, g.dist, _rng.derive_seed(seed, "g_prime"))
    return PairSample(g, gp, "correlated", float(epsilon), None, seed & _rng.MASK64)


def resampled_pair(g: Instance, epsilon: float, seed: int) -> PairSample:
    """Keep each coordinate with probability ``1 - epsilon``, else redraw it.

    Redrawn entries come from ``g.dist`` (Gaussian for exact-integer instances).
    """
    _check_eps(epsilon)
    gen = _rng.stream(seed, "kept")
    p = 1.0 - epsilon
    mask = gen.random(g.n) < p
    kept = CoordinateSet.from_indices(g.n, [i for i in range(g.n) if mask[i]])
    if len(kept) == g.n:
        vals = g.values
    else:
        fresh = _fresh_copy(g, seed)
        vals = tuple(a if m else b for a, b, m in zip(g.values, fresh.values, mask))
    gp = Instance(g.n, g.scale_bits, vals, g.dist, _rng.derive_seed(seed, "g_prime"))
    return PairSample(g, gp, "resampled", float(epsilon), kept, seed & _rng.MASK64)


def make_pair(g: Instance, mode: str, epsilon: float, seed: int) -> PairSample:
    if mode == "correlated":
        return correlated_pair(g, epsilon, seed)
    if mode == "resampled":
        return resampled_pair(g, epsilon, seed)
    raise ValueError(f"unknown coupling mode {mode!r}")


def equality_prob(n: int, epsilon: float) -> float:
    """Probability that a resampled pair is identical: ``(1 - epsilon)**n``."""
    _check_eps(epsilon)
    return (1.0 - epsilon) ** n
