"""Partitioning algorithms: exact search, counting, heuristics, local improvement.

Exact solvers fix ``x_0 = +1`` (energy is antipodally symmetric) and enumerate
the remaining ``m = n - 1`` signs in reflected Gray order: state ``t`` has
pattern ``t ^ (t >> 1)``, and bit ``j`` of the pattern set means coordinate
``j + 1`` is ``-1``.
"""

from __future__ import annotations

import heapq
import math
import os
import time
from bisect import bisect_left, bisect_right
from dataclasses import dataclass

import numpy as np

from .core import (
    CoordinateSet,
    EnergyLevel,
    Instance,
    SignVector,
    energy_of,
    inner,
    restrict,
)
from .errors import CapExceeded
from .lowdeg import clip

# default enumeration limits; NPPLAB_CAP_BITS replaces them (see caps())
BF_MAX_N = 34
ENUM_MAX_N = 30
MITM_MAX_N = 44
# brute force switches from the full Gray scan to the MITM argmin above this n
GRAY_SCAN_MAX_N = 22
_BLOCK_BITS = 14


def caps() -> dict:
    """Current enumeration caps.

    With ``NPPLAB_CAP_BITS=b`` set, every table may hold ``2**b`` states:
    brute force and solution listing allow ``n - 1 <= b``, meet-in-the-middle
    allows ``ceil(n / 2) <= b``, and ball searches allow ``2**b`` candidates.
    """
    raw = os.environ.get("NPPLAB_CAP_BITS")
    if raw is None:
        return {"bf": BF_MAX_N, "enum": ENUM_MAX_N, "mitm": MITM_MAX_N, "ball_work": 10**7}
    b = int(raw)
    return {"bf": b + 1, "enum": b + 1, "mitm": 2 * b, "ball_work": 2**b}


@dataclass(frozen=True)
class SolveResult:
    x: SignVector
    disc_q: int
    energy: float
    work: int
    elapsed: float

    def to_json(self) -> dict:
        return {
            "x": str(self.x),
            "disc_q": format(self.disc_q, "x"),
            "energy": "inf" if math.isinf(self.energy) else self.energy,
            "work": self.work,
            "elapsed": self.elapsed,
        }


@dataclass(frozen=True)
class InteriorPoint:
    """Local improvement found no corner in the ball; ``z`` is the clipped point."""

    z: np.ndarray


class SolutionList(list):
    """Canonical-half solutions; ``truncated`` is set when the cap cut the listing."""

    truncated: bool = False


def _result(g: Instance, x: SignVector, work: int, t0: float) -> SolveResult:
    s = inner(g, x)
    return SolveResult(x, abs(s), energy_of(s, g.scale_bits), work, time.perf_counter() - t0)


# --- Gray-code scanning -------------------------------------------------------


def _gray(t: int) -> int:
    return t ^ (t >> 1)


def _gray_rank(pattern: int) -> int:
    t = pattern
    pattern >>= 1
    while pattern:
        t ^= pattern
        pattern >>= 1
    return t


def _subset_deltas(qs: list[int]) -> list[int]:
    """``d[P] = -2 * sum(q_j for bits j of P)`` for every pattern ``P``."""
    d = [0]
    for q in qs:
        tq = 2 * q
        d += [v - tq for v in d]
    return d


def _gray_low_table(qs: list[int]) -> list[int]:
    """Sign-flip deltas of the low coordinates, listed in Gray order."""
    d = _subset_deltas(qs)
    return [d[_gray(l)] for l in range(len(d))]


def _pattern_to_x(n: int, pattern: int) -> SignVector:
    m = n - 1
    return SignVector(n, 1 | ((~pattern & ((1 << m) - 1)) << 1))


def _gray_blocks(g: Instance):
    """Yield ``(t0, sums)``: inner products of states ``t0 .. t0+len-1`` in Gray order.

    Low bits are a precomputed Gray table (reversed in odd blocks, as the
    reflected code prescribes); the high part is advanced by one coordinate
    flip per block.
    """
    q = g.values
    n = g.n
    m = n - 1
    s0 = sum(q)
    L = min(m, _BLOCK_BITS)
    low = _gray_low_table(list(q[1 : L + 1]))
    low_rev = low[::-1]
    size = 1 << L
    high_q = q[L + 1 :]
    high_sign = [1] * len(high_q)
    h = 0
    for b in range(1 << (m - L)):
        if b:
            j = (b & -b).bit_length() - 1
            h -= 2 * high_sign[j] * high_q[j]
            high_sign[j] = -high_sign[j]
        base = s0 + h
        seq = low_rev if b & 1 else low
        yield b * size, [base + d for d in seq]


def _check_cap(n: int, key: str, label: str) -> None:
    cap = caps()[key]
    if n > cap:
        raise CapExceeded(f"{label}: n={n} exceeds cap {cap}")


def brute_force(g: Instance, method: str = "auto") -> SolveResult:
    """Exact minimum discrepancy; ties resolve to the first state in Gray order.

    ``method="gray"`` visits all ``2**(n-1)`` states; ``"mitm"`` finds the same
    argmin from sorted half-sums (used automatically above ``GRAY_SCAN_MAX_N``).
    """
    t0 = time.perf_counter()
    _check_cap(g.n, "bf", "brute_force")
    if method == "auto":
        method = "gray" if g.n <= GRAY_SCAN_MAX_N else "mitm"
    if g.n == 1:
        return _result(g, SignVector.all_plus(1), 1, t0)
    if method == "mitm":
        _, pattern, work = _mitm_argmin(list(g.values[1:]), g.values[0])
        return _result(g, _pattern_to_x(g.n, pattern), work, t0)
    if method != "gray":
        raise ValueError(f"unknown method {method!r}")
    best = None
    best_t = 0
    work = 0
    for start, sums in _gray_blocks(g):
        work += len(sums)
        a = min(map(abs, sums))
        if best is None or a < best:
            best = a
            idx = [i for i in (_index(sums, a), _index(sums, -a)) if i is not None]
            best_t = start + min(idx)
            if a == 0:
                break
    return _result(g, _pattern_to_x(g.n, _gray(best_t)), work, t0)


def _index(seq: list[int], v: int):
    try:
        return seq.index(v)
    except ValueError:
        return None


def _mitm_argmin(qs: list[int], offset: int) -> tuple[int, int, int]:
    """Minimize ``|offset + sum(±q)|`` over all sign patterns of ``qs``.

    Returns ``(min_abs, pattern, work)``; ``pattern`` bit ``j`` set means
    ``q_j`` enters with ``-``.  Among ties the pattern of lowest Gray rank wins.
    """
    m = len(qs)
    if m == 0:
        return abs(offset), 0, 1
    L = m // 2
    s0 = offset + sum(qs)
    dl = _subset_deltas(qs[:L])
    dh = _subset_deltas(qs[L:])
    order = sorted(range(len(dl)), key=dl.__getitem__)
    svals = [dl[i] for i in order]
    best = None
    for d in dh:
        target = -(s0 + d)
        k = bisect_left(svals, target)
        for j in (k - 1, k):
            if 0 <= j < len(svals):
                a = abs(svals[j] - target)
                if best is None or a < best:
                    best = a
    ties = []
    for ph, d in enumerate(dh):
        target = -(s0 + d)
        for v in {target - best, target + best}:
            lo = bisect_left(svals, v)
            hi = bisect_right(svals, v)
            ties.extend(order[j] | (ph << L) for j in range(lo, hi))
    pattern = min(ties, key=_gray_rank)
    return best, pattern, len(dl) + len(dh)


def mitm_optimum(g: Instance) -> SolveResult:
    return brute_force(g, method="mitm")


def enumerate_solutions(g: Instance, lvl: EnergyLevel, cap: int) -> SolutionList:
    """All ``x`` in ``S(E; g)`` with ``x_0 = +1``, in Gray order, at most ``cap`` of them."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    _check_cap(g.n, "enum", "enumerate_solutions")
    T = lvl.threshold(g.scale_bits)
    out = SolutionList()
    if g.n == 1:
        if abs(g.values[0]) <= T:
            out.append(SignVector.all_plus(1))
        return out
    for start, sums in _gray_blocks(g):
        hits = [i for i, v in enumerate(sums) if -T <= v <= T]
        for i in hits:
            if len(out) == cap:
                out.truncated = True
                return out
            out.append(_pattern_to_x(g.n, _gray(start + i)))
    return out


def count_solutions_mitm(g: Instance, lvl: EnergyLevel) -> int:
    """Exact ``|S(E; g)|`` (both antipodes) by a two-pointer sweep over sorted half-sums."""
    n = g.n
    _check_cap(n, "mitm", "count_solutions_mitm")
    T = lvl.threshold(g.scale_bits)
    h = n // 2
    left = _half_sums(g.values[:h])
    right = _half_sums(g.values[h:])
    left.sort()
    right.sort()
    total = 0
    lo = hi = len(right)
    # as a grows, the window [-T - a, T - a] slides left
    for a in left:
        while lo > 0 and right[lo - 1] >= -T - a:
            lo -= 1
        while hi > 0 and right[hi - 1] > T - a:
            hi -= 1
        if hi > lo:
            total += hi - lo
    return total


def _half_sums(qs) -> list[int]:
    sums = [0]
    for q in qs:
        sums = [s + q for s in sums] + [s - q for s in sums]
    return sums


# --- heuristics ---------------------------------------------------------------


def _sign(v: int) -> int:
    return 1 if v > 0 else -1


def greedy_adjacent(g: Instance) -> SolveResult:
    """Pair neighbours in the magnitude ordering, then place the pair differences greedily."""
    t0 = time.perf_counter()
    q = g.values
    order = sorted(range(g.n), key=lambda i: -abs(q[i]))
    # each unit is (difference, coordinate with + orientation, coordinate with - orientation)
    units = []
    for j in range(0, g.n - 1, 2):
        a, b = order[j], order[j + 1]
        units.append((abs(q[a]) - abs(q[b]), a, b))
    if g.n % 2:
        units.append((abs(q[order[-1]]), order[-1], None))
    units.sort(key=lambda u: -u[0])
    signs = [1] * g.n
    total = 0
    for d, a, b in units:
        side = -1 if total > 0 else 1
        total += side * d
        signs[a] = side * _sign(q[a])
        if b is not None:
            signs[b] = -side * _sign(q[b])
    return _result(g, SignVector.from_signs(signs), g.n, t0)


def karmarkar_karp(g: Instance) -> SolveResult:
    """Largest differencing method with constraint-forest two-colouring."""
    t0 = time.perf_counter()
    heap = [(-abs(v), i, i) for i, v in enumerate(g.values)]
    heapq.heapify(heap)
    counter = g.n
    adj: list[list[int]] = [[] for _ in range(g.n)]
    while len(heap) > 1:
        a, _, u = heapq.heappop(heap)
        b, _, v = heapq.heappop(heap)
        adj[u].append(v)
        adj[v].append(u)
        heapq.heappush(heap, (a - b, counter, u))
        counter += 1
    color = [0] * g.n
    color[0] = 1
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not color[v]:
                color[v] = -color[u]
                stack.append(v)
    x = SignVector.from_signs(c * _sign(v) for c, v in zip(color, g.values))
    res = _result(g, x, g.n - 1, t0)
    assert res.disc_q == -heap[0][0], "KK reconstruction mismatch"
    return res


def restricted_hybrid(g: Instance, j_size: int) -> SolveResult:
    """KK on all but the first ``j_size`` coordinates, exact search over those."""
    t0 = time.perf_counter()
    if not 4 <= j_size <= min(g.n, 30):
        raise ValueError(f"j_size={j_size} outside [4, min(n, 30)]")
    J = CoordinateSet.from_indices(g.n, range(j_size))
    rest = J.complement()
    if len(rest):
        xr = karmarkar_karp(restrict(g, rest)).x
        rest_signs = xr.signs()[j_size:]
    else:
        rest_signs = []
    c = sum(s * v for s, v in zip(rest_signs, g.values[j_size:]))
    _, pattern, work = _mitm_argmin(list(g.values[:j_size]), c)
    head = [-1 if pattern >> j & 1 else 1 for j in range(j_size)]
    return _result(g, SignVector.from_signs(head + rest_signs), work + g.n, t0)


# --- local improvement ----------------------------------------------------------


def ball_corners(z: np.ndarray, r: float):
    """Yield ``(bits, sq_dist)`` for every corner strictly within distance ``r`` of ``z``.

    Coordinates are visited by increasing cost of taking the farther sign, and
    a branch is cut once its squared distance (with the cheapest choice for
    every undecided coordinate) reaches ``r**2``.
    """
    n = len(z)
    near = [1 if v > 0 else -1 for v in z]
    base = float(sum((v - s) ** 2 for v, s in zip(z, near)))
    r2 = r * r
    if base >= r2:
        return
    extra = [(v + s) ** 2 - (v - s) ** 2 for v, s in zip(z, near)]
    order = sorted(range(n), key=lambda i: (extra[i], i))
    costs = [extra[i] for i in order]
    near_bits = sum(1 << i for i in range(n) if near[i] > 0)

    def rec(k: int, acc: float, flips: int):
        yield near_bits ^ flips, acc
        for j in range(k, n):
            c = acc + costs[j]
            if c >= r2:
                break
            yield from rec(j + 1, c, flips | (1 << order[j]))

    yield from rec(0, base, 0)


def local_improve(g: Instance, y, r: float):
    """Best corner of the open ball ``B(clip(y), r)``, or ``InteriorPoint`` if it holds none.

    Ties in ``|<g, x>|`` go to the lexicographically smallest sign sequence
    (``-1 < +1``, coordinate 0 most significant).
    """
    t0 = time.perf_counter()
    z = clip(y)
    if len(z) != g.n:
        raise ValueError(f"y has length {len(z)}, instance has n={g.n}")
    if r < 0:
        raise ValueError("r must be nonnegative")
    best = None
    work = 0
    for bits, _ in ball_corners(z, r):
        work += 1
        x = SignVector(g.n, bits)
        key = (abs(inner(g, x)), _lex_key(x))
        if best is None or key < best[0]:
            best = (key, x)
    if best is None:
        return InteriorPoint(z)
    return _result(g, best[1], work, t0)


def _lex_key(x: SignVector) -> int:
    # reverse bit order so coordinate 0 is the most significant
    return int(format(x.bits, f"0{x.n}b")[::-1], 2)


# --- named solvers --------------------------------------------------------------


def _improve_kk(r: float):
    def run(g: Instance) -> SolveResult:
        start = karmarkar_karp(g)
        res = local_improve(g, start.x.to_array(), r)
        return start if isinstance(res, InteriorPoint) else res

    return run


def get_solver(name: str):
    """Solver callable for a CLI name: bf, mitm, greedy, kk, hybrid:<j>, improve:<r>.

    ``improve:<r>`` searches the radius-``r`` ball around the Karmarkar-Karp output.
    """
    simple = {"bf": brute_force, "mitm": mitm_optimum, "greedy": greedy_adjacent, "kk": karmarkar_karp}
    if name in simple:
        return simple[name]
    head, _, arg = name.partition(":")
    try:
        if head == "hybrid" and arg:
            j = int(arg)
            if j < 4:
                raise ValueError
            return lambda g: restricted_hybrid(g, j)
        if head == "improve" and arg:
            r = float(arg)
            if not r >= 0 or math.isinf(r):
                raise ValueError
            return _improve_kk(r)
    except ValueError:
        pass
    raise ValueError(f"unknown solver {name!r}")

