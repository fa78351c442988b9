"""Landscape bounds and the Monte Carlo trials that probe them."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from itertools import combinations
from typing import Callable

import numpy as np

from . import rng as _rng
from .core import MARGIN_BITS, EnergyLevel, Instance, SignVector, inner
from .errors import CapExceeded, MarginError
from .instances import make_pair, sample_instance
from .lowdeg import JuntaAlgorithm, clip, eval_junta, round_via_resampling
from .solvers import InteriorPoint, _mitm_argmin, caps, enumerate_solutions, get_solver, local_improve

WILSON_Z = 1.959963984540054


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p={p} outside [0, 1]")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p)


@dataclass(frozen=True)
class BallCount:
    exact: int
    bound: float  # 2**(n h(k/n))
    weak_bound: float  # 2**(2 n p log2(1/p))


def ball_count(n: int, k: int) -> BallCount:
    """Number of points within ``k`` flips, next to its entropy bounds."""
    if not 0 <= k <= n:
        raise ValueError("need 0 <= k <= n")
    exact = sum(math.comb(n, j) for j in range(k + 1))
    p = k / n
    weak = 1.0 if p == 0 else 2.0 ** (2 * n * p * math.log2(1 / p))
    return BallCount(exact, 2.0 ** (n * binary_entropy(p)), weak)


def eta_for(e: float, n: int, c: float = 8.0, c_prime: float = 16.0) -> float:
    """Ball-radius parameter ``E / (C' N log2(C N / E))``, certified against its entropy budget."""
    if not 1 <= e <= n:
        raise ValueError(f"need 1 <= E <= n, got E={e}, n={n}")
    eta = e / (c_prime * n * math.log2(c * n / e))
    if not 0.0 < eta < 0.5:
        raise AssertionError(f"eta={eta} outside (0, 1/2)")
    if not 2 * eta * math.log2(1 / eta) < e / (4 * n):
        raise AssertionError(f"entropy budget violated for E={e}, n={n}")
    return eta


def small_ball_bound(e: float, sigma_sq: float) -> float:
    """Upper bound ``2**(1 - E) / sqrt(2 pi sigma^2)`` on ``P(|Z| <= 2**-E)``, any mean."""
    if not sigma_sq > 0:
        raise ValueError("variance must be positive")
    return 2.0 ** (1.0 - e) / math.sqrt(2.0 * math.pi * sigma_sq)


def eps_preset(name, e: int, n: int, degree: int = 1) -> float:
    if name == "ldp":
        return 2.0 ** (-e / 2)
    if name == "lcd":
        return math.log2(n / degree) / n
    return float(name)


# --- ball searches --------------------------------------------------------------


def nearest_solution_flips(g: Instance, lvl: EnergyLevel, x: SignVector, k_max: int) -> int | None:
    """Fewest flips (``<= k_max``) taking ``x`` into ``S(E; g)``, or ``None``."""
    n = g.n
    k_max = min(k_max, n)
    if k_max > 8 and math.comb(n, k_max) > caps()["ball_work"]:
        raise CapExceeded(f"ball search C({n},{k_max}) exceeds work cap")
    T = lvl.threshold(g.scale_bits)
    s = inner(g, x)
    d = [-2 * x[i] * q for i, q in enumerate(g.values)]
    for k in range(k_max + 1):
        for c in combinations(range(n), k):
            v = s + sum(d[i] for i in c)
            if -T <= v <= T:
                return k
    return None


def _pair_prefilter(g: Instance, T: int, k: int):
    """Flip sets ``J`` (``1 <= |J| <= k``) admitting signs with ``|<g_J, x_J>| <= T``.

    Yields ``(J, min |<g_J, x_J>|)``.  A pair of solutions differing exactly on
    ``J`` forces such signs, so an empty prefilter rules out every pair.
    """
    q = g.values
    for j in range(1, min(k, g.n) + 1):
        for J in combinations(range(g.n), j):
            head, rest = q[J[0]], [q[i] for i in J[1:]]
            sums = [head]
            for v in rest:
                sums = [s + v for s in sums] + [s - v for s in sums]
            b = min(map(abs, sums))
            if b <= T:
                yield J, b


def repel_trial(g: Instance, lvl: EnergyLevel, k: int, method: str = "auto") -> bool:
    """Whether two distinct solutions lie within ``k`` flips of each other.

    ``x`` and ``x'`` differing on ``J`` split as ``a +- b`` with
    ``a = <g_Jc, x_Jc>`` and ``b = <g_J, x_J>``; both are solutions iff
    ``|a| + |b| <= T``.  ``"reduction"`` decides this per prefiltered ``J``
    with an exact minimum of ``|a|``; ``"enumerate"`` lists ``S(E; g)`` and
    checks Hamming distances directly.  ``"auto"`` prefilters, then
    enumerates for ``n <= 20`` and reduces otherwise.
    """
    T = lvl.threshold(g.scale_bits)
    if method == "enumerate":
        return _repel_enumerate(g, lvl, k)
    cands = list(_pair_prefilter(g, T, k))
    if not cands:
        return False
    if method == "auto" and g.n <= 20:
        return _repel_enumerate(g, lvl, k)
    if method not in ("auto", "reduction"):
        raise ValueError(f"unknown method {method!r}")
    for J, b in cands:
        Jset = set(J)
        rest = [v for i, v in enumerate(g.values) if i not in Jset]
        if rest and len(rest) > caps()["mitm"]:
            raise CapExceeded(f"repel_trial: complement of size {len(rest)} exceeds cap")
        a = _mitm_argmin(rest, 0)[0] if rest else 0
        if a + b <= T:
            return True
    return False


def _repel_enumerate(g: Instance, lvl: EnergyLevel, k: int) -> bool:
    sols = enumerate_solutions(g, lvl, cap=1 << 20)
    if sols.truncated:
        raise CapExceeded("repel_trial: solution set too large to enumerate")
    pts = [x.bits for x in sols] + [x.negate().bits for x in sols]
    for i in range(len(pts)):
        for j in range(i + 1, len(pts)):
            if (pts[i] ^ pts[j]).bit_count() <= k:
                return True
    return False


# --- obstruction trials ---------------------------------------------------------


@dataclass(frozen=True)
class ObstructionParams:
    n: int
    scale_bits: int
    dist: str
    energy: int
    eps: float
    eta: float
    mode: str
    solver: str
    trials: int
    seed: int

    def __post_init__(self):
        if not 0.0 < self.eta < 0.5:
            raise ValueError(f"eta={self.eta} outside (0, 1/2)")
        if self.energy + MARGIN_BITS > self.scale_bits:
            raise MarginError(f"energy {self.energy} needs scale_bits >= {self.energy + MARGIN_BITS}")
        if self.mode == "correlated" and self.energy > self.scale_bits - math.log2(self.n) - MARGIN_BITS:
            raise MarginError("correlated pairs need E <= B - log2(n) - 10")
        if self.mode not in ("correlated", "resampled"):
            raise ValueError(f"unknown coupling mode {self.mode!r}")
        if not 0.0 <= self.eps <= 1.0:
            raise ValueError("eps must lie in [0, 1]")
        get_solver(self.solver)

    @property
    def ball_flips(self) -> int:
        # ||x - x'|| <= 2 sqrt(eta n)  <=>  flips <= eta n
        return math.floor(self.eta * self.n)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    s_diff: bool
    s_solve_g: bool
    s_solve_gp: bool
    s_stable: bool
    s_cond: bool
    nearest_flips: int | None
    elapsed_ms: float = 0.0


def obstruction_trial(p: ObstructionParams, trial_index: int) -> TrialRecord:
    t0 = time.perf_counter()
    solve = get_solver(p.solver)
    lvl = EnergyLevel(p.energy)
    T = lvl.threshold(p.scale_bits)
    g = sample_instance(p.n, p.dist, p.scale_bits, _rng.derive_seed(p.seed, trial_index, "g"))
    x = solve(g).x
    pair = make_pair(g, p.mode, p.eps, _rng.derive_seed(p.seed, trial_index, "pair"))
    gp = pair.g_prime
    xp = solve(gp).x
    nearest = nearest_solution_flips(gp, lvl, x, p.ball_flips)
    return TrialRecord(
        trial=trial_index,
        s_diff=pair.differ,
        s_solve_g=abs(inner(g, x)) <= T,
        s_solve_gp=abs(inner(gp, xp)) <= T,
        s_stable=x.hamming(xp) <= p.ball_flips,
        s_cond=nearest is None,
        nearest_flips=nearest,
        elapsed_ms=(time.perf_counter() - t0) * 1e3,
    )


def obstruction_log2_leading(e: float, eta: float, n: int) -> float:
    """``-E + 2 eta log2(1/eta) N``: the bound's exponent without its constant."""
    return -e + 2 * eta * math.log2(1 / eta) * n


# --- rounding trials ------------------------------------------------------------


@dataclass(frozen=True)
class RoundingRecord:
    trial: int
    tilde_in_s: bool
    hat_in_s: bool
    star_in_s: bool
    resampled: int


def rounding_hardness_trial(A: JuntaAlgorithm, g: Instance, lvl: EnergyLevel, r: float, seed: int,
                            trial: int = 0) -> RoundingRecord:
    T = lvl.threshold(g.scale_bits)
    y = eval_junta(A, g)
    z = clip(y)
    tilde, count = round_via_resampling(z, seed)
    hat = local_improve(g, y, r)
    star = SignVector.from_signs(np.where(z > 0, 1, -1).tolist())
    return RoundingRecord(
        trial=trial,
        tilde_in_s=abs(inner(g, tilde)) <= T,
        hat_in_s=not isinstance(hat, InteriorPoint) and hat.disc_q <= T,
        star_in_s=abs(inner(g, star)) <= T,
        resampled=count,
    )


# --- aggregation ----------------------------------------------------------------


@dataclass(frozen=True)
class EstimateCI:
    successes: int
    trials: int
    point: float
    lo: float
    hi: float

    def to_json(self) -> dict:
        return {"successes": self.successes, "trials": self.trials, "point": self.point, "lo": self.lo, "hi": self.hi}


def wilson(successes: int, trials: int, z: float = WILSON_Z) -> EstimateCI:
    if trials < 1:
        raise ValueError("empty sample")
    if not 0 <= successes <= trials:
        raise ValueError("successes outside [0, trials]")
    p = successes / trials
    z2 = z * z
    den = 1 + z2 / trials
    center = (p + z2 / (2 * trials)) / den
    half = z / den * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
    return EstimateCI(successes, trials, p, max(0.0, min(p, center - half)), min(1.0, max(p, center + half)))


Selector = Callable[[object], bool]


def selector(spec) -> Selector:
    """Field name (``"s_cond"``), negated name (``"not s_cond"``), or a callable."""
    if callable(spec):
        return spec
    neg = spec.startswith("not ")
    name = spec[4:] if neg else spec
    return (lambda r: not getattr(r, name)) if neg else (lambda r: bool(getattr(r, name)))


def aggregate(records, event, condition=None) -> EstimateCI:
    """Wilson estimate of ``P(event | condition)`` over the records."""
    ev = selector(event)
    cond = selector(condition) if condition is not None else (lambda r: True)
    pool = [r for r in records if cond(r)]
    if not pool:
        raise ValueError("no records satisfy the condition")
    return wilson(sum(1 for r in pool if ev(r)), len(pool))


def implied_constant(freq: float, log2_leading: float) -> float:
    """``log2(freq) - log2_leading``; ``-inf`` when nothing was observed."""
    return -math.inf if freq <= 0 else math.log2(freq) - log2_leading
