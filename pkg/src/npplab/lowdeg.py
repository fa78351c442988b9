"""Low coordinate degree algorithms (juntas), stability measurement, and rounding."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from .core import Instance, SignVector
from .errors import DimensionMismatch
from .instances import make_pair, sample_instance

KINDS = ("sign_product", "table")


@dataclass(frozen=True)
class JuntaAlgorithm:
    """Output ``i`` is a function of the signs of ``g`` on ``blocks[i]`` only.

    ``sign_product`` outputs the product of those signs; ``table`` looks the
    sign pattern up in ``tables[i]``, indexed by the bits ``sign(g_b) > 0`` of
    the block members in block order (first member = bit 0).
    """

    n: int
    degree: int
    blocks: tuple[tuple[int, ...], ...]
    kind: str = "sign_product"
    tables: tuple[tuple[float, ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "blocks", tuple(tuple(int(i) for i in b) for b in self.blocks))
        if self.kind not in KINDS:
            raise ValueError(f"unknown junta kind {self.kind!r}")
        if len(self.blocks) != self.n:
            raise DimensionMismatch(f"need {self.n} blocks, got {len(self.blocks)}")
        for b in self.blocks:
            if len(b) > self.degree:
                raise ValueError(f"block {b} larger than degree {self.degree}")
            if len(set(b)) != len(b) or any(not 0 <= i < self.n for i in b):
                raise ValueError(f"block {b} has repeated or out-of-range indices")
        if self.kind == "table":
            if self.tables is None or len(self.tables) != self.n:
                raise ValueError("table junta needs one table per output")
            tabs = tuple(tuple(float(v) for v in t) for t in self.tables)
            for b, t in zip(self.blocks, tabs):
                if len(t) != 1 << len(b) or not all(math.isfinite(v) for v in t):
                    raise ValueError(f"table for block {b} must hold {1 << len(b)} finite reals")
            object.__setattr__(self, "tables", tabs)

    @classmethod
    def sliding(cls, n: int, degree: int) -> "JuntaAlgorithm":
        """Sign products over cyclic windows ``{i, ..., i + degree - 1}``."""
        return cls(n, degree, tuple(tuple((i + k) % n for k in range(degree)) for i in range(n)))

    def to_json(self) -> str:
        d = {"n": self.n, "degree": self.degree, "kind": self.kind, "blocks": [list(b) for b in self.blocks]}
        if self.tables is not None:
            d["tables"] = [list(t) for t in self.tables]
        return json.dumps(d)

    @classmethod
    def from_dict(cls, d: dict) -> "JuntaAlgorithm":
        tables = d.get("tables")
        return cls(int(d["n"]), int(d["degree"]), tuple(tuple(b) for b in d["blocks"]), d.get("kind", "sign_product"),
                   None if tables is None else tuple(tuple(t) for t in tables))

    @classmethod
    def from_json(cls, text: str) -> "JuntaAlgorithm":
        return cls.from_dict(json.loads(text))


def _positive(g) -> np.ndarray:
    """Boolean array ``g > 0``; works for instances and (batched) real arrays."""
    if isinstance(g, Instance):
        return np.array([v > 0 for v in g.values])
    return np.asarray(g) > 0


def eval_junta(A: JuntaAlgorithm, g) -> np.ndarray:
    """Evaluate ``A`` on an instance, a length-``n`` array, or a ``(trials, n)`` batch."""
    pos = _positive(g)
    if pos.shape[-1] != A.n:
        raise DimensionMismatch(f"junta has n={A.n}, input has {pos.shape[-1]}")
    out = np.empty(pos.shape, dtype=float)
    for i, b in enumerate(A.blocks):
        sub = pos[..., list(b)]
        if A.kind == "sign_product":
            # product of signs is -1 iff an odd number of them are -1
            out[..., i] = np.where((~sub).sum(axis=-1) % 2 == 1, -1.0, 1.0)
        else:
            idx = (sub.astype(np.int64) << np.arange(len(b))).sum(axis=-1)
            out[..., i] = np.asarray(A.tables[i])[idx]
    return out


def stability_trial(A: JuntaAlgorithm, eps: float, mode: str, seed: int, scale_bits: int = 64):
    """One coupled pair: returns ``(||A(g) - A(g')||^2, <A(g), A(g')>)``."""
    g = sample_instance(A.n, "gaussian", scale_bits, _rng.derive_seed(seed, "g"))
    pair = make_pair(g, mode, eps, _rng.derive_seed(seed, "pair"))
    a = eval_junta(A, pair.g)
    b = eval_junta(A, pair.g_prime)
    return float(np.sum((a - b) ** 2)), float(a @ b)


def stability_bound(c_norm: float, d: int, eps: float, n: int) -> float:
    """Mean squared displacement bound ``2 C D eps N``."""
    if min(c_norm, d, eps, n) < 0:
        raise ValueError("arguments must be nonnegative")
    return 2.0 * c_norm * d * eps * n


@dataclass(frozen=True)
class MeanCI:
    mean: float
    sigma: float  # standard error of the mean

    @property
    def lo(self) -> float:
        return self.mean - 1.96 * self.sigma

    @property
    def hi(self) -> float:
        return self.mean + 1.96 * self.sigma


@dataclass(frozen=True)
class StabilityReport:
    eps: float
    mode: str
    trials: int
    mean_sq_dist: MeanCI
    mean_inner: MeanCI
    bound_14: float
    c_norm: float


def _mean_ci(samples: np.ndarray) -> MeanCI:
    # pairwise (numpy) summation over a fixed chunk layout: schedule independent
    m = float(np.mean(samples))
    s = float(np.std(samples, ddof=1) / math.sqrt(len(samples))) if len(samples) > 1 else math.inf
    return MeanCI(m, s)


def _batch_pair(n: int, eps: float, mode: str, size: int, gen) -> tuple[np.ndarray, np.ndarray]:
    g = gen.standard_normal((size, n))
    tilde = gen.standard_normal((size, n))
    if mode == "resampled":
        keep = gen.random((size, n)) < 1.0 - eps
        return g, np.where(keep, g, tilde)
    if mode == "correlated":
        p = 1.0 - eps
        return g, p * g + math.sqrt(1.0 - p * p) * tilde
    raise ValueError(f"unknown coupling mode {mode!r}")


STABILITY_CHUNK = 4096


def stability_samples(A: JuntaAlgorithm, eps: float, mode: str, trials: int, seed: int, chunks=None):
    """Per-trial ``(sq_dist, inner, norm_sq)`` arrays from vectorized binary64 pairs.

    Junta outputs depend only on signs, so pairs are drawn directly in
    binary64; trials come in fixed chunks of ``STABILITY_CHUNK`` with one
    stream per chunk, and ``chunks`` may restrict the computation to a subset.
    """
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    nchunks = -(-trials // STABILITY_CHUNK)
    sq, inn, nrm = [], [], []
    for c in range(nchunks) if chunks is None else chunks:
        size = min(STABILITY_CHUNK, trials - c * STABILITY_CHUNK)
        g, gp = _batch_pair(A.n, eps, mode, size, _rng.stream(seed, "stability", c))
        a = eval_junta(A, g)
        b = eval_junta(A, gp)
        sq.append(((a - b) ** 2).sum(axis=1))
        inn.append((a * b).sum(axis=1))
        nrm.append((a * a).sum(axis=1))
    return np.concatenate(sq), np.concatenate(inn), np.concatenate(nrm)


def stability_report(A: JuntaAlgorithm, eps: float, mode: str, trials: int, seed: int) -> StabilityReport:
    sq, inn, nrm = stability_samples(A, eps, mode, trials, seed)
    c_norm = float(np.mean(nrm)) / A.n
    return StabilityReport(eps, mode, trials, _mean_ci(sq), _mean_ci(inn),
                           stability_bound(c_norm, A.degree, eps, A.n), c_norm)


# --- rounding -------------------------------------------------------------------


def clip(y) -> np.ndarray:
    return np.clip(np.asarray(y, dtype=float), -1.0, 1.0)


def sign(y) -> np.ndarray:
    """Entrywise sign with ``sign(0) = -1``."""
    return np.where(np.asarray(y) > 0, 1, -1)


def round_deterministic(y) -> SignVector:
    return SignVector.from_signs(sign(y).tolist())


def round_randomized(y, seed: int) -> SignVector:
    """``sign(y_i - U_i)`` with ``U_i ~ Uniform[-1, 1]``, after clipping."""
    z = clip(y)
    u = _rng.stream(seed, "round").uniform(-1.0, 1.0, len(z))
    return SignVector.from_signs(sign(z - u).tolist())


def flip_probs(y) -> np.ndarray:
    """``P(round(y)_i != sign(y)_i) = |y_i - sign(y_i)| / 2`` on the clipped point."""
    z = clip(y)
    return np.abs(z - sign(z)) / 2.0


def round_via_resampling(y, seed: int) -> tuple[SignVector, int]:
    """Keep ``sign(y_i)`` unless a ``Bernoulli(2 p_i)`` coin says to redraw a fair sign.

    Returns the rounded point and the number of redrawn coordinates.
    """
    z = clip(y)
    p = flip_probs(z)
    gen = _rng.stream(seed, "resample_round")
    redraw = gen.random(len(z)) < 2.0 * p
    fair = np.where(gen.random(len(z)) < 0.5, 1, -1)
    out = np.where(redraw, fair, sign(z))
    return SignVector.from_signs(out.tolist()), int(redraw.sum())


def _outcome_bits(n: int) -> np.ndarray:
    return (np.arange(1 << n)[:, None] >> np.arange(n)) & 1


def randomized_distribution(y) -> np.ndarray:
    """Exact law of ``round_randomized``: entry ``k`` is ``P(x.bits == k)``."""
    z = clip(y)
    plus = (z + 1.0) / 2.0  # P(U < z)
    bits = _outcome_bits(len(z))
    return np.prod(np.where(bits == 1, plus, 1.0 - plus), axis=1)


def resampling_distribution(y) -> np.ndarray:
    """Exact law of ``round_via_resampling``, summed over the redraw coins."""
    z = clip(y)
    q = 2.0 * flip_probs(z)
    s = sign(z)
    bits = _outcome_bits(len(z))
    target = np.where(bits == 1, 1, -1)
    # redrawn (prob q): fair sign; kept (prob 1-q): sign(z)
    per = q * 0.5 + (1.0 - q) * (target == s)
    return np.prod(per, axis=1)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    return 0.5 * float(np.abs(p - q).sum())
