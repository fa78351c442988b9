"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose 128-bit
key is a BLAKE2b hash of ``(root_seed, *labels)``. Streams with different
labels are independent, so trials can run in any order on any number of
workers and still see identical numbers.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def _digest(root: int, labels: tuple) -> bytes:
    text = repr((int(root) & MASK64,) + tuple(labels)).encode()
    return hashlib.blake2b(text, digest_size=16).digest()


def derive_seed(root: int, *labels) -> int:
    """64-bit child seed for the stream ``(root, *labels)``."""
    return int.from_bytes(_digest(root, labels)[:8], "little")


def stream(root: int, *labels) -> np.random.Generator:
    """Philox generator keyed by ``(root, *labels)``, counter starting at zero."""
    key = np.frombuffer(_digest(root, labels), dtype=np.uint64).copy()
    return np.random.Generator(np.random.Philox(key=key))


def random_bits(rng: np.random.Generator, nbits: int, count: int) -> list[int]:
    """``count`` independent uniform integers in ``[0, 2**nbits)``."""
    if nbits <= 0:
        return [0] * count
    words = -(-nbits // 64)
    raw = rng.bit_generator.random_raw(count * words).reshape(count, words)
    out = []
    extra = words * 64 - nbits
    for row in raw.tolist():
        v = 0
        for w in row:
            v = (v << 64) | w
        out.append(v >> extra)
    return out


def random_below(rng: np.random.Generator, bound: int, count: int) -> list[int]:
    """``count`` exact uniform integers in ``[0, bound)`` by rejection."""
    if bound <= 0:
        raise ValueError("bound must be positive")
    nbits = (bound - 1).bit_length()
    out: list[int] = []
    while len(out) < count:
        need = count - len(out)
        # acceptance rate is > 1/2, so 2x oversampling nearly always finishes in one pass
        for v in random_bits(rng, nbits, 2 * need + 8):
            if v < bound:
                out.append(v)
                if len(out) == count:
                    break
    return out
