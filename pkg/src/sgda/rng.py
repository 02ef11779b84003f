"""Keyed, counter-based random streams.

Every random draw in the package comes from a stream addressed by a tuple
such as ``(seed, "augment", epoch, parent, variant)``. Streams are Philox
generators seeded through a :class:`numpy.random.SeedSequence`, so a key
always yields the same numbers regardless of iteration order or which
worker evaluates it.
"""

from __future__ import annotations

import hashlib
from functools import lru_cache

import numpy as np

_MASK64 = (1 << 64) - 1


@lru_cache(maxsize=256)
def _label_word(label: str) -> int:
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _key_words(key: tuple[int | str, ...]) -> list[int]:
    words: list[int] = []
    for part in key:
        if isinstance(part, str):
            value = _label_word(part)
        elif isinstance(part, (int, np.integer)) and not isinstance(part, bool):
            value = int(part)
            if value < 0:
                raise ValueError(f"stream key parts must be non-negative, got {value}")
        else:
            raise TypeError(f"stream key parts must be int or str, got {type(part).__name__}")
        # SeedSequence takes 32-bit words; split so 64-bit seeds keep all entropy.
        words.extend((value & 0xFFFFFFFF, (value >> 32) & 0xFFFFFFFF))
    return words


def stream(seed: int, *key: int | str) -> np.random.Generator:
    """Return the generator addressed by ``(seed, *key)``."""
    entropy = _key_words((seed, *key))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, label: str) -> int:
    """Derive a labelled sub-seed from a top-level seed (``seed XOR H(label)``)."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return (seed ^ _label_word(label)) & _MASK64
