"""Deterministic RNG derivation.

Every stochastic step draws from a stream derived from (global seed, stable
string keys), so parallel execution order and platform hash randomization
never change results.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_u64(*parts: str | int) -> int:
    """Platform-stable 64-bit digest of the given parts."""
    payload = "\x1f".join(str(part) for part in parts).encode("utf-8")
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


def rng_for(seed: int, *parts: str | int) -> np.random.Generator:
    """Independent generator for a (seed, keys...) addressed substream."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, stable_u64(*parts)])))
