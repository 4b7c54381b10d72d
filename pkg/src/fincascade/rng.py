"""Counter-based random streams.

All randomness in the library flows through two primitives:

* :func:`substream` -- a Philox generator keyed by ``(seed, *path)`` where
  ``path`` is a tuple of small integers or strings.  Streams for different
  paths are statistically independent, and the mapping is stable across
  runs, platforms and thread counts.  Monte Carlo trials use paths like
  ``(n, trial)`` so a single trial can be re-run in isolation.

* :func:`pair_uniforms` -- a stateless hash of ``(seed, i, j)`` to a
  uniform in [0, 1), used for per-edge decisions so that network sampling
  is order-independent: any subset of pairs can be evaluated in any order
  (or in parallel) and every pair always sees the same uniform.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "pair_uniforms", "vertex_uniforms", "spawn_key"]


def spawn_key(*path) -> tuple[int, ...]:
    """Map a mixed path of ints/strings to a tuple of uint32 words."""
    words: list[int] = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            if part < 0:
                raise ValueError("path integers must be nonnegative")
            v = int(part)
            words.append(v & 0xFFFFFFFF)
            if v >> 32:
                words.append((v >> 32) & 0xFFFFFFFF)
        elif isinstance(part, str):
            digest = hashlib.sha256(part.encode()).digest()[:4]
            words.append(int.from_bytes(digest, "little"))
        else:
            raise TypeError(f"unsupported path element {part!r}")
    return tuple(words)


def substream(seed: int, *path) -> np.random.Generator:
    """Independent Philox stream for (seed, *path); reproducible by construction."""
    ss = np.random.SeedSequence(seed, spawn_key=spawn_key(*path))
    return np.random.Generator(np.random.Philox(ss))


# -- stateless pair hash ----------------------------------------------------
#
# splitmix64: a well-tested 64-bit finalizer (Steele et al.).  We run it on
# seed ^ pair-code; the output passes into [0,1) with 53-bit resolution.

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_INV53 = 1.0 / float(1 << 53)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
        return z ^ (z >> np.uint64(31))


def vertex_uniforms(seed: int, index, slot: int = 0) -> np.ndarray:
    """One reproducible uniform per (seed, institution index, slot).

    Vectorized over ``index``; used by i.i.d. system sampling so each
    institution owns its stream regardless of evaluation order.
    """
    idx = np.asarray(index, dtype=np.uint64)
    with np.errstate(over="ignore"):
        code = np.uint64(seed) * np.uint64(0xDA942042E4DD58B5) + np.uint64(slot)
        x = _splitmix64(_splitmix64(idx + code) ^ np.uint64(seed + 0x632BE59B))
    return (x >> np.uint64(11)).astype(np.float64) * _INV53


def pair_uniforms(seed: int, i, j, n: int, slot: int = 0) -> np.ndarray:
    """Uniform(0,1) for ordered pairs (i, j) of an n-vertex system.

    ``slot`` distinguishes independent uniforms attached to the same pair
    (edge decision, relation choice, mark draws ...).
    """
    i = np.asarray(i, dtype=np.uint64)
    j = np.asarray(j, dtype=np.uint64)
    with np.errstate(over="ignore"):
        code = (np.uint64(slot * 0x10001) + np.uint64(seed)) * np.uint64(0x5851F42D4C957F2D)
        x = _splitmix64(i * np.uint64(n) + j + code)
        x = _splitmix64(x ^ np.uint64(seed))
    return (x >> np.uint64(11)).astype(np.float64) * _INV53
