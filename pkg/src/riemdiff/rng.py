"""Deterministic, splittable randomness.

Two tiers, both keyed so that parallel and serial execution produce identical
streams:

* :func:`substream` builds an independent numpy ``Generator`` from a root seed
  plus an integer key path (SeedSequence spawn keys).  Used for data
  generation, graph sampling, initial points, and test fixtures.
* :func:`minibatch_indices` is a counter-based SplitMix64 draw used in the
  optimizer hot loop, where constructing a Generator per (agent, t) call would
  dominate the runtime.  The stream for a draw depends only on
  (seed, agent_id, t), never on thread or call order.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key...); identical keys give identical streams."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _splitmix64(x):
    # SplitMix64 finalizer; uint64 arithmetic wraps intentionally.
    with np.errstate(over="ignore"):
        x = x + _GAMMA
        x = (x ^ (x >> np.uint64(30))) * _MIX1
        x = (x ^ (x >> np.uint64(27))) * _MIX2
        return x ^ (x >> np.uint64(31))


def stream_key(seed: int, agent_id: int, t: int) -> np.uint64:
    """64-bit key identifying the (seed, agent, iteration) substream."""
    with np.errstate(over="ignore"):
        k = _splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
        k = _splitmix64(k ^ (np.uint64(agent_id) * _MIX1))
        return _splitmix64(k ^ (np.uint64(t) * _MIX2))


def minibatch_indices(seed: int, agent_id: int, t: int, m: int, size: int) -> np.ndarray:
    """Uniform-with-replacement sample indices in [0, m).

    Counter-based: element j of the batch is a pure function of
    (seed, agent_id, t, j).  Modulo bias is O(m / 2^64), irrelevant for any
    shard size we handle.
    """
    key = stream_key(seed, agent_id, t)
    with np.errstate(over="ignore"):
        counters = key + np.arange(size, dtype=np.uint64) * _GAMMA
    words = _splitmix64(counters)
    return (words % np.uint64(m)).astype(np.int64)


def minibatch_indices_all(seed: int, agent_ids, t: int, m: int, size: int) -> np.ndarray:
    """Batch of :func:`minibatch_indices` for many agents, shape (n, size).

    Row i equals ``minibatch_indices(seed, agent_ids[i], t, m, size)`` exactly.
    """
    keys = np.array([stream_key(seed, int(a), t) for a in agent_ids], dtype=np.uint64)
    with np.errstate(over="ignore"):
        counters = keys[:, None] + np.arange(size, dtype=np.uint64)[None, :] * _GAMMA
    words = _splitmix64(counters)
    return (words % np.uint64(m)).astype(np.int64)
