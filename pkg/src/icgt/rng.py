"""Deterministic, named random substreams.

Every stochastic quantity in the simulator (channel noise, gradient noise,
minibatch indices, Monte-Carlo trials) is drawn from a counter-based Philox
generator keyed by ``(master_seed, tag, *indices)``.  A substream is a pure
function of its key, so realized values do not depend on the order in which
substreams are created or consumed.  This is what makes runs reproducible
bit-for-bit and lets per-node work be parallelized without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _to_entropy(part) -> int:
    """Map a key part (int or str) to a stable 64-bit integer."""
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little")
    raise TypeError(f"substream key parts must be int or str, got {type(part)!r}")


def substream(master_seed: int, *parts) -> np.random.Generator:
    """Return an independent generator keyed by ``(master_seed, *parts)``.

    The same key always yields the same stream, regardless of how many other
    substreams exist or in which order they were requested.
    """
    entropy = [_to_entropy(master_seed)] + [_to_entropy(p) for p in parts]
    seq = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(seq))


def spawn_seed(master_seed: int, *parts) -> int:
    """Derive a 63-bit sub-seed for a child component (e.g. one run of a sweep)."""
    entropy = [_to_entropy(master_seed)] + [_to_entropy(p) for p in parts]
    state = np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0]
    return int(state) & ((1 << 63) - 1)
