"""Deterministic seed-stream derivation.

Every consumer of randomness gets its own generator, derived from the master
seed and a path of labels (phase, batch, episode, purpose). Streams are
stateless: re-deriving the same path always yields the same generator, which
is what makes checkpoint resume and cross-condition comparisons exact.
"""

import hashlib

import numpy as np


def child_seed(master: int, *path) -> int:
    """Stable 64-bit seed for a labelled child stream."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest(), "big")


def stream(master: int, *path) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, *path))
