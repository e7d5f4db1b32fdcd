"""Deterministic random-stream derivation.

Every sampling site derives its own generator from the master seed plus a
scope path (stage name, record id, ...).  Streams therefore do not depend on
iteration order, and re-running any stage with the same seed reproduces its
draws exactly.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEED_MASK = (1 << 63) - 1


def _scope_digest(scope: tuple) -> int:
    text = "/".join(repr(part) for part in scope)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(seed: int, *scope) -> np.random.Generator:
    """Return a generator for the sub-stream identified by `scope`.

    The same (seed, scope) pair always yields the same stream; distinct
    scopes yield independent streams.
    """
    entropy = [int(seed) & _SEED_MASK, _scope_digest(scope)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
