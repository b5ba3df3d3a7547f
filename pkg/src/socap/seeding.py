"""Order-independent random streams keyed by (global seed, entity id)."""

import hashlib

import numpy as np

_MASK = (1 << 64) - 1


def entity_seed(seed: int, entity) -> int:
    """Stable 64-bit seed for ``entity`` under the run-level ``seed``."""
    digest = hashlib.blake2b(f"{int(seed)}\x1f{entity}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") & _MASK


def entity_seeds(seed: int, entities) -> np.ndarray:
    return np.fromiter((entity_seed(seed, e) for e in entities), dtype=np.uint64)


def entity_rng(seed: int, entity) -> np.random.Generator:
    """Independent numpy generator for one entity (town, contract, ...)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & _MASK, entity_seed(seed, entity)]))
