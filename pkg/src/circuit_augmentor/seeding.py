"""Deterministic RNG streams derived from one root seed.

Every random choice in the pipeline flows from a root seed through a
named sub-stream, so individual components (data sampling, weight init,
batch shuffling, latent draws) are reproducible in isolation.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(root_seed: int, name: str) -> np.random.Generator:
    """Generator for the sub-stream `name` under `root_seed`.

    The stream key is a stable hash of the name, so the mapping does not
    depend on interpreter hash randomization or call order.
    """
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    key = int.from_bytes(digest[:8], "big")
    return np.random.default_rng(np.random.SeedSequence([root_seed & 0xFFFFFFFF, key]))
