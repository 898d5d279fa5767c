"""Deterministic per-purpose random streams derived from one master seed.

All randomness in the toolkit flows from a single 64-bit seed. Each consumer
asks for a stream by label; the stream seed is a SHA-256 digest of
``(master_seed, label)``, so adding a new consumer never perturbs existing
streams and results are stable across platforms and numpy versions.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, label: str) -> int:
    """Return a 64-bit stream seed for ``label`` under ``master_seed``."""
    payload = f"{master_seed & 0xFFFFFFFFFFFFFFFF}\x00{label}".encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big")


def derive_rng(master_seed: int, label: str) -> np.random.Generator:
    """Return an independent numpy Generator for ``label``."""
    return np.random.default_rng(derive_seed(master_seed, label))
