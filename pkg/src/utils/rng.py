from __future__ import annotations

import zlib

import numpy as np


def stable_label_hash(label: str) -> int:
    """
    CRC-32 of the UTF-8 bytes of label.
    Deterministic across runs (unlike Python's built-in hash).
    """
    return zlib.crc32(label.encode("utf-8"))


def derive_seed(seed: int, label: str) -> int:
    """Child 64-bit seed for a labelled sub-stream of the run seed."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stable_label_hash(label),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def derive_rng(seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(seed, label))
