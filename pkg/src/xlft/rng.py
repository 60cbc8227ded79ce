"""Deterministic, keyed random streams.

All randomness in the toolkit flows through ``RngStream`` so that any
(seed, purpose, epoch, example_id) tuple reproduces the exact same draw
sequence.  This is what lets an epoch's augmentation be replayed and a
different epoch re-draw, and what makes the multi-seed protocol exact.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _key64(text: str) -> int:
    # Stable across processes (unlike builtin hash()).
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream_rng(seed: int, purpose: str, epoch: int = 0, example_id: str | int = "") -> np.random.Generator:
    """Generator keyed by (seed, purpose, epoch, example_id)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, _key64(purpose), int(epoch) & 0xFFFFFFFFFFFFFFFF, _key64(str(example_id))]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class RngStream:
    """A root seed from which keyed sub-streams are derived."""

    seed: int

    def rng(self, purpose: str, epoch: int = 0, example_id: str | int = "") -> np.random.Generator:
        return stream_rng(self.seed, purpose, epoch=epoch, example_id=example_id)
