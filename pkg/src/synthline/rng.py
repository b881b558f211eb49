"""Deterministic random streams.

Every sampled quantity in an episode draws from a substream keyed by
(root_seed, episode_index, purpose tag). Substream derivation is
counter-based (numpy SeedSequence spawn keys), so worker interleaving and
retries cannot change what any episode draws.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _tag_key(tag: str) -> int:
    # Stable across processes (python hash() is salted).
    return int.from_bytes(hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest(), "big")


@dataclass(frozen=True)
class SeededRng:
    """Root of all randomness for one run."""

    root_seed: int

    def stream(self, episode_index: int, purpose: str) -> np.random.Generator:
        seq = np.random.SeedSequence(
            entropy=self.root_seed, spawn_key=(episode_index, _tag_key(purpose))
        )
        return np.random.default_rng(seq)

    def episode(self, episode_index: int) -> "EpisodeRng":
        return EpisodeRng(self, episode_index)


@dataclass(frozen=True)
class EpisodeRng:
    """Per-episode view; each purpose tag gets an independent stream."""

    root: SeededRng
    episode_index: int

    def stream(self, purpose: str) -> np.random.Generator:
        return self.root.stream(self.episode_index, purpose)
