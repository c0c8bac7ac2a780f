"""Reproducible random substreams derived from a single root seed.

Every stochastic component (layout retries, trial suggestions, measurement
shots, network training) pulls its generator from here, keyed by name, so a
single root seed pins the whole pipeline.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(token) -> int:
    return zlib.crc32(repr(token).encode("utf-8"))


def substream(root_seed: int, *names) -> np.random.Generator:
    """Generator for the substream identified by `names` under `root_seed`."""
    seq = np.random.SeedSequence([int(root_seed)] + [_key(n) for n in names])
    return np.random.default_rng(seq)


def substream_seed(root_seed: int, *names) -> int:
    """Stable 63-bit integer seed for the named substream."""
    seq = np.random.SeedSequence([int(root_seed)] + [_key(n) for n in names])
    return int(seq.generate_state(1, np.uint64)[0] >> np.uint64(1))
