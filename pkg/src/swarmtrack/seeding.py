"""Deterministic derivation of independent random streams.

Every consumer of randomness pulls from its own substream, keyed by
purpose (and usually target index).  Changing the measurement policy can
therefore never perturb the truth trajectories, the measurement noise, or
the channel outcomes of a run, which keeps paired-seed comparisons honest.
"""

from __future__ import annotations

import numpy as np

# Purpose keys for substreams.  Values are stable identifiers; do not reorder.
PROCESS = 0
MEASUREMENT = 1
CHANNEL = 2
INPUT = 3
POLICY = 4
SWARM = 5
INIT = 6


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for `seed` specialised by an integer key path."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(seq)
