"""Counter-based random streams.

Every source of randomness in a run is a Philox4x64 generator keyed by
``(run seed, stream id)``; independent substreams within one purpose (e.g.
the i-th environment reset) set the high word of the 256-bit counter.  The
state is fully explicit, so any draw is reproducible from the run seed alone
and the scheme ports to any language with a Philox implementation.
"""

from __future__ import annotations

import numpy as np

# stream ids (arbitrary distinct constants)
ENV_INIT = 1
ACTION = 2
NET_ACTOR = 3
NET_CRITIC = 4
NET_CRITIC2 = 5
NET_VALUE = 6
UPDATE = 7
REPLAY = 8
NOISE = 9
WARMUP = 10
EVAL = 11
DATASET = 12
GRADCHECK = 13
ANCHOR_INIT = 14
ANCHOR_ACTION = 15


def stream(seed: int, stream_id: int) -> np.random.Generator:
    """Generator for the given (seed, stream) pair, starting at counter 0."""
    return substream(seed, stream_id, 0)


def substream(seed: int, stream_id: int, index: int) -> np.random.Generator:
    """Generator for the index-th substream of (seed, stream).

    Substreams are 2^192 counter blocks apart, far beyond any realistic
    consumption, so they never overlap.
    """
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, stream_id & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    counter = np.array([0, 0, 0, index & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
