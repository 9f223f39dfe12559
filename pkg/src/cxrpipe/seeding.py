"""Keyed RNG streams.

Every random draw in the pipeline comes from a generator keyed by a tuple
of non-negative integers, never from a shared sequential generator.  This
makes any unit of work (one fold, one epoch, one augmented sample)
reproducible in isolation, so parallel execution yields serial-identical
results.
"""

import numpy as np

# Purpose tags keep independent uses of the same global seed from
# colliding on identical key tuples.
STREAM_KFOLD = 1
STREAM_EPOCH_SHUFFLE = 2
STREAM_AUGMENT = 3
STREAM_SYNTHETIC = 4


def keyed_rng(*key: int) -> np.random.Generator:
    """Return a PCG64 generator deterministically keyed by integers."""
    for part in key:
        if part < 0:
            raise ValueError(f"rng key parts must be non-negative, got {part}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(list(key))))
