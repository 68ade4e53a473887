"""Deterministic seed derivation.

Every random consumer gets its own stream derived from a master seed and a
tuple of integer tags through ``numpy.random.SeedSequence``, which hashes its
entropy.  Streams therefore depend only on (master seed, tags), never on the
order in which work is executed.
"""

import numpy as np

# Tags separating the purposes a master seed is used for.
TAG_ORIGINAL = 0
TAG_REPLICATE = 1
TAG_SIM_DEV = 2
TAG_SIM_EVAL = 3

# Normal variates come from numpy's PCG64 Generator.standard_normal.
NORMAL_METHOD = "numpy.random.Generator(PCG64).standard_normal (ziggurat)"


def derive_rng(master_seed, *tags):
    entropy = [int(master_seed)] + [int(t) for t in tags]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def draw_seed(rng):
    """Draw an integer seed suitable for ``random_state`` parameters."""
    return int(rng.integers(0, 2**32 - 1))


def as_generator(random_state):
    if isinstance(random_state, np.random.Generator):
        return random_state
    return np.random.default_rng(random_state)
