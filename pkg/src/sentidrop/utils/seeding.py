"""Counter-based derivation of random streams from one 64-bit seed.

Every stochastic step asks for a generator keyed by a path of integers, e.g.
``derive_rng(seed, TREES, i)``. The result depends only on the seed and the
path, never on which worker asks or in which order, so serial and parallel
runs draw identical numbers.
"""

import numpy as np

# Stream namespaces.
SPLIT = 1
TREES = 2
FOLDS = 3
SVM_ORDER = 4
BACKGROUND = 5
PERMUTATIONS = 6
SYNTH_TABLE = 7
SYNTH_COMMENTS = 8
NOISE = 10
SELECTION = 11


def derive_rng(seed: int, *path: int) -> np.random.Generator:
    """Creates a generator for a sub-stream identified by ``path``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=path))


def derive_seed(seed: int, *path: int) -> int:
    """Derives a child 64-bit seed for a sub-stream identified by ``path``."""
    state = np.random.SeedSequence(seed, spawn_key=path).generate_state(
        1, dtype=np.uint64
    )
    return int(state[0])
