"""Counter-based random streams keyed by (master seed, trajectory, purpose).

Each trajectory draws from its own Philox stream, so results do not depend on
how trajectories are batched or scheduled across workers.
"""

import numpy as np

BROWNIAN = 0
REGIME = 1


def stream(master_seed: int, index: int, purpose: int = BROWNIAN) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index), int(purpose)))
    return np.random.Generator(np.random.Philox(seq))
