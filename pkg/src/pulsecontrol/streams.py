"""Counter-based random substreams.

Every random draw in a simulation belongs to a substream addressed by
``(master seed, purpose, qubit, axis, trajectory index)``.  The first four
fields are hashed into a Philox key; the trajectory index goes into a high
word of the Philox counter, so consecutive draws of one trajectory never run
into the next trajectory's block.  Results therefore do not depend on how
trajectories are split between workers.
"""

from functools import lru_cache

import numpy as np

PURPOSES = {"noise": 0, "pulse": 1, "bootstrap": 2}


@lru_cache(maxsize=1024)
def _key(master_seed: int, purpose: int, qubit: int, axis: int) -> tuple:
    ss = np.random.SeedSequence([int(master_seed), purpose, qubit, axis])
    return tuple(int(k) for k in ss.generate_state(2, dtype=np.uint64))


def substream(master_seed: int, trajectory: int, purpose: str = "noise",
              qubit: int = 0, axis: int = 0) -> np.random.Generator:
    """Independent generator for one (trajectory, purpose, qubit, axis) tuple."""
    if master_seed < 0 or trajectory < 0:
        raise ValueError("seeds and trajectory indices must be non-negative")
    key = np.array(_key(master_seed, PURPOSES[purpose], qubit, axis), dtype=np.uint64)
    counter = np.array([0, 0, trajectory, 0], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
