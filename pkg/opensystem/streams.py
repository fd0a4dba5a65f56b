"""Counter-based random streams addressed by `(seed, key...)`.

A stream depends only on its address, never on how many other streams were
drawn before it, so sampling can be split across workers freely.
"""

import numpy as np

#: First key element of the unraveling sampler, followed by the time index.
UNRAVEL: int = 1
#: First key element of the Gaussian state sampler, followed by the time index.
GAUSSIAN: int = 2
#: First key element of random test and verification states.
STATES: int = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """A `numpy.random.Generator` over `Philox`, seeded by `seed` and `key`.

    ## Example

    ```python
    rng = stream(42, UNRAVEL, 0)
    rng.random()  # same value on every call with (42, UNRAVEL, 0)
    ```
    """
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(sequence))
