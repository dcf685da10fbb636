"""Counter-based seed derivation.

Every random quantity is drawn from a generator whose seed is a pure function
of ``(master_seed, key_1, key_2, ...)``. Replicate ``i`` of an estimator always
sees the same stream no matter how replicates are spread over workers.
"""

import numpy as np

from lcsfluct.errors import ValidationError

SEED_MAX = 2**64 - 1


def check_seed(seed, field="seed"):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ValidationError(field, f"seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) <= SEED_MAX:
        raise ValidationError(field, "seed must be a 64-bit unsigned integer")
    return int(seed)


def derive_seed(seed, *keys):
    """Child seed for the stream labelled by ``keys`` (non-negative ints)."""
    ss = np.random.SeedSequence(entropy=check_seed(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def rng_for(seed, *keys):
    if keys:
        return np.random.default_rng(derive_seed(seed, *keys))
    return np.random.default_rng(check_seed(seed))
