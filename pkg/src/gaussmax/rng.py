"""Deterministic random streams keyed by (seed, role, index).

Every replication draws from its own counter-based Philox stream, so results do
not depend on chunking, worker count or the order replications are evaluated.
"""

import numpy as np

from .errors import ConfigError

ROLES = {
    "field": 1,
    "shift": 2,
    "fbm1": 3,
    "fbm2": 4,
    "oracle": 5,
}


def stream(seed: int, role: str, index: int) -> np.random.Generator:
    if int(seed) != seed or seed < 0 or seed >= 2**64:
        raise ConfigError(f"seed must be an integer in [0, 2**64), got {seed!r}")
    ss = np.random.SeedSequence(int(seed), spawn_key=(ROLES[role], int(index)))
    return np.random.Generator(np.random.Philox(ss))
