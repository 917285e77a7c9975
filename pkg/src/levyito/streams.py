"""Deterministic random streams keyed by (seed, replica, component)."""
from __future__ import annotations

import numpy as np

COMPONENTS = ("wiener", "prm", "aux")


def component_rng(seed: int, replica: int, component: str) -> np.random.Generator:
    """Independent generator for one component of one replica.

    The stream depends only on its key, never on how many other streams were
    created before it, so results do not depend on scheduling.
    """
    key = COMPONENTS.index(component)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(replica), key)))


def replica_streams(seed: int, replica: int) -> dict[str, np.random.Generator]:
    return {name: component_rng(seed, replica, name) for name in COMPONENTS}
