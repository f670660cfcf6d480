"""Numerical tolerances used across the package."""
from dataclasses import dataclass, replace

import numpy as np


@dataclass(frozen=True)
class Tolerances:
    hermiticity: float = 1e-12
    psd_slack: float = 1e-10
    trace: float = 1e-10
    eig_cutoff: float = 1e-12
    cmi: float = 1e-8
    recon: float = 1e-7
    pos_floor: float = 1e-9
    group_tol: float = 1e-7
    weight_floor: float = 1e-12
    residual_tol: float = 1e-9
    gap_tol: float = 1e-7
    # slack used when one CMI bound is implied by another
    slack: float = 1e-9

    def with_(self, **changes):
        return replace(self, **changes)


DEFAULT_TOLS = Tolerances()


def spawn_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """Independent child seeds; ``seed`` may be an int or a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        # fresh copy so repeated calls with the same object agree
        seed = np.random.SeedSequence(seed.entropy, spawn_key=seed.spawn_key)
    else:
        seed = np.random.SeedSequence(seed)
    return seed.spawn(n)
