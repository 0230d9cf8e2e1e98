"""Reproducible random streams.

All randomness in the package flows through named Philox streams derived
from a single base seed via ``numpy.random.SeedSequence`` spawn keys.
Philox is counter based, so streams with distinct keys are statistically
independent and the draws do not depend on thread scheduling or on the
order in which streams are created.

Stream tags (first component of the spawn key):

====================  =====================================================
``CURVES``            Rademacher signs of the per-individual random curves
``DESIGN``            design points (independent design only)
``MEASUREMENT``       additive measurement noise on the observations
``MECHANISM``         Gaussian noise added by the privacy mechanism
``AUDIT``             record resampling in the sensitivity audit
====================  =====================================================

Remaining key components are small integers identifying (replication,
server, ...).  Keeping the replication index in the key makes paired-seed
sweeps possible: the same (tag, rep, server) stream is used for every
value of the swept variable.
"""

from __future__ import annotations

import numpy as np

CURVES = 1
DESIGN = 2
MEASUREMENT = 3
MECHANISM = 4
AUDIT = 5


def make_rng(base_seed: int, *key: int) -> np.random.Generator:
    """Return the Philox generator for stream ``key`` under ``base_seed``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))
