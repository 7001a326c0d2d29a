"""Shared helpers for the test suite: random states/channels and a
phase-insensitive unitary distance."""

import numpy as np
from scipy.stats import unitary_group

from chanmix.channels import KrausChannel
from chanmix.qops import DensityMatrix


def random_density(dims, rng) -> DensityMatrix:
    d = int(np.prod(dims))
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    mat = a @ a.conj().T
    return DensityMatrix(tuple(dims), mat / np.trace(mat))


def random_unitary(dim, rng) -> np.ndarray:
    return unitary_group.rvs(dim, random_state=rng)


def random_cptp(dim, n_kraus, rng, label="random") -> KrausChannel:
    """Random CPTP map: slice a Haar isometry into Kraus blocks."""
    big = random_unitary(dim * n_kraus, rng)
    isometry = big[:, :dim]
    kraus = tuple(isometry[i * dim : (i + 1) * dim, :] for i in range(n_kraus))
    return KrausChannel(kraus, label=label)


def phase_dist(u, v) -> float:
    """Max-abs distance between unitaries after removing a global phase."""
    tr = np.trace(u.conj().T @ v)
    phase = tr / abs(tr) if abs(tr) > 1e-12 else 1.0
    return float(np.max(np.abs(u * phase - v)))
