"""Shared helpers for the test suite."""

import numpy as np
import pytest
from scipy.optimize import linear_sum_assignment

from riemmix import spd


def random_spd(rng, d, scale=1.0):
    """Well-conditioned random SPD matrix."""
    a = rng.standard_normal((d, d))
    return spd.symmetrize(a @ a.T) + scale * np.eye(d)


def random_sym(rng, d):
    return spd.symmetrize(rng.standard_normal((d, d)))


def align_components(est, truth):
    """Permutation of est's components minimizing total mean distance to truth."""
    k = truth.n_components
    cost = np.array([
        [np.linalg.norm(est.means[i] - truth.means[j]) for j in range(k)]
        for i in range(k)
    ])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(k, dtype=int)
    perm[cols] = rows
    return perm


@pytest.fixture
def rng():
    return np.random.default_rng(20240815)
