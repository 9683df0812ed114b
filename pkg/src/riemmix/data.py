"""Dataset ingestion, synthetic generation, and k-means++ initialization.

All randomness flows through ``numpy.random.default_rng`` (PCG64) from an
explicit seed; candidate seedings draw from independent spawned streams so
results do not depend on evaluation order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import spd
from .objective import (
    MixtureEstimate,
    augment,
    default_penalty_config,
    embed_mixture,
    penalized_objective,
)

RNG_IDENTITY = "numpy.random.default_rng (PCG64)"


@dataclass
class Dataset:
    rows: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.rows.shape[0]

    @property
    def d(self):
        return self.rows.shape[1]


def load_csv(path, delimiter=",", header=False):
    """Parse a numeric matrix; ragged rows and non-numeric cells are rejected
    with row/column diagnostics."""
    rows = []
    width = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, record in enumerate(reader, start=1):
            if header and lineno == 1:
                continue
            if not record:
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise ValueError(
                    f"{path}: ragged row at line {lineno} "
                    f"({len(record)} cells, expected {width})")
            parsed = []
            for col, cell in enumerate(record, start=1):
                try:
                    parsed.append(float(cell))
                except ValueError as exc:
                    raise ValueError(
                        f"{path}: non-numeric cell at line {lineno}, "
                        f"column {col}: {cell!r}") from exc
            rows.append(parsed)
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Dataset(rows=np.array(rows, dtype=float),
                   provenance={"source": str(path)})


def sample_gmm(truth, n, seed):
    """I.i.d. draws from a known mixture; truth and seed go to provenance."""
    rng = np.random.default_rng(seed)
    k = truth.n_components
    d = truth.d
    chols = [spd.cholesky_spd(spd.spd_point(truth.covariances[j],
                                            f"covariance {j}"))
             for j in range(k)]
    if n == 0:
        rows = np.empty((0, d))
    else:
        counts = rng.multinomial(n, truth.weights)
        parts = []
        for j in range(k):
            z = rng.standard_normal((counts[j], d))
            parts.append(truth.means[j] + z @ chols[j].T)
        rows = np.vstack(parts)
        rng.shuffle(rows, axis=0)
    return Dataset(rows=rows,
                   provenance={"seed": int(seed), "truth": truth,
                               "rng": RNG_IDENTITY})


def _kmeanspp_seed(data, k, rng):
    """Classic D^2 seeding: centers drawn from the data rows."""
    n = data.shape[0]
    centers = [data[rng.integers(n)]]
    d2 = np.sum((data - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(data[idx])
        d2 = np.minimum(d2, np.sum((data - centers[-1]) ** 2, axis=1))
    return np.array(centers), float(d2.sum())


def _estimate_from_centers(data, centers, global_cov):
    """One assignment pass; covariances blended toward the global covariance
    (0.01 weight) for full rank, weights floored at 1/(10K)."""
    n, d = data.shape
    k = centers.shape[0]
    dists = np.linalg.norm(data[:, None, :] - centers[None, :, :], axis=2)
    labels = np.argmin(dists, axis=1)
    weights = np.empty(k)
    means = np.empty((k, d))
    covs = np.empty((k, d, d))
    for j in range(k):
        members = data[labels == j]
        weights[j] = len(members) / n
        means[j] = members.mean(axis=0) if len(members) else centers[j]
        if len(members) >= 2:
            cluster_cov = np.atleast_2d(np.cov(members, rowvar=False, bias=True))
            covs[j] = 0.99 * cluster_cov + 0.01 * global_cov
        else:
            covs[j] = global_cov
    weights = np.maximum(weights, 1.0 / (10.0 * k))
    weights = weights / weights.sum()
    covs = np.stack([spd.spd_point(c, f"init covariance {j}")
                     for j, c in enumerate(covs)])
    return MixtureEstimate(weights=weights, means=means, covariances=covs)


def kmeanspp_init(dataset, k, candidates=30, seed=0, cfg=None):
    """Run k-means++ seeding ``candidates`` times and keep the candidate whose
    mixture estimate scores best under the penalized reformulated objective."""
    data = dataset.rows if isinstance(dataset, Dataset) else np.atleast_2d(
        np.asarray(dataset, dtype=float))
    n, d = data.shape
    if n < k:
        raise ValueError(f"need at least k={k} samples, got {n}")
    if cfg is None:
        cfg = default_penalty_config(data)
    global_cov = np.atleast_2d(np.cov(data, rowvar=False, bias=True)) \
        if n > 1 else np.eye(d)
    global_cov = global_cov + 1e-8 * (np.trace(global_cov) / d + 1.0) * np.eye(d)
    aug = augment(data)
    streams = [np.random.default_rng(s)
               for s in np.random.SeedSequence(seed).spawn(candidates)]
    best = None
    best_score = -np.inf
    for rng in streams:
        centers, _ = _kmeanspp_seed(data, k, rng)
        est = _estimate_from_centers(data, centers, global_cov)
        score = penalized_objective(embed_mixture(est), aug, cfg)
        if score > best_score:
            best_score = score
            best = est
    return best


def random_separated_mixture(k, d, seed, separation=5.0, weight_spread=0.5):
    """Random ground-truth mixture with means scaled to a target pairwise
    separation relative to component spread; used by tests and `gen`."""
    rng = np.random.default_rng(seed)
    means = rng.standard_normal((k, d))
    if k > 1:
        dists = [np.linalg.norm(means[i] - means[j])
                 for i in range(k) for j in range(i + 1, k)]
        means *= separation / max(min(dists), 1e-9)
    covs = np.empty((k, d, d))
    for j in range(k):
        a = rng.standard_normal((d, d)) / np.sqrt(d)
        covs[j] = spd.symmetrize(a @ a.T) + 0.5 * np.eye(d)
    raw = 1.0 + weight_spread * rng.random(k)
    weights = raw / raw.sum()
    return MixtureEstimate(weights=weights, means=means, covariances=covs)
