"""Unsupervised k-medoids classification of factor pixels (PAM / CLARA)."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DataError

__all__ = ["Classification", "pam", "clara_classify", "assign", "assignment_cost"]


@dataclass(frozen=True)
class Classification:
    """Spectral classes ``1..Q`` on the raster.

    ``medoids[q - 1]`` is the factor-space vector of class ``q`` and
    ``medoid_index[q - 1]`` its pixel index in raster order.
    """

    labels: np.ndarray
    medoids: np.ndarray
    medoid_index: np.ndarray
    cost: float

    @property
    def Q(self) -> int:
        return self.medoids.shape[0]


def _pairwise(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt((diff ** 2).sum(-1))


def pam(points, Q: int, seed=None) -> np.ndarray:
    """Partitioning Around Medoids: greedy BUILD, then best-improvement SWAP.

    Returns the sorted indices of the ``Q`` medoids in ``points``. Ties are
    broken in favour of the lowest index. ``seed`` is accepted for interface
    symmetry with :func:`clara_classify`; the algorithm is deterministic.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim == 1:
        points = points[:, None]
    n = points.shape[0]
    if not 1 <= Q <= n:
        raise ConfigError(f"need 1 <= Q <= {n}, got {Q}")
    D = _pairwise(points)

    # BUILD
    medoids = [int(np.argmin(D.sum(axis=1)))]
    nearest = D[medoids[0]].copy()
    while len(medoids) < Q:
        gain = np.maximum(nearest[None, :] - D, 0.0).sum(axis=1)
        gain[medoids] = -np.inf
        m = int(np.argmax(gain))
        medoids.append(m)
        nearest = np.minimum(nearest, D[m])

    # SWAP
    cost = D[medoids].min(axis=0).sum()
    while True:
        best = (cost, None, None)
        is_medoid = np.zeros(n, dtype=bool)
        is_medoid[medoids] = True
        for a, m in enumerate(medoids):
            others = D[[x for k, x in enumerate(medoids) if k != a]]
            base = others.min(axis=0) if len(others) else np.full(n, np.inf)
            # cost of replacing medoid m by every candidate h at once
            trial = np.minimum(base[None, :], D).sum(axis=1)
            trial[is_medoid] = np.inf
            h = int(np.argmin(trial))
            if trial[h] < best[0] - 1e-12 * max(1.0, abs(best[0])):
                best = (trial[h], a, h)
        if best[1] is None:
            break
        medoids[best[1]] = best[2]
        cost = best[0]
    return np.array(sorted(medoids), dtype=np.int64)


def assign(points, medoids):
    """Nearest-medoid index (0-based) for each point, lowest index on ties."""
    points = np.asarray(points, dtype=np.float64)
    d = np.sqrt(((points[:, None, :] - medoids[None, :, :]) ** 2).sum(-1))
    return np.argmin(d, axis=1), d.min(axis=1)


def assignment_cost(points, medoids) -> float:
    return float(assign(points, medoids)[1].sum())


def clara_classify(
    features,
    Q: int,
    seed=0,
    samples: int = 5,
    sample_size: int | None = None,
    workers: int = 1,
) -> Classification:
    """CLARA: PAM on random subsets, best medoid set judged on all pixels.

    Parameters
    ----------
    features : ndarray, shape (K, H, W) or FactorImage
        Factor planes; a :class:`~stochws.factor.FactorImage` contributes its
        retained axes.
    Q : int
        Number of classes.
    seed : int
        Seed of the subset sampler.
    samples : int
        Number of subsets.
    sample_size : int, optional
        Subset size, default ``min(P, 40 + 2Q)``.
    workers : int
        Threads used for the per-subset PAM runs; does not affect the result.
    """
    from .factor import FactorImage

    if isinstance(features, FactorImage):
        features = features.retained_coords()
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 2:
        features = features[None]
    K, h, w = features.shape
    if K < 1:
        raise ConfigError("at least one factor axis is required")
    points = features.reshape(K, -1).T
    P = points.shape[0]
    if Q < 1:
        raise ConfigError("Q must be >= 1")
    if sample_size is None:
        sample_size = min(P, 40 + 2 * Q)
    if sample_size < Q:
        raise ConfigError(f"sample_size {sample_size} < Q {Q}")

    # draw subsets among distinct vectors so no two medoids coincide
    distinct, first = np.unique(points, axis=0, return_index=True)
    order = np.argsort(first)
    candidates = first[order]
    if Q > len(candidates):
        raise DataError(f"Q={Q} exceeds the {len(candidates)} distinct factor vectors")
    size = min(sample_size, len(candidates))
    rng = np.random.default_rng(seed)
    n_draws = 1 if size == len(candidates) else samples
    subsets = [np.sort(rng.choice(candidates, size=size, replace=False)) for _ in range(n_draws)]

    def run(subset):
        local = pam(points[subset], Q)
        meds = np.sort(subset[local])
        return meds, assignment_cost(points, points[meds])

    if workers > 1 and len(subsets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, subsets))
    else:
        results = [run(s) for s in subsets]

    best_meds, best_cost = results[0]
    for meds, cost in results[1:]:
        if cost < best_cost:
            best_meds, best_cost = meds, cost
    idx, _ = assign(points, points[best_meds])
    labels = (idx + 1).reshape(h, w).astype(np.int64)
    return Classification(labels, points[best_meds], best_meds, best_cost)
