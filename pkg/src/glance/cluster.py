"""Seeded k-means (k-means++ seeding, Lloyd iterations) and cluster features."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .tensor import Tensor


@dataclass(frozen=True)
class Clustering:
    k: int
    centroids: np.ndarray  # k x f
    assignment: np.ndarray  # n
    inertia: float
    iterations_run: int
    inertia_trace: tuple[float, ...] = field(default=())


def _sq_distances(x: np.ndarray, c: np.ndarray) -> np.ndarray:
    return np.stack([((x - row) ** 2).sum(axis=1) for row in c], axis=1)


def _inertia(x, centroids, assignment) -> float:
    diff = x - centroids[assignment]
    return float((diff * diff).sum())


def _plus_plus(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(x)
    chosen = [int(rng.integers(n))]
    closest = ((x - x[chosen[0]]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = closest.sum()
        if total > 0:
            nxt = int(rng.choice(n, p=closest / total))
        else:
            # every point coincides with a chosen centre
            rest = np.setdiff1d(np.arange(n), chosen)
            nxt = int(rng.choice(rest))
        chosen.append(nxt)
        closest = np.minimum(closest, ((x - x[nxt]) ** 2).sum(axis=1))
    return x[chosen].copy()


def _repair_empty(x, centroids, assignment, k):
    """Move each empty centroid onto the point farthest from its own centroid."""
    counts = np.bincount(assignment, minlength=k)
    for c in np.flatnonzero(counts == 0):
        dist = ((x - centroids[assignment]) ** 2).sum(axis=1)
        # never take the last member of a cluster
        dist[counts[assignment] < 2] = -1.0
        far = int(np.argmax(dist))
        if dist[far] < 0:
            break
        counts[assignment[far]] -= 1
        assignment[far] = c
        counts[c] = 1
        centroids[c] = x[far]
    return assignment


def _lloyd(x, centroids, max_iter, tol):
    k = len(centroids)
    trace = []
    assignment = None
    it = 0
    while it < max_iter:
        it += 1
        new_assignment = np.argmin(_sq_distances(x, centroids), axis=1)
        new_assignment = _repair_empty(x, centroids, new_assignment, k)
        new_centroids = np.stack([x[new_assignment == c].mean(axis=0) for c in range(k)])
        trace.append(_inertia(x, new_centroids, new_assignment))
        moved = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        stable = assignment is not None and np.array_equal(assignment, new_assignment)
        centroids, assignment = new_centroids, new_assignment
        if stable or moved < tol:
            break
    return centroids, assignment, trace, it


def kmeans(
    features,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 0.0,
    n_init: int = 10,
) -> Clustering:
    """k-means with ``n_init`` seeded k-means++ restarts; lowest inertia wins.

    Iteration stops when assignments stop changing, the largest centroid
    move falls below ``tol``, or ``max_iter`` is reached.
    """
    x = np.asarray(features.values if isinstance(features, Tensor) else features,
                   dtype=np.float64)
    if x.ndim != 2:
        raise ValidationError(f"kmeans needs a 2-D feature matrix, got shape {x.shape}")
    n = len(x)
    if not 1 <= k <= n:
        raise ValidationError(f"kmeans needs 1 <= k <= n, got k={k}, n={n}")
    if max_iter < 1 or tol < 0 or n_init < 1:
        raise ValidationError("kmeans needs max_iter >= 1, tol >= 0, n_init >= 1")
    if not np.all(np.isfinite(x)):
        raise ValidationError("kmeans features contain non-finite values")

    best = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        centroids, assignment, trace, its = _lloyd(x, _plus_plus(x, k, rng), max_iter, tol)
        result = Clustering(k, centroids, assignment, trace[-1], its, tuple(trace))
        if best is None or result.inertia < best.inertia:
            best = result
    return best


def cluster_features(features, c: Clustering) -> Tensor:
    """Row i is the centroid of node i's cluster (a constant, off the tape)."""
    n = features.rows if isinstance(features, Tensor) else len(features)
    if len(c.assignment) != n:
        raise ValidationError(f"clustering covers {len(c.assignment)} nodes, features have {n}")
    return Tensor(c.centroids[c.assignment])
