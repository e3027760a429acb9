"""k-means++ seeding and Lloyd iterations, shared by the classical-codebook
baseline and the codebook compression paths."""
from __future__ import annotations

import numpy as np


def kmeans_plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Pick k initial centroids with distance-squared-proportional sampling."""
    n = len(points)
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(0, n)]
    closest = np.sum((points - centroids[0]) ** 2, axis=1)
    for i in range(1, k):
        total = closest.sum()
        if total <= 0:
            centroids[i:] = points[rng.integers(0, n, size=k - i)]
            break
        probs = closest / total
        centroids[i] = points[rng.choice(n, p=probs)]
        closest = np.minimum(closest, np.sum((points - centroids[i]) ** 2, axis=1))
    return centroids


def nearest_centroid(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the closest centroid per point; lowest index wins ties."""
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def mean_distortion(points: np.ndarray, centroids: np.ndarray) -> float:
    d2 = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    return float(np.mean(np.min(d2, axis=1)))


def lloyd(points: np.ndarray, k: int, rng: np.random.Generator,
          max_iter: int = 100, tol: float = 1e-10):
    """Lloyd k-means; empty clusters are re-seeded from the farthest point.

    Returns (centroids, per-iteration mean distortion).  The distortion
    sequence is non-increasing: both Lloyd half-steps reduce it, and a
    re-seed only adds a closer centroid for the point it copies.
    """
    centroids = kmeans_plusplus(points, k, rng)
    history = []
    prev = np.inf
    for _ in range(max_iter):
        labels = nearest_centroid(points, centroids)
        for j in range(k):
            mask = labels == j
            if np.any(mask):
                centroids[j] = points[mask].mean(axis=0)
            else:
                d2 = np.sum((points - centroids[labels]) ** 2, axis=1)
                centroids[j] = points[np.argmax(d2)]
        cur = mean_distortion(points, centroids)
        history.append(cur)
        if prev - cur <= tol:
            break
        prev = cur
    return centroids, history
