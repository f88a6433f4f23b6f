"""K-means codebooks and visual-word histograms.

One codebook is trained per descriptor type; a video is encoded as the
concatenation of its per-type word histograms in a fixed block order.
"""

from __future__ import annotations

import numpy as np

from .dataio import Codebook, DescriptorSet, VideoHistogram
from .errors import ConfigError, ValidationError

BLOCK_ORDER = ("hof", "logc", "cuboid")

DEFAULT_WORDS = 64
DEFAULT_MAX_ITERS = 100


def _as_points(descriptors) -> np.ndarray:
    if isinstance(descriptors, DescriptorSet):
        return descriptors.vectors
    points = np.asarray(descriptors, dtype=np.float64)
    if points.ndim != 2:
        raise ValidationError("descriptors must be a (count, dim) array")
    return points


def _sq_distances(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d2 = (
        np.sum(points * points, axis=1)[:, None]
        + np.sum(centroids * centroids, axis=1)[None, :]
        - 2.0 * points @ centroids.T
    )
    return np.maximum(d2, 0.0)


def _plusplus_init(points: np.ndarray, word_count: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centroids = np.empty((word_count, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest = _sq_distances(points, centroids[:1]).ravel()
    for k in range(1, word_count):
        total = closest.sum()
        if total > 0.0:
            target = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(closest), target, side="right"))
            idx = min(idx, n - 1)
        else:
            idx = int(rng.integers(n))
        centroids[k] = points[idx]
        np.minimum(closest, _sq_distances(points, centroids[k : k + 1]).ravel(), out=closest)
    return centroids


def kmeans_with_history(descriptors, word_count: int, seed: int,
                        max_iters: int = DEFAULT_MAX_ITERS):
    """Lloyd's algorithm with k-means++ init; returns (Codebook, inertia per iteration).

    Runs until the assignment reaches a fixpoint or max_iters. An empty
    cluster is reseeded to the point currently farthest from its own
    centroid. Deterministic for a fixed seed.
    """
    points = _as_points(descriptors)
    dtype = descriptors.descriptor_type if isinstance(descriptors, DescriptorSet) else ""
    n = points.shape[0]
    if word_count < 1:
        raise ValidationError("word_count must be at least 1")
    if n < word_count:
        raise ValidationError(f"{n} descriptors cannot fill {word_count} words")
    if max_iters < 1:
        raise ValidationError("max_iters must be at least 1")

    rng = np.random.default_rng(seed)
    centroids = _plusplus_init(points, word_count, rng)
    assignment = None
    inertia_history = []
    for _ in range(max_iters):
        d2 = _sq_distances(points, centroids)
        new_assignment = np.argmin(d2, axis=1)
        inertia_history.append(float(d2[np.arange(n), new_assignment].sum()))
        if assignment is not None and np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment

        point_cost = d2[np.arange(n), assignment].copy()
        for k in range(word_count):
            members = assignment == k
            if members.any():
                centroids[k] = points[members].mean(axis=0)
            else:
                worst = int(np.argmax(point_cost))
                centroids[k] = points[worst]
                point_cost[worst] = -1.0  # keep later empties off the same point
    return Codebook(dtype, centroids), inertia_history


def kmeans(descriptors, word_count: int, seed: int, max_iters: int = DEFAULT_MAX_ITERS) -> Codebook:
    codebook, _ = kmeans_with_history(descriptors, word_count, seed, max_iters)
    return codebook


def quantize(vector, codebook: Codebook) -> int:
    """Index of the nearest centroid (Euclidean); ties pick the lowest index."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.shape != (codebook.dim,):
        raise ValidationError(f"descriptor has dim {vector.shape}, codebook expects {codebook.dim}")
    diffs = codebook.centroids - vector[None, :]
    return int(np.argmin(np.einsum("ij,ij->i", diffs, diffs)))


def quantize_batch(vectors: np.ndarray, codebook: Codebook) -> np.ndarray:
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != codebook.dim:
        raise ValidationError(f"descriptors must be (count, {codebook.dim})")
    if vectors.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return np.argmin(_sq_distances(vectors, codebook.centroids), axis=1)


def encode_video(video_id: str, sets, codebooks) -> VideoHistogram:
    """One normalized histogram block per descriptor type, in BLOCK_ORDER.

    Types absent from ``sets`` are skipped; a type with zero descriptors
    yields an all-zero block.
    """
    blocks = []
    for dtype in BLOCK_ORDER:
        if dtype not in sets:
            continue
        codebook = codebooks.get(dtype)
        if codebook is None:
            raise ConfigError(f"no codebook supplied for descriptor type {dtype!r}")
        dset = sets[dtype]
        counts = np.zeros(codebook.word_count)
        if dset.count:
            words = quantize_batch(dset.vectors, codebook)
            counts = np.bincount(words, minlength=codebook.word_count).astype(np.float64)
            counts /= counts.sum()
        blocks.append((dtype, counts))
    if not blocks:
        raise ValidationError("no descriptor types to encode")
    return VideoHistogram(video_id, blocks)
