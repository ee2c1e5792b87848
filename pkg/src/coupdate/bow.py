"""K-means codebooks and bag-of-words histogram encoding.

Codebooks are fit with k-means++ seeding and Lloyd iterations; the
within-cluster sum of squared distances is asserted non-increasing after
every iteration.  Clusters that empty out are re-seeded to the descriptor
farthest from its assigned centroid, so the codebook size (and with it the
histogram dimension) never shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._util import read_json, write_json

_CHUNK = 512


@dataclass(eq=False)
class Codebook:
    centroids: np.ndarray  # (k, dim)
    seed: int
    inertia_history: list[float] = field(default_factory=list, repr=False)

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    @property
    def dim(self) -> int:
        return self.centroids.shape[1]

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "dim": self.dim,
            "seed": self.seed,
            "centroids": self.centroids.tolist(),
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "Codebook":
        centroids = np.asarray(payload["centroids"], dtype=np.float64)
        if centroids.shape != (int(payload["k"]), int(payload["dim"])):
            raise ValueError("centroid matrix does not match the stored shape")
        return cls(centroids=centroids, seed=int(payload["seed"]))

    def save(self, path) -> None:
        write_json(self.to_dict(), path)

    @classmethod
    def load(cls, path) -> "Codebook":
        return cls.from_dict(read_json(path))


def _check_descriptors(descriptors) -> np.ndarray:
    X = np.asarray(descriptors, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError(f"descriptors must form an (n, d) matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("descriptors contain non-finite values")
    return X


def _assign(X: np.ndarray, centroids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Nearest centroid per row (ties to the lowest index) and the squared
    distance to it.  Chunked so large descriptor sets stay in cache."""
    n = X.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dist2 = np.empty(n, dtype=np.float64)
    for start in range(0, n, _CHUNK):
        block = X[start : start + _CHUNK]
        d2 = ((block[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=-1)
        labels[start : start + _CHUNK] = np.argmin(d2, axis=1)
        dist2[start : start + _CHUNK] = np.take_along_axis(
            d2, labels[start : start + _CHUNK, None], axis=1
        )[:, 0]
    return labels, dist2

def _kmeanspp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    chosen = np.empty(k, dtype=np.int64)
    chosen[0] = rng.integers(n)
    d2 = ((X - X[chosen[0]]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total > 0.0:
            idx = rng.choice(n, p=d2 / total)
        else:  # all remaining mass is on already-chosen points
            idx = rng.integers(n)
        chosen[j] = idx
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return X[chosen].copy()


def fit_codebook(descriptors, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> Codebook:
    """Cluster descriptors into a k-word codebook (deterministic per seed)."""
    X = _check_descriptors(descriptors)
    if k < 1:
        raise ValueError("k must be >= 1")
    if X.shape[0] < k:
        raise ValueError(f"need at least k={k} descriptors, got {X.shape[0]}")
    rng = np.random.default_rng(seed)
    centroids = _kmeanspp_init(X, k, rng)
    labels, dist2 = _assign(X, centroids)
    objective = float(dist2.sum())
    history = [objective]
    for _ in range(max_iter):
        updated = centroids.copy()
        for j in range(k):
            members = labels == j
            if members.any():
                updated[j] = X[members].mean(axis=0)
        empty = [j for j in range(k) if not (labels == j).any()]
        if empty:
            # farthest descriptors take over empty clusters, one each
            order = np.argsort(-dist2, kind="stable")
            for slot, j in enumerate(empty):
                updated[j] = X[order[slot]]
        labels, dist2 = _assign(X, updated)
        new_objective = float(dist2.sum())
        assert new_objective <= objective * (1.0 + 1e-12) + 1e-12, "k-means objective increased"
        shift = float(np.sqrt(((updated - centroids) ** 2).sum(axis=1)).max())
        centroids = updated
        objective = new_objective
        history.append(objective)
        if shift < tol:
            break
    return Codebook(centroids=centroids, seed=int(seed), inertia_history=history)


def quantize(descriptor, codebook: Codebook) -> int:
    """Index of the nearest centroid; exact ties go to the lowest index."""
    x = np.asarray(descriptor, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != codebook.dim:
        raise ValueError(f"expected {codebook.dim} dimensions, got shape {x.shape}")
    labels, _ = _assign(x[None, :], codebook.centroids)
    return int(labels[0])


def encode(descriptors, codebook: Codebook) -> np.ndarray:
    """L1-normalized histogram of codeword assignments."""
    X = _check_descriptors(descriptors)
    if X.shape[0] == 0:
        raise ValueError("cannot encode an empty descriptor list")
    if X.shape[1] != codebook.dim:
        raise ValueError(f"expected {codebook.dim} dimensions, got {X.shape[1]}")
    labels, _ = _assign(X, codebook.centroids)
    counts = np.bincount(labels, minlength=codebook.k)
    return counts / counts.sum()


def encode_multichannel(descriptor_sets) -> np.ndarray:
    """Concatenate per-set encodings, e.g. four K=500 codebooks -> 2000 bins."""
    parts = [encode(descriptors, codebook) for descriptors, codebook in descriptor_sets]
    if not parts:
        raise ValueError("no descriptor sets to encode")
    return np.concatenate(parts)
