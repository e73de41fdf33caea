"""Exact flat nearest-neighbor search over sentence embeddings.

Distances are squared L2 (no square root), the usual flat-index convention;
ordering is unaffected. Query-time math runs in double precision so results
are reproducible and comparable against a naive oracle scan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .embeddings import SentenceStore


class VectorIndexError(ValueError):
    """Raised for index construction or query contract violations."""


@dataclass(frozen=True)
class Neighbor:
    id: str
    distance: float  # squared L2, >= 0


class FlatIndex:
    """Immutable exhaustive index; ids keep the store's insertion order."""

    def __init__(self, ids: list[str], vectors: np.ndarray):
        vectors = np.asarray(vectors)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise VectorIndexError("index needs a non-empty (count, dim) matrix")
        if len(ids) != vectors.shape[0]:
            raise VectorIndexError(f"{len(ids)} ids for {vectors.shape[0]} vectors")
        if len(set(ids)) != len(ids):
            raise VectorIndexError("duplicate ids")
        self.ids = list(ids)
        self.vectors = vectors.astype(np.float64)
        self.dim = int(vectors.shape[1])
        self._id_array = np.asarray(self.ids)

    def __len__(self) -> int:
        return len(self.ids)

    def search(self, query: np.ndarray, k: int) -> list[Neighbor]:
        """Top-k nearest neighbors by squared L2, ascending; ties broken by
        id ascending. Returns min(k, count) results."""
        query = np.asarray(query, dtype=np.float64)
        if query.shape != (self.dim,):
            raise VectorIndexError(f"query dim {query.shape} does not match index dim {self.dim}")
        if k < 1:
            raise VectorIndexError(f"k must be >= 1, got {k}")
        diff = self.vectors - query
        distances = np.einsum("ij,ij->i", diff, diff)
        order = np.lexsort((self._id_array, distances))[:k]
        return [Neighbor(id=self.ids[i], distance=float(distances[i])) for i in order]


def build_index(store: SentenceStore) -> FlatIndex:
    if len(store) == 0:
        raise VectorIndexError("cannot build an index over an empty store")
    return FlatIndex(ids=list(store.ids), vectors=store.vectors)


def l2_distance_sq(u: np.ndarray, v: np.ndarray) -> float:
    """Squared Euclidean distance, accumulated in double precision."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise VectorIndexError(f"dimension mismatch: {u.shape} vs {v.shape}")
    diff = u - v
    return float(np.dot(diff, diff))
