"""Exact cosine top-k search over per-node embedding vectors.

The index is the deterministic baseline backend: an exhaustive scan with a
total result order (score descending, node id ascending on ties).  Stores at
desk scale are small, so exactness beats approximate recall here.  Writers
are exclusive; readers snapshot the entry table so a query never observes a
torn upsert.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable

import numpy as np


class IndexError_(ValueError):
    """Base class for index rejections."""


class DimensionMismatch(IndexError_):
    def __init__(self, expected: int, actual: int):
        super().__init__(f"expected dimension {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class ZeroVectorError(IndexError_):
    def __init__(self):
        super().__init__("zero vector rejected: cosine similarity is undefined")


@dataclass(frozen=True)
class ScoredHit:
    """One ranked result: node id plus cosine similarity in [-1, 1]."""

    id: str
    score: float


def as_unit_vector(vector, dim: int) -> np.ndarray:
    """Validate dimension and non-zero norm, return a float64 unit copy."""
    arr = np.asarray(vector, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] != dim:
        raise DimensionMismatch(dim, int(arr.shape[0]) if arr.ndim == 1 else -1)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0 or not np.isfinite(norm):
        raise ZeroVectorError()
    return arr / norm


class VectorIndex:
    """In-memory exact cosine index with optional per-entry level tags."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("dimension must be >= 1")
        self.dim = dim
        self._entries: dict[str, tuple[np.ndarray, str | None]] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._entries

    def upsert(self, node_id: str, vector, tag: str | None = None) -> None:
        """Insert or replace the vector for node_id; last write wins."""
        unit = as_unit_vector(vector, self.dim)
        with self._lock:
            self._entries[node_id] = (unit, tag)

    def remove(self, node_id: str) -> None:
        with self._lock:
            self._entries.pop(node_id, None)

    def tag_of(self, node_id: str) -> str | None:
        entry = self._entries.get(node_id)
        return entry[1] if entry else None

    def ids(self) -> list[str]:
        with self._lock:
            return list(self._entries)

    def top_k(self, query, k: int, *, tag: str | None = None,
              filter: Callable[[str], bool] | None = None) -> list[ScoredHit]:
        """Return the k highest-cosine entries passing the filters.

        Results are sorted by score descending, then node id ascending, so
        repeated queries over the same content are byte-identical.  An empty
        index yields an empty list.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        unit_q = as_unit_vector(query, self.dim)
        with self._lock:
            snapshot = list(self._entries.items())
        scored: list[tuple[float, str]] = []
        for node_id, (unit_v, entry_tag) in snapshot:
            if tag is not None and entry_tag != tag:
                continue
            if filter is not None and not filter(node_id):
                continue
            scored.append((float(np.dot(unit_q, unit_v)), node_id))
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        return [ScoredHit(id=node_id, score=score) for score, node_id in scored[:k]]


def brute_force_rank(entries: Iterable[tuple[str, np.ndarray]], query) -> list[ScoredHit]:
    """Independent exhaustive ranking used as the test oracle.

    Deliberately avoids VectorIndex internals: raw cosine per pair, then a
    full sort with the same tie rule.
    """
    q = np.asarray(query, dtype=np.float64)
    qn = float(np.linalg.norm(q))
    hits = []
    for node_id, vec in entries:
        v = np.asarray(vec, dtype=np.float64)
        score = float(np.dot(q, v) / (qn * float(np.linalg.norm(v))))
        hits.append((score, node_id))
    hits.sort(key=lambda pair: (-pair[0], pair[1]))
    return [ScoredHit(id=node_id, score=score) for score, node_id in hits]
