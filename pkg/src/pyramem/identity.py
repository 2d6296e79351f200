"""Incremental person-identity tracking.

Two stages per clip: local clustering of the clip's face embeddings, then a
global merge that compares each local centroid against existing person
centroids by cosine similarity (absorb on >= theta_global, else a new
person).  The local stage is pluggable; the default is deterministic
single-linkage threshold clustering, which keeps the whole bank a pure
function of the observation order.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Protocol

import numpy as np

from .types import PersonEntity

logger = logging.getLogger(__name__)

DEFAULT_THETA_LOCAL = 0.6
DEFAULT_THETA_GLOBAL = 0.5


class IdentityError(Exception):
    pass


class PersonNotFound(IdentityError, KeyError):
    pass


@dataclass
class FaceObservation:
    """One detected face: unit embedding plus where it came from."""

    embedding: np.ndarray
    evidence: str | None = None  # fact node id the face was seen in
    label: str | None = None  # extractor-provided mention, if any


@dataclass
class LocalCluster:
    """Faces of one clip grouped by similarity; centroid is unit norm."""

    member_embeddings: list[np.ndarray]
    centroid: np.ndarray
    member_indices: list[int] = field(default_factory=list)


class LocalClusterer(Protocol):
    def __call__(self, faces: list[np.ndarray], theta_local: float) -> list[LocalCluster]: ...


def _unit(vec: np.ndarray) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise IdentityError("zero face embedding")
    return arr / norm


def cluster_local(faces: list[np.ndarray], theta_local: float) -> list[LocalCluster]:
    """Single-linkage threshold clustering over unit embeddings.

    Any two faces with cosine >= theta_local end up in the same cluster,
    transitively.  Clusters are ordered by their smallest member index and
    members keep input order, so the partition is deterministic.
    """
    if not (0.0 < theta_local < 1.0):
        raise ValueError("theta_local must be in (0, 1)")
    if not faces:
        return []
    units = [_unit(f) for f in faces]
    dims = {u.shape[0] for u in units}
    if len(dims) > 1:
        raise IdentityError(f"mixed face embedding dimensions: {sorted(dims)}")
    parent = list(range(len(units)))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(units)):
        for j in range(i + 1, len(units)):
            if float(np.dot(units[i], units[j])) >= theta_local:
                parent[find(j)] = find(i)
    groups: dict[int, list[int]] = {}
    for i in range(len(units)):
        groups.setdefault(find(i), []).append(i)
    clusters = []
    for root in sorted(groups, key=lambda r: min(groups[r])):
        indices = groups[root]
        members = [units[i] for i in indices]
        centroid = _unit(np.mean(members, axis=0))
        clusters.append(LocalCluster(member_embeddings=members, centroid=centroid,
                                     member_indices=indices))
    return clusters


@dataclass
class Assignment:
    """Outcome of merging one local cluster into the bank."""

    cluster: LocalCluster
    person_id: str
    created: bool


class IdentityBank:
    """Global person registry with count-weighted centroid merging.

    The bank mutates the persons map it is given (normally the store's),
    so identities serialize with the rest of the memory state.
    """

    def __init__(self, dim: int, *, theta_local: float = DEFAULT_THETA_LOCAL,
                 theta_global: float = DEFAULT_THETA_GLOBAL,
                 clusterer: LocalClusterer = cluster_local,
                 persons: dict[str, PersonEntity] | None = None,
                 allocate_id: Callable[[], str] | None = None,
                 on_upsert: Callable[[PersonEntity], None] | None = None):
        if not (0.0 < theta_global < 1.0):
            raise ValueError("theta_global must be in (0, 1)")
        self.dim = dim
        self.theta_local = theta_local
        self.theta_global = theta_global
        self.clusterer = clusterer
        self.persons = persons if persons is not None else {}
        self._counter = len(self.persons)
        self._allocate_id = allocate_id or self._default_id
        self._on_upsert = on_upsert

    def _default_id(self) -> str:
        self._counter += 1
        return f"p-{self._counter}"

    def _upsert(self, person: PersonEntity) -> None:
        self.persons[person.person_id] = person
        if self._on_upsert is not None:
            self._on_upsert(person)

    def merge_global(self, locals_: list[LocalCluster]) -> list[Assignment]:
        """Merge local clusters into global identities, in input order.

        A cluster joins the person with the highest centroid cosine when
        that cosine reaches theta_global; ties go to the earliest person.
        Otherwise a new person is created.  Absorbing updates the person
        centroid to the count-weighted mean (renormalized) and adds the
        cluster size to the observation count.
        """
        assignments: list[Assignment] = []
        for cluster in locals_:
            centroid = np.asarray(cluster.centroid, dtype=np.float64)
            if centroid.shape[0] != self.dim:
                raise IdentityError(
                    f"cluster dimension {centroid.shape[0]} != bank dimension {self.dim}")
            best_id, best_cos = None, -2.0
            for pid, person in self.persons.items():
                cos = float(np.dot(centroid, np.asarray(person.face_centroid)))
                if cos > best_cos:
                    best_id, best_cos = pid, cos
            size = len(cluster.member_embeddings)
            if best_id is not None and best_cos >= self.theta_global:
                person = self.persons[best_id]
                merged = (person.observation_count * np.asarray(person.face_centroid)
                          + size * centroid)
                person.face_centroid = _unit(merged).tolist()
                person.observation_count += size
                self._upsert(person)
                assignments.append(Assignment(cluster, best_id, created=False))
            else:
                person = PersonEntity(person_id=self._allocate_id(),
                                      face_centroid=centroid.tolist(),
                                      observation_count=size)
                self._upsert(person)
                assignments.append(Assignment(cluster, person.person_id, created=True))
        return assignments

    def observe_clip(self, observations: list[FaceObservation]) -> list[Assignment]:
        """Cluster one clip's faces locally, then merge into the bank."""
        if not observations:
            return []
        clusters = self.clusterer([obs.embedding for obs in observations],
                                  self.theta_local)
        assignments = self.merge_global(clusters)
        for assignment in assignments:
            person = self.persons[assignment.person_id]
            for idx in assignment.cluster.member_indices:
                evidence = observations[idx].evidence
                if evidence and evidence not in person.evidence:
                    person.evidence.append(evidence)
            self._upsert(person)
        return assignments

    def update_profile(self, person_id: str, new_character_facts: list[str],
                       profiler, evidence: list[str] | None = None) -> PersonEntity:
        """Fold new character facts into the person's profile.

        Atomic on adapter failure: the profile (and evidence list) are left
        unchanged and the error propagates.
        """
        person = self.persons.get(person_id)
        if person is None:
            raise PersonNotFound(person_id)
        merged = profiler.merge(person.profile, list(new_character_facts))
        person.profile = str(merged)
        for ref in evidence or []:
            if ref not in person.evidence:
                person.evidence.append(ref)
        self._upsert(person)
        return person
