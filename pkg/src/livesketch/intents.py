"""Grouping search results into candidate intents.

Results are clustered in the auxiliary semantic space: affinity propagation
proposes exemplar-based candidate clusters, then a greedy pass selects up to
m of them, minimizing an objective that combines intra-cluster distance mass
with a diversity bonus for clusters far from everything already selected.
Each selected cluster gets a representative item (closest to the query in
search space) and a target sketch drawn from the sketch corpus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import pq
from .sketch import Sketch

DIVERSITY_FLOOR = 1e-6


def pairwise_affinity(z_vectors: np.ndarray) -> np.ndarray:
    """Symmetric L2 distance matrix with a zero diagonal."""
    z = np.asarray(z_vectors, dtype=np.float64)
    sq = (z**2).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * z @ z.T
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(np.maximum(d2, 0.0))


def affinity_propagation(
    distances: np.ndarray,
    damping: float = 0.5,
    max_iter: int = 200,
    convergence_iter: int = 15,
) -> list[list[int]]:
    """Classic responsibility/availability message passing.

    Similarity is -d**2 with preference set to the median similarity.
    Deterministic: no degeneracy noise; argmax ties resolve to the lowest
    index. Returns candidate clusters as lists of point indices (a partition).
    """
    n = distances.shape[0]
    if n == 1:
        return [[0]]
    s = -(distances.astype(np.float64) ** 2)
    off_diag = s[~np.eye(n, dtype=bool)]
    np.fill_diagonal(s, np.median(off_diag))

    r = np.zeros((n, n))
    a = np.zeros((n, n))
    stable = 0
    last_exemplars: tuple = ()
    for _ in range(max_iter):
        # responsibilities
        asum = a + s
        idx = np.argmax(asum, axis=1)
        first = asum[np.arange(n), idx]
        asum[np.arange(n), idx] = -np.inf
        second = asum.max(axis=1)
        r_new = s - first[:, None]
        r_new[np.arange(n), idx] = s[np.arange(n), idx] - second
        r = damping * r + (1.0 - damping) * r_new

        # availabilities
        rp = np.maximum(r, 0.0)
        np.fill_diagonal(rp, np.diag(r))
        a_new = rp.sum(axis=0)[None, :] - rp
        diag = np.diag(a_new).copy()
        a_new = np.minimum(a_new, 0.0)
        np.fill_diagonal(a_new, diag)
        a = damping * a + (1.0 - damping) * a_new

        exemplars = tuple(np.flatnonzero(np.diag(r) + np.diag(a) > 0).tolist())
        if exemplars and exemplars == last_exemplars:
            stable += 1
            if stable >= convergence_iter:
                break
        else:
            stable = 0
            last_exemplars = exemplars

    exemplars = np.flatnonzero(np.diag(r) + np.diag(a) > 0)
    if len(exemplars) == 0:
        exemplars = np.array([int(np.argmax(np.diag(r) + np.diag(a)))])
    assign = exemplars[np.argmax(s[:, exemplars], axis=1)]
    assign[exemplars] = exemplars
    return [np.flatnonzero(assign == e).tolist() for e in exemplars]


def intra_distance_sum(members: list[int], distances: np.ndarray) -> float:
    """Distance mass over the full member x member product (diagonal is zero)."""
    idx = np.asarray(members)
    return float(distances[np.ix_(idx, idx)].sum())


def diversity_penalty(members: list[int], selected: list[int], distances: np.ndarray, lam: float = 1.0) -> float:
    """-lam * log of the distance mass between a candidate and already-selected items.

    Large distance to the selected pool gives a more negative (more
    favorable) value; the sum is floored to keep the log finite, which also
    makes the penalty a shared constant when nothing is selected yet.
    """
    if selected:
        mass = float(distances[np.ix_(np.asarray(members), np.asarray(selected))].sum())
    else:
        mass = 0.0
    return -lam * math.log(max(mass, DIVERSITY_FLOOR))


def cluster_objective(members: list[int], selected: list[int], distances: np.ndarray, lam: float = 1.0) -> float:
    return intra_distance_sum(members, distances) + diversity_penalty(members, selected, distances, lam)


def greedy_select(
    candidates: list[list[int]],
    distances: np.ndarray,
    m: int,
    lam: float = 1.0,
) -> tuple[list[list[int]], float]:
    """Pick up to m candidate clusters, each minimizing the current objective.

    Returns the ordered selection and the total objective it accumulated.
    """
    remaining = [list(c) for c in candidates]
    chosen: list[list[int]] = []
    covered: list[int] = []
    total = 0.0
    while remaining and len(chosen) < m:
        scores = [cluster_objective(c, covered, distances, lam) for c in remaining]
        best = int(np.argmin(scores))
        total += scores[best]
        picked = remaining.pop(best)
        chosen.append(picked)
        covered.extend(picked)
    return chosen, total


@dataclass
class IntentCluster:
    member_ids: list[int]
    member_z: np.ndarray
    member_s: np.ndarray | None = None
    representative_id: int | None = None
    target_sketch: Sketch | None = None
    target_s: np.ndarray | None = None
    target_v: np.ndarray | None = None


@dataclass
class IntentClusterSet:
    clusters: list[IntentCluster] = field(default_factory=list)
    weights: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.clusters)


def cluster_results(
    result_ids: list[int],
    z_vectors: np.ndarray,
    m: int = 3,
    *,
    s_vectors: np.ndarray | None = None,
    damping: float = 0.5,
    lam: float = 1.0,
) -> IntentClusterSet:
    """Candidate clusters from affinity propagation, then greedy diverse selection."""
    if len(result_ids) == 0:
        return IntentClusterSet()
    z = np.atleast_2d(np.asarray(z_vectors, dtype=np.float64))
    distances = pairwise_affinity(z)
    candidates = affinity_propagation(distances, damping=damping)
    chosen, _ = greedy_select(candidates, distances, m, lam)
    clusters = []
    for members in chosen:
        ids = [int(result_ids[i]) for i in members]
        clusters.append(
            IntentCluster(
                member_ids=ids,
                member_z=z[members],
                member_s=None if s_vectors is None else np.asarray(s_vectors)[members],
            )
        )
    return IntentClusterSet(clusters=clusters, weights=[0.0] * len(clusters))


def representative_image(cluster: IntentCluster, query_s: np.ndarray) -> int:
    """Member whose search-space vector is closest to the query; ties by id."""
    if not cluster.member_ids:
        raise ValueError("empty cluster")
    if cluster.member_s is None:
        raise ValueError("cluster has no search-space vectors")
    d = np.linalg.norm(cluster.member_s.astype(np.float64) - np.asarray(query_s, dtype=np.float64), axis=1)
    order = np.lexsort((np.asarray(cluster.member_ids), d))
    return int(cluster.member_ids[order[0]])


def nearest_sketch_target(representative_s: np.ndarray, sketch_index: pq.PQIndex, sketches: dict[int, Sketch]) -> tuple[int, Sketch]:
    """Closest corpus sketch (in search space) to a representative image."""
    if len(sketch_index.ids) == 0:
        raise ValueError("empty sketch corpus index")
    res = pq.knn(sketch_index, np.asarray(representative_s, dtype=np.float64), 1)
    sid = int(res.ids[0])
    return sid, sketches[sid]
