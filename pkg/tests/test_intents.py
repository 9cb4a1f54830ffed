"""Intent clustering: affinity matrix, candidate generation, greedy selection vs exhaustion."""

from itertools import permutations

import numpy as np
import pytest

from livesketch import pq
from livesketch.intents import (
    IntentCluster,
    affinity_propagation,
    cluster_objective,
    cluster_results,
    diversity_penalty,
    greedy_select,
    intra_distance_sum,
    nearest_sketch_target,
    pairwise_affinity,
    representative_image,
)
from livesketch.sketch import Sketch

RNG = np.random.default_rng(808)


def set_partitions(items, blocks):
    """All partitions of `items` into exactly `blocks` non-empty parts."""
    items = list(items)

    def rec(i, parts):
        if i == len(items):
            if len(parts) == blocks:
                yield [list(p) for p in parts]
            return
        remaining = len(items) - i
        for j, p in enumerate(parts):
            if len(parts) + remaining - 1 >= blocks:
                p.append(items[i])
                yield from rec(i + 1, parts)
                p.pop()
        if len(parts) < blocks:
            parts.append([items[i]])
            yield from rec(i + 1, parts)
            parts.pop()

    yield from rec(0, [])


def exhaustive_optimum(distances, m, lam=1.0):
    """Minimum accumulated objective over ordered partitions into m blocks."""
    n = distances.shape[0]
    best = np.inf
    best_parts = None
    for parts in set_partitions(range(n), m):
        for order in permutations(parts):
            covered = []
            total = 0.0
            for block in order:
                total += cluster_objective(list(block), covered, distances, lam)
                covered.extend(block)
            if total < best:
                best = total
                best_parts = [sorted(b) for b in order]
    return best, best_parts


def blobs(rng, counts, spread=0.1, gap=8.0, dim=4):
    parts = []
    for i, c in enumerate(counts):
        center = np.zeros(dim)
        center[i % dim] = gap * (1 + i // dim)
        parts.append(rng.standard_normal((c, dim)) * spread + center)
    return np.concatenate(parts)


class TestAffinityMatrix:
    def test_identical_vectors_give_zero(self):
        z = np.tile(RNG.standard_normal(5), (3, 1))
        assert pairwise_affinity(z).max() == 0.0

    def test_symmetry_and_zero_diagonal(self):
        z = RNG.standard_normal((7, 6))
        d = pairwise_affinity(z)
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0.0)

    def test_matches_direct_norm_computation(self):
        z = RNG.standard_normal((9, 5))
        d = pairwise_affinity(z)
        for i in range(9):
            for j in range(9):
                assert d[i, j] == pytest.approx(np.linalg.norm(z[i] - z[j]), abs=1e-9)


class TestAffinityPropagation:
    def test_two_blobs_recovered(self):
        z = blobs(np.random.default_rng(1), [6, 6])
        cands = affinity_propagation(pairwise_affinity(z))
        assert sorted(sorted(c) for c in cands) == [list(range(6)), list(range(6, 12))]

    def test_partition_property(self):
        z = RNG.standard_normal((15, 4))
        cands = affinity_propagation(pairwise_affinity(z))
        flat = sorted(i for c in cands for i in c)
        assert flat == list(range(15))

    def test_single_point(self):
        assert affinity_propagation(np.zeros((1, 1))) == [[0]]


class TestGreedySelection:
    def test_diversity_penalty_prefers_far_clusters(self):
        # same candidate intra structure, different distance to the selected pool
        d = np.zeros((6, 6))
        # points 0,1 selected; candidate A = {2,3} near, candidate B = {4,5} far
        for i, j, v in [(0, 2, 1.0), (0, 3, 1.0), (1, 2, 1.0), (1, 3, 1.0), (0, 4, 9.0), (0, 5, 9.0), (1, 4, 9.0), (1, 5, 9.0)]:
            d[i, j] = d[j, i] = v
        near = diversity_penalty([2, 3], [0, 1], d)
        far = diversity_penalty([4, 5], [0, 1], d)
        assert far < near

    def test_empty_selection_gives_constant_floor_penalty(self):
        d = RNG.uniform(1, 2, size=(4, 4))
        np.fill_diagonal(d, 0)
        assert diversity_penalty([0, 1], [], d) == diversity_penalty([2, 3], [], d)

    @pytest.mark.parametrize("counts,seed", [([6, 6], 0), ([5, 5], 3), ([4, 4], 7), ([6, 4], 11)])
    def test_two_blob_greedy_matches_exhaustive_partition_optimum(self, counts, seed):
        rng = np.random.default_rng(seed)
        z = blobs(rng, counts)
        d = pairwise_affinity(z)
        cands = affinity_propagation(d)
        chosen, total = greedy_select(cands, d, m=2)
        opt, opt_parts = exhaustive_optimum(d, 2)
        want = [list(range(counts[0])), list(range(counts[0], sum(counts)))]
        assert sorted(sorted(c) for c in chosen) == want
        assert sorted(opt_parts[i] for i in range(2)) == want
        assert total == pytest.approx(opt, rel=1e-9)

    @pytest.mark.parametrize("seed", [2, 5])
    def test_three_blob_greedy_objective_within_ten_percent(self, seed):
        rng = np.random.default_rng(seed)
        z = blobs(rng, [3, 3, 3])
        d = pairwise_affinity(z)
        cands = affinity_propagation(d)
        chosen, total = greedy_select(cands, d, m=3)
        opt, _ = exhaustive_optimum(d, 3)
        assert total <= opt + 0.1 * abs(opt)

    def test_disjointness_on_random_inputs(self):
        for trial in range(10):
            z = RNG.standard_normal((14, 4)) * RNG.uniform(0.5, 4)
            cs = cluster_results(list(range(14)), z, m=3)
            seen = set()
            for c in cs.clusters:
                assert not (seen & set(c.member_ids))
                seen |= set(c.member_ids)

    def test_fewer_clusters_than_m_when_candidates_exhausted(self):
        z = blobs(np.random.default_rng(0), [5, 5])
        cs = cluster_results(list(range(10)), z, m=3)
        assert 1 <= len(cs) <= 3

    def test_single_result_gives_singleton_cluster(self):
        cs = cluster_results([123], RNG.standard_normal((1, 6)), m=3)
        assert len(cs) == 1
        assert cs.clusters[0].member_ids == [123]
        assert intra_distance_sum([0], np.zeros((1, 1))) == 0.0

    def test_empty_results_give_empty_set(self):
        assert len(cluster_results([], np.empty((0, 4)), m=3)) == 0

    def test_deterministic(self):
        z = RNG.standard_normal((12, 4))
        a = cluster_results(list(range(12)), z.copy(), m=3)
        b = cluster_results(list(range(12)), z.copy(), m=3)
        assert [c.member_ids for c in a.clusters] == [c.member_ids for c in b.clusters]


class TestRepresentativeAndTargets:
    def test_singleton_cluster_returns_member(self):
        c = IntentCluster(member_ids=[9], member_z=np.zeros((1, 2)), member_s=RNG.standard_normal((1, 4)))
        assert representative_image(c, RNG.standard_normal(4)) == 9

    def test_member_equal_to_query_selected(self):
        q = RNG.standard_normal(4)
        s = np.vstack([RNG.standard_normal(4) + 3, q, RNG.standard_normal(4) - 3])
        c = IntentCluster(member_ids=[4, 5, 6], member_z=np.zeros((3, 2)), member_s=s)
        assert representative_image(c, q) == 5

    def test_matches_linear_scan_oracle(self):
        for _ in range(10):
            n = int(RNG.integers(2, 9))
            s = RNG.standard_normal((n, 6))
            ids = RNG.permutation(100)[:n].tolist()
            q = RNG.standard_normal(6)
            c = IntentCluster(member_ids=ids, member_z=np.zeros((n, 1)), member_s=s)
            dists = [float(np.linalg.norm(s[i] - q)) for i in range(n)]
            best = min(range(n), key=lambda i: (dists[i], ids[i]))
            assert representative_image(c, q) == ids[best]

    def _sketch(self):
        return Sketch([[0, 0, 0], [1, 1, 1]])

    def test_single_sketch_corpus(self):
        vec = RNG.standard_normal(8).astype(np.float32)
        index = pq.build(vec[None, :], [7], {"subspaces": 2, "centroids": 1, "exact": True})
        sid, sk = nearest_sketch_target(RNG.standard_normal(8), index, {7: self._sketch()})
        assert sid == 7

    def test_corpus_containing_matching_vector_returns_it(self):
        vecs = RNG.standard_normal((20, 8)).astype(np.float32)
        index = pq.build(vecs, np.arange(20), {"subspaces": 2, "centroids": 16, "exact": True})
        sketches = {i: self._sketch() for i in range(20)}
        sid, _ = nearest_sketch_target(vecs[13], index, sketches)
        assert sid == 13

    def test_agrees_with_brute_force_scan(self):
        vecs = RNG.standard_normal((1000, 8)).astype(np.float32)
        index = pq.build(vecs, np.arange(1000), {"subspaces": 2, "centroids": 64, "exact": True})
        sketches = {i: self._sketch() for i in range(1000)}
        for _ in range(5):
            q = RNG.standard_normal(8)
            sid, _ = nearest_sketch_target(q, index, sketches)
            assert sid == int(pq.brute_force(vecs, q, 1).ids[0])

    def test_empty_corpus_rejected(self):
        index = pq.build(np.ones((1, 4), dtype=np.float32), [0], {"subspaces": 2, "centroids": 1})
        index.ids = np.empty(0, dtype=np.int64)
        with pytest.raises(ValueError):
            nearest_sketch_target(np.ones(4), index, {})
