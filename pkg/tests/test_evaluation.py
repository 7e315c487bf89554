import itertools

import numpy as np
import pytest

from embkit.evaluation import (embedding_spread, fold_verification_accuracy,
                               kmeans, nmi, recall_at_k,
                               verification_threshold)
from embkit.simlab import uniform_sphere_points


def recall_bruteforce(embeddings, labels, k):
    """All-pairs sort oracle with index tie-breaking."""
    n = len(labels)
    hits = 0
    for q in range(n):
        cand = []
        for j in range(n):
            if j != q:
                cand.append((np.linalg.norm(embeddings[q] - embeddings[j]), j))
        cand.sort()
        if any(labels[j] == labels[q] for _, j in cand[:k]):
            hits += 1
    return hits / n


def threshold_bruteforce(distances, flags):
    d = np.asarray(distances, dtype=float)
    flags = np.asarray(flags, dtype=bool)
    ds = np.sort(d)
    candidates = sorted(set(0.5 * (a + b) for a, b in zip(ds[:-1], ds[1:])))
    best_t, best_acc = None, -1.0
    for t in candidates:
        pred = d < t
        acc = float(np.mean(pred == flags))
        if acc > best_acc:
            best_acc, best_t = acc, t
    return best_t, best_acc


class TestRecall:
    def test_two_tight_clusters(self):
        emb = np.array([[0, 0], [0.01, 0], [5, 5], [5.01, 5]])
        labels = np.array([0, 0, 1, 1])
        assert recall_at_k(emb, labels, [1])[1] == 1.0

    def test_all_unique_classes(self, rng):
        emb = rng.standard_normal((8, 4))
        out = recall_at_k(emb, np.arange(8), [1, 3, 5])
        assert all(v == 0.0 for v in out.values())

    def test_matches_bruteforce_random_instances(self, rng):
        for _ in range(200):
            n = int(rng.integers(4, 13))
            emb = rng.standard_normal((n, 3))
            labels = rng.integers(0, 3, n)
            ks = [k for k in (1, 2, 5) if k < n]
            got = recall_at_k(emb, labels, ks)
            for k in ks:
                assert got[k] == pytest.approx(
                    recall_bruteforce(emb, labels, k))

    def test_monotone_in_k(self, rng):
        emb = rng.standard_normal((30, 5))
        labels = rng.integers(0, 4, 30)
        out = recall_at_k(emb, labels, [1, 2, 4, 8, 16])
        vals = [out[k] for k in (1, 2, 4, 8, 16)]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_rotation_invariance(self, rng):
        emb = uniform_sphere_points(6, 40, rng)
        labels = rng.integers(0, 5, 40)
        q, _ = np.linalg.qr(rng.standard_normal((6, 6)))
        before = recall_at_k(emb, labels, [1, 3])
        after = recall_at_k(emb @ q, labels, [1, 3])
        assert before == after

    def test_k_out_of_range(self, rng):
        emb = rng.standard_normal((5, 2))
        with pytest.raises(ValueError):
            recall_at_k(emb, np.arange(5), [5])


class TestKmeans:
    def test_k_equals_n_zero_objective(self, rng):
        x = rng.standard_normal((6, 3))
        assign, history = kmeans(x, 6, seed=0, return_history=True)
        assert len(set(assign.tolist())) == 6
        assert history[-1] == pytest.approx(0.0, abs=1e-20)

    def test_two_blobs(self, rng):
        a = rng.normal(0, 0.05, (20, 4))
        b = rng.normal(3, 0.05, (20, 4)) + 3
        x = np.vstack([a, b])
        assign = kmeans(x, 2, seed=1)
        assert len(set(assign[:20].tolist())) == 1
        assert len(set(assign[20:].tolist())) == 1
        assert assign[0] != assign[20]

    def test_objective_nonincreasing(self, rng):
        x = rng.standard_normal((60, 5))
        _, history = kmeans(x, 4, seed=2, return_history=True)
        assert all(b <= a + 1e-9 for a, b in zip(history, history[1:]))

    def test_deterministic(self, rng):
        x = rng.standard_normal((40, 3))
        a1 = kmeans(x, 3, seed=9)
        a2 = kmeans(x, 3, seed=9)
        np.testing.assert_array_equal(a1, a2)

    def test_beats_random_assignment(self, rng):
        x = rng.standard_normal((50, 4))
        assign, history = kmeans(x, 5, seed=3, return_history=True)
        rand_assign = rng.integers(0, 5, 50)
        def objective(a):
            tot = 0.0
            for c in range(5):
                m = a == c
                if np.any(m):
                    tot += np.sum((x[m] - x[m].mean(axis=0)) ** 2)
            return tot
        assert history[-1] <= objective(rand_assign)

    def test_k_validation(self, rng):
        with pytest.raises(ValueError):
            kmeans(rng.standard_normal((4, 2)), 5, seed=0)


class TestNmi:
    def test_identical_up_to_permutation(self, rng):
        truth = rng.integers(0, 4, 50)
        perm = {0: 3, 1: 0, 2: 2, 3: 1}
        relabeled = np.array([perm[int(c)] for c in truth])
        assert nmi(relabeled, truth) == pytest.approx(1.0)

    def test_single_cluster_zero(self):
        assert nmi(np.zeros(10), np.array([0] * 5 + [1] * 5)) == 0.0

    def test_hand_computed_contingency(self):
        # 8 points: assignment (0,0,0,0,1,1,1,1), truth (0,0,1,1,0,0,1,1)
        # joint counts all 2/8; I = 0, so NMI = 0
        a = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        b = np.array([0, 0, 1, 1, 0, 0, 1, 1])
        assert nmi(a, b) == pytest.approx(0.0, abs=1e-12)
        # skewed example computed from the contingency definition
        a2 = np.array([0, 0, 0, 1, 1, 1, 1, 1])
        b2 = np.array([0, 0, 0, 0, 1, 1, 1, 1])
        pij = np.array([[3, 0], [1, 4]]) / 8.0
        pi, pj = pij.sum(1), pij.sum(0)
        mi = sum(pij[i, j] * np.log(pij[i, j] / (pi[i] * pj[j]))
                 for i in range(2) for j in range(2) if pij[i, j] > 0)
        expected = mi / np.sqrt(
            -(pi * np.log(pi)).sum() * -(pj * np.log(pj)).sum())
        assert nmi(a2, b2) == pytest.approx(expected, rel=1e-12)

    def test_symmetry_and_permutation_invariance(self, rng):
        for _ in range(100):
            n = int(rng.integers(5, 30))
            a = rng.integers(0, 4, n)
            b = rng.integers(0, 3, n)
            assert nmi(a, b) == pytest.approx(nmi(b, a), rel=1e-12)
            shuffled = (a + 7) % 11  # injective relabeling
            assert nmi(shuffled, b) == pytest.approx(nmi(a, b), rel=1e-12)

    def test_range(self, rng):
        for _ in range(50):
            a = rng.integers(0, 5, 40)
            b = rng.integers(0, 5, 40)
            v = nmi(a, b)
            assert -1e-12 <= v <= 1.0 + 1e-12


class TestVerificationThreshold:
    def test_separable(self):
        d = np.array([0.2, 0.2, 0.2, 1.5, 1.5])
        flags = np.array([True, True, True, False, False])
        thr, acc = verification_threshold(d, flags)
        assert acc == 1.0
        assert 0.2 < thr < 1.5

    def test_anti_separable_bounded_by_half(self):
        d = np.array([1.5] * 5 + [0.2] * 5)
        flags = np.array([True] * 5 + [False] * 5)
        _, acc = verification_threshold(d, flags)
        assert acc <= 0.5

    def test_matches_bruteforce(self, rng):
        for _ in range(200):
            n = int(rng.integers(4, 13))
            d = rng.uniform(0, 2, n)
            flags = rng.integers(0, 2, n).astype(bool)
            if flags.all() or not flags.any():
                continue
            thr, acc = verification_threshold(d, flags)
            bt, bacc = threshold_bruteforce(d, flags)
            assert acc == pytest.approx(bacc)
            assert thr == pytest.approx(bt)

    def test_requires_both_kinds(self):
        with pytest.raises(ValueError):
            verification_threshold([0.1, 0.2], [True, True])

    def test_fold_utility(self, rng):
        d = np.concatenate([rng.uniform(0, 0.5, 30), rng.uniform(1.0, 2.0, 30)])
        flags = np.array([True] * 30 + [False] * 30)
        accs = fold_verification_accuracy(d, flags, n_folds=5, seed=3)
        assert len(accs) == 5
        assert all(a == 1.0 for a in accs)


class TestSpread:
    def test_identical_embeddings(self):
        assert embedding_spread(np.ones((5, 3))) == 0.0

    def test_matches_manual_mean(self, rng):
        x = rng.standard_normal((10, 4))
        manual = np.mean([np.linalg.norm(x[i] - x[j])
                          for i, j in itertools.combinations(range(10), 2)])
        assert embedding_spread(x) == pytest.approx(manual)
