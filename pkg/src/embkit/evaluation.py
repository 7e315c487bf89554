"""Retrieval, clustering, and verification metrics."""

from dataclasses import dataclass, field

import numpy as np

from ._core import cross_distances, pairwise_distances

KMEANS_MAX_ITER = 300


@dataclass
class EpochRecord:
    """Metrics logged once per training epoch."""

    epoch: int
    mean_loss: float
    spread: float
    recall: dict            # k -> recall@k on the held-out split
    nmi: float
    verification_threshold: float
    verification_accuracy: float
    beta0: float = float("nan")
    semihard_fallbacks: int = 0
    degenerate_pairs: int = 0

    def to_dict(self):
        return {
            "epoch": self.epoch,
            "mean_loss": self.mean_loss,
            "spread": self.spread,
            "recall": {str(k): v for k, v in self.recall.items()},
            "nmi": self.nmi,
            "verification_threshold": self.verification_threshold,
            "verification_accuracy": self.verification_accuracy,
            "beta0": self.beta0,
            "semihard_fallbacks": self.semihard_fallbacks,
            "degenerate_pairs": self.degenerate_pairs,
        }


@dataclass
class MetricsLog:
    records: list = field(default_factory=list)

    def append(self, rec):
        self.records.append(rec)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def last(self):
        return self.records[-1]

    def best_recall(self, k=1):
        return max(r.recall[k] for r in self.records)


def recall_at_k(embeddings, labels, ks):
    """Recall@k: fraction of queries whose k nearest others include a
    same-class example. Self is excluded; equal distances break toward the
    lower index.
    """
    labels = np.asarray(labels)
    n = len(labels)
    if n < 2:
        raise ValueError("recall needs at least 2 examples")
    ks = list(ks)
    if any(k < 1 or k >= n for k in ks):
        raise ValueError(f"every k must lie in [1, {n - 1}]")
    dists = pairwise_distances(embeddings)
    np.fill_diagonal(dists, np.inf)
    order = np.argsort(dists, axis=1, kind="stable")
    same = labels[order] == labels[:, None]
    out = {}
    for k in ks:
        out[k] = float(np.mean(np.any(same[:, :k], axis=1)))
    return out


def kmeans(embeddings, k, seed, return_history=False):
    """Lloyd's algorithm with k-means++ seeding.

    Runs to an assignment fixpoint or KMEANS_MAX_ITER sweeps. An emptied
    cluster is re-seeded at the point farthest from its current centroid.
    Deterministic for a fixed seed.
    """
    x = np.asarray(embeddings, dtype=np.float64)
    n = len(x)
    if not (1 <= k <= n):
        raise ValueError(f"k must lie in [1, {n}]")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest_sq = cross_distances(x, centers[:1]).ravel() ** 2
    for c in range(1, k):
        total = closest_sq.sum()
        if total <= 0:
            centers[c] = x[rng.integers(n)]
        else:
            centers[c] = x[rng.choice(n, p=closest_sq / total)]
        closest_sq = np.minimum(closest_sq,
                                cross_distances(x, centers[c:c + 1]).ravel() ** 2)

    assign = np.full(n, -1, dtype=np.intp)
    history = []
    for _ in range(KMEANS_MAX_ITER):
        d = cross_distances(x, centers)
        new_assign = np.argmin(d, axis=1)
        history.append(float(np.sum(np.min(d, axis=1) ** 2)))
        for c in range(k):
            members = new_assign == c
            if np.any(members):
                centers[c] = x[members].mean(axis=0)
            else:
                farthest = int(np.argmax(np.min(d, axis=1)))
                centers[c] = x[farthest]
                new_assign[farthest] = c
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    if return_history:
        return assign, history
    return assign


def nmi(assignment, ground_truth):
    """Mutual information normalized by sqrt(H(assignment) H(truth)).

    Zero by convention when either clustering has zero entropy.
    """
    a = np.asarray(assignment)
    b = np.asarray(ground_truth)
    if len(a) != len(b):
        raise ValueError("clusterings must have equal length")
    n = len(a)
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    counts = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(counts, (ai, bi), 1.0)
    pij = counts / n
    pi = pij.sum(axis=1)
    pj = pij.sum(axis=0)
    ha = -np.sum(pi[pi > 0] * np.log(pi[pi > 0]))
    hb = -np.sum(pj[pj > 0] * np.log(pj[pj > 0]))
    if ha <= 0.0 or hb <= 0.0:
        return 0.0
    nz = pij > 0
    mi = np.sum(pij[nz] * (np.log(pij[nz]) - np.log(np.outer(pi, pj)[nz])))
    return float(mi / np.sqrt(ha * hb))


def verification_threshold(distances, same_flags):
    """Best distance cutoff for pair verification: predict same iff d < t.

    Candidate thresholds are the midpoints between consecutive sorted
    distances; accuracy ties resolve to the smallest threshold. Returns
    (threshold, accuracy).
    """
    d = np.asarray(distances, dtype=np.float64)
    flags = np.asarray(same_flags, dtype=bool)
    if len(d) != len(flags) or len(d) == 0:
        raise ValueError("need aligned, nonempty distances and flags")
    if flags.all() or not flags.any():
        raise ValueError("need at least one pair of each kind")
    order = np.argsort(d, kind="stable")
    ds = d[order]
    fs = flags[order]
    candidates = np.unique(0.5 * (ds[:-1] + ds[1:]))
    cum_pos = np.concatenate([[0], np.cumsum(fs)])
    total_pos = cum_pos[-1]
    total = len(d)
    j = np.searchsorted(ds, candidates, side="left")
    # predicted same: the j closest pairs; correct = positives below + negatives above
    acc = (cum_pos[j] + ((total - j) - (total_pos - cum_pos[j]))) / total
    best = int(np.argmax(acc))  # argmax takes the first (smallest) candidate on ties
    return float(candidates[best]), float(acc[best])


def fold_verification_accuracy(distances, same_flags, n_folds, seed):
    """Cross-fold verification: pick the threshold on the other folds, score
    the held-out fold. Returns the per-fold accuracies."""
    d = np.asarray(distances, dtype=np.float64)
    flags = np.asarray(same_flags, dtype=bool)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(d))
    folds = np.array_split(perm, n_folds)
    accs = []
    for held in folds:
        rest = np.setdiff1d(perm, held)
        thr, _ = verification_threshold(d[rest], flags[rest])
        pred = d[held] < thr
        accs.append(float(np.mean(pred == flags[held])))
    return accs


def embedding_spread(embeddings):
    """Mean pairwise distance; a collapse diagnostic."""
    d = pairwise_distances(embeddings)
    n = len(d)
    if n < 2:
        return 0.0
    iu = np.triu_indices(n, k=1)
    return float(d[iu].mean())
