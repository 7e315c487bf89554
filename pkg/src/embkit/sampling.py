"""Batch construction and negative-selection strategies.

A batch is n/m classes with exactly m examples each. All ordered same-class
pairs are enumerated; each member of a positive pair then draws one negative
under the configured strategy, which balances positive and negative pair
counts. Distances come from one full pairwise matrix per batch.

Strategies:
  random            uniform over other-class examples
  semihard          closest negative farther than the reference distance
                    (a fixed floor for pairwise losses); uniform fallback
                    when no candidate qualifies
  distance_weighted categorical draw proportional to the clipped inverse of
                    the uniform-sphere distance density
  hardest           closest negative outright (the known collapse mode,
                    kept for diagnostics)
"""

from dataclasses import dataclass, field

import numpy as np

from ._core import pairwise_distances
from .losses import PAIR_LOSSES, TRIPLET_LOSSES, PairTerm, TripletTerm
from .sphere import log_sampling_weight

STRATEGIES = ("random", "semihard", "distance_weighted", "hardest")

DEFAULT_SEMIHARD_FLOOR = 0.5


class CapacityError(ValueError):
    """Dataset cannot supply the requested batch composition."""


@dataclass(frozen=True)
class Batch:
    """Indices and labels of one training batch: n/m classes, m examples each."""

    examples: np.ndarray  # global example ids, class-contiguous
    labels: np.ndarray    # class id per entry
    m: int

    def __post_init__(self):
        n = len(self.examples)
        if n == 0 or n % self.m != 0:
            raise ValueError(f"batch size {n} not divisible by m={self.m}")
        classes, counts = np.unique(self.labels, return_counts=True)
        if len(classes) != n // self.m or not np.all(counts == self.m):
            raise ValueError("each batch class must contribute exactly m examples")

    @property
    def n(self):
        return len(self.examples)

    def negatives_of(self, anchor):
        """Batch positions with a different class than the anchor position."""
        return np.flatnonzero(self.labels != self.labels[anchor])


@dataclass
class SampledTerms:
    """Loss terms drawn from one batch; indices are batch positions."""

    pairs: list = field(default_factory=list)
    triplets: list = field(default_factory=list)
    semihard_fallbacks: int = 0


def build_batch(dataset, n, m, rng):
    """Draw n/m classes uniformly without replacement, then m examples each."""
    if n % m != 0:
        raise ValueError(f"batch size {n} must be divisible by m={m}")
    k = n // m
    eligible = [c for c in dataset.class_ids if len(dataset.by_class[c]) >= m]
    if len(eligible) < k:
        raise CapacityError(
            f"need {k} classes with >= {m} examples, found {len(eligible)}")
    chosen = rng.choice(len(eligible), size=k, replace=False)
    examples = []
    labels = []
    for ci in chosen:
        c = eligible[ci]
        members = dataset.by_class[c]
        picks = rng.choice(len(members), size=m, replace=False)
        examples.extend(members[p] for p in picks)
        labels.extend([c] * m)
    return Batch(np.asarray(examples, dtype=np.intp),
                 np.asarray(labels, dtype=np.intp), m)


def enumerate_positive_pairs(batch):
    """All ordered within-class pairs (anchor, positive): (n/m) * m * (m-1)."""
    out = []
    for c in np.unique(batch.labels):
        members = np.flatnonzero(batch.labels == c)
        for a in members:
            for p in members:
                if a != p:
                    out.append((int(a), int(p)))
    return out


def sample_negative_random(batch, anchor, rng):
    """Uniform draw over other-class batch positions."""
    cands = batch.negatives_of(anchor)
    if len(cands) == 0:
        raise CapacityError("no other-class example available in batch")
    return int(cands[rng.integers(len(cands))])


def sample_negative_semihard(dists, batch, anchor, d_ap, rng):
    """Closest negative with D_an > d_ap; uniform fallback when none exists.

    Returns (position, fell_back). Ties break toward the lower position.
    """
    cands = batch.negatives_of(anchor)
    if len(cands) == 0:
        raise CapacityError("no other-class example available in batch")
    cd = dists[anchor, cands]
    ok = cd > d_ap
    if not np.any(ok):
        return int(cands[rng.integers(len(cands))]), True
    valid = cands[ok]
    return int(valid[np.argmin(cd[ok])]), False


def sample_negative_hardest(dists, batch, anchor):
    """Closest negative outright (argmin D_an); deterministic."""
    cands = batch.negatives_of(anchor)
    if len(cands) == 0:
        raise CapacityError("no other-class example available in batch")
    return int(cands[np.argmin(dists[anchor, cands])])


def sample_negative_distance_weighted(dists, batch, anchor, sd, cfg, rng):
    """Categorical draw with Pr(candidate) proportional to its clipped weight.

    Weights are normalized in log space within the candidate set, so the
    inverse-density scale (astronomical at high dimension) never overflows.
    """
    cands = batch.negatives_of(anchor)
    if len(cands) == 0:
        raise CapacityError("no other-class example available in batch")
    logw = log_sampling_weight(sd, cfg, dists[anchor, cands])
    p = np.exp(logw - np.max(logw))
    p /= p.sum()
    return int(cands[rng.choice(len(cands), p=p)])


def normalized_weights(dists, batch, anchor, sd, cfg):
    """Exact draw probabilities of the distance-weighted sampler for one anchor."""
    cands = batch.negatives_of(anchor)
    logw = log_sampling_weight(sd, cfg, dists[anchor, cands])
    p = np.exp(logw - np.max(logw))
    return cands, p / p.sum()


def sample_terms(strategy, loss_kind, embeddings, batch, rng, *,
                 sphere_density=None, weight_cfg=None,
                 semihard_floor=DEFAULT_SEMIHARD_FLOOR, dists=None):
    """Draw the full term set for one batch.

    Enumerates every ordered positive pair; each member then draws one
    negative via ``strategy``. Pairwise losses get positive and negative
    PairTerms (anchor first); triplet losses get one TripletTerm per ordered
    positive pair. For pairwise losses under semihard the reference distance
    is the fixed ``semihard_floor`` rather than a positive distance.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    if loss_kind not in PAIR_LOSSES + TRIPLET_LOSSES:
        raise ValueError(f"unknown loss kind {loss_kind!r}")
    if strategy == "distance_weighted" and sphere_density is None:
        raise ValueError("distance_weighted strategy needs a sphere_density")
    if dists is None:
        dists = pairwise_distances(embeddings)

    pairwise = loss_kind in PAIR_LOSSES
    terms = SampledTerms()

    def draw(anchor, d_ref):
        if strategy == "random":
            return sample_negative_random(batch, anchor, rng)
        if strategy == "semihard":
            neg, fell_back = sample_negative_semihard(
                dists, batch, anchor, d_ref, rng)
            terms.semihard_fallbacks += fell_back
            return neg
        if strategy == "hardest":
            return sample_negative_hardest(dists, batch, anchor)
        return sample_negative_distance_weighted(
            dists, batch, anchor, sphere_density, weight_cfg, rng)

    for a, p in enumerate_positive_pairs(batch):
        d_ap = float(dists[a, p])
        if pairwise:
            terms.pairs.append(PairTerm(a, p, +1, d_ap))
            for member in (a, p):
                neg = draw(member, semihard_floor)
                terms.pairs.append(
                    PairTerm(member, neg, -1, float(dists[member, neg])))
        else:
            neg = draw(a, d_ap)
            terms.triplets.append(
                TripletTerm(a, p, neg, d_ap, float(dists[a, neg])))
    return terms
