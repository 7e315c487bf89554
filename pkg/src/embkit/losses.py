"""Pairwise and triplet losses on embedding distances, with analytic gradients.

Four families: contrastive, squared-hinge triplet, linear-hinge triplet, and
the margin loss with a learnable boundary beta decomposed into a global
offset, per-class offsets, and optional per-example offsets.

Conventions used throughout:
  * pair labels y are +1 (same class) / -1 (different class);
  * all losses are hinges; at a kink the subgradient 0 is chosen, so a
    gradient is nonzero only when the loss is strictly positive;
  * gradients are with respect to distances; chain_to_embeddings maps them
    onto embedding vectors.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

PAIR_LOSSES = ("contrastive", "margin")
TRIPLET_LOSSES = ("triplet_l22", "triplet_l2")
LOSS_KINDS = PAIR_LOSSES + TRIPLET_LOSSES

# distances below this are treated as a degenerate (collapsed) pair
DEGENERATE_DISTANCE = 1e-12

BETA_MIN = 1e-3


class DegeneratePairWarning(RuntimeWarning):
    """Two embeddings coincide; the gradient direction is undefined."""


@dataclass(frozen=True)
class PairTerm:
    """A sampled pair: anchor i, other j, label y in {+1, -1}, distance."""

    i: int
    j: int
    y: int
    dist: float

    def __post_init__(self):
        if self.i == self.j:
            raise ValueError("pair members must be distinct")
        if self.y not in (+1, -1):
            raise ValueError(f"pair label must be +1 or -1, got {self.y}")
        if self.dist < 0:
            raise ValueError(f"distance must be nonnegative, got {self.dist}")


@dataclass(frozen=True)
class TripletTerm:
    """A sampled triplet (anchor, positive, negative) with cached distances."""

    a: int
    p: int
    n: int
    d_ap: float
    d_an: float

    def __post_init__(self):
        if len({self.a, self.p, self.n}) != 3:
            raise ValueError("triplet members must be pairwise distinct")
        if self.d_ap < 0 or self.d_an < 0:
            raise ValueError("triplet distances must be nonnegative")


@dataclass(frozen=True)
class LossConfig:
    alpha: float = 0.2
    kind: str = "margin"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"margin alpha must be positive, got {self.alpha}")
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}")


@dataclass
class AdaptiveBeta:
    """Learnable decision boundary beta0 + beta_class[c] + beta_img[i].

    Per-example offsets are disabled by default; they tend to overfit at
    small scale. Components are clamped after every update so the effective
    boundary stays at least BETA_MIN.
    """

    beta0: float = 1.2
    beta_class: dict = field(default_factory=dict)
    beta_img: dict = field(default_factory=dict)
    nu: float = 0.0
    use_img: bool = False

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")

    def effective(self, class_id=None, img_id=None):
        """Boundary for a pair anchored at an example of the given class/id."""
        b = self.beta0
        if class_id is not None:
            b += self.beta_class.get(class_id, 0.0)
        if self.use_img and img_id is not None:
            b += self.beta_img.get(img_id, 0.0)
        return b


def contrastive_loss(term, alpha):
    """y=+1: D^2 pulls together; y=-1: hinge [alpha - D]_+^2 pushes apart.

    Returns (loss, dloss/dD).
    """
    d = term.dist
    if term.y == +1:
        return d * d, 2.0 * d
    slack = alpha - d
    if slack > 0.0:
        return slack * slack, -2.0 * slack
    return 0.0, 0.0


def triplet_l22_loss(t, alpha):
    """[d_ap^2 - d_an^2 + alpha]_+ with gradients (2 d_ap, -2 d_an) when active.

    The repelling gradient -2 d_an vanishes as d_an -> 0, which is what lets
    hardest-negative mining collapse an embedding.
    """
    loss = t.d_ap * t.d_ap - t.d_an * t.d_an + alpha
    if loss > 0.0:
        return loss, 2.0 * t.d_ap, -2.0 * t.d_an
    return 0.0, 0.0, 0.0


def triplet_l2_loss(t, alpha):
    """[d_ap - d_an + alpha]_+ with unit-magnitude gradients (+1, -1) when active."""
    loss = t.d_ap - t.d_an + alpha
    if loss > 0.0:
        return loss, 1.0, -1.0
    return 0.0, 0.0, 0.0


def margin_loss(term, alpha, beta_eff):
    """[alpha + y (D - beta)]_+ : a hinge on the boundary-shifted distance.

    Returns (loss, dloss/dD); the active gradient is exactly y.
    """
    if beta_eff <= 0:
        raise ValueError(f"effective beta must be positive, got {beta_eff}")
    loss = alpha + term.y * (term.dist - beta_eff)
    if loss > 0.0:
        return loss, float(term.y)
    return 0.0, 0.0


def beta_gradient(term, alpha, beta_eff):
    """d/dbeta of margin_loss: -y when the hinge is active, else 0."""
    if alpha > term.y * (beta_eff - term.dist):
        return float(-term.y)
    return 0.0


def regularized_beta_update(ab, terms, alpha, lr,
                            anchor_classes=None, anchor_ids=None):
    """One gradient-descent step on beta with nu pressure toward smaller values.

    Each pair term contributes beta_gradient plus nu to every beta component
    it participates in (per-term application keeps nu comparable across
    batch sizes). The anchor of a term selects its class and example
    component; pass anchor_classes/anchor_ids aligned with terms, or None to
    train the global offset only. Components are clamped so every effective
    boundary stays >= BETA_MIN. Mutates and returns ``ab``.
    """
    if lr <= 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    grad0 = 0.0
    grad_class = {}
    grad_img = {}
    for k, term in enumerate(terms):
        cid = anchor_classes[k] if anchor_classes is not None else None
        iid = anchor_ids[k] if anchor_ids is not None else None
        g = beta_gradient(term, alpha, ab.effective(cid, iid)) + ab.nu
        grad0 += g
        if cid is not None:
            grad_class[cid] = grad_class.get(cid, 0.0) + g
        if ab.use_img and iid is not None:
            grad_img[iid] = grad_img.get(iid, 0.0) + g
    ab.beta0 -= lr * grad0
    for cid, g in grad_class.items():
        ab.beta_class[cid] = ab.beta_class.get(cid, 0.0) - lr * g
    for iid, g in grad_img.items():
        ab.beta_img[iid] = ab.beta_img.get(iid, 0.0) - lr * g
    _clamp_beta(ab, anchor_classes, anchor_ids)
    return ab


def _clamp_beta(ab, anchor_classes=None, anchor_ids=None):
    ab.beta0 = max(ab.beta0, BETA_MIN)
    for cid in ab.beta_class:
        ab.beta_class[cid] = max(ab.beta_class[cid], BETA_MIN - ab.beta0)
    if ab.use_img and anchor_ids is not None:
        classes = anchor_classes if anchor_classes is not None else [None] * len(anchor_ids)
        for iid, cid in zip(anchor_ids, classes):
            base = ab.beta0 + (ab.beta_class.get(cid, 0.0) if cid is not None else 0.0)
            if iid in ab.beta_img:
                ab.beta_img[iid] = max(ab.beta_img[iid], BETA_MIN - base)


def chain_to_embeddings(dloss_dD, f_i, f_j):
    """Map a distance gradient onto the two embeddings.

    grad_i = dloss_dD * (f_i - f_j)/||f_i - f_j||, grad_j = -grad_i.
    A coincident pair has no defined direction: returns zeros and warns.
    """
    diff = np.asarray(f_i, dtype=np.float64) - np.asarray(f_j, dtype=np.float64)
    norm = float(np.linalg.norm(diff))
    if norm < DEGENERATE_DISTANCE:
        warnings.warn("coincident embeddings in pair gradient; returning zeros",
                      DegeneratePairWarning, stacklevel=2)
        zero = np.zeros_like(diff)
        return zero, -zero
    grad_i = (dloss_dD / norm) * diff
    return grad_i, -grad_i
