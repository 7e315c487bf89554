"""Small fully connected embedding network trained with Adam.

The network is affine+ReLU hidden layers, a final affine map, then unit
normalization onto the sphere. Training wires the batch sampler to the loss
terms: one forward pass per batch serves both negative selection and the
loss (terms are frozen against that pass), gradients flow back through the
normalization Jacobian (I - f f^T)/||u||, and the boundary of the margin
loss is updated with its own learning rate.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from ._core import accumulate_pair_gradients, pairwise_distances
from .evaluation import (EpochRecord, MetricsLog, embedding_spread, kmeans,
                         nmi, recall_at_k, verification_threshold)
from .losses import (AdaptiveBeta, contrastive_loss, margin_loss,
                     regularized_beta_update,
                     triplet_l2_loss, triplet_l22_loss,
                     LOSS_KINDS, PAIR_LOSSES)
from .sampling import STRATEGIES, build_batch, sample_terms
from .sphere import SamplingWeightConfig, SphereDensity

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_VERSION = 1


class TrainingDiverged(RuntimeError):
    """Non-finite parameters or outputs; message carries epoch/batch."""


@dataclass
class MlpParams:
    """Layer parameters plus Adam moment state."""

    weights: list
    biases: list
    m_w: list = field(default_factory=list)
    v_w: list = field(default_factory=list)
    m_b: list = field(default_factory=list)
    v_b: list = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if not self.m_w:
            self.m_w = [np.zeros_like(w) for w in self.weights]
            self.v_w = [np.zeros_like(w) for w in self.weights]
            self.m_b = [np.zeros_like(b) for b in self.biases]
            self.v_b = [np.zeros_like(b) for b in self.biases]

    @property
    def layer_sizes(self):
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self):
        return MlpParams(
            [w.copy() for w in self.weights], [b.copy() for b in self.biases],
            [m.copy() for m in self.m_w], [v.copy() for v in self.v_w],
            [m.copy() for m in self.m_b], [v.copy() for v in self.v_b],
            self.step)

    def all_finite(self):
        return (all(np.all(np.isfinite(w)) for w in self.weights)
                and all(np.all(np.isfinite(b)) for b in self.biases))


def init_params(layer_sizes, rng):
    """He-scaled Gaussian weights, zero biases."""
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        weights.append(rng.standard_normal((fan_in, fan_out))
                       * np.sqrt(2.0 / fan_in))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases)


def forward(params, x):
    """Embed a batch (rows of x) onto the unit sphere.

    Returns (embeddings, cache) where the cache carries the pre-normalization
    activations needed by backward().
    """
    h = np.atleast_2d(np.asarray(x, dtype=np.float64))
    activations = [h]
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        h = h @ w + b
        if k < last:
            h = np.maximum(h, 0.0)
        activations.append(h)
    u = activations[-1]
    norms = np.linalg.norm(u, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise TrainingDiverged("degenerate pre-normalization output (norm < 1e-12)")
    f = u / norms
    return f, (activations, norms, f)


def backward(params, cache, grad_embedding):
    """Exact reverse-mode gradients for a batch.

    grad_embedding is dLoss/dF (same shape as the embeddings); the unit
    normalization contributes (g - (g . f) f) / ||u|| before the affine
    stack.
    """
    activations, norms, f = cache
    g = np.atleast_2d(np.asarray(grad_embedding, dtype=np.float64))
    radial = np.sum(g * f, axis=1, keepdims=True)
    delta = (g - radial * f) / norms
    grads_w = [None] * len(params.weights)
    grads_b = [None] * len(params.biases)
    for k in range(len(params.weights) - 1, -1, -1):
        inp = activations[k]
        grads_w[k] = inp.T @ delta
        grads_b[k] = delta.sum(axis=0)
        if k > 0:
            delta = delta @ params.weights[k].T
            delta = delta * (activations[k] > 0.0)
    return grads_w, grads_b


def adam_step(params, grads_w, grads_b, lr,
              beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """Standard Adam update with bias correction; mutates and returns params."""
    for g in grads_w + grads_b:
        if not np.all(np.isfinite(g)):
            raise TrainingDiverged("non-finite gradient in optimizer step")
    params.step += 1
    t = params.step
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for w, g, m, v in zip(params.weights, grads_w, params.m_w, params.v_w):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        w -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    for b, g, m, v in zip(params.biases, grads_b, params.m_b, params.v_b):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        b -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return params


@dataclass
class TrainConfig:
    loss: str = "margin"
    sampler: str = "distance_weighted"
    alpha: float = 0.2
    beta0: float = 1.2
    nu: float = 0.0
    learn_beta: bool = True
    use_beta_img: bool = False
    batch_size: int = 40
    m_per_class: int = 5
    epochs: int = 50
    lr: float = 0.01
    lr_beta: float | None = None   # defaults to lr
    hidden: tuple = (64, 64)
    embed_dim: int = 128
    semihard_floor: float = 0.5
    weight_lambda: float | None = None
    weight_d_floor: float = 0.5
    weight_d_ceil: float = 1.4
    eval_ks: tuple = (1, 2, 4, 8)
    eval_fraction: float = 0.2
    seed: int = 1

    def __post_init__(self):
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.sampler not in STRATEGIES:
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.loss not in PAIR_LOSSES and self.sampler == "random":
            raise ValueError("uniform pair sampling is not defined for "
                             "triplet losses")
        if self.batch_size % self.m_per_class != 0:
            raise ValueError("batch size must be divisible by m_per_class")
        if min(self.lr, self.alpha, self.epochs) <= 0:
            raise ValueError("rates, margin, and epochs must be positive")
        if self.lr_beta is not None and self.lr_beta <= 0:
            raise ValueError("lr_beta must be positive")

    @property
    def effective_lr_beta(self):
        return self.lr if self.lr_beta is None else self.lr_beta

    def weight_config(self):
        return SamplingWeightConfig(self.weight_lambda,
                                    self.weight_d_floor, self.weight_d_ceil)


@dataclass
class TrainResult:
    params: MlpParams
    beta: AdaptiveBeta
    log: MetricsLog
    train_dataset: object
    eval_dataset: object


def _term_gradients(terms, cfg, beta, batch):
    """Mean loss and per-edge distance-gradient coefficients for one batch.

    Returns (mean_loss, idx_i, idx_j, coeff, pair_terms) where the index
    arrays list every (i, j) edge with its dLoss/dD weight, already divided
    by the term count.
    """
    idx_i, idx_j, coeff = [], [], []
    total = 0.0
    count = 0
    for t in terms.pairs:
        if cfg.loss == "contrastive":
            loss, g = contrastive_loss(t, cfg.alpha)
        else:
            b_eff = beta.effective(int(batch.labels[t.i]),
                                   int(batch.examples[t.i]))
            loss, g = margin_loss(t, cfg.alpha, b_eff)
        total += loss
        count += 1
        if g != 0.0:
            idx_i.append(t.i)
            idx_j.append(t.j)
            coeff.append(g)
    for t in terms.triplets:
        if cfg.loss == "triplet_l22":
            loss, gap, gan = triplet_l22_loss(t, cfg.alpha)
        else:
            loss, gap, gan = triplet_l2_loss(t, cfg.alpha)
        total += loss
        count += 1
        if gap != 0.0:
            idx_i.append(t.a)
            idx_j.append(t.p)
            coeff.append(gap)
        if gan != 0.0:
            idx_i.append(t.a)
            idx_j.append(t.n)
            coeff.append(gan)
    if count == 0:
        return 0.0, np.empty(0, np.intp), np.empty(0, np.intp), np.empty(0), 0
    return (total / count,
            np.asarray(idx_i, dtype=np.intp),
            np.asarray(idx_j, dtype=np.intp),
            np.asarray(coeff, dtype=np.float64) / count,
            count)


def evaluate_split(params, eval_ds, cfg, seed):
    """Retrieval, clustering, and verification metrics on one split."""
    f, _ = forward(params, eval_ds.features)
    n = len(eval_ds)
    ks = [k for k in cfg.eval_ks if k < n]
    recall = recall_at_k(f, eval_ds.labels, ks) if n >= 2 and ks else {}
    n_classes = len(eval_ds.class_ids)
    assign = kmeans(f, n_classes, seed)
    score = nmi(assign, eval_ds.labels)
    dists = pairwise_distances(f)
    iu = np.triu_indices(n, k=1)
    flags = (eval_ds.labels[iu[0]] == eval_ds.labels[iu[1]])
    thr, acc = verification_threshold(dists[iu], flags)
    return {
        "recall": recall,
        "nmi": score,
        "spread": float(dists[iu].mean()),
        "verification_threshold": thr,
        "verification_accuracy": acc,
        "embeddings": f,
    }


def train(dataset, cfg, on_batch=None):
    """Run the full loop; returns TrainResult with a per-epoch MetricsLog.

    ``on_batch(step, params, beta)`` fires after every optimizer step (used
    by the stability simulations). Deterministic for a fixed (dataset, cfg):
    the single seed drives init, batch draws, and negative selection.
    """
    rng = np.random.default_rng(cfg.seed)
    train_ds, eval_ds = dataset.split_by_class(cfg.eval_fraction)
    layer_sizes = [dataset.dim, *cfg.hidden, cfg.embed_dim]
    params = init_params(layer_sizes, rng)
    beta = AdaptiveBeta(beta0=cfg.beta0, nu=cfg.nu, use_img=cfg.use_beta_img)
    sd = SphereDensity(cfg.embed_dim) if cfg.sampler == "distance_weighted" else None
    wcfg = cfg.weight_config() if cfg.sampler == "distance_weighted" else None

    batches_per_epoch = max(1, len(train_ds) // cfg.batch_size)
    log = MetricsLog()
    step = 0
    for epoch in range(cfg.epochs):
        epoch_loss = 0.0
        fallbacks = 0
        degenerates = 0
        for b in range(batches_per_epoch):
            batch = build_batch(train_ds, cfg.batch_size, cfg.m_per_class, rng)
            f, cache = forward(params, train_ds.features[batch.examples])
            dists = pairwise_distances(f)
            terms = sample_terms(
                cfg.sampler, cfg.loss, f, batch, rng,
                sphere_density=sd, weight_cfg=wcfg,
                semihard_floor=cfg.semihard_floor, dists=dists)
            fallbacks += terms.semihard_fallbacks
            mean_loss, idx_i, idx_j, coeff, n_terms = _term_gradients(
                terms, cfg, beta, batch)
            epoch_loss += mean_loss
            grad_f = np.zeros_like(f)
            degenerates += accumulate_pair_gradients(
                idx_i, idx_j, coeff, f, grad_f)
            grads_w, grads_b = backward(params, cache, grad_f)
            adam_step(params, grads_w, grads_b, cfg.lr)
            if not params.all_finite():
                raise TrainingDiverged(
                    f"non-finite parameters at epoch {epoch}, batch {b}")
            if cfg.loss == "margin" and cfg.learn_beta and n_terms:
                regularized_beta_update(
                    beta, terms.pairs, cfg.alpha,
                    cfg.effective_lr_beta / n_terms,
                    anchor_classes=[int(batch.labels[t.i]) for t in terms.pairs],
                    anchor_ids=([int(batch.examples[t.i]) for t in terms.pairs]
                                if cfg.use_beta_img else None))
            step += 1
            if on_batch is not None:
                on_batch(step, params, beta)
        stats = evaluate_split(params, eval_ds, cfg, cfg.seed)
        log.append(EpochRecord(
            epoch=epoch,
            mean_loss=epoch_loss / batches_per_epoch,
            spread=stats["spread"],
            recall=stats["recall"],
            nmi=stats["nmi"],
            verification_threshold=stats["verification_threshold"],
            verification_accuracy=stats["verification_accuracy"],
            beta0=beta.beta0,
            semihard_fallbacks=fallbacks,
            degenerate_pairs=degenerates,
        ))
    return TrainResult(params, beta, log, train_ds, eval_ds)


def save_checkpoint(path, params, beta, config_hash=""):
    """Versioned JSON checkpoint: shapes, parameters, boundary state."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "config_hash": config_hash,
        "layer_sizes": params.layer_sizes,
        "weights": [w.tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
        "beta0": beta.beta0,
        "beta_class": {str(k): v for k, v in beta.beta_class.items()},
        "beta_img": {str(k): v for k, v in beta.beta_img.items()},
        "nu": beta.nu,
        "use_img": beta.use_img,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)


def load_checkpoint(path):
    """Inverse of save_checkpoint; returns (params, beta, config_hash)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format_version") != CHECKPOINT_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {payload.get('format_version')!r}")
    params = MlpParams(
        [np.asarray(w, dtype=np.float64) for w in payload["weights"]],
        [np.asarray(b, dtype=np.float64) for b in payload["biases"]])
    beta = AdaptiveBeta(
        beta0=payload["beta0"],
        beta_class={int(k): v for k, v in payload["beta_class"].items()},
        beta_img={int(k): v for k, v in payload["beta_img"].items()},
        nu=payload["nu"], use_img=payload["use_img"])
    return params, beta, payload.get("config_hash", "")


def config_hash(text):
    """Stable hash of a resolved configuration rendering."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
