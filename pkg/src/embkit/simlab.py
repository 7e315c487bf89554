"""Monte-Carlo reproductions of the geometry and stability analyses.

Everything here emits plot-ready tables (no rendering): distance-density
curves across dimensions, the variance of noisy gradient directions as a
function of pair distance, histograms of the distances each negative
sampler selects, empirical pairwise-distance histograms, and the evolution
of the optimal verification threshold during training.
"""

import numpy as np

from ._core import pairwise_distances
from .evaluation import verification_threshold
from .net import forward, train
from .sampling import (Batch, STRATEGIES, sample_negative_distance_weighted,
                       sample_negative_hardest, sample_negative_random,
                       sample_negative_semihard)
from .sphere import SamplingWeightConfig, SphereDensity
from .tables import Table

DEFAULT_BIN_WIDTH = 0.02


def uniform_sphere_points(dim, count, rng):
    """I.i.d. uniform points on S^(dim-1): normalized Gaussian draws."""
    if dim < 2:
        raise ValueError("sphere sampling needs dim >= 2")
    x = rng.standard_normal((count, dim))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def density_curve(dims, grid):
    """Normalized density values per dimension on a common grid."""
    grid = np.asarray(grid, dtype=np.float64)
    if np.any(grid < 0) or np.any(grid > 2):
        raise ValueError("grid must lie within [0, 2]")
    cols = [grid]
    names = ["d"]
    for n in dims:
        cols.append(SphereDensity(n).density(grid))
        names.append(f"q_dim{n}")
    return Table(names, np.column_stack(cols))


def _pair_at_distance(dim, d):
    """Two unit vectors exactly d apart (chord), in a fixed plane."""
    theta = 2.0 * np.arcsin(np.clip(d / 2.0, 0.0, 1.0))
    u = np.zeros(dim)
    u[0] = 1.0
    v = np.zeros(dim)
    v[0] = np.cos(theta)
    v[1] = np.sin(theta)
    return u, v


def gradient_variance_stat(dim, sigma, d, replicates, rng,
                           noise_mode="reproject"):
    """Trace of the covariance of the noisy pair-gradient direction.

    Protocol: start from two unit vectors at distance d, add isotropic
    Gaussian noise to both, optionally reproject onto the sphere
    (noise_mode="reproject", the default; "ambient" skips reprojection),
    and normalize the difference h = a' - b' to get the direction g. Since
    ||g|| = 1, trace(Cov g) = 1 - ||E g||^2, estimated as 1 - ||mean g||^2.
    Degenerate differences (||h|| < 1e-12) are redrawn.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if noise_mode not in ("reproject", "ambient"):
        raise ValueError(f"unknown noise mode {noise_mode!r}")
    u, v = _pair_at_distance(dim, d)
    gsum = np.zeros(dim)
    done = 0
    redraws = 0
    while done < replicates:
        todo = replicates - done
        a = u + sigma * rng.standard_normal((todo, dim))
        b = v + sigma * rng.standard_normal((todo, dim))
        if noise_mode == "reproject":
            a /= np.linalg.norm(a, axis=1, keepdims=True)
            b /= np.linalg.norm(b, axis=1, keepdims=True)
        h = a - b
        norms = np.linalg.norm(h, axis=1)
        ok = norms >= 1e-12
        redraws += int(np.count_nonzero(~ok))
        gsum += (h[ok] / norms[ok, None]).sum(axis=0)
        done += int(np.count_nonzero(ok))
    gbar = gsum / replicates
    return float(1.0 - gbar @ gbar), redraws


def gradient_variance_curve(dim, sigma, grid, replicates, rng,
                            noise_mode="reproject"):
    """gradient_variance_stat along a distance grid; counts redraws per point."""
    grid = np.asarray(grid, dtype=np.float64)
    if np.any(grid < 0) or np.any(grid >= 2):
        raise ValueError("grid must lie within [0, 2)")
    rows = [gradient_variance_stat(dim, sigma, d, replicates, rng, noise_mode)
            for d in grid]
    stats = [r[0] for r in rows]
    redraws = [r[1] for r in rows]
    return Table(["d", "trace_cov", "redraws"],
                 np.column_stack([grid, stats, redraws]))


def make_sphere_batch(dim, classes, m, rng):
    """A batch of uniform-sphere embeddings with synthetic class labels."""
    emb = uniform_sphere_points(dim, classes * m, rng)
    labels = np.repeat(np.arange(classes), m)
    batch = Batch(np.arange(classes * m, dtype=np.intp),
                  labels.astype(np.intp), m)
    return emb, batch


def sampler_histogram(strategy, dim, classes, m, draws, rng,
                      bin_width=DEFAULT_BIN_WIDTH, weight_cfg=None,
                      semihard_floor=0.5):
    """Histogram of selected negative distances on one fixed batch.

    Per draw: a uniformly chosen anchor selects one negative under the
    strategy. Pairwise-loss conventions apply for semihard (fixed floor).
    Returns (Table with bin_left/mass columns, raw distances).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}")
    emb, batch = make_sphere_batch(dim, classes, m, rng)
    dists = pairwise_distances(emb)
    sd = SphereDensity(dim) if strategy == "distance_weighted" else None
    cfg = weight_cfg or SamplingWeightConfig()
    chosen = np.empty(draws)
    for t in range(draws):
        anchor = int(rng.integers(batch.n))
        if strategy == "random":
            neg = sample_negative_random(batch, anchor, rng)
        elif strategy == "semihard":
            neg, _ = sample_negative_semihard(dists, batch, anchor,
                                              semihard_floor, rng)
        elif strategy == "hardest":
            neg = sample_negative_hardest(dists, batch, anchor)
        else:
            neg = sample_negative_distance_weighted(dists, batch, anchor,
                                                    sd, cfg, rng)
        chosen[t] = dists[anchor, neg]
    edges = np.arange(0.0, 2.0 + bin_width, bin_width)
    mass, _ = np.histogram(chosen, bins=edges)
    mass = mass / draws
    table = Table(["bin_left", "mass"],
                  np.column_stack([edges[:-1], mass]))
    return table, chosen


def pairwise_histogram(embeddings, labels=None, bin_width=DEFAULT_BIN_WIDTH):
    """Normalized histogram of pairwise distances.

    With labels, only cross-class (negative) pairs are counted; otherwise
    all distinct pairs. Returns (Table, raw distances).
    """
    emb = np.asarray(embeddings, dtype=np.float64)
    if len(emb) < 2:
        raise ValueError("need at least 2 embeddings")
    d = pairwise_distances(emb)
    iu = np.triu_indices(len(emb), k=1)
    vals = d[iu]
    if labels is not None:
        labels = np.asarray(labels)
        vals = vals[labels[iu[0]] != labels[iu[1]]]
        if len(vals) == 0:
            raise ValueError("no cross-class pair exists")
    edges = np.arange(0.0, 2.0 + bin_width, bin_width)
    mass, _ = np.histogram(np.clip(vals, 0.0, 2.0 - 1e-12), bins=edges)
    mass = mass / len(vals)
    return Table(["bin_left", "mass"], np.column_stack([edges[:-1], mass])), vals


def stability_curve(dataset, configs, log_interval=1):
    """Optimal verification threshold over training, per configuration.

    Trains each config on the dataset and records the best-accuracy
    verification threshold on the held-out split every ``log_interval``
    optimizer steps. Returns a Table with a step column and one threshold
    column per config, labeled loss_sampler_m<m>.
    """
    columns = ["step"]
    series = []
    steps_ref = None
    for cfg in configs:
        _, eval_ds = dataset.split_by_class(cfg.eval_fraction)
        iu_flags = None
        steps, thresholds = [], []

        def on_batch(step, params, beta):
            nonlocal iu_flags
            if step % log_interval:
                return
            f, _ = forward(params, eval_ds.features)
            dmat = pairwise_distances(f)
            iu = np.triu_indices(len(eval_ds), k=1)
            if iu_flags is None:
                iu_flags = eval_ds.labels[iu[0]] == eval_ds.labels[iu[1]]
            thr, _ = verification_threshold(dmat[iu], iu_flags)
            steps.append(step)
            thresholds.append(thr)

        train(dataset, cfg, on_batch=on_batch)
        columns.append(f"{cfg.loss}_{cfg.sampler}_m{cfg.m_per_class}")
        series.append(thresholds)
        if steps_ref is None:
            steps_ref = steps
        elif len(steps) != len(steps_ref):
            raise ValueError("configs produced different numbers of steps; "
                             "use equal epochs and batch counts")
    data = np.column_stack([steps_ref] + series)
    return Table(columns, data)
