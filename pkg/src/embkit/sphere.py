"""Pairwise-distance geometry of uniform points on the unit hypersphere.

For points drawn uniformly on S^(n-1), the distance d between an independent
pair has density proportional to

    d^(n-2) * (1 - d^2/4)^((n-3)/2)      on (0, 2).

This module normalizes that density numerically, exposes its mode and
Gaussian large-n limit, and derives the clipped inverse-density weights used
by the distance-weighted negative sampler. All evaluation goes through
log-density to stay finite near the endpoints at large n.
"""

from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from ._core import log_density_unnormalized

# grid size for the cached CDF table (cumulative Simpson needs an even
# number of panels, so a 2^k + 1 point grid)
_CDF_GRID_POINTS = 16385


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=48):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""

    def simpson(lo, hi, flo, fmid, fhi):
        return (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi)

    def recurse(lo, hi, flo, fmid, fhi, whole, eps, depth):
        mid = 0.5 * (lo + hi)
        lmid = 0.5 * (lo + mid)
        rmid = 0.5 * (mid + hi)
        flmid = f(lmid)
        frmid = f(rmid)
        left = simpson(lo, mid, flo, flmid, fmid)
        right = simpson(mid, hi, fmid, frmid, fhi)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return (recurse(lo, mid, flo, flmid, fmid, left, eps / 2.0, depth - 1)
                + recurse(mid, hi, fmid, frmid, fhi, right, eps / 2.0, depth - 1))

    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fmid = f(mid)
    whole = simpson(a, b, fa, fmid, fb)
    return recurse(a, b, fa, fmid, fb, whole, tol, max_depth)


class SphereDensity:
    """Normalized pairwise-distance density for uniform points on S^(dim-1).

    The normalizer is computed once by adaptive Simpson quadrature; the
    dim=4 case integrates to pi/2 in closed form and anchors the quadrature
    tests.
    """

    def __init__(self, dim):
        if int(dim) != dim or dim < 3:
            raise ValueError(f"dimension must be an integer >= 3, got {dim!r}")
        self.dim = int(dim)
        z = adaptive_simpson(self._unnormalized_scalar, 0.0, 2.0, tol=1e-12)
        self._log_norm = -math.log(z)

    def _unnormalized_scalar(self, d):
        lv = log_density_unnormalized(np.array([d]), self.dim)[0]
        return math.exp(lv) if np.isfinite(lv) else 0.0

    @property
    def norm_const(self):
        """Multiplier making the closed-form expression integrate to 1."""
        return math.exp(self._log_norm)

    def log_density(self, d):
        """Log density; -inf outside (0, 2). Accepts scalars or arrays."""
        arr = np.atleast_1d(np.asarray(d, dtype=np.float64))
        out = log_density_unnormalized(arr, self.dim) + self._log_norm
        return float(out[0]) if np.ndim(d) == 0 else out

    def density(self, d):
        """Normalized density; 0 for d <= 0 and d >= 2."""
        logd = self.log_density(d)
        if np.ndim(logd) == 0:
            return float(np.exp(logd))
        return np.exp(logd)

    @cached_property
    def _cdf_table(self):
        grid = np.linspace(0.0, 2.0, _CDF_GRID_POINTS)
        vals = np.exp(log_density_unnormalized(grid, self.dim) + self._log_norm)
        vals[~np.isfinite(vals)] = 0.0
        h = grid[1] - grid[0]
        # composite Simpson prefix sums over pairs of panels
        pair = (h / 3.0) * (vals[0:-2:2] + 4.0 * vals[1:-1:2] + vals[2::2])
        cdf = np.zeros_like(grid)
        cdf[2::2] = np.cumsum(pair)
        # odd grid points: quadratic rule over the half panel behind them
        half = (h / 12.0) * (5.0 * vals[0:-1:2] + 8.0 * vals[1::2] - vals[2::2])
        cdf[1::2] = cdf[0:-1:2] + half
        np.clip(cdf, 0.0, None, out=cdf)
        cdf /= cdf[-1]
        return grid, cdf

    def cdf(self, d):
        """Distribution function via a cached fine-grid quadrature table."""
        grid, table = self._cdf_table
        return np.interp(d, grid, table)

    def ppf(self, p):
        """Quantile function (inverse of cdf on [0, 2])."""
        grid, table = self._cdf_table
        return np.interp(p, table, grid)

    def central_interval(self, mass):
        """Shortest symmetric-in-probability interval holding ``mass``."""
        tail = 0.5 * (1.0 - mass)
        return self.ppf(tail), self.ppf(1.0 - tail)


def density_mode(sd):
    """Location of the density maximum on (0, 2].

    Stationary point of the log density; for dim=3 the density grows like d
    all the way to the boundary.
    """
    n = sd.dim
    if n == 3:
        return 2.0
    return 2.0 * math.sqrt((n - 2) / (2.0 * n - 5.0))


def gaussian_approximation(dim):
    """Large-n limit of the distance distribution: mean sqrt(2), variance 1/(2n).

    The 1/(2n) term is interpreted as a variance, matching the observed
    concentration rate (halving when n doubles).
    """
    if dim < 4:
        raise ValueError("Gaussian limit applies for dim >= 4")
    return math.sqrt(2.0), 1.0 / (2.0 * dim)


@dataclass(frozen=True)
class SamplingWeightConfig:
    """Clipped inverse-density weighting for negative selection.

    Distances are clamped to [d_floor, d_ceil] before inverting the density,
    and the resulting weight is capped at lambda_clip. With the default
    lambda_clip=None the cap resolves to the weight at d_floor, making the
    clamp and the clip coincide.
    """

    lambda_clip: float | None = None
    d_floor: float = 0.5
    d_ceil: float = 1.4

    def __post_init__(self):
        if not (0.0 < self.d_floor < 2.0):
            raise ValueError(f"d_floor must lie in (0, 2), got {self.d_floor}")
        if not (self.d_floor < self.d_ceil < 2.0):
            raise ValueError(
                f"d_ceil must lie in (d_floor, 2), got {self.d_ceil}")
        if self.lambda_clip is not None and self.lambda_clip <= 0.0:
            raise ValueError(f"lambda_clip must be positive, got {self.lambda_clip}")

    def resolve_log_lambda(self, sd):
        if self.lambda_clip is not None:
            return math.log(self.lambda_clip)
        return -sd.log_density(self.d_floor)


def log_sampling_weight(sd, cfg, d):
    """Log of min(lambda, 1/density(clamped d)); vectorized over d."""
    arr = np.atleast_1d(np.asarray(d, dtype=np.float64))
    clamped = np.clip(arr, cfg.d_floor, cfg.d_ceil)
    logw = -(log_density_unnormalized(clamped, sd.dim) + sd._log_norm)
    out = np.minimum(cfg.resolve_log_lambda(sd), logw)
    return out[0] if np.ndim(d) == 0 else out


def sampling_weight(sd, cfg, d):
    """Clipped inverse-density weight, always in (0, lambda]."""
    if d < 0:
        raise ValueError(f"distance must be nonnegative, got {d}")
    clamped = min(max(float(d), cfg.d_floor), cfg.d_ceil)
    w = math.exp(-sd.log_density(clamped))
    if cfg.lambda_clip is not None:
        return min(cfg.lambda_clip, w)
    return min(math.exp(-sd.log_density(cfg.d_floor)), w)
