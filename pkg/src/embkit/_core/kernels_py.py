"""NumPy implementations of the numeric kernels.

Same contracts as the compiled versions in ``_ckernels.pyx``; this module is
the fallback when the extension is not built. Both backends agree to within
floating point rounding (see tests/test_backends.py).
"""

import numpy as np

BACKEND_NAME = "python"


def pairwise_distances(x):
    """Full Euclidean distance matrix of the rows of ``x``, zero diagonal."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    sq = np.einsum("ij,ij->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


def cross_distances(a, b):
    """Euclidean distances between rows of ``a`` and rows of ``b``."""
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    sa = np.einsum("ij,ij->i", a, a)
    sb = np.einsum("ij,ij->i", b, b)
    d2 = sa[:, None] + sb[None, :] - 2.0 * (a @ b.T)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def log_density_unnormalized(d, dim):
    """Log of d^(dim-2) * (1 - d^2/4)^((dim-3)/2) on (0, 2); -inf outside."""
    d = np.ascontiguousarray(d, dtype=np.float64)
    out = np.full(d.shape, -np.inf)
    inside = (d > 0.0) & (d < 2.0)
    di = d[inside]
    out[inside] = (dim - 2) * np.log(di) + 0.5 * (dim - 3) * np.log1p(-0.25 * di * di)
    return out


def accumulate_pair_gradients(idx_i, idx_j, coeff, emb, out, eps=1e-12):
    """Scatter-add pair gradients into per-row output.

    For each term t: out[i] += coeff[t] * (emb[i]-emb[j]) / ||emb[i]-emb[j]||
    and out[j] -= the same vector. Terms with ||emb[i]-emb[j]|| < eps are
    skipped; returns the number skipped.
    """
    idx_i = np.ascontiguousarray(idx_i, dtype=np.intp)
    idx_j = np.ascontiguousarray(idx_j, dtype=np.intp)
    coeff = np.ascontiguousarray(coeff, dtype=np.float64)
    diff = emb[idx_i] - emb[idx_j]
    norms = np.linalg.norm(diff, axis=1)
    ok = norms >= eps
    skipped = int(np.count_nonzero(~ok))
    scale = np.zeros_like(norms)
    scale[ok] = coeff[ok] / norms[ok]
    grad = diff * scale[:, None]
    np.add.at(out, idx_i, grad)
    np.add.at(out, idx_j, -grad)
    return skipped
