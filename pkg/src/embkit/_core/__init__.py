"""Numeric kernel backend selection.

The hot kernels (pairwise distance matrices, density evaluation on large
grids, per-term gradient scatter) exist twice: a compiled Cython extension
and a NumPy fallback. The compiled one is preferred when importable. Set
``EMBKIT_BACKEND=python`` or ``EMBKIT_BACKEND=cython`` to force a choice;
forcing ``cython`` raises if the extension was not built.

Results are bit-reproducible within one backend; across backends they agree
only to floating point rounding, so pin the backend when exact replays
across machines or installs matter.
"""

import os

from . import kernels_py

_choice = os.environ.get("EMBKIT_BACKEND", "auto").lower()
if _choice not in {"auto", "python", "cython"}:
    raise RuntimeError(
        f"EMBKIT_BACKEND={_choice!r} not recognized (use auto, python, or cython)")

if _choice == "python":
    _impl = kernels_py
elif _choice == "cython":
    from . import _ckernels as _impl  # raises ImportError if not built
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = kernels_py

BACKEND = _impl.BACKEND_NAME

pairwise_distances = _impl.pairwise_distances
cross_distances = _impl.cross_distances
log_density_unnormalized = _impl.log_density_unnormalized
accumulate_pair_gradients = _impl.accumulate_pair_gradients


def backend_name():
    """Name of the active kernel backend, 'cython' or 'python'."""
    return BACKEND
