"""embkit: desk-scale deep embedding learning.

Distance-aware negative sampling on the unit hypersphere, pair/triplet/
margin losses with a learnable boundary, a small Adam-trained embedding
network, retrieval and clustering metrics, and the Monte-Carlo machinery
that motivates distance-weighted sampling. Numeric kernels run on a
compiled extension when built, with a NumPy fallback (see embkit._core).
"""

from ._core import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
