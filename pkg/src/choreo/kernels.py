"""Backend selection for the hot pairwise-gravity kernels.

Prefers the compiled Cython extension; falls back to the pure-numpy
implementation when the extension is missing or when the environment
variable ``CHOREO_PURE_PYTHON`` is set (any non-empty value).
``BACKEND`` records which one is active.
"""

import os

from . import _kernels_py

if os.environ.get("CHOREO_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def _as_batch(pos):
    import numpy as np

    return np.ascontiguousarray(pos, dtype=np.float64)


def pair_potential(pos, masses):
    """Per-sample potential sum_{i<j} m_i m_j / r_ij for pos (S, N, 3)."""
    import numpy as np

    return _impl.pair_potential(_as_batch(pos), np.ascontiguousarray(masses, dtype=np.float64))


def pair_forces(pos, masses):
    """Per-sample dU/dq_i, shape (S, N, 3)."""
    import numpy as np

    return _impl.pair_forces(_as_batch(pos), np.ascontiguousarray(masses, dtype=np.float64))


def min_pair_distance(pos):
    """Global minimum pairwise distance of the batch."""
    return float(_impl.min_pair_distance(_as_batch(pos)))


def min_pair_distance_per_sample(pos):
    """Per-sample minimum pairwise distance, shape (S,)."""
    return _impl.min_pair_distance_per_sample(_as_batch(pos))
