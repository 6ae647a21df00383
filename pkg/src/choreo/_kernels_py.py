"""Pure-numpy pairwise-gravity kernels (fallback backend).

All functions take a batch of configurations ``pos`` with shape
``(S, N, 3)`` (sample, body, coordinate) and the masses ``(N,)``.
Shapes and semantics must stay in lockstep with the Cython backend in
``_ckernels.pyx``; ``kernels.py`` picks one of the two at import time.
"""

import numpy as np


def _pair_geometry(pos):
    """Return (diff, inv_r) with diff[s, i, j] = q_j - q_i and inv_r = 1/|diff|.

    The diagonal of inv_r is zeroed so sums over j can run unguarded.
    """
    diff = pos[:, None, :, :] - pos[:, :, None, :]  # (S, N, N, 3), row i col j
    r2 = np.einsum("sijc,sijc->sij", diff, diff)
    np.einsum("sii->si", r2)[...] = np.inf
    inv_r = 1.0 / np.sqrt(r2)
    return diff, inv_r


def pair_potential(pos, masses):
    """Per-sample potential  U_s = sum_{i<j} m_i m_j / |q_j - q_i|."""
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    _, inv_r = _pair_geometry(pos)
    mm = np.outer(masses, masses)
    return 0.5 * np.einsum("ij,sij->s", mm, inv_r)


def pair_forces(pos, masses):
    """Per-sample gradient of the potential, dU/dq_i (the attractive force).

    Returns an (S, N, 3) array with entries
    sum_{j != i} m_i m_j (q_j - q_i) / |q_j - q_i|^3.
    """
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    diff, inv_r = _pair_geometry(pos)
    mm = np.outer(masses, masses)
    w = mm * inv_r**3  # (S, N, N) after broadcast
    return np.einsum("sij,sijc->sic", w, diff)


def min_pair_distance(pos):
    """Smallest pairwise distance over all samples and body pairs."""
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    n = pos.shape[1]
    iu, ju = np.triu_indices(n, 1)
    diff = pos[:, ju, :] - pos[:, iu, :]
    r2 = np.einsum("spc,spc->sp", diff, diff)
    return float(np.sqrt(r2.min()))


def min_pair_distance_per_sample(pos):
    """Smallest pairwise distance within each sample; shape (S,)."""
    pos = np.ascontiguousarray(pos, dtype=np.float64)
    n = pos.shape[1]
    iu, ju = np.triu_indices(n, 1)
    diff = pos[:, ju, :] - pos[:, iu, :]
    r2 = np.einsum("spc,spc->sp", diff, diff)
    return np.sqrt(r2.min(axis=1))
