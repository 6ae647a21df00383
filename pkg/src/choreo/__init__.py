"""Variational solver for spatial double choreographies of the
equal-mass 2n-body problem: equivariant discretization, constrained
action minimization, and post-hoc certification."""

__version__ = "0.1.0"

from .kernels import BACKEND  # noqa: F401
