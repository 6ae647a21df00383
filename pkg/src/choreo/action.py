"""Action, gradient, Euler-Lagrange residual and the coercivity bound.

Discretization: loops are piecewise-linear in time, so the kinetic
integral of the interpolant is computed exactly from the nodal
differences, while the potential integral uses the trapezoidal rule on
the same grid (on a uniform periodic grid this is the plain nodal sum
times the step).  With this pairing, the stationarity condition of the
discrete action at interior nodes is exactly the central-difference
form of Newton's equations, which is what ``el_residual`` measures.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .model import ActionReport, ConstraintFlags, FullLoop, FundamentalArc
from .symmetry import SymmetrySpec, reconstruct_adjoint, reconstruct_full_loop

LINE_SEARCH_GUARD = 1e-6     # reject steps that pass below this distance
DIAGNOSTIC_GUARD = 1e-3      # acceptance-time collision threshold


class CollisionError(ValueError):
    """A configuration came closer than the collision guard."""


@dataclass(frozen=True)
class Quadrature:
    """Quadrature settings: trapezoidal rule plus a collision guard."""

    rule: str = "trapezoid"
    collision_guard: float = LINE_SEARCH_GUARD

    def __post_init__(self):
        if self.collision_guard <= 0:
            raise ValueError("collision guard must be positive")


DEFAULT_QUADRATURE = Quadrature()


def potential(config, masses, guard: float = LINE_SEARCH_GUARD) -> float:
    """Potential sum_{i<j} m_i m_j / |q_i - q_j| of one configuration."""
    pos = np.asarray(config, dtype=np.float64)[None, :, :]
    dmin = kernels.min_pair_distance(pos)
    if dmin < guard:
        raise CollisionError(f"pairwise distance {dmin:.3e} below guard {guard:.1e}")
    return float(kernels.pair_potential(pos, np.asarray(masses, dtype=np.float64))[0])


def kinetic_integral(loop: FullLoop) -> float:
    """Exact integral of the kinetic energy of the PL interpolant."""
    dt = loop.period / loop.sample_count
    dq = np.roll(loop.positions, -1, axis=0) - loop.positions
    sq = np.einsum("sic,sic->si", dq, dq)
    return float(0.5 * np.dot(sq.sum(axis=0), loop.mass_system.masses) / dt)


def potential_integral(loop: FullLoop, quadrature: Quadrature = DEFAULT_QUADRATURE) -> float:
    dt = loop.period / loop.sample_count
    u = kernels.pair_potential(loop.positions, loop.mass_system.masses)
    return float(dt * u.sum())


def _monotone_class(v, tol=0.0):
    d = np.diff(v)
    if np.all(d > tol):
        return "strict"
    if np.all(d >= -tol):
        return "weak"
    return "violated"


def _flags_for(loop: FullLoop, omega=None) -> ConstraintFlags:
    nbody = loop.mass_system.body_count
    n = nbody // 2
    s = loop.sample_count
    quarter = s // 4
    q0 = loop.positions[: quarter + 1, 0, :]
    boundary_ok = bool(abs(q0[0, 1]) <= 1e-12 and abs(q0[-1, 0]) <= 1e-12)
    topo = None
    if omega is not None and s % (2 * n) == 0:
        stride = s // (2 * n)
        z = loop.positions[[i * stride for i in range(n // 2 + 1)], 0, 2]
        topo = bool(np.all(np.asarray(omega.signs) * z >= -1e-12))
    return ConstraintFlags(
        boundary_ok=boundary_ok,
        x_monotone=_monotone_class(q0[:, 0]),
        y_monotone=_monotone_class(q0[:, 1]),
        topo_satisfied=topo,
    )


def action_value(loop: FullLoop, omega=None,
                 quadrature: Quadrature = DEFAULT_QUADRATURE,
                 gradient_inf_norm: float = float("nan")) -> ActionReport:
    """Kinetic/potential/action integrals plus constraint diagnostics."""
    dmin = kernels.min_pair_distance(loop.positions)
    if dmin < quadrature.collision_guard:
        raise CollisionError(
            f"min pairwise distance {dmin:.3e} below guard {quadrature.collision_guard:.1e}")
    k = kinetic_integral(loop)
    u = potential_integral(loop, quadrature)
    return ActionReport(
        kinetic_integral=k,
        potential_integral=u,
        action=k + u,
        gradient_inf_norm=gradient_inf_norm,
        min_pairwise_distance=dmin,
        constraint_flags=_flags_for(loop, omega),
    )


def _loop_gradient(positions: np.ndarray, masses: np.ndarray, dt: float) -> np.ndarray:
    """dA/dq at every (sample, body, coordinate) of a periodic loop."""
    gk = (2.0 * positions - np.roll(positions, 1, axis=0)
          - np.roll(positions, -1, axis=0)) * (masses[None, :, None] / dt)
    gu = dt * kernels.pair_forces(positions, masses)
    return gk + gu


def action_gradient(arc: FundamentalArc, spec: SymmetrySpec,
                    quadrature: Quadrature = DEFAULT_QUADRATURE) -> np.ndarray:
    """Exact gradient of the discretized action w.r.t. the arc samples.

    Returns an (M + 1, 3) array; the two pinned boundary components
    (y at the first node, x at the last) are identically zero and carry
    no gradient.  Matches central finite differences on the free
    coordinates.
    """
    loop = reconstruct_full_loop(spec, arc)
    dmin = kernels.min_pair_distance(loop.positions)
    if dmin < quadrature.collision_guard:
        raise CollisionError(
            f"min pairwise distance {dmin:.3e} below guard {quadrature.collision_guard:.1e}")
    dt = loop.period / loop.sample_count
    g_loop = _loop_gradient(loop.positions, loop.mass_system.masses, dt)
    return reconstruct_adjoint(spec, g_loop, arc.node_count)


def el_residual(loop: FullLoop, sample_stride: int = 1,
                guard: float = LINE_SEARCH_GUARD) -> float:
    """Max Euler-Lagrange defect |m qdd - dU/dq| over samples and bodies.

    Accelerations use second central differences on every
    ``sample_stride``-th node.  On samples of an exact solution the
    residual vanishes at second order in the step.
    """
    s = loop.sample_count
    if sample_stride < 1 or s % sample_stride != 0:
        raise ValueError("sample_stride must divide the sample count")
    pos = loop.positions[::sample_stride]
    if kernels.min_pair_distance(pos) < guard:
        raise CollisionError("collision guard violated")
    dt = loop.period * sample_stride / s
    masses = loop.mass_system.masses
    acc = (np.roll(pos, -1, axis=0) - 2.0 * pos + np.roll(pos, 1, axis=0)) / dt**2
    force = kernels.pair_forces(pos, masses)
    defect = masses[None, :, None] * acc - force
    return float(np.max(np.linalg.norm(defect, axis=2)))


@dataclass(frozen=True)
class CoercivityResult:
    lhs: float     # action value
    rhs: float     # ||q||_{H1}^2 / (2 (n^2 + 1))
    holds: bool


def h1_norm_squared(loop: FullLoop) -> float:
    """Discrete squared H1 norm over the full period and all bodies:
    trapezoidal |q|^2 part plus the exact PL |qdot|^2 part."""
    dt = loop.period / loop.sample_count
    sq = float(np.einsum("sic,sic->", loop.positions, loop.positions)) * dt
    dq = np.roll(loop.positions, -1, axis=0) - loop.positions
    dsq = float(np.einsum("sic,sic->", dq, dq)) / dt
    return sq + dsq


def coercivity_check(loop: FullLoop, omega) -> CoercivityResult:
    """Check  action >= ||q||_{H1}^2 / (2 (n^2 + 1)).

    Precondition: the loop satisfies the sign constraints for ``omega``
    and the boundary identities (the bound is derived from z_0 having a
    zero plus the pinned boundary values).
    """
    from .constraints import diagnose

    nbody = loop.mass_system.body_count
    n = nbody // 2
    diag = diagnose(loop, omega)
    if not (diag.boundary_ok and all(diag.topo_satisfied)):
        raise ValueError("coercivity bound requires boundary identities "
                         "and the sign constraints to hold")
    report = action_value(loop, omega)
    rhs = h1_norm_squared(loop) / (2.0 * (n**2 + 1))
    return CoercivityResult(lhs=report.action, rhs=rhs, holds=bool(report.action >= rhs))
