"""Explicit path deformations: pull-apart, monotonization, vertical
kicks, and the plateau shift.

These operate on plain sampled path segments with arbitrary positive
masses (not only the choreography system).  They serve two roles:
escape moves inside the optimizer, and testable closed-form identities
(kinetic increments, distance monotonicity) used as oracles.

Axis conventions: ``axis`` is "x" or "y" (columns 0 / 1); sampled
segments are uniform in time on [0, T], piecewise linear in between.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import FundamentalArc, OmegaSequence
from .symmetry import SymmetrySpec

_AXIS_COLUMN = {"x": 0, "y": 1}


class WitnessError(ValueError):
    """Separation witness invalid for the given segment."""


@dataclass(frozen=True)
class PathSegment:
    """Uniformly sampled path of N bodies on [0, duration]."""

    duration: float
    positions: np.ndarray  # (L + 1, N, 3)
    masses: np.ndarray     # (N,)

    def __post_init__(self):
        object.__setattr__(self, "positions", np.array(self.positions, dtype=np.float64))
        object.__setattr__(self, "masses", np.array(self.masses, dtype=np.float64))
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.positions.ndim != 3 or self.positions.shape[2] != 3:
            raise ValueError("positions must be (L + 1, N, 3)")
        if self.masses.shape != (self.positions.shape[1],):
            raise ValueError("masses must match the body axis")

    @property
    def body_count(self) -> int:
        return self.positions.shape[1]

    @property
    def interval_count(self) -> int:
        return self.positions.shape[0] - 1

    @property
    def times(self) -> np.ndarray:
        l = self.interval_count
        return self.duration * np.arange(l + 1) / l

    def with_positions(self, positions) -> "PathSegment":
        return PathSegment(self.duration, positions, self.masses)


def kinetic_energy(segment: PathSegment) -> float:
    """Exact kinetic integral of the PL interpolant."""
    dt = segment.duration / segment.interval_count
    dq = np.diff(segment.positions, axis=0)
    sq = np.einsum("sic,sic->si", dq, dq)
    return float(0.5 * np.dot(sq.sum(axis=0), segment.masses) / dt)


def pairwise_distances(segment: PathSegment) -> np.ndarray:
    """(L + 1, P) distances over all body pairs i < j."""
    n = segment.body_count
    iu, ju = np.triu_indices(n, 1)
    diff = segment.positions[:, ju, :] - segment.positions[:, iu, :]
    return np.sqrt(np.einsum("spc,spc->sp", diff, diff))


@dataclass(frozen=True)
class SeparationWitness:
    """Ordering data placing a colliding pair (j, k) between two index
    blocks along one axis: j's coordinate starts at the shared collision
    value and stays below it, k's stays above, block I0 sits below j's
    final value and I1 above k's final value."""

    j: int
    k: int
    i_zero: frozenset
    i_one: frozenset
    axis: str

    def __post_init__(self):
        if self.axis not in _AXIS_COLUMN:
            raise ValueError("axis must be 'x' or 'y'")
        object.__setattr__(self, "i_zero", frozenset(self.i_zero))
        object.__setattr__(self, "i_one", frozenset(self.i_one))

    def column(self) -> int:
        return _AXIS_COLUMN[self.axis]

    def validate_structure(self, segment: PathSegment) -> None:
        n = segment.body_count
        rest = set(range(n)) - {self.j, self.k}
        if self.j == self.k or not (0 <= self.j < n and 0 <= self.k < n):
            raise WitnessError("j, k must be distinct body indices")
        if self.i_zero & self.i_one:
            raise WitnessError("I0 and I1 must be disjoint")
        if (self.i_zero | self.i_one) != rest:
            raise WitnessError("I0 and I1 must partition the bystanders")

    def validate(self, segment: PathSegment, tol: float = 1e-12) -> None:
        """Check conditions (i)-(ii) of the separation definition."""
        self.validate_structure(segment)
        c = self.column()
        aj = segment.positions[:, self.j, c]
        ak = segment.positions[:, self.k, c]
        if abs(aj[0] - ak[0]) > tol:
            raise WitnessError("j and k must start at the shared collision coordinate")
        if np.any(aj > aj[0] + tol) or np.any(aj < aj[-1] - tol):
            raise WitnessError(f"{self.axis}_j must stay within [{self.axis}_j(T), {self.axis}_j(0)]")
        if np.any(ak < ak[0] - tol) or np.any(ak > ak[-1] + tol):
            raise WitnessError(f"{self.axis}_k must stay within [{self.axis}_k(0), {self.axis}_k(T)]")
        for i in self.i_zero:
            if np.any(segment.positions[:, i, c] > aj[-1] + tol):
                raise WitnessError(f"body {i} in I0 crosses {self.axis}_j(T)")
        for i in self.i_one:
            if np.any(segment.positions[:, i, c] < ak[-1] - tol):
                raise WitnessError(f"body {i} in I1 crosses {self.axis}_k(T)")


def pull_apart(segment: PathSegment, witness: SeparationWitness,
               eps2: float) -> PathSegment:
    """Parabolic push separating a collision at t = 0 along the witness
    axis.

    Bodies j/k move by -/+ t(2 eps2 - t) for t <= eps2 and by the
    constant -/+ eps2^2 afterwards; blocks I0/I1 are rigidly offset by
    -/+ eps2^2 throughout.  Requires a strict final gap
    a_j(T) < a_k(T).  eps2 = 0 is the identity.
    """
    if eps2 < 0:
        raise ValueError("eps2 must be nonnegative")
    if eps2 >= segment.duration:
        raise ValueError("eps2 must be smaller than the segment duration")
    witness.validate(segment)
    c = witness.column()
    aj = segment.positions[:, witness.j, c]
    ak = segment.positions[:, witness.k, c]
    if not aj[-1] < ak[-1]:
        raise WitnessError("pull_apart needs a strict final gap a_j(T) < a_k(T)")
    if eps2 == 0.0:
        return segment.with_positions(segment.positions)
    t = segment.times
    bump = np.where(t <= eps2, t * (2.0 * eps2 - t), eps2 * eps2)
    out = np.array(segment.positions)
    out[:, witness.j, c] -= bump
    out[:, witness.k, c] += bump
    off = eps2 * eps2
    for i in witness.i_zero:
        out[:, i, c] -= off
    for i in witness.i_one:
        out[:, i, c] += off
    return segment.with_positions(out)


def monotonize(segment: PathSegment, witness: SeparationWitness) -> PathSegment:
    """Two-stage monotonization of the colliding pair's axis coordinate.

    Stage 1 reflects excursions of a_j above (a_k below) the collision
    coordinate back across it, shifting the tails and the I0/I1 blocks
    clear.  Stage 2 replaces a_j/a_k by the collision coordinate minus/
    plus the running total of |increments| and re-offsets the blocks for
    endpoint consistency.  Node speeds are preserved in magnitude, so
    the kinetic energy is unchanged; pairwise distances never decrease.
    """
    witness.validate_structure(segment)
    c = witness.column()
    pos = np.array(segment.positions)
    aj = pos[:, witness.j, c]
    ak = pos[:, witness.k, c]
    if aj[0] != ak[0]:
        raise WitnessError("j and k must start at the shared collision coordinate")
    x_col = aj[0]

    def reflect_above(track):
        delta = max(0.0, float(np.max(track)) - x_col)
        if delta == 0.0:
            return track
        t_peak = int(np.flatnonzero(track == np.max(track))[0])
        new = np.array(track)
        head = new[: t_peak + 1]
        above = head > x_col
        head[above] = 2.0 * x_col - head[above]
        new[t_peak + 1 :] -= 2.0 * delta
        return new

    def reflect_below(track):
        delta = max(0.0, x_col - float(np.min(track)))
        if delta == 0.0:
            return track
        t_trough = int(np.flatnonzero(track == np.min(track))[0])
        new = np.array(track)
        head = new[: t_trough + 1]
        below = head < x_col
        head[below] = 2.0 * x_col - head[below]
        new[t_trough + 1 :] += 2.0 * delta
        return new

    dj = max(0.0, float(np.max(aj)) - x_col)
    dk = max(0.0, x_col - float(np.min(ak)))
    aj_t = reflect_above(aj)
    ak_t = reflect_below(ak)
    pos[:, witness.j, c] = aj_t
    pos[:, witness.k, c] = ak_t
    for i in witness.i_zero:
        pos[:, i, c] -= 2.0 * dj
    for i in witness.i_one:
        pos[:, i, c] += 2.0 * dk

    # stage 2: signed cumulative absolute increments
    aj_hat = np.empty_like(aj_t)
    aj_hat[0] = x_col
    aj_hat[1:] = x_col - np.cumsum(np.abs(np.diff(aj_t)))
    ak_hat = np.empty_like(ak_t)
    ak_hat[0] = x_col
    ak_hat[1:] = x_col + np.cumsum(np.abs(np.diff(ak_t)))
    off_zero = aj_hat[-1] - aj_t[-1]
    off_one = ak_hat[-1] - ak_t[-1]
    pos[:, witness.j, c] = aj_hat
    pos[:, witness.k, c] = ak_hat
    for i in witness.i_zero:
        pos[:, i, c] += off_zero
    for i in witness.i_one:
        pos[:, i, c] += off_one
    return segment.with_positions(pos)


# ---------------------------------------------------------------------------
# vertical kicks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TauVector:
    """Per-body kick signs in {0, +-1}, not all zero."""

    entries: tuple

    def __post_init__(self):
        entries = tuple(int(e) for e in self.entries)
        object.__setattr__(self, "entries", entries)
        if any(e not in (-1, 0, 1) for e in entries):
            raise ValueError("tau entries must be 0 or +-1")
        if not any(entries):
            raise ValueError("tau must not be identically zero")

    def __len__(self):
        return len(self.entries)


def is_tau_admissible(tau: TauVector, cluster, spec: SymmetrySpec, t0,
                      axis: int):
    """Admissibility of a kick vector for an isolated cluster collision.

    Conditions: tau differs on two cluster indices; for every group
    element whose time map fixes t0, the induced index carries the
    rho-transformed sign along the kick axis; tau vanishes off the
    stabilizer orbit of the cluster.  Returns (ok, reason).
    """
    cluster = frozenset(cluster)
    vals = {tau.entries[i] for i in cluster}
    if len(vals) < 2:
        return False, "tau must take two different values on the cluster"
    t0 = Fraction(t0)
    stab = spec.stabilizer(t0)
    orbit = set()
    for el in stab:
        inv_sigma = el.inverse(spec.n).sigma
        sign = el.rho[axis]
        for i in cluster:
            j = inv_sigma[i]
            orbit.add(j)
            if tau.entries[j] != sign * tau.entries[i]:
                return False, (f"element {el.name} maps body {i} to {j} with axis sign "
                               f"{sign:+d}, but tau[{j}] != {sign:+d}*tau[{i}]")
    for i in range(len(tau)):
        if i not in orbit and tau.entries[i] != 0:
            return False, f"tau[{i}] nonzero outside the stabilizer orbit of the cluster"
    return True, "admissible"


@dataclass(frozen=True)
class KickProfile:
    """Piecewise-linear plateau/ramp bump h(t) with amplitude epsilon.

    shape "start": plateau [t0, t0+d1], ramp down to zero at t0+d2
    (collision at the segment start); "end" mirrors it; "interior" has a
    symmetric plateau [t0-d1, t0+d1] with ramps on both sides.  h = 1 on
    the plateau, 0 outside the support, monotone on the ramps.
    """

    epsilon: float
    t0: float
    d1: float
    d2: float
    d: float
    shape: str

    def __post_init__(self):
        if self.shape not in ("start", "end", "interior"):
            raise ValueError("shape must be start, end or interior")
        if not (0 < self.d1 < self.d2 < self.d):
            raise ValueError("need 0 < d1 < d2 < d")

    def support(self):
        if self.shape == "start":
            return self.t0, self.t0 + self.d2
        if self.shape == "end":
            return self.t0 - self.d2, self.t0
        return self.t0 - self.d2, self.t0 + self.d2

    def values(self, times) -> np.ndarray:
        t = np.asarray(times, dtype=np.float64)
        if self.shape == "start":
            u = t - self.t0
            h = np.clip((self.d2 - u) / (self.d2 - self.d1), 0.0, 1.0)
            h[u < 0] = 0.0
        elif self.shape == "end":
            u = self.t0 - t
            h = np.clip((self.d2 - u) / (self.d2 - self.d1), 0.0, 1.0)
            h[u < 0] = 0.0
        else:
            u = np.abs(t - self.t0)
            h = np.clip((self.d2 - u) / (self.d2 - self.d1), 0.0, 1.0)
        return h


def vertical_kick(segment: PathSegment, tau: TauVector, profile: KickProfile,
                  direction, require_planar: bool = True,
                  planar_tol: float = 1e-9) -> PathSegment:
    """Add epsilon * h(t) * tau_i along ``direction`` to every body.

    The construction assumes the segment lies in a plane and the kick
    direction is perpendicular to it; pass ``require_planar=False`` for
    heuristic uses on nearly-planar data.  epsilon = 0 is the identity.
    """
    if len(tau) != segment.body_count:
        raise ValueError("tau length must match the body count")
    direction = np.asarray(direction, dtype=np.float64)
    norm = float(np.linalg.norm(direction))
    if norm == 0.0:
        raise ValueError("direction must be a nonzero vector")
    direction = direction / norm
    lo, hi = profile.support()
    if lo < -1e-12 or hi > segment.duration + 1e-12:
        raise ValueError("profile support must lie inside the segment")
    if require_planar:
        comp = segment.positions @ direction
        if float(comp.max() - comp.min()) > planar_tol:
            raise WitnessError("segment is not planar perpendicular to the kick "
                               "direction (pass require_planar=False to override)")
    h = profile.values(segment.times)
    tau_arr = np.array(tau.entries, dtype=np.float64)
    bump = profile.epsilon * h[:, None, None] * tau_arr[None, :, None] * direction[None, None, :]
    return segment.with_positions(segment.positions + bump)


# ---------------------------------------------------------------------------
# plateau shift (escape move for degenerate monotone coordinates)
# ---------------------------------------------------------------------------

def shift_deformation(segment: PathSegment, interval, moved_minus,
                      moved_plus, offset_minus, offset_plus, eps: float,
                      axis: str = "x", variant: str = "before") -> PathSegment:
    """Literal piecewise-linear shift used to break a coordinate plateau.

    With ``variant="before"`` the moved bodies are displaced by -/+ eps
    on [0, t1], ramp linearly back to zero across the plateau [t1, t2]
    and are untouched afterwards ("after" mirrors this around the
    plateau).  Blocks offset_minus/offset_plus are rigidly shifted by
    -/+ eps throughout.  On an exact plateau each moved unit mass adds
    kinetic energy eps^2 / (2 (t2 - t1)): four moved bodies give
    2 eps^2 / (t2 - t1).
    """
    c = _AXIS_COLUMN[axis]
    t1, t2 = interval
    if not 0.0 <= t1 < t2 <= segment.duration:
        raise ValueError("plateau interval must be inside the segment")
    t = segment.times
    if variant == "before":
        ramp = np.where(t <= t1, -1.0, np.where(t >= t2, 0.0, (t - t2) / (t2 - t1)))
    elif variant == "after":
        ramp = np.where(t <= t1, 0.0, np.where(t >= t2, 1.0, (t - t1) / (t2 - t1)))
    else:
        raise ValueError("variant must be 'before' or 'after'")
    out = np.array(segment.positions)
    for i in moved_minus:
        out[:, i, c] += eps * ramp
    for i in moved_plus:
        out[:, i, c] -= eps * ramp
    for i in offset_minus:
        out[:, i, c] -= eps
    for i in offset_plus:
        out[:, i, c] += eps
    return segment.with_positions(out)


class PlateauError(ValueError):
    """No plateau found where one was claimed."""


def shift_escape(arc: FundamentalArc, omega: OmegaSequence, plateau,
                 axis: str, eps: float, plateau_tol: float = 1e-9) -> FundamentalArc:
    """Break a detected coordinate plateau of the fundamental arc.

    ``plateau`` is a node index pair (i1, i2), i2 > i1, on which the
    axis coordinate is constant (within ``plateau_tol``).  For the x
    axis the part before the plateau is lowered by eps and ramps back
    across it (keeping x(n/4) = 0 pinned); for the y axis the part
    after is raised (keeping y(0) = 0 pinned).  The result is
    re-projected onto the feasible set.
    """
    from .constraints import project_feasible

    c = _AXIS_COLUMN[axis]
    i1, i2 = plateau
    m = arc.node_count
    if not (0 <= i1 < i2 <= m):
        raise ValueError("plateau indices out of range")
    track = arc.samples[:, c]
    if float(np.max(track[i1 : i2 + 1]) - np.min(track[i1 : i2 + 1])) > plateau_tol:
        raise PlateauError(f"{axis} is not constant on nodes [{i1}, {i2}]")
    out = np.array(arc.samples)
    idx = np.arange(m + 1, dtype=np.float64)
    if axis == "x":
        ramp = np.where(idx <= i1, -1.0, np.where(idx >= i2, 0.0, (idx - i2) / (i2 - i1)))
    else:
        ramp = np.where(idx <= i1, 0.0, np.where(idx >= i2, 1.0, (idx - i1) / (i2 - i1)))
    out[:, c] += eps * ramp
    return project_feasible(arc.with_samples(out), omega)


def find_plateaus(arc: FundamentalArc, window: int = 3,
                  tol: float = 1e-9) -> list:
    """Maximal runs of >= ``window`` consecutive nodes where x or y is
    constant within ``tol``; returns (axis, i_start, i_end) triples."""
    out = []
    for axis, c in _AXIS_COLUMN.items():
        track = arc.samples[:, c]
        small = np.abs(np.diff(track)) < tol
        i = 0
        m = len(small)
        while i < m:
            if small[i]:
                j = i
                while j < m and small[j]:
                    j += 1
                if j - i + 1 >= window:
                    out.append((axis, i, j))
                i = j
            else:
                i += 1
    return out
