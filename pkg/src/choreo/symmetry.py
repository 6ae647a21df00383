"""Symmetry group of the double-choreography problem.

The group is generated by four elements acting on 2n-body loops of
period n:

* ``g1`` -- cyclic relabeling within each n-body half combined with a
  unit time shift, so that body i travels the track of body 0 delayed
  by i;
* ``g2`` -- reflection in the xz-plane with time map t -> 1 - t;
* ``h1`` -- half-turn about the x-axis swapping the two halves;
* ``h2`` -- parity-dependent: for even n a half-turn about the z-axis
  pairing bodies half a cycle apart; for odd n a reflection in the
  yz-plane with time map t -> 1/2 - t.

A group element g acts on a loop q by

    (g . q)_i(t) = rho(g) q_{sigma(g^-1)(i)}(tau(g^-1) t)

with tau an affine map of the time circle, rho a signed coordinate
permutation (here always diagonal) and sigma a body permutation.

Every equivariant loop is determined by the track of body 0 on
[0, n/4] (the fundamental arc).  ``reconstruct_full_loop`` performs
that extension on an exactly compatible sample grid, so equivariance
holds to the last bit; ``reconstruct_adjoint`` is its exact transpose,
used by the action gradient.
"""

from dataclasses import dataclass
from fractions import Fraction
from math import gcd

import numpy as np

from .model import FullLoop, FundamentalArc, MassSystem

# Diagonal orthogonal maps used by the group: sign patterns on (x, y, z).
ROTATIONS = {
    "id": (1, 1, 1),
    "Rx": (1, -1, -1),    # half-turn about the x-axis
    "Rz": (-1, -1, 1),    # half-turn about the z-axis
    "Rxz": (1, -1, 1),    # reflection in the xz-plane
    "Ryz": (-1, 1, 1),    # reflection in the yz-plane
}

BOUNDARY_TOLERANCE = 1e-9


class GridError(ValueError):
    """Sample grid not invariant under a requested time map."""


class BoundaryError(ValueError):
    """Arc violates the boundary identities beyond tolerance."""


@dataclass(frozen=True)
class GroupElement:
    """Concrete (tau, rho, sigma) triple; composable and invertible."""

    name: str
    eps: int                 # tau(g): t -> eps * t + shift
    shift: Fraction
    rho: tuple               # diagonal signs on (x, y, z)
    sigma: tuple             # body permutation, sigma[i] = image of i

    def compose(self, other: "GroupElement", period: int) -> "GroupElement":
        """Return self * other (other acts first on the loop)."""
        eps = self.eps * other.eps
        shift = (self.eps * other.shift + self.shift) % period
        rho = tuple(a * b for a, b in zip(self.rho, other.rho))
        sigma = tuple(self.sigma[other.sigma[i]] for i in range(len(self.sigma)))
        return GroupElement(f"{self.name}*{other.name}", eps, shift, rho, sigma)

    def inverse(self, period: int) -> "GroupElement":
        eps = self.eps
        shift = (-self.eps * self.shift) % period
        inv = [0] * len(self.sigma)
        for i, j in enumerate(self.sigma):
            inv[j] = i
        return GroupElement(f"{self.name}^-1", eps, shift, self.rho, tuple(inv))

    def is_identity(self, period: int) -> bool:
        return (self.eps == 1 and self.shift % period == 0
                and self.rho == (1, 1, 1)
                and self.sigma == tuple(range(len(self.sigma))))

    def key(self, period: int):
        return (self.eps, self.shift % period, self.rho, self.sigma)


def _sigma_g1(n):
    p = list(range(2 * n))
    for i in range(n):
        p[i] = (i + 1) % n
        p[n + i] = n + (i + 1) % n
    return tuple(p)


def _sigma_g2(n):
    p = list(range(2 * n))
    for i in range((n - 1) // 2 + 1):
        p[i], p[n - 1 - i] = n - 1 - i, i
        p[n + i], p[2 * n - 1 - i] = 2 * n - 1 - i, n + i
    return tuple(p)


def _sigma_h1(n):
    p = list(range(2 * n))
    for i in range(n):
        p[i], p[n + i] = n + i, i
    return tuple(p)


def _sigma_h2(n):
    p = list(range(2 * n))
    if n % 2 == 0:
        h = n // 2
        for i in range(h):
            p[i], p[h + i] = h + i, i
            p[n + i], p[n + h + i] = n + h + i, n + i
    else:
        m = n // 2
        for i in range(n // 4 + 1):
            p[i], p[m - i] = m - i, i
            p[n + i], p[n + m - i] = n + m - i, n + i
        for i in range(1, (n + 1) // 4 + 1):
            p[m + i], p[n - i] = n - i, m + i
            p[n + m + i], p[2 * n - i] = 2 * n - i, n + m + i
    return tuple(p)


def make_generators(n: int) -> dict:
    half = Fraction(1, 2)
    gens = {
        "g1": GroupElement("g1", 1, Fraction(-1), ROTATIONS["id"], _sigma_g1(n)),
        "g2": GroupElement("g2", -1, Fraction(1), ROTATIONS["Rxz"], _sigma_g2(n)),
        "h1": GroupElement("h1", 1, Fraction(0), ROTATIONS["Rx"], _sigma_h1(n)),
    }
    if n % 2 == 0:
        gens["h2"] = GroupElement("h2", 1, Fraction(0), ROTATIONS["Rz"], _sigma_h2(n))
    else:
        gens["h2"] = GroupElement("h2", -1, half, ROTATIONS["Ryz"], _sigma_h2(n))
    return gens


@dataclass(frozen=True)
class SymmetrySpec:
    """Generator table for a given n, plus the closed element list."""

    n: int
    generators: dict

    @staticmethod
    def for_n(n: int) -> "SymmetrySpec":
        if n < 2:
            raise ValueError("n must be >= 2")
        return SymmetrySpec(n, make_generators(n))

    @property
    def parity(self) -> str:
        return "even" if self.n % 2 == 0 else "odd"

    def element(self, name: str) -> GroupElement:
        return self.generators[name]

    def group_elements(self) -> list:
        """All distinct elements generated by the four generators (BFS)."""
        n = self.n
        seen = {}
        ident = GroupElement("e", 1, Fraction(0), (1, 1, 1), tuple(range(2 * n)))
        frontier = [ident]
        seen[ident.key(n)] = ident
        while frontier:
            nxt = []
            for el in frontier:
                for g in self.generators.values():
                    comp = g.compose(el, n)
                    k = comp.key(n)
                    if k not in seen:
                        seen[k] = comp
                        nxt.append(comp)
            frontier = nxt
        return list(seen.values())

    def stabilizer(self, t0: Fraction) -> list:
        """Elements whose inverse time map fixes t0 on the circle."""
        out = []
        for el in self.group_elements():
            t = (el.eps * (t0 - el.shift)) % self.n
            if t == t0 % self.n:
                out.append(el)
        return out


# ---------------------------------------------------------------------------
# group action on sampled loops
# ---------------------------------------------------------------------------

def _word_elements(spec: SymmetrySpec, word) -> list:
    out = []
    for w in word:
        out.append(spec.element(w) if isinstance(w, str) else w)
    return out


def apply_group_element(spec: SymmetrySpec, word, loop: FullLoop) -> FullLoop:
    """Apply a word of group elements (leftmost acts last) to a loop.

    Raises GridError when a time map does not send sample nodes to
    sample nodes.
    """
    n = spec.n
    s = loop.sample_count
    pos = loop.positions
    for el in reversed(_word_elements(spec, word)):
        inv = el.inverse(n)
        steps = inv.shift * s / n
        if steps.denominator != 1:
            raise GridError(f"time shift {inv.shift} of {el.name} off the {s}-sample grid")
        b = int(steps) % s
        src_t = (inv.eps * np.arange(s) + b) % s
        rho = np.array(el.rho, dtype=np.float64)
        new = np.empty_like(pos)
        for i in range(2 * n):
            new[:, i, :] = pos[src_t, inv.sigma[i], :] * rho
        pos = new
    return FullLoop(loop.mass_system, loop.period, pos)


def equivariance_residual(spec: SymmetrySpec, loop: FullLoop) -> float:
    """Max over generators and samples of |g(q) - q|, infinity norm."""
    worst = 0.0
    for name in ("g1", "g2", "h1", "h2"):
        moved = apply_group_element(spec, [name], loop)
        worst = max(worst, float(np.max(np.abs(moved.positions - loop.positions))))
    return worst


# ---------------------------------------------------------------------------
# reconstruction: arc -> loop, and its adjoint
# ---------------------------------------------------------------------------

def loop_sample_count(n: int, node_count: int) -> int:
    """Smallest sample count whose grid is invariant under all generator
    time maps and contains both the arc nodes and the times i/2."""
    k = n // gcd(2 * node_count, n)
    return 4 * node_count * k


def _chord_stride(n: int, node_count: int) -> int:
    return n // gcd(2 * node_count, n)


def _q0_grid(spec: SymmetrySpec, arc_samples: np.ndarray, n: int) -> np.ndarray:
    """Extend arc samples to the track of body 0 on the full period grid."""
    m = arc_samples.shape[0] - 1
    k = _chord_stride(n, m)
    s = 4 * m * k
    quarter, half = s // 4, s // 2
    q0 = np.empty((s, 3))
    if k == 1:
        q0[: quarter + 1] = arc_samples
    else:
        for j in range(k):
            w = float(Fraction(j, k))
            q0[j:quarter:k] = (1.0 - w) * arc_samples[:-1] + w * arc_samples[1:]
        q0[quarter] = arc_samples[-1]
    ryz = np.array(ROTATIONS["Ryz"], dtype=np.float64)
    q0[quarter + 1 : half + 1] = q0[quarter - 1 :: -1] * ryz
    if n % 2 == 0:
        rz = np.array(ROTATIONS["Rz"], dtype=np.float64)
        q0[half + 1 :] = q0[1:half] * rz
    else:
        rxz = np.array(ROTATIONS["Rxz"], dtype=np.float64)
        q0[half + 1 :] = q0[half - 1 : 0 : -1] * rxz
    return q0


def _tracks_from_q0(q0: np.ndarray, n: int) -> np.ndarray:
    s = q0.shape[0]
    step = s // n
    pos = np.empty((s, 2 * n, 3))
    rx = np.array(ROTATIONS["Rx"], dtype=np.float64)
    for i in range(n):
        track = np.roll(q0, -i * step, axis=0)
        pos[:, i, :] = track
        pos[:, n + i, :] = track * rx
    return pos


def reconstruct_full_loop(spec: SymmetrySpec, arc: FundamentalArc,
                          tolerance: float = BOUNDARY_TOLERANCE) -> FullLoop:
    """Extend a fundamental arc to the full 2n-body loop.

    The arc must satisfy the boundary identities y(0) = x(n/4) = 0
    within ``tolerance``; those two values are snapped to exact zero so
    the reconstruction seams close bit-exactly.
    """
    n = spec.n
    if arc.n != n:
        raise ValueError(f"arc built for n={arc.n}, spec has n={n}")
    if arc.boundary_residual() > tolerance:
        raise BoundaryError(
            f"boundary identities violated: |y(0)|, |x(n/4)| = "
            f"{abs(arc.samples[0, 1]):.3e}, {abs(arc.samples[-1, 0]):.3e} > {tolerance:.1e}")
    samples = np.array(arc.samples)
    samples[0, 1] = 0.0
    samples[-1, 0] = 0.0
    q0 = _q0_grid(spec, samples, n)
    pos = _tracks_from_q0(q0, n)
    return FullLoop(MassSystem.choreography(n), float(n), pos)


def reconstruct_adjoint(spec: SymmetrySpec, loop_grad: np.ndarray,
                        node_count: int) -> np.ndarray:
    """Transpose of the (linear) reconstruction map.

    Pulls an (S, 2n, 3) sensitivity back to an (M + 1, 3) arc
    sensitivity.  The two pinned boundary components are zeroed.
    """
    n = spec.n
    m = node_count
    k = _chord_stride(n, m)
    s = 4 * m * k
    if loop_grad.shape != (s, 2 * n, 3):
        raise ValueError("loop_grad shape does not match (n, node_count)")
    quarter, half = s // 4, s // 2
    step = s // n
    rx = np.array(ROTATIONS["Rx"], dtype=np.float64)
    g0 = np.zeros((s, 3))
    for i in range(n):
        g0 += np.roll(loop_grad[:, i, :], i * step, axis=0)
        g0 += np.roll(loop_grad[:, n + i, :] * rx, i * step, axis=0)
    if n % 2 == 0:
        rz = np.array(ROTATIONS["Rz"], dtype=np.float64)
        g0[1:half] += g0[half + 1 :] * rz
    else:
        rxz = np.array(ROTATIONS["Rxz"], dtype=np.float64)
        g0[half - 1 : 0 : -1] += g0[half + 1 :] * rxz
    ryz = np.array(ROTATIONS["Ryz"], dtype=np.float64)
    g0[quarter - 1 :: -1] += g0[quarter + 1 : half + 1] * ryz
    g_arc = np.zeros((m + 1, 3))
    if k == 1:
        g_arc[:] = g0[: quarter + 1]
    else:
        for j in range(k):
            w = float(Fraction(j, k))
            block = g0[j:quarter:k]
            g_arc[:-1] += (1.0 - w) * block
            g_arc[1:] += w * block
        g_arc[-1] += g0[quarter]
    g_arc[0, 1] = 0.0
    g_arc[-1, 0] = 0.0
    return g_arc


def extract_arc(spec: SymmetrySpec, loop: FullLoop,
                node_count: int | None = None) -> FundamentalArc:
    """Read body 0 on [0, n/4] back out of a loop.

    The default node count is S/4, valid whenever n divides S/2 (true
    for every loop built by ``reconstruct_full_loop``).
    """
    n = spec.n
    s = loop.sample_count
    if node_count is None:
        if (s // 2) % n != 0:
            raise GridError("cannot infer node_count; pass it explicitly")
        node_count = s // 4
    stride = Fraction(s, 4 * node_count)
    if stride.denominator != 1:
        raise GridError(f"{node_count} arc nodes do not embed in a {s}-sample grid")
    idx = np.arange(node_count + 1) * int(stride)
    return FundamentalArc(n, loop.positions[idx, 0, :])


# ---------------------------------------------------------------------------
# geometric partitions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadrantPartition:
    """Index sets confining bodies to quadrants (even n) or to the
    upper/lower half-spaces y >= 0 / y <= 0 (odd n) on [0, 1/2]."""

    n: int
    regions: dict  # label -> frozenset of body indices

    def region_of(self, body: int) -> str:
        for label, members in self.regions.items():
            if body in members:
                return label
        raise KeyError(body)


def quadrant_partition(n: int) -> QuadrantPartition:
    """Body-index partition matching the quadrant confinement of the
    monotone problem; exact enumerations per residue class of n mod 4."""
    if n < 2:
        raise ValueError("n must be >= 2")
    r = n % 4
    if r == 0:
        l = n // 4
        regions = {
            "Q2": set(range(0, l)) | set(range(7 * l, 8 * l)),
            "Q1": set(range(l, 2 * l)) | set(range(6 * l, 7 * l)),
            "Q4": set(range(2 * l, 3 * l)) | set(range(5 * l, 6 * l)),
            "Q3": set(range(3 * l, 4 * l)) | set(range(4 * l, 5 * l)),
        }
    elif r == 2:
        l = (n - 2) // 4
        regions = {
            "Q2": set(range(0, l + 1)) | set(range(7 * l + 4, 8 * l + 4)),
            "Q1": set(range(l + 1, 2 * l + 1)) | set(range(6 * l + 3, 7 * l + 4)),
            "Q4": set(range(2 * l + 1, 3 * l + 2)) | set(range(5 * l + 3, 6 * l + 3)),
            "Q3": set(range(3 * l + 2, 4 * l + 2)) | set(range(4 * l + 2, 5 * l + 3)),
        }
    elif r == 1:
        l = (n - 1) // 4
        regions = {
            "upper": set(range(0, 2 * l + 1)) | set(range(6 * l + 2, 8 * l + 2)),
            "lower": set(range(2 * l + 1, 4 * l + 1)) | set(range(4 * l + 1, 6 * l + 2)),
        }
    else:
        l = (n - 3) // 4
        regions = {
            "upper": set(range(0, 2 * l + 2)) | set(range(6 * l + 5, 8 * l + 6)),
            "lower": set(range(2 * l + 2, 4 * l + 3)) | set(range(4 * l + 3, 6 * l + 5)),
        }
    frozen = {label: frozenset(v) for label, v in regions.items()}
    covered = sorted(i for v in frozen.values() for i in v)
    if covered != list(range(2 * n)):
        raise AssertionError(f"partition for n={n} does not cover all bodies")
    return QuadrantPartition(n, frozen)


class WellOverlapError(ValueError):
    """Two well interiors intersect (monotonicity violated)."""


@dataclass(frozen=True)
class Well:
    body: int
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float

    def interior_overlaps(self, other: "Well") -> bool:
        x_over = self.x_lo < other.x_hi and other.x_lo < self.x_hi
        y_over = self.y_lo < other.y_hi and other.y_lo < self.y_hi
        return x_over and y_over


def well_regions(loop: FullLoop, check: bool = True) -> list:
    """Axis-aligned x/y slabs confining each body on [0, 1/2].

    Bounds come from the body positions at t = 0 and t = 1/2, except
    bodies [n/4] and n + [n/4] for odd n whose y-range turns around at
    t = 1/4.  With ``check`` the interiors are asserted pairwise
    disjoint (WellOverlapError otherwise).
    """
    nbody = loop.mass_system.body_count
    n = nbody // 2
    s = loop.sample_count
    for denom in (2 * n, 4 * n):
        if s % denom != 0:
            raise GridError(f"grid of {s} samples misses the t=1/{denom//n} nodes")
    s_half = s // (2 * n)      # t = 1/2
    s_quarter = s // (4 * n)   # t = 1/4
    odd_turn = {n // 4, n + n // 4} if n % 2 == 1 else set()
    wells = []
    for i in range(nbody):
        x0, xh = loop.positions[0, i, 0], loop.positions[s_half, i, 0]
        y0 = loop.positions[0, i, 1]
        y1 = loop.positions[s_quarter if i in odd_turn else s_half, i, 1]
        wells.append(Well(i, min(x0, xh), max(x0, xh), min(y0, y1), max(y0, y1)))
    if check:
        for a in range(nbody):
            for b in range(a + 1, nbody):
                if wells[a].interior_overlaps(wells[b]):
                    raise WellOverlapError(
                        f"wells of bodies {a} and {b} overlap "
                        "(monotonicity violated)")
    return wells
