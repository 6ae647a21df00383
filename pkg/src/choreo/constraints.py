"""Admissibility of sign words and feasibility of arcs/loops.

The solver works in the closed constraint set: x and y samples of the
fundamental arc nondecreasing, boundary values pinned, and the sign of
z_0 at each time i/2 matching the word (zero allowed).  Strictness is
verified a posteriori, not enforced during iteration.

``project_feasible`` is the Euclidean-style projection used by the
optimizer: pool-adjacent-violators for the monotone cone (with the
pinned endpoint as a bound), and a sign *flip* for the topological
constraints, which preserves |z| instead of clamping it to zero.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .model import FullLoop, FundamentalArc, OmegaSequence

WEAK_SIGN_TOLERANCE = 1e-12


@dataclass(frozen=True)
class OmegaValidation:
    valid: bool
    reason: str


def validate_omega(n: int, signs) -> OmegaValidation:
    """Admissibility of a sign word.

    Needs: length floor(n/2) + 1 with entries +-1 (error otherwise);
    at least two differing entries; and for odd n two differing entries
    among indices 1..floor(n/2).
    """
    signs = tuple(int(s) for s in signs)
    want = n // 2 + 1
    if len(signs) != want:
        raise ValueError(f"omega for n={n} needs {want} signs, got {len(signs)}")
    if any(s not in (-1, 1) for s in signs):
        raise ValueError("omega entries must be +1 or -1")
    if len(set(signs)) < 2:
        return OmegaValidation(False, "constant sign word: the two loops would not "
                                      "tangle (membership in the admissible set fails)")
    if n % 2 == 1:
        interior = signs[1:]
        if len(set(interior)) < 2:
            return OmegaValidation(
                False,
                f"odd n needs two differing signs among indices 1..{n // 2}; "
                f"for n = 3 that range is the single index 1, so no word is admissible")
    return OmegaValidation(True, "admissible")


def enumerate_admissible_omega(n: int, modulo_flip: bool = False) -> list:
    """All admissible words for n, in lexicographic '+' < '-' order.

    With ``modulo_flip`` only one representative of each {word, -word}
    pair is kept (the global flip yields the mirror solution).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    length = n // 2 + 1
    out = []
    seen = set()
    # lexicographic in '+' < '-' order means +1 before -1 at each slot
    def rec(prefix):
        if len(prefix) == length:
            signs = tuple(prefix)
            if validate_omega(n, signs).valid:
                if modulo_flip:
                    key = min(signs, tuple(-s for s in signs))
                    if key in seen:
                        return
                    seen.add(key)
                out.append(OmegaSequence(n, signs))
            return
        for s in (1, -1):
            rec(prefix + [s])

    rec([])
    return out


@dataclass(frozen=True)
class FeasibilityDiagnosis:
    omega_valid: bool
    topo_satisfied: tuple      # per-index weak satisfaction, i = 0..[n/2]
    boundary_collision_risk: tuple  # indices with z_0(i/2) == 0 (weakly allowed)
    x_monotone: str            # "strict" | "weak" | "violated"
    y_monotone: str
    boundary_ok: bool

    @property
    def weakly_feasible(self) -> bool:
        return (self.omega_valid and self.boundary_ok
                and all(self.topo_satisfied)
                and self.x_monotone in ("strict", "weak")
                and self.y_monotone in ("strict", "weak"))


def _monotone_class(v):
    d = np.diff(v)
    if np.all(d > 0):
        return "strict"
    if np.all(d >= 0):
        return "weak"
    return "violated"


def constraint_sample_indices(n: int, sample_count: int):
    """Loop-grid indices of the constraint times i/2, i = 0..[n/2]."""
    if (2 * n * (sample_count // (2 * n))) != sample_count:
        raise ValueError(f"grid of {sample_count} samples misses the times i/2")
    stride = sample_count // (2 * n)
    return [i * stride for i in range(n // 2 + 1)]


def diagnose(loop: FullLoop, omega: OmegaSequence) -> FeasibilityDiagnosis:
    """Classify a loop against the sign and monotonicity constraints."""
    n = omega.n
    if loop.mass_system.body_count != 2 * n:
        raise ValueError("loop body count does not match omega")
    s = loop.sample_count
    idx = constraint_sample_indices(n, s)
    z = loop.positions[idx, 0, 2]
    signs = np.asarray(omega.signs, dtype=np.float64)
    topo = tuple(bool(w * v >= -WEAK_SIGN_TOLERANCE) for w, v in zip(signs, z))
    risky = tuple(i for i, v in enumerate(z) if v == 0.0)
    quarter = s // 4
    q0 = loop.positions[: quarter + 1, 0, :]
    boundary_ok = bool(abs(q0[0, 1]) <= 1e-12 and abs(q0[-1, 0]) <= 1e-12)
    return FeasibilityDiagnosis(
        omega_valid=validate_omega(n, omega.signs).valid,
        topo_satisfied=topo,
        boundary_collision_risk=risky,
        x_monotone=_monotone_class(q0[:, 0]),
        y_monotone=_monotone_class(q0[:, 1]),
        boundary_ok=boundary_ok,
    )


def pool_adjacent_violators(values) -> np.ndarray:
    """Euclidean projection onto the nondecreasing cone (unit weights).

    Classic stack-based PAV: pooled blocks take arithmetic means, equal
    values stay equal (plateaus are admissible in the weak cone).
    """
    v = np.asarray(values, dtype=np.float64)
    blocks = []  # (sum, count); merge only on strict violation so that
    # already-monotone sequences (incl. pooled plateaus) pass through
    # bitwise unchanged, making the projection exactly idempotent
    for x in v:
        s, c = x, 1
        while blocks and blocks[-1][0] * c > s * blocks[-1][1]:
            ps, pc = blocks.pop()
            s, c = s + ps, c + pc
        blocks.append((s, c))
    out = np.empty_like(v)
    pos = 0
    for s, c in blocks:
        out[pos : pos + c] = s / c
        pos += c
    return out


def _constraint_arc_positions(n: int, node_count: int):
    """(index, weight) of each constraint time i/2 on the arc grid.

    Weight w means the constraint value is (1-w) z[a] + w z[a+1]; the
    rational is reduced so it matches the loop-grid chord weight bit for
    bit.
    """
    out = []
    for i in range(n // 2 + 1):
        frac = Fraction(2 * node_count * i, n)  # node position of t = i/2
        a = frac.numerator // frac.denominator
        rem = frac - a
        out.append((a, float(rem)))
    return out


def project_feasible(arc: FundamentalArc, omega: OmegaSequence) -> FundamentalArc:
    """Project an arc onto the closed feasible set for ``omega``.

    (a) pins y at the first node and x at the last node to zero;
    (b) enforces weak monotonicity of the x and y samples by PAV
        (with the pinned endpoint acting as a bound);
    (c) flips the sign of z_0 at each constraint time to match the
        word, preserving magnitude.  Idempotent.
    """
    n = arc.n
    check = validate_omega(n, omega.signs)
    if not check.valid:
        raise ValueError(f"invalid omega: {check.reason}")
    m = arc.node_count
    positions = _constraint_arc_positions(n, m)
    if any(w != 0.0 for _, w in positions) and m < n:
        raise ValueError(f"need at least {n} arc intervals to separate the "
                         f"sign constraints for n={n}")
    out = np.array(arc.samples)
    # x: nondecreasing with x[M] = 0 (so interior values bounded above by 0)
    out[:-1, 0] = np.minimum(pool_adjacent_violators(out[:-1, 0]), 0.0)
    out[-1, 0] = 0.0
    # y: nondecreasing with y[0] = 0 (interior bounded below by 0)
    out[1:, 1] = np.maximum(pool_adjacent_violators(out[1:, 1]), 0.0)
    out[0, 1] = 0.0
    # z sign flips at the constraint times
    for (a, w), sign in zip(positions, omega.signs):
        if w == 0.0:
            out[a, 2] = sign * abs(out[a, 2])
        else:
            # constraint time falls inside a chord: when the interpolated
            # value has the wrong sign, flip the offending node signs so
            # the chord value carries sign `sign` exactly
            val = (1.0 - w) * out[a, 2] + w * out[a + 1, 2]
            if sign * val < 0.0:
                out[a, 2] = sign * abs(out[a, 2])
                out[a + 1, 2] = sign * abs(out[a + 1, 2])
    return arc.with_samples(out)
