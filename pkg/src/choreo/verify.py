"""Post-hoc certification of candidate double choreographies.

``certify`` audits a loop against every checkable conclusion of the
existence theorem: equivariance, boundary identities, strict sign and
monotonicity conditions, velocity signs, collision distance, well
disjointness, quadrant confinement, the Euler-Lagrange residual, the
coercivity bound, simplicity of the projected track, the location of
the two loops' intersections, and spatiality.  Failures are recorded in
the certificate, never thrown.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .action import coercivity_check, el_residual
from .constraints import constraint_sample_indices
from .model import FullLoop, OmegaSequence
from .symmetry import (SymmetrySpec, equivariance_residual,
                       quadrant_partition, well_regions)


@dataclass(frozen=True)
class Thresholds:
    """Numeric acceptance thresholds for the certificate checks."""

    equivariance: float = 1e-12
    boundary: float = 1e-12
    sign_margin: float = 1e-9          # strict topological signs
    monotone_margin: float = 0.0       # strict monotonicity: diffs must exceed this
    endpoint_velocity_factor: float = 10.0  # x allowed |dx/dt| at pinned ends: factor * dt
    collision_distance: float = 1e-3
    quadrant_slack: float = 1e-9
    el_residual: float = 1e-3
    spatial_extent: float = 1e-3
    meet_distance: float | None = None  # None: 3x the largest q0 segment length
    meet_z: float | None = None         # None: same as meet_distance


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: float
    threshold: float
    detail: str = ""

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed,
                "measured": self.measured, "threshold": self.threshold,
                "detail": self.detail}


@dataclass(frozen=True)
class Certificate:
    n: int
    omega: tuple
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self) -> dict:
        return {"n": self.n, "omega": list(self.omega),
                "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}

    def render(self) -> str:
        lines = [f"certificate for n={self.n}, omega="
                 + ",".join("+" if s > 0 else "-" for s in self.omega)]
        for c in self.checks:
            mark = "PASS" if c.passed else "FAIL"
            lines.append(f"  [{mark}] {c.name}: measured {c.measured:.6e} "
                         f"vs threshold {c.threshold:.6e}"
                         + (f" ({c.detail})" if c.detail else ""))
        lines.append(f"  overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def certificate_from_dict(doc: dict) -> Certificate:
    checks = tuple(CheckResult(c["name"], bool(c["passed"]), float(c["measured"]),
                               float(c["threshold"]), c.get("detail", ""))
                   for c in doc["checks"])
    return Certificate(int(doc["n"]), tuple(doc["omega"]), checks)


def _segments_intersect_2d(p1, p2, q1, q2):
    """Vectorized proper-intersection test for 2D segment batches."""
    d1 = p2 - p1
    d2 = q2 - q1
    denom = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    dq = q1 - p1
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (dq[:, 0] * d2[:, 1] - dq[:, 1] * d2[:, 0]) / denom
        u = (dq[:, 0] * d1[:, 1] - dq[:, 1] * d1[:, 0]) / denom
    ok = np.abs(denom) > 1e-15
    eps = 1e-12
    return ok & (t > eps) & (t < 1 - eps) & (u > eps) & (u < 1 - eps)


def _simple_curve_violations(points_2d: np.ndarray) -> int:
    """Count proper self-intersections of a closed polyline (adjacent
    segments excluded); O(S^2) pair sweep in blocks."""
    s = points_2d.shape[0]
    a = points_2d
    b = np.roll(points_2d, -1, axis=0)
    count = 0
    for i in range(s):
        j = np.arange(i + 2, s)
        j = j[(j + 1) % s != i]  # skip the segment adjacent across the seam
        if len(j) == 0:
            continue
        p1 = np.broadcast_to(a[i], (len(j), 2))
        p2 = np.broadcast_to(b[i], (len(j), 2))
        count += int(np.count_nonzero(_segments_intersect_2d(p1, p2, a[j], b[j])))
    return count


def _loop_meets(track_a: np.ndarray, track_b: np.ndarray, meet_tol: float,
                block: int = 512):
    """Sample pairs of the two tracks closer than meet_tol; returns
    (number of meets, largest |z| among meeting midpoints)."""
    meets = 0
    zmax = float("nan")
    for start in range(0, track_a.shape[0], block):
        chunk = track_a[start : start + block]
        diff = chunk[:, None, :] - track_b[None, :, :]
        dist = np.sqrt(np.einsum("abc,abc->ab", diff, diff))
        mask = dist < meet_tol
        if mask.any():
            ia, ib = np.nonzero(mask)
            z = np.max(np.abs(0.5 * (chunk[ia, 2] + track_b[ib, 2])))
            zmax = float(z) if meets == 0 else max(zmax, float(z))
            meets += int(mask.sum())
    return meets, zmax


def certify(loop: FullLoop, omega: OmegaSequence,
            thresholds: Thresholds | None = None,
            el_stride: int = 1) -> Certificate:
    """Run every certificate check; failures are recorded, not raised."""
    thr = thresholds or Thresholds()
    n = omega.n
    spec = SymmetrySpec.for_n(n)
    s = loop.sample_count
    checks = []

    def add(name, passed, measured, threshold, detail=""):
        checks.append(CheckResult(name, bool(passed), float(measured),
                                  float(threshold), detail))

    # 1. equivariance
    resid = equivariance_residual(spec, loop)
    add("equivariance", resid <= thr.equivariance, resid, thr.equivariance)

    # 2. boundary identities y0(0) = x0(n/4) = y0(n/2) = x0(3n/4) = 0
    q0 = loop.track(0)
    vals = [abs(q0[0, 1]), abs(q0[s // 4, 0]), abs(q0[s // 2, 1]), abs(q0[3 * s // 4, 0])]
    add("boundary_identities", max(vals) <= thr.boundary, max(vals), thr.boundary)

    # 3. strict topological signs  omega_i * z0(i/2) > 0
    idx = constraint_sample_indices(n, s)
    margins = np.asarray(omega.signs, dtype=np.float64) * q0[idx, 2]
    add("topological_signs", float(margins.min()) > thr.sign_margin,
        float(margins.min()), thr.sign_margin, "min omega_i * z0(i/2)")

    # 4-5. strict monotonicity of the arc samples
    arc_x = q0[: s // 4 + 1, 0]
    arc_y = q0[: s // 4 + 1, 1]
    add("strict_x_monotone", float(np.min(np.diff(arc_x))) > thr.monotone_margin,
        float(np.min(np.diff(arc_x))), thr.monotone_margin, "min forward difference")
    add("strict_y_monotone", float(np.min(np.diff(arc_y))) > thr.monotone_margin,
        float(np.min(np.diff(arc_y))), thr.monotone_margin, "min forward difference")

    # 6-7. velocity signs: centered differences positive inside the arc,
    # one-sided at the far ends
    dt = loop.period / s
    vx = (arc_x[2:] - arc_x[:-2])
    vx = np.append(vx, arc_x[-1] - arc_x[-2])  # one-sided at t = n/4
    vy = (arc_y[2:] - arc_y[:-2])
    vy = np.insert(vy, 0, arc_y[1] - arc_y[0])  # one-sided at t = 0
    add("velocity_sign_x", float(vx.min()) > 0.0, float(vx.min()), 0.0,
        "centered differences on (0, n/4]")
    add("velocity_sign_y", float(vy.min()) > 0.0, float(vy.min()), 0.0,
        "centered differences on [0, n/4)")

    # 8-9. endpoint derivative conditions xdot(0) = ydot(n/4) = 0 up to O(dt)
    lim = thr.endpoint_velocity_factor * dt
    vx0 = abs(arc_x[1] - arc_x[0]) / dt
    vyq = abs(arc_y[-1] - arc_y[-2]) / dt
    add("endpoint_velocity_x", vx0 <= lim, vx0, lim, "one-sided |xdot(0)|")
    add("endpoint_velocity_y", vyq <= lim, vyq, lim, "one-sided |ydot(n/4)|")

    # 10. collision distance
    dmin = kernels.min_pair_distance(loop.positions)
    add("collision_distance", dmin > thr.collision_distance, dmin,
        thr.collision_distance)

    # 11. well disjointness
    try:
        well_regions(loop, check=True)
        add("well_disjointness", True, 0.0, 0.0)
    except Exception as exc:  # overlap or grid failure
        add("well_disjointness", False, 1.0, 0.0, str(exc))

    # 12. quadrant confinement on [0, 1/2]
    part = quadrant_partition(n)
    upto = s // (2 * n) + 1  # samples covering t in [0, 1/2]
    worst = -np.inf
    conds = {"Q1": (1, 1), "Q2": (-1, 1), "Q3": (-1, -1), "Q4": (1, -1),
             "upper": (0, 1), "lower": (0, -1)}
    for label, members in part.regions.items():
        sx, sy = conds[label]
        for i in members:
            tr = loop.positions[:upto, i, :]
            if sx:
                worst = max(worst, float(np.max(-sx * tr[:, 0])))
            if sy:
                worst = max(worst, float(np.max(-sy * tr[:, 1])))
    add("quadrant_confinement", worst <= thr.quadrant_slack, worst,
        thr.quadrant_slack, "max signed excursion out of the assigned region")

    # 13. Euler-Lagrange residual
    try:
        r = el_residual(loop, el_stride)
        add("el_residual", r <= thr.el_residual, r, thr.el_residual,
            f"stride {el_stride}")
    except Exception as exc:
        add("el_residual", False, float("inf"), thr.el_residual, str(exc))

    # 14. coercivity bound
    try:
        co = coercivity_check(loop, omega)
        add("coercivity", co.holds, co.lhs - co.rhs, 0.0,
            "action minus H1 bound")
    except Exception as exc:
        add("coercivity", False, float("-inf"), 0.0, str(exc))

    # 15. simple curve: xy-projection of q0 has no self-intersection
    crossings = _simple_curve_violations(np.ascontiguousarray(q0[:, :2]))
    add("simple_curve", crossings == 0, crossings, 0.0,
        "proper self-intersections of the xy-projected track")

    # 16. the two loops meet, and only near the xy-plane
    seg = np.max(np.linalg.norm(np.diff(q0, axis=0), axis=1))
    meet_tol = thr.meet_distance if thr.meet_distance is not None else 3.0 * float(seg)
    z_tol = thr.meet_z if thr.meet_z is not None else meet_tol
    meets, zmax = _loop_meets(q0, loop.track(n), meet_tol)
    add("loops_meet_in_xy_plane", meets > 0 and zmax <= z_tol,
        zmax if meets else float("inf"), z_tol,
        f"{meets} sample meets within {meet_tol:.3e}")

    # 17. spatial: not contained in any plane (coordinate planes and the
    # best-fit plane through the track)
    centered = q0 - q0.mean(axis=0)
    sing = np.linalg.svd(centered / np.sqrt(len(q0)), compute_uv=False)
    extent = min(float(np.max(np.abs(q0[:, 0]))), float(np.max(np.abs(q0[:, 1]))),
                 float(np.max(np.abs(q0[:, 2]))), float(sing[-1]))
    add("spatial", extent > thr.spatial_extent, extent, thr.spatial_extent,
        "min of coordinate extents and smallest plane-fit singular value")

    return Certificate(n, tuple(omega.signs), tuple(checks))


# ---------------------------------------------------------------------------
# mirror congruence
# ---------------------------------------------------------------------------

_SIGN_MATRICES = [np.diag([sx, sy, sz]).astype(float)
                  for sx in (1.0, -1.0) for sy in (1.0, -1.0) for sz in (1.0, -1.0)]


@dataclass(frozen=True)
class MirrorReport:
    alignment_error: float
    action_difference: float
    transform: str


def compare_mirror(result_plus, result_minus) -> MirrorReport:
    """Best body-0 track alignment between solutions of omega and -omega
    over signed coordinate maps, integer time shifts, time reversal, and
    the choice of target loop."""
    if result_plus.n != result_minus.n:
        raise ValueError("results were computed for different n")
    if tuple(result_minus.omega.signs) != tuple(-s for s in result_plus.omega.signs):
        raise ValueError("compare_mirror expects solutions of omega and -omega")
    n = result_plus.n
    spec = SymmetrySpec.for_n(n)
    from .symmetry import reconstruct_full_loop

    loop_a = reconstruct_full_loop(spec, result_plus.arc)
    loop_b = reconstruct_full_loop(spec, result_minus.arc)
    if loop_a.sample_count != loop_b.sample_count:
        from .model import resample

        loop_b = resample(loop_b, loop_a.sample_count)
    s = loop_a.sample_count
    ref = loop_a.track(0)
    best = (np.inf, "none")
    for target, tname in ((loop_b.track(0), "q0"), (loop_b.track(n), "qn")):
        for mi, mat in enumerate(_SIGN_MATRICES):
            moved = target @ mat.T
            for rev in (False, True):
                arr = moved[::-1] if rev else moved
                for c in range(n):
                    rolled = np.roll(arr, c * (s // n), axis=0)
                    err = float(np.max(np.abs(rolled - ref)))
                    if err < best[0]:
                        best = (err, f"target={tname} signs={np.diag(mat).astype(int).tolist()} "
                                     f"reversed={rev} shift={c}")
    action_diff = abs(result_plus.report.action - result_minus.report.action)
    return MirrorReport(best[0], action_diff, best[1])
