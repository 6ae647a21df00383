"""Constrained minimization of the discretized action over fundamental
arcs.

Strategy: start from the "fake choreography" guess (a circle in the
xy-plane with a z-wobble following the sign word), project onto the
closed feasible set, and run projected-gradient descent with
backtracking.  Near the minimizer the constraints are inactive
(the true solution is strictly monotone with strict signs), so the run
finishes with an unconstrained polish: L-BFGS followed by Newton-CG
with finite-difference Hessian-vector products, which drives the
gradient far enough down for the discretization error to dominate the
Euler-Lagrange residual.  Escape moves (plateau shift, coordinate
re-seeding kicks) guard against degenerate boundary attractors.

The optimization variables are the free arc coordinates only
(3(M+1) - 2 scalars; the two pinned boundary components are excluded);
the full loop is always rebuilt by symmetry.
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize as scipy_minimize

from . import kernels
from .action import action_value
from .constraints import (diagnose, enumerate_admissible_omega,
                          project_feasible, validate_omega)
from .deform import find_plateaus, shift_escape
from .model import ActionReport, FundamentalArc, OmegaSequence, resample_arc
from .symmetry import SymmetrySpec, _q0_grid, _tracks_from_q0, reconstruct_adjoint, \
    reconstruct_full_loop

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SolverConfig:
    node_count: int = 128
    max_iters: int = 4000             # projected-gradient step budget
    gradient_tolerance: float = 1e-7  # inf-norm of the free arc gradient
    initial_step: float = 2e-3
    step_grow: float = 1.3
    step_shrink: float = 0.5
    max_backtracks: int = 40
    armijo: float = 1e-4
    plateau_window: int = 3           # nodes of coordinate variation < plateau_eps
    plateau_eps: float = 1e-9
    planar_tol: float = 1e-8          # coordinate collapse detection
    collision_guard: float = 1e-6     # line-search rejection distance
    stall_window: int = 30
    stall_rel: float = 1e-12
    seed: int = 0
    jitter: float = 0.0
    use_polish: bool = True
    polish_rounds: int = 6
    guess_amplitude: float = 0.3
    guess_radius: float = 1.0

    def __post_init__(self):
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.node_count < 8:
            raise ValueError("node_count must be >= 8")


def snap_node_count(n: int, node_count: int) -> int:
    """Round up to the nearest arc resolution with the constraint times
    i/2 on arc nodes (n | 2M).  On such grids every loop sample is a
    true degree of freedom, which keeps the discrete Euler-Lagrange
    system pointwise consistent."""
    m = node_count
    while (2 * m) % n:
        m += 1
    return m


@dataclass(frozen=True)
class SolveResult:
    n: int
    omega: OmegaSequence
    arc: FundamentalArc | None
    report: ActionReport | None
    status: str                       # converged | max_iters | infeasible_omega
    trace: np.ndarray
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"


class _Problem:
    """Raw-array fast path: action and gradient as functions of the
    free coordinate vector, with the reconstruction baked in."""

    def __init__(self, n: int, node_count: int, guard: float):
        self.n = n
        self.m = node_count
        self.spec = SymmetrySpec.for_n(n)
        self.guard = guard
        self.masses = np.ones(2 * n)
        mask = np.ones((node_count + 1, 3), dtype=bool)
        mask[0, 1] = False
        mask[-1, 0] = False
        self.free_mask = mask
        self.free_dim = int(mask.sum())

    def pack(self, samples: np.ndarray) -> np.ndarray:
        return samples[self.free_mask]

    def unpack(self, vec: np.ndarray) -> np.ndarray:
        samples = np.zeros((self.m + 1, 3))
        samples[self.free_mask] = vec
        return samples

    def loop_positions(self, samples: np.ndarray) -> np.ndarray:
        q0 = _q0_grid(self.spec, samples, self.n)
        return _tracks_from_q0(q0, self.n)

    def parts(self, samples: np.ndarray):
        """(kinetic, potential, min_distance) of the reconstructed loop."""
        pos = self.loop_positions(samples)
        s = pos.shape[0]
        dt = self.n / s
        dmin = kernels.min_pair_distance(pos)
        dq = np.roll(pos, -1, axis=0) - pos
        kin = 0.5 * float(np.einsum("sic,sic->", dq, dq)) / dt
        pot = dt * float(kernels.pair_potential(pos, self.masses).sum())
        return kin, pot, dmin

    def action(self, samples: np.ndarray) -> tuple:
        """(action, min_distance); +inf action when below the guard."""
        kin, pot, dmin = self.parts(samples)
        if dmin < self.guard:
            return float("inf"), dmin
        return kin + pot, dmin

    def action_grad(self, samples: np.ndarray):
        """(action, (M+1, 3) gradient with pinned entries zeroed)."""
        pos = self.loop_positions(samples)
        s = pos.shape[0]
        dt = self.n / s
        dmin = kernels.min_pair_distance(pos)
        if dmin < self.guard:
            return float("inf"), np.zeros((self.m + 1, 3))
        dq = np.roll(pos, -1, axis=0) - pos
        kin = 0.5 * float(np.einsum("sic,sic->", dq, dq)) / dt
        pot = dt * float(kernels.pair_potential(pos, self.masses).sum())
        g_loop = (2.0 * pos - np.roll(pos, 1, axis=0) - np.roll(pos, -1, axis=0)) / dt
        g_loop += dt * kernels.pair_forces(pos, self.masses)
        g_arc = reconstruct_adjoint(self.spec, g_loop, self.m)
        return kin + pot, g_arc

    def fun_jac(self, vec: np.ndarray):
        f, g = self.action_grad(self.unpack(vec))
        return f, g[self.free_mask]


def initial_guess(n: int, omega: OmegaSequence, amplitude: float = 0.3,
                  radius: float = 1.0, node_count: int = 128) -> FundamentalArc:
    """Fake-choreography starting arc.

    Body 0 runs a circle of the given radius in the xy-plane (so
    x(0) = -R < 0 < R = y(n/4)) while z follows a smooth interpolant of
    the sign targets z(i/2) ~ omega_i, clamped to [-1, 1].  The result
    is projected onto the feasible set.
    """
    check = validate_omega(n, omega.signs)
    if not check.valid:
        raise ValueError(f"invalid omega: {check.reason}")
    if amplitude <= 0 or radius <= 0:
        raise ValueError("amplitude and radius must be positive")
    m = node_count
    t = (n / 4.0) * np.arange(m + 1) / m
    knots = [0.5 * i for i in range(n // 2 + 1)]
    vals = [float(s) for s in omega.signs]
    if knots[-1] < n / 4.0:
        knots.append(n / 4.0)
        vals.append(vals[-1])
    shape = PchipInterpolator(knots, vals)
    z = amplitude * np.clip(shape(t), -1.0, 1.0)
    samples = np.stack([-radius * np.cos(2 * np.pi * t / n),
                        radius * np.sin(2 * np.pi * t / n), z], axis=1)
    samples[0, 1] = 0.0
    samples[-1, 0] = 0.0
    return project_feasible(FundamentalArc(n, samples), omega)


def _virial_rescaled(problem: _Problem, samples: np.ndarray) -> np.ndarray:
    """Scale positions to the virial-balanced size for the fixed period
    (exactly minimizes lambda^2 K + U / lambda over lambda > 0)."""
    kin, pot, _ = problem.parts(samples)
    if kin <= 0 or pot <= 0:
        return samples
    lam = (pot / (2.0 * kin)) ** (1.0 / 3.0)
    return samples * lam


def _sign_template(n: int, omega: OmegaSequence, node_count: int) -> np.ndarray:
    t = (n / 4.0) * np.arange(node_count + 1) / node_count
    knots = [0.5 * i for i in range(n // 2 + 1)]
    vals = [float(s) for s in omega.signs]
    if knots[-1] < n / 4.0:
        knots.append(n / 4.0)
        vals.append(vals[-1])
    return np.clip(PchipInterpolator(knots, vals)(t), -1.0, 1.0)


class _Escapes:
    """Escape moves attempted when projected gradient stalls."""

    def __init__(self, problem: _Problem, omega: OmegaSequence,
                 config: SolverConfig):
        self.problem = problem
        self.omega = omega
        self.config = config

    def _accept_if_lower(self, samples, candidate, f_cur):
        f_new, _ = self.problem.action(candidate)
        if f_new < f_cur:
            return candidate, f_new, True
        return samples, f_cur, False

    def plateau_shifts(self, samples, f_cur):
        arc = FundamentalArc(self.problem.n, samples)
        scale = max(1.0, float(np.max(np.abs(samples))))
        moved = False
        for axis, i1, i2 in find_plateaus(arc, self.config.plateau_window,
                                          self.config.plateau_eps):
            eps0 = 0.1 * scale
            for halving in range(10):
                eps = eps0 * 0.5**halving
                try:
                    cand = shift_escape(arc, self.omega, (i1, i2), axis, eps,
                                        plateau_tol=self.config.plateau_eps * 10)
                except ValueError:
                    break
                samples2, f2, ok = self._accept_if_lower(samples, cand.samples, f_cur)
                if ok:
                    samples, f_cur, moved = samples2, f2, True
                    arc = FundamentalArc(self.problem.n, samples)
                    break
        return samples, f_cur, moved

    def planar_kicks(self, samples, f_cur):
        """Re-seed a collapsed coordinate (all values ~ 0) from the
        guess template, with backtracking on the amplitude."""
        n, m = self.problem.n, self.problem.m
        scale = max(1.0, float(np.max(np.abs(samples))))
        t = np.arange(m + 1) / m
        templates = {
            0: -np.cos(0.5 * np.pi * t),            # x: increasing, x(n/4) = 0
            1: np.sin(0.5 * np.pi * t),             # y: increasing, y(0) = 0
            2: _sign_template(n, self.omega, m),    # z: sign word shape
        }
        moved = False
        for col in (2, 0, 1):
            if float(np.max(np.abs(samples[:, col]))) > self.config.planar_tol * scale:
                continue
            for halving in range(10):
                eps = 0.1 * scale * 0.5**halving
                cand = np.array(samples)
                cand[:, col] = eps * templates[col]
                cand = project_feasible(
                    FundamentalArc(n, cand), self.omega).samples
                samples2, f2, ok = self._accept_if_lower(samples, cand, f_cur)
                if ok:
                    samples, f_cur, moved = samples2, f2, True
                    break
        return samples, f_cur, moved

    def collision_kick(self, samples, f_cur):
        """Widen the |z| margin at the boundary times (binary approaches
        happen there), accepting the first strict action decrease."""
        n, m = self.problem.n, self.problem.m
        template = _sign_template(n, self.omega, m)
        scale = max(0.1, float(np.max(np.abs(samples[:, 2]))))
        moved = False
        for halving in range(8):
            eps = 0.25 * scale * 0.5**halving
            cand = np.array(samples)
            cand[:, 2] += eps * template
            cand = project_feasible(FundamentalArc(n, cand), self.omega).samples
            samples2, f2, ok = self._accept_if_lower(samples, cand, f_cur)
            if ok:
                samples, f_cur, moved = samples2, f2, True
                break
        return samples, f_cur, moved


def _strict_margin(samples: np.ndarray, omega: OmegaSequence, n: int) -> float:
    """Smallest strict-feasibility margin: monotone increments and the
    signed z values at the constraint times."""
    from .constraints import _constraint_arc_positions

    m = samples.shape[0] - 1
    margins = [float(np.min(np.diff(samples[:, 0]))),
               float(np.min(np.diff(samples[:, 1])))]
    for (a, w), sign in zip(_constraint_arc_positions(n, m), omega.signs):
        val = (1.0 - w) * samples[a, 2] + w * samples[a + 1, 2] if w else samples[a, 2]
        margins.append(sign * val)
    return min(margins)


def _projected_gradient(problem, samples, omega, config, trace, budget):
    """Monotone projected-gradient phase; returns (samples, f, grad_inf)."""
    escapes = _Escapes(problem, omega, config)
    f, g = problem.action_grad(samples)
    step = config.initial_step
    recent = []
    it = 0
    while it < budget:
        gn = float(np.max(np.abs(g)))
        if gn <= config.gradient_tolerance:
            break
        accepted = False
        trial = step
        for _ in range(config.max_backtracks):
            cand = project_feasible(
                FundamentalArc(problem.n, samples - trial * g), omega).samples
            f_new, dmin = problem.action(cand)
            move = cand - samples
            decrease = config.armijo * float(np.einsum("ij,ij->", move, move)) / trial
            if np.isfinite(f_new) and f_new < f and f_new <= f - decrease:
                samples, f = cand, f_new
                step = trial * config.step_grow
                accepted = True
                break
            trial *= config.step_shrink
        it += 1
        if accepted:
            trace.append(f)
            recent.append(f)
            if len(recent) > config.stall_window:
                recent.pop(0)
        stalled = (not accepted) or (
            len(recent) == config.stall_window
            and recent[0] - recent[-1] <= config.stall_rel * max(1.0, abs(recent[-1])))
        if stalled:
            samples, f, moved = escapes.planar_kicks(samples, f)
            if not moved:
                samples, f, moved = escapes.plateau_shifts(samples, f)
            if not moved and not accepted:
                break
            if moved:
                trace.append(f)
                recent.clear()
                _, g = problem.action_grad(samples)
                continue
        _, g = problem.action_grad(samples)
    return samples, f, float(np.max(np.abs(g)))


def _polish(problem, samples, omega, config, trace):
    """Unconstrained polish on the free coordinates: cycles of L-BFGS-B
    followed by Newton-CG with finite-difference Hessian-vector
    products, repeated while the gradient keeps dropping."""
    x = problem.pack(samples)
    recorded = [trace[-1] if trace else np.inf]

    def fun(v):
        return problem.fun_jac(v)

    def callback(vk):
        fv, _ = problem.fun_jac(vk)
        if fv <= recorded[-1]:
            recorded.append(fv)
            trace.append(fv)

    def hessp(v, p):
        nv = float(np.max(np.abs(p)))
        if nv == 0.0:
            return np.zeros_like(p)
        # central-difference HVP; step balances truncation vs gradient noise
        h = 3e-5 * (1.0 + float(np.max(np.abs(v)))) / nv
        _, gp = problem.fun_jac(v + h * p)
        _, gm = problem.fun_jac(v - h * p)
        return (gp - gm) / (2.0 * h)

    def grad_inf(v):
        _, g = problem.fun_jac(v)
        return float(np.max(np.abs(g)))

    target = 0.25 * config.gradient_tolerance
    best_x, best_gn = x, grad_inf(x)
    for _ in range(2):
        res = scipy_minimize(fun, best_x, jac=True, method="L-BFGS-B",
                             callback=callback,
                             options=dict(maxiter=20000, maxfun=100000,
                                          ftol=0.0, gtol=target))
        cand = [(grad_inf(res.x), res.x)]
        res2 = scipy_minimize(fun, res.x, jac=True, method="Newton-CG",
                              hessp=hessp, callback=callback,
                              options=dict(xtol=1e-14, maxiter=500))
        f_nc, _ = problem.fun_jac(res2.x)
        if np.isfinite(f_nc):
            cand.append((grad_inf(res2.x), res2.x))
        gn, xbest = min(cand, key=lambda t: t[0])
        improved = gn < 0.7 * best_gn
        if gn < best_gn:
            best_gn, best_x = gn, xbest
        if best_gn <= target or not improved:
            break

    # Line-search methods stall once the attainable decrease drops under
    # the roundoff noise of the action value; finish with full Newton
    # steps accepted on gradient-norm decrease instead.
    from scipy.sparse.linalg import LinearOperator, cg as cg_solve

    for _ in range(6):
        if best_gn <= 1e-12:
            break
        _, g = problem.fun_jac(best_x)
        op = LinearOperator((len(best_x), len(best_x)),
                            matvec=lambda p: hessp(best_x, p))
        d, _ = cg_solve(op, -g, rtol=1e-10, maxiter=400)
        scale, accepted = 1.0, False
        for _ in range(6):
            gn_new = grad_inf(best_x + scale * d)
            if gn_new < best_gn:
                best_x = best_x + scale * d
                best_gn = gn_new
                accepted = True
                break
            scale *= 0.5
        if not accepted:
            break
    f, _ = problem.fun_jac(best_x)
    if np.isfinite(f) and f <= recorded[-1]:
        trace.append(f)
    return problem.unpack(best_x)


def _result(problem, samples, omega, status, trace, message=""):
    arc = FundamentalArc(problem.n, samples)
    loop = reconstruct_full_loop(problem.spec, arc)
    f, g = problem.action_grad(samples)
    gn = float(np.max(np.abs(g)))
    report = action_value(loop, omega, gradient_inf_norm=gn)
    return SolveResult(problem.n, omega, arc, report, status,
                       np.asarray(trace), message)


def minimize(n: int, omega: OmegaSequence, config: SolverConfig | None = None,
             initial_arc: FundamentalArc | None = None) -> SolveResult:
    """Minimize the action over feasible arcs for (n, omega)."""
    config = config or SolverConfig()
    check = validate_omega(n, omega.signs)
    if not check.valid:
        return SolveResult(n, omega, None, None, "infeasible_omega",
                           np.array([]), check.reason)
    m = snap_node_count(n, config.node_count)
    if m != config.node_count:
        log.info("node count %d snapped to %d (grid compatibility for n=%d)",
                 config.node_count, m, n)
    problem = _Problem(n, m, config.collision_guard)
    if initial_arc is None:
        arc = initial_guess(n, omega, config.guess_amplitude,
                            config.guess_radius, m)
        samples = _virial_rescaled(problem, np.array(arc.samples))
    else:
        if initial_arc.node_count != m:
            initial_arc = resample_arc(initial_arc, m)
        samples = np.array(initial_arc.samples)
    if config.jitter > 0.0:
        rng = np.random.default_rng(config.seed)
        envelope = np.sin(np.pi * np.arange(m + 1) / m)
        samples[:, 2] += config.jitter * envelope * rng.standard_normal(m + 1)
    samples = project_feasible(FundamentalArc(n, samples), omega).samples

    trace = []
    f, _ = problem.action(samples)
    trace.append(f)
    budget = config.max_iters
    gn = np.inf
    best_gn = np.inf
    need_pg = True
    for round_idx in range(max(1, config.polish_rounds)):
        if need_pg and budget > 0:
            pg_budget = min(budget, 400 if config.use_polish else budget)
            samples, f, gn = _projected_gradient(problem, samples, omega, config,
                                                 trace, pg_budget)
            budget -= pg_budget
            if gn <= config.gradient_tolerance:
                break
        if not config.use_polish:
            if budget <= 0:
                break
            continue
        if _strict_margin(samples, omega, n) > 10.0 * config.gradient_tolerance:
            polished = _polish(problem, samples, omega, config, trace)
            loop = reconstruct_full_loop(problem.spec, FundamentalArc(n, polished))
            if diagnose(loop, omega).weakly_feasible:
                samples = polished
                need_pg = False
            else:
                samples = project_feasible(
                    FundamentalArc(n, polished), omega).samples
                need_pg = True
            f, g = problem.action_grad(samples)
            gn = float(np.max(np.abs(g)))
        else:
            need_pg = True
        log.info("round %d: action %.9f, grad %.3e", round_idx, f, gn)
        if gn <= config.gradient_tolerance:
            break
        if not need_pg and gn >= 0.9 * best_gn:
            break  # polish stopped helping; report what we have
        if need_pg and budget <= 0:
            break
        best_gn = min(best_gn, gn)
    status = "converged" if gn <= config.gradient_tolerance else "max_iters"
    return _result(problem, samples, omega, status, trace)


def refine(result: SolveResult, node_count: int,
           config: SolverConfig | None = None) -> SolveResult:
    """Re-minimize a converged result on a finer arc grid.

    The requested node count is snapped up for grid compatibility
    (see ``snap_node_count``).
    """
    if not result.converged:
        raise ValueError("refine requires a converged input result")
    base = config or SolverConfig()
    m = snap_node_count(result.n, node_count)
    fine = replace(base, node_count=m)
    arc = resample_arc(result.arc, m)
    arc = project_feasible(arc, result.omega)
    return minimize(result.n, result.omega, fine, initial_arc=arc)


def sweep(n: int, config: SolverConfig | None = None,
          modulo_flip: bool = False, jobs: int = 1) -> dict:
    """Run minimize for every admissible word; keys sorted by word."""
    config = config or SolverConfig()
    words = enumerate_admissible_omega(n, modulo_flip=modulo_flip)
    results = {}
    if jobs > 1 and len(words) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {w: pool.submit(minimize, n, w, config) for w in words}
            for w in words:
                results[w] = futures[w].result()
    else:
        for w in words:
            results[w] = minimize(n, w, config)
    return dict(sorted(results.items(), key=lambda kv: kv[0].word))
