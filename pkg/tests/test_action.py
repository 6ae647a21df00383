import numpy as np
import pytest

from choreo.action import (CollisionError, action_gradient, action_value,
                           coercivity_check, el_residual, h1_norm_squared,
                           kinetic_integral, potential, potential_integral)
from choreo.model import FullLoop, FundamentalArc, MassSystem, OmegaSequence
from choreo.symmetry import SymmetrySpec, apply_group_element, reconstruct_full_loop
from conftest import default_omega, random_feasible_arc


def _circular_two_body(omega_freq, sample_count, separation=1.0):
    """Two unit masses on a circular orbit about their center of mass."""
    period = 2 * np.pi / omega_freq
    t = period * np.arange(sample_count) / sample_count
    r = separation / 2
    track = np.stack([r * np.cos(omega_freq * t), r * np.sin(omega_freq * t),
                      np.zeros_like(t)], axis=1)
    pos = np.stack([track, -track], axis=1)
    return FullLoop(MassSystem(2, np.ones(2)), period, pos)


class TestPotential:
    def test_two_unit_masses_distance_one(self):
        config = np.array([[0.0, 0, 0], [1.0, 0, 0]])
        assert potential(config, np.ones(2)) == pytest.approx(1.0)

    def test_unit_square(self):
        # 4 side pairs at distance 1 plus 2 diagonals at sqrt(2)
        config = np.array([[0.0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]])
        assert potential(config, np.ones(4)) == pytest.approx(4 + np.sqrt(2))

    def test_scaling_homogeneity(self):
        rng = np.random.default_rng(0)
        config = rng.standard_normal((5, 3))
        masses = 0.5 + rng.random(5)
        u = potential(config, masses)
        for lam in (0.5, 2.0, 7.3):
            assert potential(lam * config, masses) == pytest.approx(u / lam)

    def test_collision_guard(self):
        config = np.array([[0.0, 0, 0], [1e-9, 0, 0]])
        with pytest.raises(CollisionError):
            potential(config, np.ones(2))


class TestActionValue:
    def test_static_configuration(self):
        config = np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 2.0, 0]])
        pos = np.tile(config[None, :, :], (32, 1, 1))
        period = 3.0
        loop = FullLoop(MassSystem(3, np.ones(3)), period, pos)
        rep = action_value(loop)
        u = potential(config, np.ones(3))
        assert rep.kinetic_integral == pytest.approx(0.0)
        assert rep.action == pytest.approx(period * u)

    def test_circular_two_body_integrals(self):
        # separation 1, angular velocity sqrt(2): K -> pi/sqrt(2) and
        # U -> pi sqrt(2) over one period as S grows
        om = np.sqrt(2.0)
        rep = action_value(_circular_two_body(om, 4096))
        assert rep.kinetic_integral == pytest.approx(np.pi / np.sqrt(2), rel=1e-5)
        assert rep.potential_integral == pytest.approx(np.pi * np.sqrt(2), rel=1e-5)

    def test_kinetic_scaling_exact(self):
        rng = np.random.default_rng(1)
        loop = _circular_two_body(1.0, 64)
        k = kinetic_integral(loop)
        lam = 1.5
        scaled = FullLoop(loop.mass_system, loop.period, lam * loop.positions)
        assert kinetic_integral(scaled) == pytest.approx(lam**2 * k, rel=1e-14)
        assert potential_integral(scaled) == pytest.approx(
            potential_integral(loop) / lam, rel=1e-14)

    def test_group_invariance(self):
        rng = np.random.default_rng(2)
        n = 4
        spec = SymmetrySpec.for_n(n)
        loop = reconstruct_full_loop(spec, random_feasible_arc(n, 16, rng))
        base = action_value(loop).action
        for word in (["g1"], ["g2"], ["h1"], ["h2"], ["g1", "h2", "g2"]):
            moved = apply_group_element(spec, word, loop)
            assert action_value(moved).action == pytest.approx(base, abs=1e-12)


class TestGradient:
    @pytest.mark.parametrize("n", [2, 4, 5])
    def test_matches_central_differences(self, n):
        rng = np.random.default_rng(n)
        arc = random_feasible_arc(n, 16, rng)
        spec = SymmetrySpec.for_n(n)
        grad = action_gradient(arc, spec)
        assert grad[0, 1] == 0.0 and grad[-1, 0] == 0.0
        mask = np.ones_like(grad, dtype=bool)
        mask[0, 1] = False
        mask[-1, 0] = False
        assert int(mask.sum()) == 3 * (arc.node_count + 1) - 2
        h = 1e-6
        fd = np.zeros_like(grad)
        samples = np.array(arc.samples)
        for (i, c) in zip(*np.nonzero(mask)):
            up, dn = samples.copy(), samples.copy()
            up[i, c] += h
            dn[i, c] -= h
            fu = action_value(reconstruct_full_loop(spec, FundamentalArc(n, up))).action
            fv = action_value(reconstruct_full_loop(spec, FundamentalArc(n, dn))).action
            fd[i, c] = (fu - fv) / (2 * h)
        rel = np.linalg.norm(grad[mask] - fd[mask]) / np.linalg.norm(grad[mask])
        assert rel < 1e-6

    def test_converged_gradient_small(self, solved_n2):
        assert solved_n2.report.gradient_inf_norm < 1e-7


class TestElResidual:
    def test_two_body_circle_converges_quadratically(self):
        om = np.sqrt(2.0)  # Newton balance for separation 1
        r1 = el_residual(_circular_two_body(om, 256))
        r2 = el_residual(_circular_two_body(om, 512))
        assert r1 / r2 == pytest.approx(4.0, rel=0.05)

    def test_wrong_frequency_limit(self):
        # omega = 1 on the unit circle leaves |m qdd - F| -> 1/2
        vals = [el_residual(_circular_two_body(1.0, s)) for s in (512, 1024)]
        assert vals[-1] == pytest.approx(0.5, rel=1e-3)

    def test_static_residual_is_force_magnitude(self):
        config = np.array([[0.0, 0, 0], [1.0, 0, 0], [0, 1.0, 0]])
        pos = np.tile(config[None, :, :], (16, 1, 1))
        loop = FullLoop(MassSystem(3, np.ones(3)), 1.0, pos)
        from choreo.kernels import pair_forces

        fmax = np.max(np.linalg.norm(pair_forces(pos[:1], np.ones(3))[0], axis=1))
        assert el_residual(loop) == pytest.approx(fmax, rel=1e-12)

    def test_stride_must_divide(self):
        loop = _circular_two_body(1.0, 64)
        with pytest.raises(ValueError):
            el_residual(loop, 5)


class TestCoercivity:
    def test_feasible_loop_holds(self):
        rng = np.random.default_rng(4)
        spec = SymmetrySpec.for_n(2)
        arc = random_feasible_arc(2, 16, rng)
        loop = reconstruct_full_loop(spec, arc)
        res = coercivity_check(loop, default_omega(2))
        assert res.holds and res.lhs >= res.rhs

    def test_scaled_family(self):
        rng = np.random.default_rng(5)
        spec = SymmetrySpec.for_n(2)
        omega = default_omega(2)
        arc = random_feasible_arc(2, 16, rng)
        for lam in (1.0, 10.0, 100.0, 1000.0):
            loop = reconstruct_full_loop(
                spec, FundamentalArc(2, lam * np.array(arc.samples)))
            res = coercivity_check(loop, omega)
            assert res.holds

    def test_precondition_enforced(self):
        rng = np.random.default_rng(6)
        spec = SymmetrySpec.for_n(2)
        omega = default_omega(2)
        arc = random_feasible_arc(2, 16, rng)
        samples = np.array(arc.samples)
        samples[:, 2] = -np.abs(samples[:, 2]) - 0.1  # break the + sign at t=0
        loop = reconstruct_full_loop(spec, FundamentalArc(2, samples))
        with pytest.raises(ValueError):
            coercivity_check(loop, omega)
