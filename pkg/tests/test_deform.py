import numpy as np
import pytest
from fractions import Fraction
from hypothesis import given, settings
from hypothesis import strategies as st

from choreo.deform import (KickProfile, PathSegment, PlateauError,
                           SeparationWitness, TauVector, WitnessError,
                           find_plateaus, is_tau_admissible, kinetic_energy,
                           monotonize, pairwise_distances, pull_apart,
                           shift_deformation, shift_escape, vertical_kick)
from choreo.model import FundamentalArc, OmegaSequence
from choreo.symmetry import SymmetrySpec
from conftest import default_omega, random_feasible_arc


def lattice(rng, shape, scale=2.0, grid=2**-20):
    """Random positions on a dyadic lattice: keeps the deformation
    algebra exact in floating point."""
    return np.round(rng.uniform(-scale, scale, shape) / grid) * grid


def separated_segment(rng, n_bodies=6, length=16, axis="x"):
    """Random x-separated segment: j and k start together at the origin
    coordinate, j descends, k ascends, I0 sits below, I1 above."""
    c = 0 if axis == "x" else 1
    l = length
    pos = lattice(rng, (l + 1, n_bodies, 3), scale=0.5)
    j, k = 0, 1
    desc = -np.cumsum(np.abs(lattice(rng, l + 1, scale=0.05)))
    asc = np.cumsum(np.abs(lattice(rng, l + 1, scale=0.05)))
    pos[:, j, c] = desc - desc[0]
    pos[:, k, c] = asc - asc[0]
    half = (n_bodies - 2) // 2
    i_zero = frozenset(range(2, 2 + half))
    i_one = frozenset(range(2 + half, n_bodies))
    for i in i_zero:
        pos[:, i, c] = pos[:, j, -1 if False else c].min() - 1.0 + 0 * pos[:, i, c]
        pos[:, i, c] = desc.min() - 1.0
    for i in i_one:
        pos[:, i, c] = asc.max() + 1.0
    seg = PathSegment(1.0, pos, np.ones(n_bodies))
    witness = SeparationWitness(j, k, i_zero, i_one, axis)
    witness.validate(seg)
    return seg, witness


class TestPullApart:
    def test_zero_amplitude_identity(self):
        rng = np.random.default_rng(0)
        seg, witness = separated_segment(rng)
        out = pull_apart(seg, witness, 0.0)
        assert np.array_equal(out.positions, seg.positions)

    def test_static_kinetic_increment_closed_form(self):
        # two unit masses static at the collision coordinate on the bump
        # support; the exact PL kinetic increment of the parabolic push is
        # (4/3) eps^3 minus the quadrature defect eps dt^2 / 3
        l = 64
        pos = np.zeros((l + 1, 4, 3))
        pos[:, 2, 0] = -2.0  # I0 bystander, clear of the pair
        pos[:, 3, 0] = 2.0
        pos[:, 2, 1] = 1.0
        pos[:, 3, 1] = -1.0
        seg = PathSegment(1.0, pos, np.ones(4))
        witness = SeparationWitness(0, 1, frozenset({2}), frozenset({3}), "x")
        eps = 0.25  # dyadic; support [0, eps] covers 16 exact intervals
        with pytest.raises(WitnessError):
            # fully static pair has x_j(T) = x_k(T): the strict gap fails
            pull_apart(seg, witness, eps)
        # open the gap in the very last interval, outside the bump support
        pos[-1, 0, 0] = -(2.0**-12)
        pos[-1, 1, 0] = 2.0**-12
        seg = PathSegment(1.0, pos, np.ones(4))
        k_before = kinetic_energy(seg)
        out = pull_apart(seg, witness, eps)
        dt = 1.0 / l
        expected = (4.0 / 3.0) * eps**3 - eps * dt**2 / 3.0
        measured = kinetic_energy(out) - k_before
        assert measured == pytest.approx(expected, abs=1e-12)
        assert abs(measured - (4.0 / 3.0) * eps**3) <= eps * dt**2 / 3.0 + 1e-12

    def test_distance_identity_past_ramp(self):
        rng = np.random.default_rng(1)
        seg, witness = separated_segment(rng)
        eps = 0.125
        out = pull_apart(seg, witness, eps)
        t = seg.times
        tail = t >= eps
        d_old = seg.positions[tail, witness.k, :] - seg.positions[tail, witness.j, :]
        d_new = out.positions[tail, witness.k, :] - out.positions[tail, witness.j, :]
        xgap = seg.positions[tail, witness.k, 0] - seg.positions[tail, witness.j, 0]
        lhs = np.einsum("sc,sc->s", d_new, d_new)
        rhs = np.einsum("sc,sc->s", d_old, d_old) + 4 * eps**2 * xgap + 4 * eps**4
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_jk_distance_nondecreasing_when_gap_nonnegative(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            seg, witness = separated_segment(rng)
            out = pull_apart(seg, witness, 0.0625)
            before = pairwise_distances(seg)
            after = pairwise_distances(out)
            # pair (j, k) is pair index 0 in the i<j ordering
            assert np.all(after[:, 0] >= before[:, 0] - 1e-12)

    def test_eps_exceeding_duration_rejected(self):
        rng = np.random.default_rng(3)
        seg, witness = separated_segment(rng)
        with pytest.raises(ValueError):
            pull_apart(seg, witness, 2.0)


class TestMonotonize:
    def test_already_monotone_unchanged(self):
        rng = np.random.default_rng(4)
        seg, witness = separated_segment(rng)
        out = monotonize(seg, witness)
        assert np.array_equal(out.positions, seg.positions)

    def test_kinetic_energy_exactly_preserved(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            seg, witness = separated_segment(rng)
            pos = np.array(seg.positions)
            # spoil monotonicity of j/k with lattice excursions
            l = seg.interval_count
            bump = np.zeros(l + 1)
            bump[l // 4 : l // 2] = lattice(rng, l // 2 - l // 4, scale=0.03)
            pos[:, witness.j, 0] += np.abs(bump)
            pos[:, witness.k, 0] -= np.abs(bump)
            pos[0, witness.j, 0] = pos[0, witness.k, 0] = 0.0
            spoiled = seg.with_positions(pos)
            out = monotonize(spoiled, witness)
            assert kinetic_energy(out) == kinetic_energy(spoiled)

    def test_output_monotone_and_distances_nondecreasing(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            seg, witness = separated_segment(rng)
            pos = np.array(seg.positions)
            l = seg.interval_count
            bump = np.abs(lattice(rng, l + 1, scale=0.02))
            bump[0] = 0.0
            pos[:, witness.j, 0] += bump
            pos[:, witness.k, 0] -= bump
            spoiled = seg.with_positions(pos)
            out = monotonize(spoiled, witness)
            xj = out.positions[:, witness.j, 0]
            xk = out.positions[:, witness.k, 0]
            assert np.all(np.diff(xj) <= 0)
            assert np.all(np.diff(xk) >= 0)
            assert np.all(pairwise_distances(out) >= pairwise_distances(spoiled) - 1e-12)

    def test_action_not_increased(self):
        from choreo.kernels import pair_potential

        rng = np.random.default_rng(7)
        seg, witness = separated_segment(rng)
        pos = np.array(seg.positions)
        l = seg.interval_count
        bump = np.abs(lattice(rng, l + 1, scale=0.02))
        bump[0] = 0.0
        pos[:, witness.j, 0] += bump
        spoiled = seg.with_positions(pos)
        out = monotonize(spoiled, witness)
        dt = 1.0 / l

        def act(s):
            u = pair_potential(s.positions, s.masses)
            return kinetic_energy(s) + dt * (0.5 * u[0] + u[1:-1].sum() + 0.5 * u[-1])

        assert act(out) <= act(spoiled) + 1e-12


class TestVerticalKick:
    def _planar_segment(self, l=32, n_bodies=4):
        pos = np.zeros((l + 1, n_bodies, 3))
        t = np.linspace(0, 1, l + 1)
        for i in range(n_bodies):
            pos[:, i, 1] = np.cos(2 * np.pi * t + i)
            pos[:, i, 2] = np.sin(2 * np.pi * t + i)
        return PathSegment(1.0, pos, np.ones(n_bodies))  # lies in x = 0 plane

    def test_zero_amplitude_identity(self):
        seg = self._planar_segment()
        tau = TauVector((1, -1, 0, 0))
        prof = KickProfile(0.0, 0.0, 0.125, 0.25, 0.5, "start")
        out = vertical_kick(seg, tau, prof, (1.0, 0, 0))
        assert np.array_equal(out.positions, seg.positions)

    def test_plateau_values(self):
        prof = KickProfile(0.1, 0.0, 0.125, 0.25, 0.5, "start")
        t = np.linspace(0, 1, 33)
        h = prof.values(t)
        assert np.all(h[t <= 0.125] == 1.0)
        assert np.all(h[t >= 0.25] == 0.0)
        ramp = h[(t > 0.125) & (t < 0.25)]
        assert np.all(np.diff(ramp) < 0)

    def test_interior_profile_symmetric(self):
        prof = KickProfile(0.1, 0.5, 0.0625, 0.125, 0.25, "interior")
        t = np.linspace(0, 1, 65)
        h = prof.values(t)
        np.testing.assert_allclose(h, h[::-1], atol=1e-15)
        assert h[32] == 1.0

    def test_difference_is_exactly_profile(self):
        seg = self._planar_segment()
        tau = TauVector((1, -1, 1, 0))
        # dyadic plateau/ramp widths over 32 intervals: exact h values
        prof = KickProfile(0.25, 0.0, 0.25, 0.5, 0.75, "start")
        out = vertical_kick(seg, tau, prof, (1.0, 0, 0))
        h = prof.values(seg.times)
        expected = 0.25 * h[:, None] * np.array(tau.entries)[None, :]
        assert np.array_equal(out.positions[:, :, 0] - seg.positions[:, :, 0],
                              expected)
        assert np.array_equal(out.positions[:, :, 1:], seg.positions[:, :, 1:])

    def test_nonplanar_rejected_and_override(self):
        seg = self._planar_segment()
        pos = np.array(seg.positions)
        pos[3, 0, 0] = 0.5
        bent = seg.with_positions(pos)
        tau = TauVector((1, -1, 0, 0))
        prof = KickProfile(0.1, 0.0, 0.125, 0.25, 0.5, "start")
        with pytest.raises(WitnessError):
            vertical_kick(bent, tau, prof, (1.0, 0, 0))
        out = vertical_kick(bent, tau, prof, (1.0, 0, 0), require_planar=False)
        assert out.positions.shape == pos.shape

    def test_support_outside_segment_rejected(self):
        seg = self._planar_segment()
        tau = TauVector((1, -1, 0, 0))
        prof = KickProfile(0.1, 0.9, 0.125, 0.25, 0.5, "interior")
        with pytest.raises(ValueError):
            vertical_kick(seg, tau, prof, (1.0, 0, 0))

    def test_all_zero_tau_rejected(self):
        with pytest.raises(ValueError):
            TauVector((0, 0, 0, 0))


class TestTauAdmissibility:
    def test_even_n_escape_pattern(self):
        # the even-n yz-plane escape: tau_0 = tau_n = -1, tau_l = tau_{l+n} = 1
        n = 4
        spec = SymmetrySpec.for_n(n)
        l = n // 2
        tau = [0] * (2 * n)
        tau[0] = tau[n] = -1
        tau[l] = tau[l + n] = 1
        ok, reason = is_tau_admissible(TauVector(tuple(tau)), {0, l}, spec,
                                       Fraction(0), axis=0)
        assert ok, reason

    def test_constant_tau_on_cluster_rejected(self):
        n = 4
        spec = SymmetrySpec.for_n(n)
        tau = [0] * (2 * n)
        tau[0] = tau[2] = 1
        tau[4] = tau[6] = 1
        ok, reason = is_tau_admissible(TauVector(tuple(tau)), {0, 2}, spec,
                                       Fraction(0), axis=0)
        assert not ok and "different values" in reason

    def test_offsite_support_rejected(self):
        n = 4
        spec = SymmetrySpec.for_n(n)
        l = n // 2
        tau = [0] * (2 * n)
        tau[0] = tau[n] = -1
        tau[l] = tau[l + n] = 1
        tau[1] = 1  # body 1 is outside the stabilizer orbit of {0, l}
        ok, reason = is_tau_admissible(TauVector(tuple(tau)), {0, l}, spec,
                                       Fraction(0), axis=0)
        assert not ok


class TestShift:
    def _plateau_segment(self, n_bodies=8, l=32, t1=0.25, t2=0.5):
        # four moved bodies with an exact x-plateau on [t1, t2]; two fixed
        # blocks placed well to the left/right
        pos = np.zeros((l + 1, n_bodies, 3))
        t = np.linspace(0, 1, l + 1)
        x = np.where(t < t1, t - t1, np.where(t > t2, t - t2, 0.0))
        for b, off in ((0, 0.0), (1, 0.0), (2, 2.0), (3, 2.0)):
            pos[:, b, 0] = x + off
            pos[:, b, 1] = 0.2 * b + np.sin(t)
        pos[:, 4:6, 0] = -5.0
        pos[:, 6:8, 0] = 7.0
        return PathSegment(1.0, pos, np.ones(n_bodies)), (t1, t2)

    def test_zero_eps_identity(self):
        seg, interval = self._plateau_segment()
        out = shift_deformation(seg, interval, (0, 1), (2, 3), (4, 5), (6, 7), 0.0)
        assert np.array_equal(out.positions, seg.positions)

    def test_kinetic_increment_closed_form(self):
        # case-1 shape on a 4-body moved cluster: 2 eps^2 / (t2 - t1)
        seg, (t1, t2) = self._plateau_segment()
        eps = 0.125
        out = shift_deformation(seg, (t1, t2), (0, 1), (2, 3), (4, 5), (6, 7),
                                eps, variant="before")
        dk = kinetic_energy(out) - kinetic_energy(seg)
        assert dk == pytest.approx(2 * eps**2 / (t2 - t1), abs=1e-12)

    def test_distances_never_decrease(self):
        seg, (t1, t2) = self._plateau_segment()
        out = shift_deformation(seg, (t1, t2), (0, 1), (2, 3), (4, 5), (6, 7),
                                0.125, variant="before")
        assert np.all(pairwise_distances(out) >= pairwise_distances(seg) - 1e-12)

    def test_shift_escape_breaks_arc_plateau(self):
        omega = default_omega(2)
        m = 16
        t = 0.5 * np.arange(m + 1) / m
        x = np.minimum(-0.5 + t, 0.0)
        x[5:9] = x[5]  # plateau of 4 nodes
        x = np.minimum(np.maximum.accumulate(x), 0.0)
        x[-1] = 0.0
        samples = np.stack([x, np.sin(np.pi * t), 0.2 * np.cos(2 * np.pi * t)], axis=1)
        samples[0, 1] = 0.0
        arc = FundamentalArc(2, samples)
        found = find_plateaus(arc, window=3)
        assert any(axis == "x" for axis, _, _ in found)
        axis, i1, i2 = next(p for p in found if p[0] == "x")
        out = shift_escape(arc, omega, (i1, i2), "x", 0.05)
        assert np.max(np.abs(np.diff(out.samples[i1:i2 + 1, 0]))) > 0.0
        # still weakly feasible
        assert np.all(np.diff(out.samples[:, 0]) >= 0)

    def test_shift_escape_requires_plateau(self):
        omega = default_omega(2)
        arc = random_feasible_arc(2, 16, np.random.default_rng(8), omega)
        samples = np.array(arc.samples)
        samples[:, 0] = np.linspace(-1, 0, 17)  # strictly increasing
        arc = FundamentalArc(2, samples)
        with pytest.raises(PlateauError):
            shift_escape(arc, omega, (4, 8), "x", 0.05)
