import numpy as np
import pytest

from choreo.model import FullLoop, FundamentalArc, OmegaSequence
from choreo.optimizer import SolverConfig, minimize
from choreo.symmetry import SymmetrySpec, reconstruct_full_loop
from choreo.verify import (Thresholds, certificate_from_dict, certify,
                           compare_mirror)
from conftest import default_omega, random_feasible_arc


@pytest.fixture(scope="module")
def n2_certified(solved_n2):
    loop = reconstruct_full_loop(SymmetrySpec.for_n(2), solved_n2.arc)
    return solved_n2, loop, certify(loop, solved_n2.omega)


class TestCertify:
    def test_converged_solution_passes(self, n2_certified):
        _, _, cert = n2_certified
        assert cert.passed
        names = {c.name for c in cert.checks}
        assert {"equivariance", "boundary_identities", "topological_signs",
                "strict_x_monotone", "strict_y_monotone", "velocity_sign_x",
                "velocity_sign_y", "endpoint_velocity_x", "endpoint_velocity_y",
                "collision_distance", "well_disjointness",
                "quadrant_confinement", "el_residual", "coercivity",
                "simple_curve", "loops_meet_in_xy_plane", "spatial"} <= names

    def test_deterministic(self, n2_certified):
        res, loop, cert = n2_certified
        again = certify(loop, res.omega)
        assert again.as_dict() == cert.as_dict()

    def test_roundtrip_through_dict(self, n2_certified):
        _, _, cert = n2_certified
        again = certificate_from_dict(cert.as_dict())
        assert again.as_dict() == cert.as_dict()

    def test_planar_xz_loop_fails_nondegeneracy(self):
        # a loop squashed into the xz-plane: y extent zero, so the strict
        # y-monotone and spatial checks must fail
        omega = default_omega(2)
        arc = random_feasible_arc(2, 16, np.random.default_rng(0), omega)
        samples = np.array(arc.samples)
        samples[:, 1] = 0.0
        loop = reconstruct_full_loop(SymmetrySpec.for_n(2),
                                     FundamentalArc(2, samples))
        cert = certify(loop, omega)
        assert not cert.passed
        assert not cert.check("strict_y_monotone").passed
        assert not cert.check("spatial").passed

    def test_single_sign_violation_localized(self, n2_certified):
        res, loop, _ = n2_certified
        samples = np.array(res.arc.samples)
        samples[0, 2] = -samples[0, 2]  # flip z0(0) against omega_0
        bad = reconstruct_full_loop(SymmetrySpec.for_n(2),
                                    FundamentalArc(2, samples))
        cert = certify(bad, res.omega)
        assert not cert.check("topological_signs").passed

    def test_render_mentions_every_check(self, n2_certified):
        _, _, cert = n2_certified
        text = cert.render()
        for c in cert.checks:
            assert c.name in text
        assert "overall: PASS" in text


class TestCompareMirror:
    def test_sweep_pair_congruent(self):
        cfg = SolverConfig(node_count=32)
        plus = minimize(2, OmegaSequence(2, (1, -1)), cfg)
        minus = minimize(2, OmegaSequence(2, (-1, 1)), cfg)
        rep = compare_mirror(plus, minus)
        assert rep.alignment_error < 1e-6
        assert rep.action_difference < 1e-6

    def test_identity_comparison(self, solved_n2):
        # comparing a result against its own exact mirror gives zero error
        mirrored_arc = np.array(solved_n2.arc.samples)
        mirrored_arc[:, 2] *= -1.0
        from dataclasses import replace

        minus = replace(solved_n2, omega=solved_n2.omega.flipped(),
                        arc=FundamentalArc(2, mirrored_arc))
        rep = compare_mirror(solved_n2, minus)
        assert rep.alignment_error == 0.0
        assert rep.action_difference == 0.0

    def test_mismatched_omega_rejected(self, solved_n2):
        with pytest.raises(ValueError):
            compare_mirror(solved_n2, solved_n2)
