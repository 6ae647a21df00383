import numpy as np
import pytest

from choreo.constraints import project_feasible
from choreo.model import FundamentalArc, OmegaSequence
from choreo.optimizer import SolverConfig, initial_guess, minimize


def default_omega(n: int) -> OmegaSequence:
    """An admissible alternating-ish word for any n >= 2 (except 3)."""
    return OmegaSequence(n, tuple(1 if i % 2 == 0 else -1 for i in range(n // 2 + 1)))


def random_feasible_arc(n: int, node_count: int, rng,
                        omega: OmegaSequence | None = None) -> FundamentalArc:
    """Random arc projected onto the feasible set for omega."""
    omega = omega or default_omega(n)
    arc = initial_guess(n, omega, amplitude=0.2 + 0.3 * rng.random(),
                        radius=0.5 + rng.random(), node_count=node_count)
    samples = np.array(arc.samples)
    samples += 0.08 * rng.standard_normal(samples.shape)
    samples[0, 1] = 0.0
    samples[-1, 0] = 0.0
    return project_feasible(FundamentalArc(n, samples), omega)


@pytest.fixture(scope="session")
def solved_n2():
    """A converged n=2 solve at modest resolution, shared across tests."""
    omega = OmegaSequence(2, (1, -1))
    result = minimize(2, omega, SolverConfig(node_count=64))
    assert result.converged
    return result
