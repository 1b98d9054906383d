import itertools
import math

import numpy as np
import pytest

from ergoflow.ensemble import DiagonalState, EnsembleShape, QuditHamiltonian, energies_of_shape


def brute_force_work(state: DiagonalState, H: QuditHamiltonian) -> float:
    """Maximal work over every permutation of the populations (exhaustive)."""
    E = energies_of_shape(H, state.shape.N)
    P = state.populations
    initial = math.fsum(P * E)
    best = min(math.fsum(P[list(perm)] * E) for perm in itertools.permutations(range(P.size)))
    return initial - best


def random_state(rng, N, d) -> DiagonalState:
    shape = EnsembleShape(N, d)
    w = rng.random(shape.size)
    return DiagonalState.from_populations(shape, w, renormalize=True)


def random_hamiltonian(rng, d) -> QuditHamiltonian:
    return QuditHamiltonian(tuple(np.sort(rng.random(d) * 2.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
