import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_work, random_hamiltonian, random_state
from ergoflow.ensemble import DiagonalState, EnsembleShape, QuditHamiltonian, product_state
from ergoflow.scenarios import gibbs, microcanonical
from ergoflow.work import apply_swap, energy_shells, is_passive, optimal_permutation, total_energy, work_of_swap

QUBIT = QuditHamiltonian((0.0, 1.0))


def test_total_energy_examples():
    uniform = DiagonalState(EnsembleShape(2, 2), np.full(4, 0.25))
    assert total_energy(uniform, QUBIT) == 1.0
    p = product_state([0.5, 0.4, 0.1], 1)
    assert total_energy(p, QuditHamiltonian((0.0, 1.0, 2.0))) == pytest.approx(0.6, abs=1e-15)
    mc = microcanonical(QUBIT, 3, 2.0, 0.0)
    assert total_energy(mc.state, QUBIT) == pytest.approx(2.0, abs=1e-15)


def test_total_energy_shape_mismatch():
    with pytest.raises(ValueError):
        total_energy(product_state([0.5, 0.5], 2), QuditHamiltonian((0.0, 1.0, 2.0)))


def test_is_passive_examples():
    H = QuditHamiltonian((0.0, 1.0, 2.0))
    p = product_state([0.5, 0.4, 0.1], 2)
    assert is_passive(p, H)
    # (1,3) has energy 2 and population 0.05; (2,2) has energy 2 and population 0.16: same shell
    assert is_passive(apply_swap(p, (1, 3), (2, 2)), H)
    # (2,1) energy 1, population 0.2, against (3,3) energy 4, population 0.01
    assert not is_passive(apply_swap(p, (2, 1), (3, 3)), H)
    g = DiagonalState(EnsembleShape(2, 3), np.kron(gibbs(H, 0.8), gibbs(H, 0.8)))
    assert is_passive(g, H)
    mc = microcanonical(QUBIT, 3, 2.0, 0.0)
    assert not is_passive(mc.state, QUBIT)


def test_degenerate_shell_any_order_is_passive():
    H = QuditHamiltonian((0.0, 1.0, 1.0))
    assert is_passive(product_state([0.5, 0.2, 0.3], 1), H)
    assert is_passive(product_state([0.5, 0.3, 0.2], 1), H)
    assert not is_passive(product_state([0.2, 0.5, 0.3], 1), H)


def test_energy_shells_tolerance():
    E = np.array([0.0, 1.0, 1.0 + 1e-14, 2.0])
    ids = energy_shells(E)
    assert ids[1] == ids[2] and len(set(ids.tolist())) == 3


def test_optimal_permutation_examples():
    s = DiagonalState(EnsembleShape(2, 2), np.array([0.1, 0.2, 0.3, 0.4]))
    rep = optimal_permutation(s, QUBIT)
    assert rep.initial_energy == pytest.approx(1.3, abs=1e-15)
    assert rep.final_energy == pytest.approx(0.7, abs=1e-15)
    assert rep.work == pytest.approx(0.6, abs=1e-15)
    assert rep.work == brute_force_work(s, QUBIT)
    one = DiagonalState(EnsembleShape(1, 2), np.array([0.3, 0.7]))
    assert optimal_permutation(one, QUBIT).work == pytest.approx(0.4, abs=1e-15)


def test_passive_input_identity():
    p = product_state([0.6, 0.3, 0.1], 3)
    rep = optimal_permutation(p, QuditHamiltonian((0.0, 0.5, 1.0)))
    assert rep.work == 0.0
    assert np.array_equal(rep.permutation, np.arange(27))


def test_report_invariants(rng):
    for _ in range(20):
        N, d = int(rng.integers(1, 4)), int(rng.integers(2, 4))
        s = random_state(rng, N, d)
        H = random_hamiltonian(rng, d)
        rep = optimal_permutation(s, H)
        assert abs(rep.work - (rep.initial_energy - rep.final_energy)) <= 1e-12
        assert sorted(rep.permutation.tolist()) == list(range(s.shape.size))
        assert is_passive(rep.final_state, H)
        assert rep.work >= 0
        assert np.array_equal(np.sort(rep.final_state.populations), np.sort(s.populations))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    N, d = [(1, 2), (2, 2), (3, 2), (1, 3)][seed % 4]
    s = random_state(rng, N, d)
    H = random_hamiltonian(rng, d)
    assert optimal_permutation(s, H).work == brute_force_work(s, H)


def test_work_zero_iff_passive(rng):
    H = QuditHamiltonian((0.0, 1.0))
    for _ in range(30):
        s = random_state(rng, 2, 2)
        assert (optimal_permutation(s, H).work == 0) == is_passive(s, H)


def test_ties_are_tie_independent():
    H = QuditHamiltonian((0.0, 1.0, 1.0))
    s = DiagonalState(EnsembleShape(2, 3), np.full(9, 1 / 9))
    rep = optimal_permutation(s, H)
    assert rep.work == 0.0


def test_apply_swap_properties():
    p = product_state([0.5, 0.3, 0.2], 2)
    once = apply_swap(p, (1, 2), (3, 3))
    assert np.array_equal(apply_swap(once, (1, 2), (3, 3)).populations, p.populations)
    assert np.array_equal(np.sort(once.populations), np.sort(p.populations))
    same = apply_swap(p, (1, 2), (2, 1))  # equal populations
    assert np.array_equal(same.populations, p.populations)


def test_work_of_swap(rng):
    H = QuditHamiltonian((0.0, 1.0, 1.0))
    p = product_state([0.5, 0.3, 0.2], 4)
    alpha, beta = (2, 2, 2, 2), (1, 3, 3, 3)
    expected = (0.3**4 - 0.5 * 0.2**3) * 1.0
    assert work_of_swap(p, alpha, beta, H) == pytest.approx(expected, abs=1e-15)
    assert work_of_swap(p, (1, 2, 1, 1), (1, 1, 2, 1), H) == 0.0
    mc = microcanonical(QUBIT, 3, 2.0, 0.0)
    assert work_of_swap(mc.state, (1, 1, 1), (2, 2, 1), QUBIT) == pytest.approx(2 / 3, abs=1e-15)
    for _ in range(10):
        s = random_state(rng, 2, 3)
        w = work_of_swap(s, (1, 1), (3, 2), H)
        assert total_energy(apply_swap(s, (1, 1), (3, 2)), H) == pytest.approx(total_energy(s, H) - w, abs=1e-15)
