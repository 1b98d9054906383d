"""Energy accounting, passivity and maximal work extraction by sorted pairing."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ensemble import (
    DEFAULT_DENSE_CAP,
    DiagonalState,
    QuditHamiltonian,
    energies_of_shape,
    flat_of_label,
)

ENERGY_TOL = 1e-12


def _check_shape(state, H: QuditHamiltonian) -> None:
    if state.shape.d != H.d:
        raise ValueError(f"state has d={state.shape.d} but the Hamiltonian has {H.d} levels")


def total_energy(state: DiagonalState, H: QuditHamiltonian) -> float:
    """``tr(Omega h_0)``.

    Summed with :func:`math.fsum`, so the result depends only on the multiset of
    ``(P_mu, E_mu)`` pairs and not on their order.
    """
    _check_shape(state, H)
    E = energies_of_shape(H, state.shape.N)
    return math.fsum(state.populations * E)


def energy_shells(energies: np.ndarray, tol: float = ENERGY_TOL) -> np.ndarray:
    """Shell id per flat index; energies closer than ``tol`` (relative) share a shell."""
    order = np.argsort(energies, kind="stable")
    sorted_E = energies[order]
    scale = np.maximum(1.0, np.abs(sorted_E[1:]))
    new_shell = np.diff(sorted_E) > tol * scale
    ids_sorted = np.concatenate(([0], np.cumsum(new_shell)))
    ids = np.empty_like(ids_sorted)
    ids[order] = ids_sorted
    return ids


def is_passive(state: DiagonalState, H: QuditHamiltonian) -> bool:
    """True iff populations never increase with energy.

    Ordering inside a degenerate energy shell is unconstrained.
    """
    _check_shape(state, H)
    state = state.to_dense()
    shells = energy_shells(energies_of_shape(H, state.shape.N))
    n_shells = shells.max() + 1
    P = state.populations
    lo = np.full(n_shells, np.inf)
    hi = np.full(n_shells, -np.inf)
    np.minimum.at(lo, shells, P)
    np.maximum.at(hi, shells, P)
    # every shell's smallest population must dominate all populations above it
    max_above = np.maximum.accumulate(hi[::-1])[::-1]
    return bool(np.all(lo[:-1] >= max_above[1:]))


@dataclass(frozen=True, eq=False)
class WorkReport:
    initial_energy: float
    final_energy: float
    work: float
    # permutation[mu] is the flat index that receives population P_mu
    permutation: np.ndarray = field(repr=False)
    final_state: DiagonalState = field(repr=False)


def permute(state: DiagonalState, permutation: np.ndarray) -> DiagonalState:
    P = np.empty_like(state.populations)
    P[permutation] = state.populations
    return state.with_populations(P)


def optimal_permutation(state, H: QuditHamiltonian, cap: int = DEFAULT_DENSE_CAP) -> WorkReport:
    """Maximal work extraction by matching populations (descending) to energies (ascending).

    Ties are broken by a stable sort on flat index. Passive inputs return the
    identity permutation and ``work == 0`` exactly.
    """
    _check_shape(state, H)
    state = state.to_dense(cap)
    E = energies_of_shape(H, state.shape.N)
    initial = math.fsum(state.populations * E)
    if is_passive(state, H):
        perm = np.arange(state.shape.size)
        return WorkReport(initial, initial, 0.0, perm, state)

    by_population = np.argsort(-state.populations, kind="stable")
    by_energy = np.argsort(E, kind="stable")
    perm = np.empty(state.shape.size, dtype=np.intp)
    perm[by_population] = by_energy
    final_state = permute(state, perm)
    final = math.fsum(final_state.populations * E)
    return WorkReport(initial, final, initial - final, perm, final_state)


def apply_swap(state: DiagonalState, alpha: Sequence[int], beta: Sequence[int]) -> DiagonalState:
    """Exchange ``P_alpha`` and ``P_beta``; every other entry is untouched."""
    a = flat_of_label(state.shape, alpha)
    b = flat_of_label(state.shape, beta)
    P = state.populations.copy()
    P[a], P[b] = P[b], P[a]
    return state.with_populations(P)


def work_of_swap(state: DiagonalState, alpha, beta, H: QuditHamiltonian) -> float:
    """Energy released by exchanging the populations of ``alpha`` and ``beta``.

    Positive when the larger population moves to the lower energy.
    """
    return total_energy(state, H) - total_energy(apply_swap(state, alpha, beta), H)
