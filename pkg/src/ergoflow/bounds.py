"""Entropy-vector lower bounds for states with a single coherent pair.

For a state that is diagonal except for the ``(alpha, beta)`` coherence ``c``,
the k-th entry of the (convex-roof) entropy vector is bounded below by::

    Lambda_k = 2 * (|c| - sum of the k smallest sqrt(P[alpha_a] * P[beta_a]))

where ``a`` runs over the bipartitions of the site set and ``alpha_a`` /
``beta_a`` are the flip states of the bipartition. At the point of maximal
mixing ``|c| = |P_alpha - P_beta| / 2`` this becomes the peak bound.

Small exact oracles (pure-state entropy vectors, partial transposes) live here
too; they work on dense matrices and are capped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .ensemble import CapacityError, CoherentPairState, EnsembleShape, Label, differing_sites

PPT_CAP = 2**10
PURE_CAP = 2**12


@lru_cache(maxsize=None)
def bipartitions(sites: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Nontrivial bipartitions of ``sites``, one representative side per pair.

    The representative never contains the last site, so complements are not
    listed twice. Order follows the bitmask over ``sites[:-1]``.
    """
    head = sites[:-1]
    out = []
    for mask in range(1, 2 ** len(head)):
        out.append(tuple(s for j, s in enumerate(head) if mask >> j & 1))
    return tuple(out)


def _flip(alpha: Label, beta: Label, gamma: Sequence[int]) -> tuple[Label, Label]:
    a, b = list(alpha), list(beta)
    for k in gamma:
        a[k], b[k] = beta[k], alpha[k]
    return tuple(a), tuple(b)


def flip_states(alpha: Sequence[int], beta: Sequence[int], gamma: Sequence[int]) -> tuple[Label, Label]:
    """Swap the digits of ``alpha`` and ``beta`` on the sites in ``gamma``.

    ``gamma`` must split the differing-site set: non-empty intersection with it,
    and not all of it.
    """
    alpha, beta = tuple(alpha), tuple(beta)
    D, _ = differing_sites(alpha, beta)
    gamma = tuple(sorted(set(gamma)))
    if any(not 0 <= k < len(alpha) for k in gamma):
        raise ValueError(f"bipartition {gamma} has sites outside the label")
    inside = set(gamma) & set(D)
    if not inside or inside == set(D):
        raise ValueError(f"bipartition {gamma} does not split the differing sites {D}")
    return _flip(alpha, beta, gamma)


@dataclass(frozen=True, eq=False)
class LambdaVector:
    """Lower bounds ``Lambda_1 >= Lambda_2 >= ...`` over the bipartitions of ``sites``."""

    sites: tuple[int, ...]
    values: np.ndarray = field(repr=False)
    # bipartition index (into bipartitions(sites)) behind each cumulative term
    order: tuple[int, ...] = field(repr=False, default=())

    @property
    def n1(self) -> int:
        return len(self.sites)

    def __len__(self) -> int:
        return len(self.values)

    def __getitem__(self, k: int) -> float:
        """1-based access: ``lv[1]`` is ``Lambda_1``."""
        if not 1 <= k <= len(self.values):
            raise IndexError(f"Lambda index {k} outside 1..{len(self.values)}")
        return float(self.values[k - 1])

    @property
    def first(self) -> float:
        return self[1]

    @property
    def last(self) -> float:
        return self[len(self.values)]


def _site_set(alpha, beta, sites: str) -> tuple[int, ...]:
    if sites == "differing":
        return differing_sites(alpha, beta)[0]
    if sites == "all":
        return tuple(range(len(alpha)))
    raise ValueError(f"sites must be 'differing' or 'all', got {sites!r}")


def _lambda(state, alpha, beta, amplitude: float, sites: str) -> LambdaVector:
    S = _site_set(alpha, beta, sites)
    if len(S) < 2:
        return LambdaVector(S, np.zeros(0))
    terms = []
    for gamma in bipartitions(S):
        a, b = _flip(alpha, beta, gamma)
        terms.append(math.sqrt(state.population(a) * state.population(b)))
    order = np.argsort(terms, kind="stable")
    partial = np.cumsum(np.asarray(terms)[order])
    return LambdaVector(S, 2.0 * (amplitude - partial), tuple(int(i) for i in order))


def lambda_at(snapshot: CoherentPairState, sites: str = "differing") -> LambdaVector:
    """Instantaneous bounds from the snapshot's coherence and diagonal.

    ``sites="differing"`` (default) uses bipartitions of the differing sites
    only; ``"all"`` uses every bipartition of the N sites. With fewer than two
    sites in the set the vector is empty.
    """
    return _lambda(snapshot, snapshot.alpha, snapshot.beta, abs(snapshot.coherence), sites)


def lambda_peak(state, alpha: Sequence[int], beta: Sequence[int], sites: str = "differing") -> LambdaVector:
    """Bounds at maximal mixing of a transposition, from pre-step populations."""
    alpha = state.shape.check_label(alpha)
    beta = state.shape.check_label(beta)
    gap = abs(state.population(alpha) - state.population(beta))
    return _lambda(state, alpha, beta, gap / 2.0, sites)


def equal_term_lambda(P_alpha: float, P_beta: float, k) -> np.ndarray:
    """``|P_a - P_b| - 2k sqrt(P_a P_b)``: the peak bound when every term is equal."""
    k = np.asarray(k, dtype=float)
    return abs(P_alpha - P_beta) - 2.0 * k * math.sqrt(P_alpha * P_beta)


def separability_index(n1: int, l: int) -> int:
    """1-based Lambda entry whose positivity excludes l-separability (``2 <= l <= n1``)."""
    if not 2 <= l <= n1:
        raise ValueError(f"l must lie in 2..{n1}, got {l}")
    return 2 ** (n1 - 1) - 2 ** (l - 1) + 1


@dataclass(frozen=True)
class SeparabilityReport:
    entangled: bool
    gme: bool
    ruled_out: tuple[int, ...]
    lambda_: LambdaVector = field(repr=False)

    @property
    def max_ruled_out_l(self) -> int:
        return max(self.ruled_out, default=0)

    @property
    def at_most_l(self) -> int:
        """Largest l the state can still have; ``n1`` when nothing is excluded."""
        return min(self.ruled_out) - 1 if self.ruled_out else self.lambda_.n1

    @property
    def label(self) -> str:
        if not self.entangled:
            return "SEP"
        if self.gme:
            return "GME"
        return f"l<={self.at_most_l}"


def classify(lv: LambdaVector) -> SeparabilityReport:
    n1 = lv.n1
    if len(lv) == 0:
        return SeparabilityReport(False, False, (), lv)
    ruled_out = tuple(l for l in range(2, n1 + 1) if lv[separability_index(n1, l)] > 0)
    entangled = lv.first > 0
    gme = lv.last > 0
    return SeparabilityReport(entangled, gme, ruled_out, lv)


def threshold_ratio_exact(k: float) -> float:
    """``P_a / P_b`` at which ``|P_a - P_b| - 2k sqrt(P_a P_b)`` changes sign."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return 1.0 + 2.0 * k * k + 2.0 * k * math.sqrt(1.0 + k * k)


def threshold_ratio_paper(gamma: float) -> float:
    """``1 + 2 gamma + 2 sqrt(gamma + gamma^2)`` as printed in the original condition.

    Agrees with :func:`threshold_ratio_exact` only at ``gamma = 1``.
    """
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    return 1.0 + 2.0 * gamma + 2.0 * math.sqrt(gamma + gamma * gamma)


def _site_tensor_order(shape: EnsembleShape):
    # little-endian flat index <-> Fortran-order reshape gives axis k == site k
    return (shape.d,) * shape.N


def entropy_vector_pure(psi, shape: EnsembleShape) -> np.ndarray:
    """Linear entropies ``sqrt(2 (1 - tr rho_gamma^2))`` over all site bipartitions, sorted descending."""
    psi = np.asarray(psi, dtype=complex)
    if shape.size > PURE_CAP:
        raise CapacityError(f"pure-state oracle limited to {PURE_CAP} amplitudes")
    if psi.shape != (shape.size,):
        raise ValueError(f"expected {shape.size} amplitudes, got {psi.shape}")
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-10:
        raise ValueError("state vector is not normalised")
    if shape.N < 2:
        return np.zeros(0)
    tensor = psi.reshape(_site_tensor_order(shape), order="F")
    out = []
    for gamma in bipartitions(tuple(range(shape.N))):
        rest = [k for k in range(shape.N) if k not in gamma]
        M = np.transpose(tensor, list(gamma) + rest).reshape(shape.d ** len(gamma), -1)
        sv = np.linalg.svd(M, compute_uv=False)
        purity = float(np.sum(sv**4))
        out.append(math.sqrt(max(0.0, 2.0 * (1.0 - purity))))
    return np.sort(out)[::-1]


def partial_transpose(rho: np.ndarray, shape: EnsembleShape, sites: Sequence[int]) -> np.ndarray:
    dims = _site_tensor_order(shape)
    t = np.asarray(rho).reshape(dims + dims, order="F")
    axes = list(range(2 * shape.N))
    for k in sites:
        axes[k], axes[shape.N + k] = axes[shape.N + k], axes[k]
    return np.transpose(t, axes).reshape(rho.shape, order="F")


def ppt_min_eigenvalue(rho: np.ndarray, shape: EnsembleShape, sites: Sequence[int]) -> float:
    """Smallest eigenvalue of the partial transpose on ``sites``; negative means entangled across that cut."""
    if shape.size > PPT_CAP:
        raise CapacityError(f"partial-transpose oracle limited to d**N <= {PPT_CAP}")
    return float(np.linalg.eigvalsh(partial_transpose(rho, shape, sites))[0])
