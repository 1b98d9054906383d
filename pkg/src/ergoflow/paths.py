"""Transposition protocols: direct, indirect (non-entangling) and hybrid plans.

A step exchanges the populations of two basis labels through a rotation in
their two-dimensional span. Time is normalised to ``s in [0, 1]`` and a
schedule ``m(s)`` sets the rotation angle ``theta = (pi / 2) m(s)``; the default
``m(s) = s`` is the constant-Hamiltonian exchange. The rotation uses the
``-i`` (Pauli-X generator) phase convention; every reported bound depends only
on ``|u11| |u12| = |cos theta sin theta|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .bounds import LambdaVector, equal_term_lambda, lambda_peak
from .ensemble import (
    CoherentPairState,
    DiagonalState,
    EnsembleShape,
    Label,
    ProductState,
    QuditHamiltonian,
    differing_sites,
    flat_of_label,
)
from .entropy import composition_label, relative_entropy, rounded_composition
from .work import apply_swap, total_energy

Schedule = Callable[[float], float]

PSD_TOL = 1e-12
LADDER_PEAK_SITES = 16


class CertificateError(ValueError):
    """No separable decomposition of the documented form applies."""


def linear_schedule(s: float) -> float:
    return s


def smoothstep_schedule(s: float) -> float:
    return s * s * (3.0 - 2.0 * s)


SCHEDULES = {"linear": linear_schedule, "smoothstep": smoothstep_schedule}


def rotation(m: float) -> tuple[float, float]:
    """``(cos theta, sin theta)`` for ``theta = pi m / 2``, exact at both endpoints."""
    if m == 0:
        return 1.0, 0.0
    if m == 1:
        return 0.0, 1.0
    theta = 0.5 * math.pi * m
    return math.cos(theta), math.sin(theta)


@dataclass(frozen=True)
class TranspositionStep:
    alpha: Label
    beta: Label
    schedule: Schedule = field(default=linear_schedule, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "alpha", tuple(self.alpha))
        object.__setattr__(self, "beta", tuple(self.beta))
        if self.alpha == self.beta:
            raise ValueError("a transposition needs two distinct labels")
        if len(self.alpha) != len(self.beta):
            raise ValueError("labels of different length")

    @property
    def n_sites(self) -> int:
        return differing_sites(self.alpha, self.beta)[1]

    def mixing(self, s: float) -> float:
        """``|u11(s)| |u12(s)|``; reaches 1/2 where ``m(s) = 1/2``."""
        c, sn = rotation(self.schedule(s))
        return abs(c * sn)


@dataclass(frozen=True)
class PathPlan:
    """Ordered transposition steps whose composition is the exchange ``(alpha beta)``."""

    alpha: Label
    beta: Label
    steps: tuple[TranspositionStep, ...]
    kind: str
    level: int | None = None  # l for hybrid plans, K for ladder rounds

    @property
    def cost(self) -> int:
        return len(self.steps)

    def apply(self, state: DiagonalState) -> DiagonalState:
        for step in self.steps:
            state = apply_swap(state, step.alpha, step.beta)
        return state

    def permutation(self, shape: EnsembleShape) -> np.ndarray:
        """Flat permutation: ``perm[mu]`` is where population ``mu`` ends up."""
        where = np.arange(shape.size)  # where[slot] = original index now held in slot
        for step in self.steps:
            a = flat_of_label(shape, step.alpha)
            b = flat_of_label(shape, step.beta)
            where[a], where[b] = where[b], where[a]
        perm = np.empty_like(where)
        perm[where] = np.arange(shape.size)
        return perm


def _chain(alpha: Label, beta: Label, sites: Sequence[int]) -> list[Label]:
    """Labels visited when replacing alpha's digits by beta's on ``sites`` one at a time."""
    labels = [tuple(alpha)]
    current = list(alpha)
    for k in sites:
        current[k] = beta[k]
        labels.append(tuple(current))
    return labels


def _shuttle_plan(alpha, beta, shuttle_sites, schedule, kind, level) -> PathPlan:
    alpha, beta = tuple(alpha), tuple(beta)
    chain = _chain(alpha, beta, shuttle_sites)
    forward = [TranspositionStep(a, b, schedule) for a, b in zip(chain, chain[1:])]
    middle = [TranspositionStep(chain[-1], beta, schedule)] if chain[-1] != beta else []
    back = [TranspositionStep(s.beta, s.alpha, schedule) for s in reversed(forward)]
    return PathPlan(alpha, beta, tuple(forward + middle + back), kind, level)


def direct_plan(alpha, beta, schedule: Schedule = linear_schedule) -> PathPlan:
    step = TranspositionStep(alpha, beta, schedule)
    return PathPlan(step.alpha, step.beta, (step,), "direct")


def indirect_plan(alpha, beta, schedule: Schedule = linear_schedule) -> PathPlan:
    """``2n - 1`` single-site exchanges realising the transposition of alpha and beta.

    Forward: replace alpha's differing digits by beta's in ascending site order
    until beta is reached (n steps); then walk the n - 1 intermediate labels
    back to alpha. Every step pair differs at exactly one site.
    """
    if tuple(alpha) == tuple(beta):
        raise ValueError("a transposition needs two distinct labels")
    D, n = differing_sites(alpha, beta)
    alpha, beta = tuple(alpha), tuple(beta)
    chain = _chain(alpha, beta, D)
    forward = [TranspositionStep(a, b, schedule) for a, b in zip(chain, chain[1:])]
    back = [TranspositionStep(a, b, schedule) for a, b in zip(chain[-2:0:-1], chain[-3::-1])]
    return PathPlan(alpha, beta, tuple(forward + back), "indirect")


def hybrid_plan(alpha, beta, l: int, schedule: Schedule = linear_schedule) -> PathPlan:
    """Shuttle over ``n - l`` sites, one direct exchange over the remaining ``l``, shuttle back.

    The ``l`` highest-indexed differing sites are exchanged directly; cost is
    ``2 (n - l) + 1``.
    """
    if tuple(alpha) == tuple(beta):
        raise ValueError("a transposition needs two distinct labels")
    D, n = differing_sites(alpha, beta)
    if not 1 <= l <= n:
        raise ValueError(f"l must lie in 1..{n}, got {l}")
    return _shuttle_plan(alpha, beta, D[: n - l], schedule, "hybrid", l)


def evolve_step(pre_state, step: TranspositionStep, s: float) -> CoherentPairState:
    """State at normalised time ``s`` of one exchange started from a diagonal state."""
    if not 0.0 <= s <= 1.0:
        raise ValueError(f"s must lie in [0, 1], got {s}")
    c, sn = rotation(step.schedule(s))
    Pa = pre_state.population(step.alpha)
    Pb = pre_state.population(step.beta)
    return CoherentPairState(
        base=pre_state,
        alpha=step.alpha,
        beta=step.beta,
        pop_alpha=c * c * Pa + sn * sn * Pb,
        pop_beta=sn * sn * Pa + c * c * Pb,
        coherence=1j * c * sn * (Pa - Pb),
    )


@dataclass(frozen=True, eq=False)
class SeparableTerm:
    weight: float
    site: int
    factor: np.ndarray = field(repr=False)  # d x d single-site density matrix
    spectator: Label = ()  # full label; the digit at ``site`` is irrelevant


@dataclass(frozen=True, eq=False)
class SeparableDecomposition:
    """``sum_j w_j rho_j (x) |spectator_j><spectator_j| + diag(residual)``."""

    shape: EnsembleShape
    terms: tuple[SeparableTerm, ...]
    residual: np.ndarray = field(repr=False)

    @property
    def total_weight(self) -> float:
        return math.fsum([t.weight for t in self.terms]) + math.fsum(self.residual)

    def entries(self) -> dict[tuple[int, int], complex]:
        """Non-zero matrix elements of the reassembled state, keyed by flat indices."""
        out: dict[tuple[int, int], complex] = {}
        for mu in np.flatnonzero(self.residual):
            out[(int(mu), int(mu))] = complex(self.residual[mu])
        for term in self.terms:
            for i, j in zip(*np.nonzero(term.factor)):
                row = list(term.spectator)
                col = list(term.spectator)
                row[term.site], col[term.site] = int(i) + 1, int(j) + 1
                key = (flat_of_label(self.shape, row), flat_of_label(self.shape, col))
                out[key] = out.get(key, 0.0) + term.weight * complex(term.factor[i, j])
        return out

    def to_matrix(self) -> np.ndarray:
        rho = np.zeros((self.shape.size, self.shape.size), dtype=complex)
        for (i, j), v in self.entries().items():
            rho[i, j] += v
        return rho

    def reassembly_error(self, snapshot: CoherentPairState) -> float:
        """Max entrywise deviation from ``snapshot``, without building dense matrices."""
        entries = self.entries()
        diag = snapshot.diagonal()
        a = flat_of_label(self.shape, snapshot.alpha)
        b = flat_of_label(self.shape, snapshot.beta)
        err = 0.0
        rebuilt = np.zeros_like(diag)
        for (i, j), v in entries.items():
            if i == j:
                rebuilt[i] += v.real
                err = max(err, abs(v.imag))
            elif (i, j) == (a, b):
                err = max(err, abs(v - snapshot.coherence))
            elif (i, j) == (b, a):
                err = max(err, abs(v - np.conj(snapshot.coherence)))
            else:
                err = max(err, abs(v))
        if snapshot.coherence != 0 and (a, b) not in entries:
            err = max(err, abs(snapshot.coherence))
        return max(err, float(np.max(np.abs(rebuilt - diag))))


def separability_certificate(snapshot: CoherentPairState) -> SeparableDecomposition:
    """Explicit separable form of a single-site exchange snapshot.

    The pair block is ``(P_a + P_a') rho_1 (x) |spectators><spectators|``; the
    rest of the diagonal is a mixture of product basis states.
    """
    shape = snapshot.shape
    D, n = differing_sites(snapshot.alpha, snapshot.beta)
    if n != 1:
        raise CertificateError(f"certificate needs a single differing site, the pair differs at {n}")
    residual = snapshot.diagonal()
    a = flat_of_label(shape, snapshot.alpha)
    b = flat_of_label(shape, snapshot.beta)
    weight = snapshot.pop_alpha + snapshot.pop_beta
    if weight == 0.0:
        return SeparableDecomposition(shape, (), residual)

    site = D[0]
    i, j = snapshot.alpha[site] - 1, snapshot.beta[site] - 1
    factor = np.zeros((shape.d, shape.d), dtype=complex)
    factor[i, i] = snapshot.pop_alpha / weight
    factor[j, j] = snapshot.pop_beta / weight
    factor[i, j] = snapshot.coherence / weight
    factor[j, i] = np.conj(snapshot.coherence) / weight
    if abs(np.trace(factor).real - 1.0) > PSD_TOL:
        raise CertificateError("single-site factor does not have unit trace")
    if np.linalg.eigvalsh(factor)[0] < -PSD_TOL:
        raise CertificateError("single-site factor is not positive semidefinite")
    residual[a] = residual[b] = 0.0
    term = SeparableTerm(weight, site, factor, snapshot.alpha)
    return SeparableDecomposition(shape, (term,), residual)


@dataclass(frozen=True)
class PowerReport:
    work: float
    steps: int
    work_per_step: float


def plan_power_report(plan: PathPlan, state: DiagonalState, H: QuditHamiltonian) -> PowerReport:
    """Work of a plan and the power proxy work / steps (every step costs the same time)."""
    work = total_energy(state, H) - total_energy(plan.apply(state), H)
    per_step = work / plan.cost if plan.cost else 0.0
    return PowerReport(work, plan.cost, per_step)


@dataclass(frozen=True, eq=False)
class LadderRound:
    index: int
    spectrum_from: np.ndarray = field(repr=False)
    spectrum_to: np.ndarray = field(repr=False)
    composition_from: tuple[int, ...] = ()
    composition_to: tuple[int, ...] = ()
    relative_entropy_to_p: float = 0.0  # S(rho_index || p)
    log_ratio: float = 0.0  # ln(P_from / P_to) under p^{(x)N}
    plan: PathPlan | None = None
    peak: LambdaVector | None = field(default=None, repr=False)  # only when n1 <= LADDER_PEAK_SITES
    peak_first: float = math.nan  # peak Lambda_1, equal-term form (exact for product states)


def geometric_path(p, q, K: int) -> list[np.ndarray]:
    """``rho_k ~ p^{1 - k/K} q^{k/K}`` for ``k = 0..K`` (normalised)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("spectra of different length")
    if np.any((q > 0) & (p <= 0)):
        raise ValueError("q has weight outside the support of p")
    if not np.any((p > 0) & (q > 0)):
        raise ValueError("spectra have disjoint supports")
    support = (p > 0) & (q > 0)
    log_p = np.log(p, where=support, out=np.zeros_like(p))
    log_q = np.log(q, where=support, out=np.zeros_like(q))
    out = []
    for k in range(K + 1):
        t = k / K
        if k == 0:
            out.append(p.copy())
            continue
        if k == K:
            out.append(q.copy())
            continue
        logits = np.where(support, (1 - t) * log_p + t * log_q, -np.inf)
        w = np.exp(logits - logits[support].max())
        out.append(w / math.fsum(w))
    return out


def ladder_plan(p, q, K: int, N: int, schedule: Schedule = linear_schedule) -> list[LadderRound]:
    """Split the typical exchange ``p -> q`` into K direct exchanges between type classes.

    Round k exchanges the representatives of the rounded compositions of
    ``rho_{k-1}`` and ``rho_k``; the ratio of their populations under
    ``p^{(x)N}``, and with it the peak entanglement bound, shrinks as K grows.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    rhos = geometric_path(p, q, K)
    p = np.asarray(p, dtype=float)
    base = ProductState(p, N)
    log_p = np.log(p, where=p > 0, out=np.full_like(p, -np.inf))
    rounds = []
    for k in range(1, K + 1):
        n_from = rounded_composition(rhos[k - 1], N)
        n_to = rounded_composition(rhos[k], N)
        a, b = composition_label(n_from), composition_label(n_to)
        log_ratio = float(np.dot(np.subtract(n_from, n_to), np.where(p > 0, log_p, 0.0)))
        if a == b:
            plan = PathPlan(a, b, (), "ladder", K)
            peak = None
            first = math.nan
        else:
            plan = PathPlan(a, b, direct_plan(a, b, schedule).steps, "ladder", K)
            Pa, Pb = base.population(a), base.population(b)
            first = float(equal_term_lambda(Pa, Pb, 1))
            # full vector has 2^(n1-1) - 1 entries; skip it for wide pairs
            peak = lambda_peak(base, a, b) if differing_sites(a, b)[1] <= LADDER_PEAK_SITES else None
        rounds.append(LadderRound(
            index=k,
            spectrum_from=rhos[k - 1],
            spectrum_to=rhos[k],
            composition_from=n_from,
            composition_to=n_to,
            relative_entropy_to_p=relative_entropy(rhos[k], p),
            log_ratio=log_ratio,
            plan=plan,
            peak=peak,
            peak_first=first,
        ))
    return rounds
