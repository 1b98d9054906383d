"""Worked settings: microcanonical bath, tensor powers of a passive state, and the
four-qutrit exchange scan.

``S(p||q)`` is the relative entropy throughout. The direction matters: the
asymptotic work bound uses ``S(p||q_th)`` while the entanglement condition uses
``S(q_th||p)``; both are labelled explicitly.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect
from scipy.special import logsumexp

from . import bounds
from .ensemble import (
    DEFAULT_DENSE_CAP,
    DiagonalState,
    EnsembleShape,
    Label,
    ProductState,
    QuditHamiltonian,
    differing_sites,
    energies_of_shape,
    energy_of_label,
    flat_of_label,
    label_of_flat,
)
from .entropy import (
    composition_label,
    compositions,
    log_multinomial,
    log_type_probability,
    multinomial,
    relative_entropy,
    rounded_composition,
    shannon_entropy,
)
from .paths import PathPlan, direct_plan, evolve_step
from .work import WorkReport, energy_shells, total_energy, work_of_swap

ENTROPY_TOL = 1e-10
SHELL_SLACK = 1e-12

__all__ = [
    "relative_entropy",
    "shannon_entropy",
    "gibbs",
    "thermal_match",
    "MicrocanonicalScenario",
    "microcanonical",
    "microcanonical_plan",
    "PassiveEnsembleScenario",
    "passive_ensemble",
    "asymptotic_work_bound",
    "typical_summary",
    "typical_exchange_plan",
    "entanglement_condition",
    "figure1_scan",
    "figure1_slice",
]


# ---------------------------------------------------------------- thermal match

def gibbs(H: QuditHamiltonian, beta: float) -> np.ndarray:
    eps = H.as_array()
    w = np.exp(-beta * (eps - eps[0]))
    return w / math.fsum(w)


def thermal_match(H: QuditHamiltonian, p) -> tuple[np.ndarray, float]:
    """Gibbs spectrum ``q`` with ``S(q) == S(p)``, and its temperature.

    Gibbs entropy is monotone in the inverse temperature, so the match is a
    bracketed bisection in ``beta = 1/T``.
    """
    p = np.asarray(p, dtype=float)
    if p.size != H.d:
        raise ValueError(f"spectrum has {p.size} entries for a {H.d}-level Hamiltonian")
    eps = H.as_array()
    target = shannon_entropy(p)
    ground = int(np.sum(eps - eps[0] <= SHELL_SLACK * max(1.0, abs(eps[0]))))
    if ground == H.d:
        raise ValueError("all levels are degenerate: every state is thermal, no temperature is defined")
    if target <= math.log(ground) + ENTROPY_TOL:
        raise ValueError(
            f"S(p) = {target!r} does not exceed the ground-space entropy ln {ground}: "
            "the match would need T -> 0"
        )
    if target >= math.log(H.d) - ENTROPY_TOL:
        raise ValueError(f"S(p) = {target!r} reaches ln d = {math.log(H.d)!r}: the match would need T -> infinity")

    def excess(beta):
        return shannon_entropy(gibbs(H, beta)) - target

    hi = 1.0
    while excess(hi) > 0:
        hi *= 2.0
        if hi > 1e300:
            raise RuntimeError("failed to bracket the inverse temperature")
    beta = bisect(excess, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=2000)
    q = gibbs(H, beta)
    if abs(shannon_entropy(q) - target) > ENTROPY_TOL:
        raise RuntimeError(f"entropy match failed: residual {shannon_entropy(q) - target!r}")
    return q, 1.0 / beta


# ---------------------------------------------------------------- microcanonical

@dataclass(frozen=True, eq=False)
class MicrocanonicalScenario:
    H: QuditHamiltonian
    N: int
    E0: float
    delta: float
    shell: tuple[Label, ...]
    state: DiagonalState = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.shell)


def microcanonical(H: QuditHamiltonian, N: int, E0: float, delta: float,
                   cap: int = DEFAULT_DENSE_CAP) -> MicrocanonicalScenario:
    """Uniform mixture over the labels with energy in ``[E0 - delta/2, E0 + delta/2]``."""
    if delta < 0:
        raise ValueError("width must be non-negative")
    shape = EnsembleShape(N, H.d)
    shape.check_dense(cap)
    E = energies_of_shape(H, N)
    lo, hi = E0 - delta / 2, E0 + delta / 2
    slack = SHELL_SLACK * max(1.0, abs(lo), abs(hi))
    inside = np.flatnonzero((E >= lo - slack) & (E <= hi + slack))
    if inside.size == 0:
        raise ValueError(f"no label has energy in [{lo}, {hi}]")
    order = np.lexsort((inside, E[inside]))  # ascending energy, then flat index
    inside = inside[order]
    P = np.zeros(shape.size)
    P[inside] = 1.0 / inside.size
    shell = tuple(label_of_flat(shape, int(i)) for i in inside)
    return MicrocanonicalScenario(H, N, float(E0), float(delta), shell, DiagonalState(shape, P))


@dataclass(frozen=True)
class ExchangeRecord:
    alpha: Label
    beta: Label
    n1: int
    work: float
    gme_throughout: bool
    min_lambda_last: float  # over interior samples; nan when n1 < 2


@dataclass(frozen=True, eq=False)
class MicrocanonicalResult:
    plans: tuple[PathPlan, ...]
    exchanges: tuple[ExchangeRecord, ...]
    report: WorkReport = field(repr=False)


def microcanonical_plan(sc: MicrocanonicalScenario, samples: int = 101) -> MicrocanonicalResult:
    """Move the shell populations onto the lowest-energy labels, one direct exchange each.

    Targets are the ``N_Delta`` lowest labels (ascending energy, then flat
    index); shell labels are consumed in the same order. Labels that are both
    target and shell member stay put. Each exchange is simulated at ``samples``
    instants and flagged GME when the last bound entry is positive at every
    interior instant.
    """
    state = sc.state
    shape = state.shape
    E = energies_of_shape(sc.H, sc.N)
    shells = energy_shells(E)
    by_energy = np.lexsort((np.arange(shape.size), shells))
    targets = [int(i) for i in by_energy[: sc.size]]
    shell_idx = [flat_of_label(shape, lab) for lab in sc.shell]
    target_set, shell_set = set(targets), set(shell_idx)
    sources = [i for i in shell_idx if i not in target_set]
    sinks = [i for i in targets if i not in shell_set]

    s_grid = np.linspace(0.0, 1.0, samples)[1:-1]
    initial = total_energy(state, sc.H)
    plans, records = [], []
    current = state
    for t, src in zip(sinks, sources):
        alpha, beta = label_of_flat(shape, t), label_of_flat(shape, src)
        plan = direct_plan(alpha, beta)
        _, n1 = differing_sites(alpha, beta)
        w = work_of_swap(current, alpha, beta, sc.H)
        lows = []
        if n1 >= 2:
            for s in s_grid:
                lows.append(bounds.lambda_at(evolve_step(current, plan.steps[0], s)).last)
        min_last = min(lows) if lows else float("nan")
        records.append(ExchangeRecord(alpha, beta, n1, w, bool(lows) and min_last > 0, min_last))
        plans.append(plan)
        current = plan.apply(current)

    perm = np.arange(shape.size)
    for t, src in zip(sinks, sources):
        perm[t], perm[src] = src, t
    final = total_energy(current, sc.H)
    report = WorkReport(initial, final, initial - final, perm, current)
    return MicrocanonicalResult(tuple(plans), tuple(records), report)


# ---------------------------------------------------------------- passive ensembles

@dataclass(frozen=True, eq=False)
class PassiveEnsembleScenario:
    H: QuditHamiltonian
    p: np.ndarray = field(repr=False)
    q: np.ndarray = field(repr=False)
    T: float
    N: int

    @property
    def divergence_p_q(self) -> float:
        """``S(p || q_th)``, governs the asymptotic work."""
        return relative_entropy(self.p, self.q)

    @property
    def divergence_q_p(self) -> float:
        """``S(q_th || p)``, governs the entanglement condition."""
        return relative_entropy(self.q, self.p)


def passive_ensemble(H: QuditHamiltonian, p, N: int) -> PassiveEnsembleScenario:
    """``sigma_p^{(x)N}`` together with its entropy-matched thermal spectrum."""
    p = np.asarray(p, dtype=float)
    ProductState(p, N)  # validates the spectrum and N
    eps = H.as_array()
    for i in range(H.d):
        for j in range(H.d):
            if eps[i] < eps[j] and p[i] < p[j]:
                raise ValueError(f"spectrum {p.tolist()} is not passive: level {j + 1} outweighs level {i + 1}")
    q, T = thermal_match(H, p)
    return PassiveEnsembleScenario(H, p, q, T, N)


def asymptotic_work_bound(sc: PassiveEnsembleScenario) -> float:
    """``N T S(p||q_th)``, equal to ``N tr[H (p - q_th)]``."""
    return sc.N * sc.T * sc.divergence_p_q


@dataclass(frozen=True, eq=False)
class TypicalSetSummary:
    delta: float
    N: int
    entropy: float
    log_cardinality: float
    probability: float
    compositions: tuple[tuple[int, ...], ...] = field(repr=False)
    labels: tuple[Label, ...] | None = field(default=None, repr=False)


def typical_summary(p, N: int, delta: float, label_cap: int = 2**12) -> TypicalSetSummary:
    """Type classes whose per-site log-probability lies within ``delta`` of ``S(p)``.

    Counting runs over compositions of N, never over labels. Labels are listed
    only when ``d**N <= label_cap``.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    p = np.asarray(p, dtype=float)
    S = shannon_entropy(p)
    typical, log_sizes, log_masses = [], [], []
    for n in compositions(N, p.size):
        logP = log_type_probability(n, p)
        if not np.isfinite(logP) or abs(-logP / N - S) > delta:
            continue
        typical.append(n)
        size = log_multinomial(n)
        log_sizes.append(size)
        log_masses.append(size + logP)
    log_card = float(logsumexp(log_sizes)) if typical else -math.inf
    prob = float(np.exp(logsumexp(log_masses))) if typical else 0.0
    labels = None
    if p.size**N <= label_cap:
        wanted = set(typical)
        shape = EnsembleShape(N, p.size)
        labels = tuple(lab for lab in shape.labels()
                       if tuple(lab.count(k) for k in range(1, p.size + 1)) in wanted)
    return TypicalSetSummary(delta, N, S, log_card, prob, tuple(typical), labels)


@dataclass(frozen=True)
class ClassExchange:
    source: tuple[int, ...]
    target: tuple[int, ...]
    count: int  # number of label pairs exchanged between the two type classes
    log_ratio: float  # ln(P_source / P_target) under p^{(x)N}


@dataclass(frozen=True, eq=False)
class TypicalExchange:
    N: int
    delta: float
    representative: tuple[Label, Label]  # |k>^{round(N p_k)} and |k>^{round(N q_k)}
    log_ratio: float  # ln(P / P') of the representative pair, rounded compositions
    log_ratio_ideal: float  # N sum_k (p_k - q_k) ln p_k, unrounded exponents
    exchanges: tuple[ClassExchange, ...]
    initial_energy: float
    achieved_energy: float
    thermal_energy: float  # N tr[H q], the entropy-preserving floor
    plans: tuple[PathPlan, ...] | None = field(default=None, repr=False)

    @property
    def n_transpositions(self) -> int:
        return sum(x.count for x in self.exchanges)


def _class_members(shape: EnsembleShape) -> dict[tuple[int, ...], list[int]]:
    """Flat indices grouped by composition, each list ascending."""
    flat = np.arange(shape.size)
    digits = (flat[:, None] // shape.d ** np.arange(shape.N)) % shape.d
    counts = np.stack([(digits == k).sum(axis=1) for k in range(shape.d)], axis=1)
    groups: dict[tuple[int, ...], list[int]] = {}
    for idx, row in zip(flat.tolist(), map(tuple, counts.tolist())):
        groups.setdefault(row, []).append(idx)
    return groups


def typical_exchange_plan(sc: PassiveEnsembleScenario, N: int | None = None, delta: float = 0.05,
                          cap: int = DEFAULT_DENSE_CAP) -> TypicalExchange:
    """Transpose the populations of p-typical labels with those of q-typical labels.

    Works on type classes. Sources are the compositions within ``delta`` of
    ``N p`` (max-norm on frequencies), by descending label population; targets
    are those within ``delta`` of ``N q`` that are not sources, by ascending
    energy. The two sorted lists are merged label-for-label and a
    chunk is kept only if it releases work, so every transposition moves the
    larger population to the lower energy and no label is used twice.
    Label-level plans (ascending flat order inside each class) are built only
    when ``d**N`` fits ``cap``.
    """
    N = sc.N if N is None else N
    p, q, d = sc.p, sc.q, sc.H.d
    eps = sc.H.as_array()
    n_p, n_q = rounded_composition(p, N), rounded_composition(q, N)
    log_p = np.log(p, where=p > 0, out=np.full_like(p, -np.inf))
    log_ratio_ideal = float(N * math.fsum((p - q)[p > 0] * log_p[p > 0]))
    log_ratio = log_type_probability(n_p, p) - log_type_probability(n_q, p)
    initial = N * math.fsum(p * eps)
    thermal = N * math.fsum(q * eps)
    representative = (composition_label(n_p), composition_label(n_q))
    if np.allclose(p, q, rtol=0, atol=1e-14):
        return TypicalExchange(N, delta, representative, 0.0, 0.0, (), initial, initial, thermal, ())

    sources, targets = [], []
    for n in compositions(N, d):
        freq = np.asarray(n) / N
        lp = log_type_probability(n, p)
        if not np.isfinite(lp):
            continue
        energy = float(np.dot(n, eps))
        if np.max(np.abs(freq - p)) <= delta:
            sources.append((-lp, n, energy))
        elif np.max(np.abs(freq - q)) <= delta:
            targets.append((energy, n, lp))
    sources.sort()
    targets.sort(key=lambda t: (t[0], -t[2], t[1]))

    chunks = []  # (source, target, count, released) in merge order
    exchanges = []
    gain = 0.0
    i = j = 0
    left_src = multinomial(sources[0][1]) if sources else 0
    left_tgt = multinomial(targets[0][1]) if targets else 0
    while i < len(sources) and j < len(targets):
        neg_lp, n, e_src = sources[i]
        e_tgt, m, lp_tgt = targets[j]
        count = min(left_src, left_tgt)
        lp_src = -neg_lp
        released = (lp_src > lp_tgt) and (e_src > e_tgt)
        chunks.append((n, m, count, released))
        if released:
            exchanges.append(ClassExchange(n, m, count, lp_src - lp_tgt))
            gain += math.exp(math.log(count) + lp_src) * -math.expm1(lp_tgt - lp_src) * (e_src - e_tgt)
        left_src -= count
        left_tgt -= count
        if left_src == 0:
            i += 1
            left_src = multinomial(sources[i][1]) if i < len(sources) else 0
        if left_tgt == 0:
            j += 1
            left_tgt = multinomial(targets[j][1]) if j < len(targets) else 0

    plans = None
    shape = EnsembleShape(N, d)
    if shape.size <= cap:
        groups = _class_members(shape)
        cursor = dict.fromkeys(groups, 0)
        plans = []
        for n, m, count, released in chunks:
            a0, b0 = cursor[n], cursor[m]
            cursor[n], cursor[m] = a0 + count, b0 + count
            if released:
                for a, b in zip(groups[n][a0:a0 + count], groups[m][b0:b0 + count]):
                    plans.append(direct_plan(label_of_flat(shape, a), label_of_flat(shape, b)))
        plans = tuple(plans)
    return TypicalExchange(N, delta, representative, log_ratio, log_ratio_ideal, tuple(exchanges),
                           initial, initial - gain, thermal, plans)


@dataclass(frozen=True)
class EntanglementCondition:
    paper: bool
    exact: bool
    gamma: int
    divergence: float  # S(q_th || p)
    paper_rate: float  # ln(threshold_ratio_paper(gamma)) / N
    exact_rate: float  # ln(threshold_ratio_exact(gamma)) / N


def entanglement_condition(sc: PassiveEnsembleScenario, l: int) -> EntanglementCondition:
    """Whether a typical direct exchange leaves the ensemble at most l-separable.

    ``gamma = 2^(N-1) - 2^l + 1`` is the bound entry that excludes
    (l+1)-separability; both threshold formulas are evaluated at it.
    """
    N = sc.N
    if not 1 <= l <= N - 1:
        raise ValueError(f"l must lie in 1..{N - 1} (N={N}); l = N is never excluded")
    gamma = 2 ** (N - 1) - 2**l + 1
    div = sc.divergence_q_p
    paper_rate = math.log(bounds.threshold_ratio_paper(gamma)) / N
    exact_rate = math.log(bounds.threshold_ratio_exact(gamma)) / N
    return EntanglementCondition(div >= paper_rate, div >= exact_rate, gamma, div, paper_rate, exact_rate)


# ---------------------------------------------------------------- four-qutrit scan

FIG1_ALPHA: Label = (2, 2, 2, 2)  # |1111> in 0-based digits
FIG1_BETA: Label = (1, 3, 3, 3)  # |0222>
FIG1_INDICES = (1, 5, 7)


@dataclass(frozen=True)
class Figure1Row:
    p0: float
    p1: float
    p2: float
    work: float
    lambda_1: float
    lambda_5: float
    lambda_7: float
    label: str


def _figure1_row(p, eps: float) -> Figure1Row:
    H = QuditHamiltonian((0.0, eps, eps))
    state = ProductState(np.asarray(p), 4)
    Pa, Pb = state.population(FIG1_ALPHA), state.population(FIG1_BETA)
    work = (Pa - Pb) * (energy_of_label(H, FIG1_ALPHA) - energy_of_label(H, FIG1_BETA))
    lv = bounds.lambda_peak(state, FIG1_ALPHA, FIG1_BETA)
    return Figure1Row(p[0], p[1], p[2], work, lv[1], lv[5], lv[7], bounds.classify(lv).label)


def _figure1_band(args) -> list[Figure1Row]:
    i, R, eps = args
    rows = []
    for j in range(R - i):
        k = R - 1 - i - j
        p = (i / (R - 1), j / (R - 1), k / (R - 1))
        if p[0] >= p[1] and p[0] >= p[2]:
            rows.append(_figure1_row(p, eps))
    return rows


def figure1_scan(resolution: int = 201, eps: float = 1.0, workers: int | None = None) -> list[Figure1Row]:
    """Work and peak bounds for the direct exchange ``|1111> <-> |0222>`` over passive ``sigma_p``.

    Four systems with levels ``{0, eps, eps}``; the simplex is sampled at
    ``p_i = n_i / (resolution - 1)`` and restricted to ``p0 >= max(p1, p2)``.
    Work is signed; bounds use ``|P_alpha - P_beta|``. Rows come back in grid
    order (p0, then p1) whatever ``workers`` is.
    """
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    if workers is None:
        workers = int(os.environ.get("ERGOFLOW_WORKERS", "1"))
    jobs = [(i, resolution, eps) for i in range(resolution)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            bands = list(pool.map(_figure1_band, jobs, chunksize=8))
    else:
        bands = [_figure1_band(job) for job in jobs]
    return [row for band in bands for row in band]


def figure1_slice(rows: list[Figure1Row], p0: float, tol: float = 1e-12) -> list[Figure1Row]:
    """Rows at fixed ``p0`` ordered by work."""
    picked = [r for r in rows if abs(r.p0 - p0) <= tol]
    return sorted(picked, key=lambda r: (r.work, r.p1))
