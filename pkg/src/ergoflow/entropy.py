"""Shannon/relative entropies and type-class (composition) helpers."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import gammaln, xlogy

from .ensemble import Label


def shannon_entropy(p) -> float:
    """``-sum p ln p`` with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=float)
    return float(-math.fsum(xlogy(p, p)))


def relative_entropy(p, q) -> float:
    """``S(p||q) = sum p ln(p/q)``; requires ``supp(p)`` inside ``supp(q)``."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("spectra of different length")
    if np.any((p > 0) & (q <= 0)):
        raise ValueError("support of p is not contained in the support of q")
    mask = p > 0
    return float(math.fsum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def rounded_composition(p, N: int) -> tuple[int, ...]:
    """Integer counts approximating ``N p`` that sum to ``N`` (largest remainder).

    Remainder ties go to the lower level index.
    """
    target = np.asarray(p, dtype=float) * N
    counts = np.floor(target).astype(int)
    short = N - int(counts.sum())
    order = sorted(range(len(counts)), key=lambda k: (-(target[k] - counts[k]), k))
    for k in order[:short]:
        counts[k] += 1
    return tuple(int(c) for c in counts)


def composition_label(counts) -> Label:
    """Representative ``|1>^{n_1} |2>^{n_2} ...`` of a type class, sites in ascending order."""
    label: list[int] = []
    for level, n in enumerate(counts, start=1):
        label.extend([level] * int(n))
    return tuple(label)


def log_multinomial(counts) -> float:
    """Natural log of ``N! / prod n_k!`` (type-class cardinality)."""
    counts = np.asarray(counts, dtype=float)
    return float(gammaln(counts.sum() + 1) - gammaln(counts + 1).sum())


def multinomial(counts) -> int:
    """Exact ``N! / prod n_k!``."""
    total, out = 0, 1
    for n in counts:
        total += int(n)
        out *= math.comb(total, int(n))
    return out


def log_type_probability(counts, p) -> float:
    """``ln prod p_k^{n_k}``, the log-population of any label in the type class."""
    return float(math.fsum(xlogy(np.asarray(counts, dtype=float), np.asarray(p, dtype=float))))


def compositions(N: int, d: int):
    """All ``d``-part compositions of ``N`` (non-negative), first part descending."""
    if d == 1:
        yield (N,)
        return
    for first in range(N, -1, -1):
        for rest in compositions(N - first, d - 1):
            yield (first,) + rest
