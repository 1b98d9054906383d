"""Index arithmetic, Hamiltonians and diagonal states for N identical d-level systems.

Conventions
-----------
* A basis label is a tuple of ``N`` level digits, each in ``1..d`` (level ``k``
  is the ket ``|k>``). Site positions inside a label are 0-based tuple indices.
* Flat indices use a little-endian mixed radix: site 0 is the least significant
  digit, ``flat = sum_k (i_k - 1) * d**k``.
* Digit strings (``"0222"``) are 0-based, one character per site; see
  :func:`parse_label` / :func:`format_label`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

NORM_TOL = 1e-12
DEFAULT_DENSE_CAP = 2**24

Label = tuple[int, ...]


class CapacityError(ValueError):
    """Raised when a dense representation would exceed the configured cap."""


@dataclass(frozen=True)
class QuditHamiltonian:
    """Single-system Hamiltonian ``H = sum_k eps_k |k><k|`` with sorted levels."""

    levels: tuple[float, ...]

    def __post_init__(self):
        levels = tuple(float(x) for x in self.levels)
        if len(levels) < 2:
            raise ValueError("need at least two levels")
        if any(not math.isfinite(x) for x in levels):
            raise ValueError("levels must be finite")
        if any(b < a for a, b in zip(levels, levels[1:])):
            raise ValueError(f"levels must be sorted non-decreasing, got {levels}")
        object.__setattr__(self, "levels", levels)

    @property
    def d(self) -> int:
        return len(self.levels)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.levels, dtype=float)


@dataclass(frozen=True)
class EnsembleShape:
    N: int
    d: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError(f"d must be an integer >= 2, got {self.d}")

    @property
    def size(self) -> int:
        return self.d**self.N

    def check_dense(self, cap: int = DEFAULT_DENSE_CAP) -> None:
        if self.size > cap:
            raise CapacityError(
                f"dense representation needs d**N = {self.d}**{self.N} = {self.size} "
                f"entries, above the cap {cap}"
            )

    def check_label(self, label: Sequence[int]) -> Label:
        label = tuple(int(x) for x in label)
        if len(label) != self.N:
            raise ValueError(f"label {label} has length {len(label)}, expected N={self.N}")
        for x in label:
            if not 1 <= x <= self.d:
                raise ValueError(f"digit {x} of label {label} outside 1..{self.d}")
        return label

    def labels(self) -> Iterator[Label]:
        """All labels in flat-index order."""
        for digits in itertools.product(range(1, self.d + 1), repeat=self.N):
            yield digits[::-1]


def flat_of_label(shape: EnsembleShape, label: Sequence[int]) -> int:
    label = shape.check_label(label)
    index = 0
    for digit in reversed(label):
        index = index * shape.d + (digit - 1)
    return index


def label_of_flat(shape: EnsembleShape, index: int) -> Label:
    if not 0 <= index < shape.size:
        raise ValueError(f"flat index {index} outside [0, {shape.size})")
    digits = []
    for _ in range(shape.N):
        index, r = divmod(index, shape.d)
        digits.append(r + 1)
    return tuple(digits)


def parse_label(text: str, d: int | None = None) -> Label:
    """Convert a 0-based digit string such as ``"0222"`` to a 1-based label."""
    text = text.strip()
    if not text or not text.isdigit():
        raise ValueError(f"not a digit string: {text!r}")
    label = tuple(int(c) + 1 for c in text)
    if d is not None and max(label) > d:
        raise ValueError(f"digit string {text!r} has a level >= d={d}")
    return label


def format_label(label: Sequence[int]) -> str:
    if any(x > 10 for x in label):
        raise ValueError("digit strings only support d <= 10")
    return "".join(str(x - 1) for x in label)


def energy_of_label(H: QuditHamiltonian, label: Sequence[int]) -> float:
    # accumulation order matches energies_of_shape bit for bit
    energy = 0.0
    for digit in label:
        energy = H.levels[digit - 1] + energy
    return energy


def energies_of_shape(H: QuditHamiltonian, N: int) -> np.ndarray:
    """Total energies of all ``d**N`` labels in flat-index order."""
    levels = H.as_array()
    energies = levels.copy()
    for _ in range(N - 1):
        energies = np.add.outer(levels, energies).ravel()
    return energies


def differing_sites(alpha: Sequence[int], beta: Sequence[int]) -> tuple[tuple[int, ...], int]:
    """Sites (0-based, ascending) where two labels differ, and their number."""
    if len(alpha) != len(beta):
        raise ValueError(f"labels of different length: {len(alpha)} vs {len(beta)}")
    sites = tuple(k for k, (a, b) in enumerate(zip(alpha, beta)) if a != b)
    return sites, len(sites)


def _check_spectrum(p, d: int | None = None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.ndim != 1 or (d is not None and p.size != d):
        raise ValueError(f"spectrum must be a vector of length {d}, got shape {p.shape}")
    if np.any(~np.isfinite(p)) or np.any(p < 0):
        raise ValueError("spectrum entries must be finite and non-negative")
    if abs(math.fsum(p) - 1.0) > NORM_TOL:
        raise ValueError(f"spectrum sums to {math.fsum(p)!r}, not 1")
    return p


@dataclass(frozen=True, eq=False)
class DiagonalState:
    """Dense diagonal state ``diag(P_1, ..., P_{d^N})`` in flat-index order."""

    shape: EnsembleShape
    populations: np.ndarray = field(repr=False)

    def __post_init__(self):
        P = np.array(self.populations, dtype=float)
        if P.shape != (self.shape.size,):
            raise ValueError(f"expected {self.shape.size} populations, got shape {P.shape}")
        if np.any(~np.isfinite(P)) or np.any(P < 0):
            raise ValueError("populations must be finite and non-negative")
        total = math.fsum(P)
        if abs(total - 1.0) > NORM_TOL:
            raise ValueError(f"populations sum to {total!r}; pass renormalize=True to rescale")
        P.flags.writeable = False
        object.__setattr__(self, "populations", P)

    @classmethod
    def from_populations(cls, shape: EnsembleShape, populations, renormalize: bool = False,
                         cap: int = DEFAULT_DENSE_CAP) -> "DiagonalState":
        shape.check_dense(cap)
        P = np.array(populations, dtype=float)
        if renormalize:
            if np.any(P < 0) or P.sum() <= 0:
                raise ValueError("cannot renormalize: populations must be non-negative with positive sum")
            P = P / math.fsum(P)
        return cls(shape, P)

    def population(self, label: Sequence[int]) -> float:
        return float(self.populations[flat_of_label(self.shape, label)])

    def to_dense(self, cap: int = DEFAULT_DENSE_CAP) -> "DiagonalState":
        return self

    def with_populations(self, populations) -> "DiagonalState":
        return DiagonalState(self.shape, populations)


@dataclass(frozen=True, eq=False)
class ProductState:
    """Implicit ``sigma_p^{(x)N}``; populations are evaluated on demand.

    Usable far beyond the dense cap: only :meth:`to_dense` materialises the
    full vector.
    """

    spectrum: np.ndarray = field(repr=False)
    N: int
    shape: EnsembleShape = field(init=False)

    def __post_init__(self):
        p = _check_spectrum(self.spectrum).copy()
        p.flags.writeable = False
        object.__setattr__(self, "spectrum", p)
        object.__setattr__(self, "shape", EnsembleShape(self.N, p.size))

    def population(self, label: Sequence[int]) -> float:
        # same association order as np.multiply.outer in to_dense
        value = 1.0
        for digit in label:
            value = self.spectrum[digit - 1] * value
        return float(value)

    def to_dense(self, cap: int = DEFAULT_DENSE_CAP) -> DiagonalState:
        self.shape.check_dense(cap)
        P = self.spectrum.copy()
        for _ in range(self.N - 1):
            P = np.multiply.outer(self.spectrum, P).ravel()
        return DiagonalState(self.shape, P)


def product_state(p, N: int, cap: int = DEFAULT_DENSE_CAP) -> DiagonalState:
    """Dense populations ``P_label = prod_k p_{i_k}`` of ``sigma_p^{(x)N}``."""
    return ProductState(np.asarray(p, dtype=float), N).to_dense(cap)


@dataclass(frozen=True, eq=False)
class CoherentPairState:
    """A diagonal background plus one coherence between labels ``alpha`` and ``beta``.

    ``base`` holds the populations before the step; only the ``alpha``/``beta``
    diagonal entries and the ``(alpha, beta)`` off-diagonal entry differ from it.
    """

    base: DiagonalState | ProductState
    alpha: Label
    beta: Label
    pop_alpha: float
    pop_beta: float
    coherence: complex

    def __post_init__(self):
        shape = self.base.shape
        object.__setattr__(self, "alpha", shape.check_label(self.alpha))
        object.__setattr__(self, "beta", shape.check_label(self.beta))
        if self.alpha == self.beta:
            raise ValueError("alpha and beta must differ")
        if self.pop_alpha < 0 or self.pop_beta < 0:
            raise ValueError("pair populations must be non-negative")
        before = self.base.population(self.alpha) + self.base.population(self.beta)
        if abs(self.pop_alpha + self.pop_beta - before) > NORM_TOL:
            raise ValueError("pair populations do not preserve P_alpha + P_beta")
        if abs(self.coherence) ** 2 > self.pop_alpha * self.pop_beta + NORM_TOL:
            raise ValueError("|coherence|^2 exceeds pop_alpha * pop_beta")

    @property
    def shape(self) -> EnsembleShape:
        return self.base.shape

    def population(self, label: Sequence[int]) -> float:
        label = tuple(label)
        if label == self.alpha:
            return self.pop_alpha
        if label == self.beta:
            return self.pop_beta
        return self.base.population(label)

    def diagonal(self, cap: int = DEFAULT_DENSE_CAP) -> np.ndarray:
        P = self.base.to_dense(cap).populations.copy()
        P[flat_of_label(self.shape, self.alpha)] = self.pop_alpha
        P[flat_of_label(self.shape, self.beta)] = self.pop_beta
        return P

    def to_matrix(self, cap: int = 2**12) -> np.ndarray:
        """Dense density matrix; intended for oracle checks on small systems."""
        self.shape.check_dense(cap)
        rho = np.diag(self.diagonal(cap)).astype(complex)
        a = flat_of_label(self.shape, self.alpha)
        b = flat_of_label(self.shape, self.beta)
        rho[a, b] = self.coherence
        rho[b, a] = np.conj(self.coherence)
        return rho
