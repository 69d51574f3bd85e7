"""Empirical element distributions, entropy, and matrix synthesis.

The central objects are the element alphabet of a matrix (its distinct
values with empirical probability masses) and a handful of summary
statistics that drive the storage/energy models:

* ``p0``       mass of the most frequent element,
* ``k_bar``    mean number of distinct non-mode elements per row,
* ``k_tilde``  mean number of padded (skipped) alphabet positions per row
               under the global frequency-major order.

``synthesize_distribution`` builds a distribution hitting a requested
(entropy, p0) point so matrices can be sampled anywhere on the feasible
entropy/sparsity plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .matrices import DenseMatrix

#: Identifier of the pseudo-random generator used by sample_matrix; recorded
#: in reports so sweeps can be reproduced across machines.
GENERATOR_ID = "numpy-default-rng(PCG64)"

FREQUENCY_MAJOR = "frequency"
VALUE_ASCENDING = "value"


class InfeasibleError(ValueError):
    """Requested (entropy, p0, K) point has no realizable distribution."""


@dataclass(frozen=True)
class Alphabet:
    """Distinct element values with their probability masses.

    Under frequency-major ordering masses are non-increasing, ties broken
    by ascending element value, so ``elements[0]`` is the mode.
    """

    elements: np.ndarray
    masses: np.ndarray
    ordering: str = FREQUENCY_MAJOR

    def __post_init__(self):
        elements = np.ascontiguousarray(np.asarray(self.elements, dtype=np.float64))
        masses = np.ascontiguousarray(np.asarray(self.masses, dtype=np.float64))
        if elements.ndim != 1 or masses.ndim != 1 or len(elements) != len(masses):
            raise ValueError("elements and masses must be 1-d and equally long")
        if len(elements) == 0:
            raise ValueError("empty alphabet")
        if len(np.unique(elements)) != len(elements):
            raise ValueError("duplicate elements in alphabet")
        if np.any(masses <= 0):
            raise ValueError("every mass must be positive")
        if abs(masses.sum() - 1.0) > 1e-12:
            raise ValueError(f"masses sum to {masses.sum()!r}, expected 1")
        if self.ordering == FREQUENCY_MAJOR:
            key = _freq_major_order(elements, masses)
            if not np.array_equal(key, np.arange(len(elements))):
                raise ValueError("alphabet not in frequency-major order")
        elif self.ordering == VALUE_ASCENDING:
            if np.any(np.diff(elements) <= 0):
                raise ValueError("alphabet not in ascending value order")
        else:
            raise ValueError(f"unknown ordering {self.ordering!r}")
        elements.setflags(write=False)
        masses.setflags(write=False)
        object.__setattr__(self, "elements", elements)
        object.__setattr__(self, "masses", masses)

    def __len__(self) -> int:
        return len(self.elements)

    @property
    def mode(self) -> float:
        """Most frequent element (smallest value on ties)."""
        if self.ordering == FREQUENCY_MAJOR:
            return float(self.elements[0])
        order = _freq_major_order(self.elements, self.masses)
        return float(self.elements[order[0]])

    @property
    def p0(self) -> float:
        return float(self.masses.max())

    def to_value_order(self) -> "Alphabet":
        order = np.argsort(self.elements)
        return Alphabet(self.elements[order], self.masses[order], VALUE_ASCENDING)

    def to_frequency_order(self) -> "Alphabet":
        order = _freq_major_order(self.elements, self.masses)
        return Alphabet(self.elements[order], self.masses[order], FREQUENCY_MAJOR)


@dataclass(frozen=True)
class MatrixStats:
    """Distribution summary of one matrix."""

    entropy: float
    p0: float
    k_bar: float
    k_tilde: float
    m: int
    n: int
    size: int
    alphabet_size: int


@dataclass(frozen=True)
class DistributionSpec:
    """Target point on the entropy/sparsity plane."""

    entropy_target: float
    p0: float
    alphabet_size: int
    tolerance: float = 1e-4

    def __post_init__(self):
        if self.alphabet_size < 2:
            raise ValueError("alphabet_size must be >= 2")
        if not 0.0 < self.p0 < 1.0:
            raise ValueError("p0 must lie strictly between 0 and 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


def _freq_major_order(elements: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Sort order: mass descending, ties broken by ascending value."""
    return np.lexsort((elements, -masses))


def empirical_distribution(matrix: DenseMatrix) -> Alphabet:
    """Frequency-major alphabet of a matrix, masses = count / size."""
    if matrix.size == 0:
        raise ValueError("empty input")
    values, counts = np.unique(matrix.values, return_counts=True)
    order = _freq_major_order(values, counts.astype(np.float64))
    return Alphabet(values[order], counts[order] / matrix.size, FREQUENCY_MAJOR)


def entropy(dist: Alphabet | np.ndarray) -> float:
    """Shannon entropy in bits of an alphabet or a bare mass vector."""
    masses = dist.masses if isinstance(dist, Alphabet) else np.asarray(dist, dtype=np.float64)
    masses = masses[masses > 0]
    return float(-(masses * np.log2(masses)).sum())


def _rank_matrix(matrix: DenseMatrix, alphabet: Alphabet) -> np.ndarray:
    """Map every element to its frequency-major alphabet position."""
    value_order = np.argsort(alphabet.elements)
    sorted_values = alphabet.elements[value_order]
    pos = np.searchsorted(sorted_values, matrix.values)
    return value_order[pos]


def matrix_stats(matrix: DenseMatrix, alphabet: Alphabet | None = None) -> MatrixStats:
    """Entropy, sparsity, and per-row shared-element statistics.

    ``k_bar`` excludes the globally most frequent element; ``k_tilde``
    counts alphabet positions a row skips before its last present element,
    i.e. the empty segments a frequency-ordered encoding must pad.
    """
    if matrix.size == 0:
        raise ValueError("empty input")
    if alphabet is None:
        alphabet = empirical_distribution(matrix)
    elif alphabet.ordering != FREQUENCY_MAJOR:
        alphabet = alphabet.to_frequency_order()
    ranks = _rank_matrix(matrix, alphabet)
    m, n = matrix.m, matrix.n
    k = len(alphabet)
    present = np.zeros((m, k), dtype=bool)
    rows = np.repeat(np.arange(m), n)
    present[rows, ranks.ravel()] = True
    nonmode = present[:, 1:]
    k_bar_rows = nonmode.sum(axis=1)
    last_rank = (nonmode * np.arange(1, k)).max(axis=1) if k > 1 else np.zeros(m, dtype=int)
    k_tilde_rows = last_rank - k_bar_rows
    return MatrixStats(
        entropy=entropy(alphabet),
        p0=float(alphabet.masses[0]),
        k_bar=float(k_bar_rows.mean()),
        k_tilde=float(k_tilde_rows.mean()),
        m=m,
        n=n,
        size=matrix.size,
        alphabet_size=k,
    )


def feasible_band(p0: float, alphabet_size: int) -> tuple[float, float]:
    """Entropy range achievable at a given maximum mass ``p0``.

    Lower end: the support-minimal distribution (p0 repeated floor(1/p0)
    times plus a remainder).  Upper end: the spike-and-slab distribution
    (p0 plus a uniform slab over the other ``alphabet_size - 1`` elements).
    The band is empty (h_min > h_max) when p0 < 1/alphabet_size.
    """
    if not 0.0 < p0 < 1.0:
        raise ValueError("p0 must lie strictly between 0 and 1")
    if alphabet_size < 2:
        raise ValueError("alphabet_size must be >= 2")
    copies = math.floor(1.0 / p0)
    remainder = 1.0 - copies * p0
    h_min = -copies * p0 * math.log2(p0)
    if remainder > 1e-12:
        h_min -= remainder * math.log2(remainder)
    slab = (1.0 - p0) / (alphabet_size - 1)
    h_max = -p0 * math.log2(p0) - (1.0 - p0) * math.log2(slab)
    return h_min, h_max


def _capped_geometric_masses(p0: float, alphabet_size: int, ratio: float) -> np.ndarray:
    """Non-mode masses proportional to ratio**j, clipped at p0.

    Clipping keeps p0 the maximum mass; at ratio=0 the construction
    degenerates to the support-minimal distribution and at ratio=1 to the
    spike-and-slab, so entropy sweeps the whole feasible band as the ratio
    runs over [0, 1].
    """
    slots = alphabet_size - 1
    out = np.zeros(slots)
    remaining = 1.0 - p0
    j = 0
    while remaining > 1e-15 and j < slots:
        if ratio <= 0.0:
            head = remaining
        else:
            weights = ratio ** np.arange(slots - j, dtype=np.float64)
            head = remaining * weights[0] / weights.sum()
        if head <= p0:  # strict cap keeps p0 the maximum mass
            if ratio <= 0.0:
                out[j] = remaining
            else:
                out[j:] = remaining * weights / weights.sum()
            remaining = 0.0
            break
        out[j] = p0
        remaining -= p0
        j += 1
    return out[out > 0]


def synthesize_distribution(spec: DistributionSpec) -> Alphabet:
    """Alphabet with mass ``p0`` on element 0 hitting a target entropy.

    The non-zero masses follow a geometric family clipped at p0; the ratio
    is found by bisection (entropy is monotone in it).  Raises
    InfeasibleError naming the feasible band when the target cannot be hit.
    """
    h_min, h_max = feasible_band(spec.p0, spec.alphabet_size)
    target, tol = spec.entropy_target, spec.tolerance
    if h_min > h_max or target < h_min - tol or target > h_max + tol:
        raise InfeasibleError(
            f"entropy {target} not reachable at p0={spec.p0}, K={spec.alphabet_size}; "
            f"feasible band is [{h_min:.6f}, {h_max:.6f}]"
        )

    def masses_at(ratio: float) -> np.ndarray:
        nonzero = _capped_geometric_masses(spec.p0, spec.alphabet_size, ratio)
        return np.concatenate(([spec.p0], nonzero))

    lo, hi = 0.0, 1.0
    if entropy(masses_at(lo)) >= target:
        best = lo
    elif entropy(masses_at(hi)) <= target:
        best = hi
    else:
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if entropy(masses_at(mid)) < target:
                lo = mid
            else:
                hi = mid
            if hi - lo < 1e-15:
                break
        best = 0.5 * (lo + hi)
    masses = masses_at(best)
    if abs(entropy(masses) - target) > tol:
        raise InfeasibleError(
            f"bisection missed entropy {target} at p0={spec.p0}, K={spec.alphabet_size}: "
            f"reached {entropy(masses):.6f} (band [{h_min:.6f}, {h_max:.6f}])"
        )
    elements = np.arange(len(masses), dtype=np.float64)
    return Alphabet(elements, masses / masses.sum(), FREQUENCY_MAJOR)


def sample_matrix(
    alphabet: Alphabet, m: int, n: int, seed: int, element_bits: int = 32
) -> DenseMatrix:
    """Matrix of i.i.d. draws from the alphabet; same seed, same matrix."""
    if m < 1 or n < 1:
        raise ValueError("matrix dimensions must be positive")
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(alphabet), size=m * n, p=alphabet.masses / alphabet.masses.sum())
    return DenseMatrix(alphabet.elements[idx].reshape(m, n), element_bits=element_bits)
