import numpy as np
import pytest

from lemt import DenseMatrix

# 5x12 worked-example matrix used throughout as a golden fixture: four
# distinct values with counts 32/21/4/3, mode 0, no padding segments.
REF_ROWS = [
    [0, 3, 0, 2, 4, 0, 0, 2, 3, 4, 0, 4],
    [4, 4, 0, 0, 0, 4, 0, 0, 4, 4, 0, 4],
    [4, 0, 3, 4, 0, 0, 0, 4, 0, 2, 0, 0],
    [0, 0, 0, 4, 4, 4, 0, 3, 4, 4, 0, 0],
    [0, 4, 4, 0, 0, 4, 0, 4, 0, 0, 0, 0],
]

GOLDEN_CSR = {
    "values": [3, 2, 4, 2, 3, 4, 4, 4, 4, 4, 4, 4, 4, 4, 3, 4, 4, 2, 4, 4, 4, 3, 4, 4, 4, 4, 4, 4],
    "colI": [1, 3, 4, 7, 8, 9, 11, 0, 1, 5, 8, 9, 11, 0, 2, 3, 7, 9, 3, 4, 5, 7, 8, 9, 1, 2, 5, 7],
    "rowPtr": [0, 7, 13, 18, 24, 28],
}

GOLDEN_CER = {
    "omega": [0, 4, 3, 2],
    "colI": [4, 9, 11, 1, 8, 3, 7, 0, 1, 5, 8, 9, 11, 0, 3, 7, 2, 9, 3, 4, 5, 8, 9, 7, 1, 2, 5, 7],
    "omegaPtr": [0, 3, 5, 7, 13, 16, 17, 18, 23, 24, 28],
    "rowPtr": [0, 3, 4, 7, 9, 10],
}

GOLDEN_CSER = {
    "omega": [0, 2, 3, 4],
    "colI": GOLDEN_CER["colI"],
    "omegaI": [3, 2, 1, 3, 3, 2, 1, 3, 2, 3],
    "omegaPtr": GOLDEN_CER["omegaPtr"],
    "rowPtr": GOLDEN_CER["rowPtr"],
}

#: -sum(p log2 p) for masses [32,21,4,3]/60, evaluated directly
REF_ENTROPY = 1.4903313725998946
REF_ROW_SUMS = [22.0, 24.0, 17.0, 23.0, 16.0]


@pytest.fixture
def ref_matrix() -> DenseMatrix:
    return DenseMatrix(np.array(REF_ROWS, dtype=float))


def random_low_entropy_matrix(rng: np.random.Generator, max_mn: int = 40, max_k: int = 8):
    """Small random integer matrix biased toward repeated values."""
    m = int(rng.integers(1, max_mn))
    n = int(rng.integers(1, max_mn))
    k = int(rng.integers(1, max_k))
    elements = np.unique(rng.integers(-5, 6, size=k))
    weights = rng.random(len(elements)) + 0.1
    values = rng.choice(elements, size=(m, n), p=weights / weights.sum())
    return DenseMatrix(values.astype(float))
