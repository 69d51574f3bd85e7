"""Dense matrix and vector containers shared by all other modules.

Element values are held as float64 regardless of the declared element
bit-width; ``element_bits`` is metadata used by the storage and cost
models, not a numeric precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ELEMENT_BITS = (8, 16, 32, 64)


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    if arr.ndim != ndim:
        raise ValueError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class DenseMatrix:
    """Row-major dense matrix with an element bit-width tag."""

    values: np.ndarray
    element_bits: int = 32

    def __post_init__(self):
        if self.element_bits not in ELEMENT_BITS:
            raise ValueError(f"element_bits must be one of {ELEMENT_BITS}")
        object.__setattr__(self, "values", _frozen_array(self.values, 2))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def size(self) -> int:
        return self.values.size

    def row(self, r: int) -> np.ndarray:
        return self.values[r]


@dataclass(frozen=True)
class Vector:
    """Input/output vector with an element bit-width tag."""

    values: np.ndarray
    element_bits: int = 32

    def __post_init__(self):
        if self.element_bits not in ELEMENT_BITS:
            raise ValueError(f"element_bits must be one of {ELEMENT_BITS}")
        object.__setattr__(self, "values", _frozen_array(self.values, 1))

    @property
    def n(self) -> int:
        return self.values.shape[0]
