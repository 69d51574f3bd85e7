"""Uniform quantization, mode decomposition, and convolution reshaping.

The compressed row formats need the background element to be the matrix
mode (and, for CSR comparisons, zero).  Quantized weight matrices rarely
oblige, so a matrix W is rewritten as  W = (W - mode) + mode * ones ;
the shifted matrix has mode zero and the dot product is repaired by adding
mode * sum(x) to every output element.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .matrices import DenseMatrix
from . import formats, kernels
from .kernels import OpTrace, TAG_NONE


@dataclass(frozen=True)
class QuantizerSpec:
    """Uniform grid of 2**bits points over an explicit or per-matrix range."""

    bits: int
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError("bits must be >= 1")
        if (self.lo is None) != (self.hi is None):
            raise ValueError("give both lo and hi, or neither")
        if self.lo is not None and not self.lo < self.hi:
            raise ValueError("need lo < hi")

    @property
    def levels(self) -> int:
        return 1 << self.bits

    def grid(self, values: np.ndarray) -> np.ndarray:
        lo = float(values.min()) if self.lo is None else self.lo
        hi = float(values.max()) if self.hi is None else self.hi
        if lo == hi:
            return np.array([lo])
        return lo + (hi - lo) * np.arange(self.levels) / (self.levels - 1)


@dataclass(frozen=True)
class DecomposedMatrix:
    """Shifted matrix with zero as its mode, plus the removed offset.

    hat + offset reproduces the original exactly in exact arithmetic; in
    floating point the unshift is exact for integer-valued alphabets and
    within one rounding step otherwise.
    """

    hat: DenseMatrix
    offset: float

    def reconstruct(self) -> DenseMatrix:
        return DenseMatrix(self.hat.values + self.offset, element_bits=self.hat.element_bits)


@dataclass(frozen=True)
class ConvLayerMeta:
    """Shape of a convolution layer viewed as a matrix of filters."""

    filters: int
    channels: int
    filter_h: int
    filter_w: int
    patches: int

    def __post_init__(self):
        for name in ("filters", "channels", "filter_h", "filter_w", "patches"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    @property
    def matrix_shape(self) -> tuple[int, int]:
        return self.filters, self.channels * self.filter_h * self.filter_w

    def to_dict(self) -> dict:
        return {
            "filters": self.filters,
            "channels": self.channels,
            "filter_h": self.filter_h,
            "filter_w": self.filter_w,
            "patches": self.patches,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ConvLayerMeta":
        return cls(**{k: int(doc[k]) for k in ("filters", "channels", "filter_h", "filter_w", "patches")})


def uniform_quantize(w: DenseMatrix, spec: QuantizerSpec) -> DenseMatrix:
    """Round every element to the nearest grid point, ties toward the lower one."""
    if w.size == 0:
        raise ValueError("empty input")
    grid = spec.grid(w.values)
    if len(grid) == 1:
        return DenseMatrix(np.full_like(w.values, grid[0]), element_bits=w.element_bits)
    step = grid[1] - grid[0]
    idx = np.ceil((w.values - grid[0]) / step - 0.5).astype(np.int64)
    idx = np.clip(idx, 0, len(grid) - 1)
    return DenseMatrix(grid[idx], element_bits=w.element_bits)


def decompose_most_frequent(wq: DenseMatrix) -> DecomposedMatrix:
    """Subtract the most frequent element so the result's mode is zero."""
    values, counts = np.unique(wq.values, return_counts=True)
    order = np.lexsort((values, -counts))
    offset = float(values[order[0]])
    return DecomposedMatrix(
        hat=DenseMatrix(wq.values - offset, element_bits=wq.element_bits),
        offset=offset,
    )


def corrected_dot(
    d: DecomposedMatrix,
    x,
    kind: str = "cer",
    trace: bool = False,
    index_bits="auto",
    input_bits: int | None = None,
    output_bits: int | None = None,
):
    """Dot product of the original matrix via its shifted encoding.

    Computes encode(hat).x then adds offset * sum(x) to every output; the
    correction costs n-1 extra input-width sums, one multiply, and one sum
    per output row.
    """
    xv, b_in = kernels._input_array(x)
    if xv.shape[0] != d.hat.n:
        raise ValueError(f"dimension mismatch: matrix has n={d.hat.n}, input has {xv.shape[0]}")
    if kind == "dense":
        encoded = d.hat
    elif kind == "csr":
        encoded = formats.encode_csr(d.hat, index_bits)
    elif kind == "cer":
        encoded = formats.encode_cer(d.hat, index_bits)
    elif kind == "cser":
        encoded = formats.encode_cser(d.hat, index_bits)
    else:
        raise ValueError(f"unknown format kind {kind!r}")
    result = kernels.dot(encoded, x, trace=trace, input_bits=input_bits, output_bits=output_bits)
    correction = d.offset * xv.sum(axis=0)
    if not trace:
        return result + correction
    y, tr = result
    b_in = b_in if input_bits is None else input_bits
    b_out = max(b_in, d.hat.element_bits) if output_bits is None else output_bits
    extra = OpTrace()
    extra.add("sum", b_in, TAG_NONE, max(d.hat.n - 1, 0))
    extra.add("mul", b_out, TAG_NONE, 1)
    extra.add("sum", b_out, TAG_NONE, d.hat.m)
    return y + correction, tr.merged(extra)


def conv_weighted_report(meta: ConvLayerMeta, per_vector_report):
    """Scale a single-column cost report by the layer's patch count."""
    if meta.patches < 1:
        raise ValueError("patches must be >= 1")
    return per_vector_report.scaled(meta.patches)
