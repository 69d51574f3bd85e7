"""Dot-product kernels for the dense, CSR, CER, and CSER formats.

Each kernel computes y = A.x (vector or matrix right-hand side) and can
report an operation trace: a multiset of elementary operations keyed by
(kind, bit-width, source array).  The accounting rules:

* only reads/writes of the named arrays count; accumulator traffic in
  registers does not,
* summing k terms into a zero-initialized accumulator costs k-1 sum
  operations,
* per row, both row-pointer boundaries count as reads, and a row with s
  segments reads s+1 segment boundaries,
* CER/CSER inner sums run at the input bit-width, the per-segment multiply
  and the outer accumulation at the output bit-width,
* loop bookkeeping (counters, comparisons) is tallied under the "other"
  kind, excluded from totals and priced at zero by default.

CER/CSER encodings whose background element is non-zero (no prior mode
decomposition) still produce the exact product: the kernel adds the
constant  background * sum(x)  to every output, tracing the extra sums
and the single multiply this costs.  Encodings with background 0 (the
usual pipeline) incur no such operations.

Trace emission never changes numeric results: the numeric path is shared
by traced and untraced calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrices import DenseMatrix, Vector
from .formats import (
    CerMatrix,
    CsrMatrix,
    CserMatrix,
    AnyMatrix,
    TAG_COLI,
    TAG_INPUT,
    TAG_NONE,
    TAG_OMEGA,
    TAG_OMEGAI,
    TAG_OMEGAPTR,
    TAG_OUTPUT,
    TAG_ROWPTR,
)

OP_KINDS = ("sum", "mul", "read", "write", "other")


@dataclass
class OpTrace:
    """Counts of elementary operations keyed by (kind, bits, array tag)."""

    counts: dict[tuple[str, int, str], int] = field(default_factory=dict)

    def add(self, kind: str, bits: int, tag: str, count: int) -> None:
        if kind not in OP_KINDS:
            raise ValueError(f"unknown op kind {kind!r}")
        if count < 0:
            raise ValueError("counts must be non-negative")
        if count:
            key = (kind, int(bits), tag)
            self.counts[key] = self.counts.get(key, 0) + int(count)

    def merged(self, other: "OpTrace") -> "OpTrace":
        out = OpTrace(dict(self.counts))
        for key, cnt in other.counts.items():
            out.counts[key] = out.counts.get(key, 0) + cnt
        return out

    def scaled(self, factor: int) -> "OpTrace":
        return OpTrace({key: cnt * factor for key, cnt in self.counts.items()})

    def total(self, include_other: bool = False) -> int:
        return sum(
            cnt for (kind, _, _), cnt in self.counts.items() if include_other or kind != "other"
        )

    def by_kind(self, include_other: bool = False) -> dict[str, int]:
        out: dict[str, int] = {}
        for (kind, _, _), cnt in self.counts.items():
            if kind == "other" and not include_other:
                continue
            out[kind] = out.get(kind, 0) + cnt
        return out

    def count(self, kind: str | None = None, tag: str | None = None) -> int:
        return sum(
            cnt
            for (k, _, t), cnt in self.counts.items()
            if (kind is None or k == kind) and (tag is None or t == tag)
        )


def _input_array(x) -> tuple[np.ndarray, int]:
    if isinstance(x, Vector):
        return x.values, x.element_bits
    if isinstance(x, DenseMatrix):
        return x.values, x.element_bits
    return np.asarray(x, dtype=np.float64), 32


def _check_shape(n: int, xv: np.ndarray) -> None:
    if xv.ndim not in (1, 2):
        raise ValueError("right-hand side must be a vector or a matrix")
    if xv.shape[0] != n:
        raise ValueError(f"dimension mismatch: matrix has n={n}, input has {xv.shape[0]}")


def _row_select(per_row: np.ndarray, rows) -> np.ndarray:
    return per_row if rows is None else per_row[np.asarray(rows)]


def _segmented_sums(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Sum of values over [ptr[i], ptr[i+1]) slices; empty slices give 0."""
    if values.ndim == 1:
        csum = np.concatenate(([0.0], np.cumsum(values)))
    else:
        zero = np.zeros((1, values.shape[1]))
        csum = np.concatenate((zero, np.cumsum(values, axis=0)), axis=0)
    p = ptr.astype(np.int64)
    return csum[p[1:]] - csum[p[:-1]]


def _resolve_bits(a: AnyMatrix, x, input_bits, output_bits) -> tuple[int, int]:
    _, b_in = _input_array(x) if x is not None else (None, 32)
    if input_bits is not None:
        b_in = int(input_bits)
    b_out = max(b_in, a.element_bits) if output_bits is None else int(output_bits)
    return b_in, b_out


# ---------------------------------------------------------------------------
# analytic traces


def trace_dense(
    a: DenseMatrix, input_bits: int = 32, output_bits: int | None = None, rows=None, columns: int = 1
) -> OpTrace:
    b_in, b_out = _resolve_bits(a, None, input_bits, output_bits)
    r = a.m if rows is None else len(np.asarray(rows))
    n = a.n
    t = OpTrace()
    t.add("read", a.element_bits, TAG_OMEGA, r * n)
    t.add("read", b_in, TAG_INPUT, r * n)
    t.add("mul", b_out, TAG_NONE, r * n)
    t.add("sum", b_out, TAG_NONE, r * max(n - 1, 0))
    t.add("write", b_out, TAG_OUTPUT, r)
    t.add("other", 0, TAG_NONE, r * (n + 2) + 1)
    return t.scaled(columns) if columns != 1 else t


def trace_csr(
    a: CsrMatrix, input_bits: int = 32, output_bits: int | None = None, rows=None, columns: int = 1
) -> OpTrace:
    b_in, b_out = _resolve_bits(a, None, input_bits, output_bits)
    nnz_per_row = _row_select(np.diff(a.row_ptr.astype(np.int64)), rows)
    r = len(nnz_per_row)
    z = int(nnz_per_row.sum())
    t = OpTrace()
    t.add("read", a.row_ptr_bits, TAG_ROWPTR, 2 * r)
    t.add("read", a.element_bits, TAG_OMEGA, z)
    t.add("read", a.col_index_bits, TAG_COLI, z)
    t.add("read", b_in, TAG_INPUT, z)
    t.add("mul", b_out, TAG_NONE, z)
    t.add("sum", b_out, TAG_NONE, int(np.maximum(nnz_per_row - 1, 0).sum()))
    t.add("write", b_out, TAG_OUTPUT, r)
    t.add("other", 0, TAG_NONE, 2 * r + z + 1)
    return t.scaled(columns) if columns != 1 else t


def _segment_shape(x: CerMatrix | CserMatrix, rows):
    """Per-row segment, non-empty segment, and entry counts."""
    row_ptr = x.row_ptr.astype(np.int64)
    seg_sizes = np.diff(x.omega_ptr.astype(np.int64))
    segs_per_row = np.diff(row_ptr)
    nonempty = (seg_sizes > 0).astype(np.int64)
    csum_ne = np.concatenate(([0], np.cumsum(nonempty)))
    ne_per_row = csum_ne[row_ptr[1:]] - csum_ne[row_ptr[:-1]]
    csum_sz = np.concatenate(([0], np.cumsum(seg_sizes)))
    entries_per_row = csum_sz[row_ptr[1:]] - csum_sz[row_ptr[:-1]]
    return (
        _row_select(segs_per_row, rows),
        _row_select(ne_per_row, rows),
        _row_select(entries_per_row, rows),
    )


def _background_of(x: CerMatrix | CserMatrix) -> float:
    return float(x.omega[0] if isinstance(x, CerMatrix) else x.omega[x.mode_index])


def _trace_segmented(
    x: CerMatrix | CserMatrix,
    input_bits: int,
    output_bits: int | None,
    rows,
    columns: int,
    with_omega_index: bool,
) -> OpTrace:
    b_in, b_out = _resolve_bits(x, None, input_bits, output_bits)
    segs, nonempty, entries = _segment_shape(x, rows)
    r = len(segs)
    s, s_ne, z = int(segs.sum()), int(nonempty.sum()), int(entries.sum())
    t = OpTrace()
    if _background_of(x) != 0.0:
        # non-zero background: segment values shift by bg and y += bg * sum(x)
        t.add("sum", b_in, TAG_NONE, max(x.n - 1, 0))
        t.add("mul", b_out, TAG_NONE, 1)
        t.add("sum", b_out, TAG_NONE, r + int(nonempty.sum()))
    t.add("read", x.row_ptr_bits, TAG_ROWPTR, 2 * r)
    t.add("read", x.omega_ptr_bits, TAG_OMEGAPTR, s + int((segs > 0).sum()))
    if with_omega_index:
        t.add("read", x.omega_index_bits, TAG_OMEGAI, s)
    t.add("read", x.element_bits, TAG_OMEGA, s_ne)
    t.add("read", x.col_index_bits, TAG_COLI, z)
    t.add("read", b_in, TAG_INPUT, z)
    t.add("sum", b_in, TAG_NONE, z - s_ne)
    t.add("mul", b_out, TAG_NONE, s_ne)
    t.add("sum", b_out, TAG_NONE, int(np.maximum(nonempty - 1, 0).sum()))
    t.add("write", b_out, TAG_OUTPUT, r)
    t.add("other", 0, TAG_NONE, 3 * r + 4 * s + z + 1)
    return t.scaled(columns) if columns != 1 else t


def trace_cer(a: CerMatrix, input_bits: int = 32, output_bits: int | None = None, rows=None, columns: int = 1) -> OpTrace:
    return _trace_segmented(a, input_bits, output_bits, rows, columns, with_omega_index=False)


def trace_cser(a: CserMatrix, input_bits: int = 32, output_bits: int | None = None, rows=None, columns: int = 1) -> OpTrace:
    return _trace_segmented(a, input_bits, output_bits, rows, columns, with_omega_index=True)


def trace_of(a: AnyMatrix, input_bits: int = 32, output_bits: int | None = None, rows=None, columns: int = 1) -> OpTrace:
    if isinstance(a, DenseMatrix):
        return trace_dense(a, input_bits, output_bits, rows, columns)
    if isinstance(a, CsrMatrix):
        return trace_csr(a, input_bits, output_bits, rows, columns)
    if isinstance(a, CerMatrix):
        return trace_cer(a, input_bits, output_bits, rows, columns)
    if isinstance(a, CserMatrix):
        return trace_cser(a, input_bits, output_bits, rows, columns)
    raise TypeError(f"not a matrix: {type(a)!r}")


def row_trace(a: AnyMatrix, row: int, input_bits: int = 32, output_bits: int | None = None) -> OpTrace:
    """Trace of the scalar product of one matrix row with an input vector."""
    return trace_of(a, input_bits, output_bits, rows=[row])


# ---------------------------------------------------------------------------
# numeric kernels


def dot_dense(a: DenseMatrix, x, trace: bool = False, input_bits: int | None = None, output_bits: int | None = None):
    xv, b_in = _input_array(x)
    _check_shape(a.n, xv)
    y = a.values @ xv
    if not trace:
        return y
    b_in = b_in if input_bits is None else input_bits
    cols = 1 if xv.ndim == 1 else xv.shape[1]
    return y, trace_dense(a, b_in, output_bits, columns=cols)


def dot_csr(a: CsrMatrix, x, trace: bool = False, input_bits: int | None = None, output_bits: int | None = None):
    xv, b_in = _input_array(x)
    _check_shape(a.n, xv)
    products = a.values * xv[a.col_index.astype(np.int64)] if xv.ndim == 1 else (
        a.values[:, None] * xv[a.col_index.astype(np.int64), :]
    )
    y = _segmented_sums(products, a.row_ptr)
    if not trace:
        return y
    b_in = b_in if input_bits is None else input_bits
    cols = 1 if xv.ndim == 1 else xv.shape[1]
    return y, trace_csr(a, b_in, output_bits, columns=cols)


def _dot_segmented(a: CerMatrix | CserMatrix, xv: np.ndarray) -> np.ndarray:
    gathered = xv[a.col_index.astype(np.int64)]
    seg_sums = _segmented_sums(gathered, a.omega_ptr)
    if isinstance(a, CerMatrix):
        row_ptr = a.row_ptr.astype(np.int64)
        row_of_seg = np.repeat(np.arange(a.m), np.diff(row_ptr))
        rank = np.arange(a.segment_count) - row_ptr[:-1][row_of_seg] + 1
        seg_values = a.omega[rank]
    else:
        seg_values = a.omega[a.omega_index.astype(np.int64)]
    background = _background_of(a)
    if background != 0.0:
        seg_values = seg_values - background  # decompose on the fly
    products = seg_values * seg_sums if seg_sums.ndim == 1 else seg_values[:, None] * seg_sums
    # row sums run over segment space
    y = _segmented_sums(products, a.row_ptr)
    if background != 0.0:
        y = y + background * xv.sum(axis=0)
    return y


def dot_cer(a: CerMatrix, x, trace: bool = False, input_bits: int | None = None, output_bits: int | None = None):
    xv, b_in = _input_array(x)
    _check_shape(a.n, xv)
    y = _dot_segmented(a, xv)
    if not trace:
        return y
    b_in = b_in if input_bits is None else input_bits
    cols = 1 if xv.ndim == 1 else xv.shape[1]
    return y, trace_cer(a, b_in, output_bits, columns=cols)


def dot_cser(a: CserMatrix, x, trace: bool = False, input_bits: int | None = None, output_bits: int | None = None):
    xv, b_in = _input_array(x)
    _check_shape(a.n, xv)
    y = _dot_segmented(a, xv)
    if not trace:
        return y
    b_in = b_in if input_bits is None else input_bits
    cols = 1 if xv.ndim == 1 else xv.shape[1]
    return y, trace_cser(a, b_in, output_bits, columns=cols)


def dot(a: AnyMatrix, x, trace: bool = False, input_bits: int | None = None, output_bits: int | None = None):
    """Format-dispatched dot product."""
    if isinstance(a, DenseMatrix):
        return dot_dense(a, x, trace, input_bits, output_bits)
    if isinstance(a, CsrMatrix):
        return dot_csr(a, x, trace, input_bits, output_bits)
    if isinstance(a, CerMatrix):
        return dot_cer(a, x, trace, input_bits, output_bits)
    if isinstance(a, CserMatrix):
        return dot_cser(a, x, trace, input_bits, output_bits)
    raise TypeError(f"not a matrix: {type(a)!r}")
