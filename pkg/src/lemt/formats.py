"""CSR, CER, and CSER matrix representations.

All three store the column indices of non-background elements; they differ
in how element values are attached:

* CSR  stores one value per non-zero entry (``values`` parallel to
  ``col_index``).
* CER  stores the alphabet once in frequency-major order and groups each
  row's indices into per-element segments; the segment's position inside
  the row identifies its element, so absent elements that precede a
  present one cost an empty (repeated-pointer) padding segment.
* CSER adds an explicit per-segment element index (``omega_index``) into a
  value-ascending alphabet, dropping the cross-row frequency-order
  assumption and with it the padding segments.

Encodings are immutable after construction; decode(encode(A)) == A exactly
for every format.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .matrices import DenseMatrix

INDEX_BITS = (8, 16, 32)
_DTYPE_OF_BITS = {8: np.uint8, 16: np.uint16, 32: np.uint32}

# Array tags used by traces and the cost model.
TAG_INPUT = "input"
TAG_OUTPUT = "output"
TAG_OMEGA = "omega"  # value array: the matrix grid / W / the alphabet
TAG_COLI = "colI"
TAG_OMEGAI = "omegaI"
TAG_OMEGAPTR = "omegaPtr"
TAG_ROWPTR = "rowPtr"
TAG_NONE = "none"


class FormatError(ValueError):
    """Structural validation failure, naming the offending array and offset."""

    def __init__(self, array: str, offset: int, reason: str):
        self.array = array
        self.offset = offset
        self.reason = reason
        super().__init__(f"{array}[{offset}]: {reason}")


def index_bitwidth(max_index_value: int) -> int:
    """Smallest of 8/16/32 bits that holds the value unsigned."""
    if max_index_value < 0:
        raise ValueError("index values are unsigned")
    for bits in INDEX_BITS:
        if max_index_value < (1 << bits):
            return bits
    raise ValueError(f"index value {max_index_value} does not fit in 32 bits")


def _bits_of(arr: np.ndarray) -> int:
    return arr.dtype.itemsize * 8


def _index_array(values, max_value: int, index_bits) -> np.ndarray:
    bits = index_bitwidth(max_value) if index_bits == "auto" else int(index_bits)
    if bits not in INDEX_BITS:
        raise ValueError(f"index bits must be one of {INDEX_BITS}")
    if max_value >= (1 << bits):
        raise ValueError(f"index value {max_value} does not fit in {bits} bits")
    arr = np.ascontiguousarray(np.asarray(values, dtype=_DTYPE_OF_BITS[bits]))
    arr.setflags(write=False)
    return arr


def _frozen_values(values) -> np.ndarray:
    arr = np.ascontiguousarray(np.asarray(values, dtype=np.float64))
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CsrMatrix:
    values: np.ndarray  # non-zero values, row-major
    col_index: np.ndarray
    row_ptr: np.ndarray  # m+1 boundaries into values/col_index
    m: int
    n: int
    element_bits: int = 32

    @property
    def nnz(self) -> int:
        return len(self.values)

    @property
    def col_index_bits(self) -> int:
        return _bits_of(self.col_index)

    @property
    def row_ptr_bits(self) -> int:
        return _bits_of(self.row_ptr)


@dataclass(frozen=True)
class CerMatrix:
    omega: np.ndarray  # frequency-major alphabet; omega[0] is the background
    col_index: np.ndarray  # columns of non-background elements, segment order
    omega_ptr: np.ndarray  # segment boundaries into col_index, leading 0
    row_ptr: np.ndarray  # m+1 boundaries into the segment list
    m: int
    n: int
    element_bits: int = 32

    @property
    def nnz(self) -> int:
        return len(self.col_index)

    @property
    def segment_count(self) -> int:
        return len(self.omega_ptr) - 1

    @property
    def col_index_bits(self) -> int:
        return _bits_of(self.col_index)

    @property
    def omega_ptr_bits(self) -> int:
        return _bits_of(self.omega_ptr)

    @property
    def row_ptr_bits(self) -> int:
        return _bits_of(self.row_ptr)


@dataclass(frozen=True)
class CserMatrix:
    omega: np.ndarray  # value-ascending alphabet
    col_index: np.ndarray
    omega_index: np.ndarray  # per-segment element position in omega
    omega_ptr: np.ndarray
    row_ptr: np.ndarray
    m: int
    n: int
    element_bits: int = 32
    mode_index: int = 0  # position of the background element in omega

    @property
    def nnz(self) -> int:
        return len(self.col_index)

    @property
    def segment_count(self) -> int:
        return len(self.omega_ptr) - 1

    @property
    def col_index_bits(self) -> int:
        return _bits_of(self.col_index)

    @property
    def omega_index_bits(self) -> int:
        return _bits_of(self.omega_index)

    @property
    def omega_ptr_bits(self) -> int:
        return _bits_of(self.omega_ptr)

    @property
    def row_ptr_bits(self) -> int:
        return _bits_of(self.row_ptr)


EncodedMatrix = CsrMatrix | CerMatrix | CserMatrix
AnyMatrix = DenseMatrix | EncodedMatrix


def encode_csr(a: DenseMatrix, index_bits="auto") -> CsrMatrix:
    """Compressed sparse row encoding (non-zero values, row-major)."""
    mask = a.values != 0.0
    rows, cols = np.nonzero(mask)
    row_counts = np.bincount(rows, minlength=a.m)
    row_ptr = np.concatenate(([0], np.cumsum(row_counts)))
    return CsrMatrix(
        values=_frozen_values(a.values[rows, cols]),
        col_index=_index_array(cols, max(a.n - 1, 0), index_bits),
        row_ptr=_index_array(row_ptr, max(int(row_ptr[-1]), 0), index_bits),
        m=a.m,
        n=a.n,
        element_bits=a.element_bits,
    )


def _frequency_alphabet(a: DenseMatrix, background) -> tuple[np.ndarray, np.ndarray]:
    """Frequency-major alphabet (background forced first) and rank grid."""
    values, counts = np.unique(a.values, return_counts=True)
    order = np.lexsort((values, -counts))
    omega = values[order]
    if background is None:
        background = omega[0]
    background = float(background)
    pos = np.nonzero(omega == background)[0]
    if len(pos):
        omega = np.concatenate(([background], np.delete(omega, pos[0])))
    else:
        omega = np.concatenate(([background], omega))
    # rank of every grid element in the reordered alphabet
    value_sorted = np.argsort(omega)
    ranks = value_sorted[np.searchsorted(omega[value_sorted], a.values)]
    return omega, ranks


def _segment_layout(a: DenseMatrix, ranks: np.ndarray, k: int):
    """Shared CER/CSER grouping of non-background entries.

    Returns per-(row, rank) counts, plus column indices sorted by
    (row, rank, column) so both encodings share one col_index array.
    """
    nz_rows, nz_cols = np.nonzero(ranks > 0)
    nz_ranks = ranks[nz_rows, nz_cols]
    order = np.lexsort((nz_cols, nz_ranks, nz_rows))
    col_index = nz_cols[order]
    counts = np.zeros((a.m, k), dtype=np.int64)
    np.add.at(counts, (nz_rows, nz_ranks), 1)
    return counts, col_index


def encode_cer(a: DenseMatrix, index_bits="auto", background=None) -> CerMatrix:
    """Compressed entropy row encoding.

    ``background`` designates the element whose positions are never stored;
    it defaults to the matrix mode (ties broken by ascending value).  A
    background absent from the matrix is allowed and simply heads the
    alphabet.
    """
    omega, ranks = _frequency_alphabet(a, background)
    k = len(omega)
    counts, col_index = _segment_layout(a, ranks, k)
    if k > 1:
        nonmode = counts[:, 1:]
        last_rank = ((nonmode > 0) * np.arange(1, k)).max(axis=1)
        keep = np.arange(1, k)[None, :] <= last_rank[:, None]
        seg_sizes = nonmode[keep]
    else:
        last_rank = np.zeros(a.m, dtype=np.int64)
        seg_sizes = np.zeros(0, dtype=np.int64)
    omega_ptr = np.concatenate(([0], np.cumsum(seg_sizes)))
    row_ptr = np.concatenate(([0], np.cumsum(last_rank)))
    return CerMatrix(
        omega=_frozen_values(omega),
        col_index=_index_array(col_index, max(a.n - 1, 0), index_bits),
        omega_ptr=_index_array(omega_ptr, max(len(col_index), 0), index_bits),
        row_ptr=_index_array(row_ptr, max(len(omega_ptr) - 1, 0), index_bits),
        m=a.m,
        n=a.n,
        element_bits=a.element_bits,
    )


def encode_cser(a: DenseMatrix, index_bits="auto", background=None) -> CserMatrix:
    """Compressed shared-elements row encoding.

    Segments are emitted in the same frequency-major order as encode_cer
    (so the col_index arrays match), with omega_index mapping each segment
    into the value-ascending alphabet.  No padding segments are emitted.
    """
    omega_freq, ranks = _frequency_alphabet(a, background)
    k = len(omega_freq)
    counts, col_index = _segment_layout(a, ranks, k)
    omega = np.sort(omega_freq)
    freq_to_value_pos = np.searchsorted(omega, omega_freq)
    mode_index = int(freq_to_value_pos[0])
    if k > 1:
        nonmode = counts[:, 1:]
        present = nonmode > 0
        seg_sizes = nonmode[present]
        seg_ranks = np.broadcast_to(np.arange(1, k), present.shape)[present]
        omega_index = freq_to_value_pos[seg_ranks]
        segs_per_row = present.sum(axis=1)
    else:
        seg_sizes = np.zeros(0, dtype=np.int64)
        omega_index = np.zeros(0, dtype=np.int64)
        segs_per_row = np.zeros(a.m, dtype=np.int64)
    omega_ptr = np.concatenate(([0], np.cumsum(seg_sizes)))
    row_ptr = np.concatenate(([0], np.cumsum(segs_per_row)))
    return CserMatrix(
        omega=_frozen_values(omega),
        col_index=_index_array(col_index, max(a.n - 1, 0), index_bits),
        omega_index=_index_array(omega_index, max(len(omega) - 1, 0), index_bits),
        omega_ptr=_index_array(omega_ptr, max(len(col_index), 0), index_bits),
        row_ptr=_index_array(row_ptr, max(len(omega_ptr) - 1, 0), index_bits),
        m=a.m,
        n=a.n,
        element_bits=a.element_bits,
        mode_index=mode_index,
    )


def _check_monotone(name: str, arr: np.ndarray, first, last):
    if len(arr) == 0:
        raise FormatError(name, 0, "array is empty")
    if arr[0] != first:
        raise FormatError(name, 0, f"must start at {first}, found {arr[0]}")
    diffs = np.diff(arr.astype(np.int64))
    bad = np.nonzero(diffs < 0)[0]
    if len(bad):
        raise FormatError(name, int(bad[0]) + 1, "must be non-decreasing")
    if arr[-1] != last:
        raise FormatError(name, len(arr) - 1, f"must end at {last}, found {arr[-1]}")


def _check_columns(col_index: np.ndarray, seg_ptr: np.ndarray, n: int, row_of_entry: np.ndarray):
    """Columns in range, strictly ascending within a segment, unique per row."""
    cols = col_index.astype(np.int64)
    bad = np.nonzero(cols >= n)[0]
    if len(bad):
        raise FormatError("colI", int(bad[0]), f"column {cols[bad[0]]} out of range for n={n}")
    if len(cols) > 1:
        ascending = np.diff(cols) > 0
        starts = np.zeros(len(cols), dtype=bool)
        starts[seg_ptr[:-1][seg_ptr[:-1] < len(cols)]] = True
        bad = np.nonzero(~ascending & ~starts[1:])[0]
        if len(bad):
            raise FormatError("colI", int(bad[0]) + 1, "must be strictly ascending within a segment")
    key = row_of_entry.astype(np.int64) * n + cols
    order = np.argsort(key, kind="stable")
    dup = np.nonzero(np.diff(key[order]) == 0)[0]
    if len(dup):
        raise FormatError("colI", int(order[dup[0] + 1]), "duplicate column within a row")


def validate(x: EncodedMatrix) -> None:
    """Raise FormatError on any structural inconsistency."""
    if isinstance(x, CsrMatrix):
        if len(x.values) != len(x.col_index):
            raise FormatError("colI", 0, "values and colI lengths differ")
        if len(x.row_ptr) != x.m + 1:
            raise FormatError("rowPtr", 0, f"expected {x.m + 1} entries")
        _check_monotone("rowPtr", x.row_ptr, 0, len(x.values))
        zero = np.nonzero(x.values == 0.0)[0]
        if len(zero):
            raise FormatError("W", int(zero[0]), "stored value equals zero")
        row_of_entry = np.repeat(np.arange(x.m), np.diff(x.row_ptr.astype(np.int64)))
        _check_columns(x.col_index, x.row_ptr, x.n, row_of_entry)
        return

    if isinstance(x, (CerMatrix, CserMatrix)):
        if len(np.unique(x.omega)) != len(x.omega):
            raise FormatError("omega", 0, "duplicate alphabet values")
        segs = len(x.omega_ptr) - 1
        if len(x.row_ptr) != x.m + 1:
            raise FormatError("rowPtr", 0, f"expected {x.m + 1} entries")
        _check_monotone("omegaPtr", x.omega_ptr, 0, len(x.col_index))
        _check_monotone("rowPtr", x.row_ptr, 0, segs)
        segs_per_row = np.diff(x.row_ptr.astype(np.int64))
        row_of_seg = np.repeat(np.arange(x.m), segs_per_row)
        seg_sizes = np.diff(x.omega_ptr.astype(np.int64))
        row_of_entry = np.repeat(row_of_seg, seg_sizes)
        _check_columns(x.col_index, x.omega_ptr, x.n, row_of_entry)

        if isinstance(x, CerMatrix):
            bad = np.nonzero(segs_per_row > len(x.omega) - 1)[0]
            if len(bad):
                raise FormatError(
                    "rowPtr", int(bad[0]) + 1,
                    f"row holds {segs_per_row[bad[0]]} segments, alphabet has {len(x.omega) - 1} non-background elements",
                )
            # trailing segments must not be empty padding
            if segs:
                last_of_row = (x.row_ptr.astype(np.int64)[1:] - 1)[segs_per_row > 0]
                empty = seg_sizes[last_of_row] == 0
                if np.any(empty):
                    raise FormatError("omegaPtr", int(last_of_row[np.nonzero(empty)[0][0]]) + 1,
                                      "trailing empty segment")
        else:
            if np.any(np.diff(x.omega) <= 0):
                raise FormatError("omega", 0, "alphabet must be value-ascending")
            if len(x.omega_index) != segs:
                raise FormatError("omegaI", 0, f"expected {segs} entries, found {len(x.omega_index)}")
            if not 0 <= x.mode_index < len(x.omega):
                raise FormatError("omega", x.mode_index, "mode_index out of range")
            oi = x.omega_index.astype(np.int64)
            bad = np.nonzero(oi >= len(x.omega))[0]
            if len(bad):
                raise FormatError("omegaI", int(bad[0]), "element index out of range")
            bad = np.nonzero(oi == x.mode_index)[0]
            if len(bad):
                raise FormatError("omegaI", int(bad[0]), "segment references the background element")
            empty = np.nonzero(seg_sizes == 0)[0]
            if len(empty):
                raise FormatError("omegaPtr", int(empty[0]) + 1, "empty segment")
            key = row_of_seg * len(x.omega) + oi
            order = np.argsort(key, kind="stable")
            dup = np.nonzero(np.diff(key[order]) == 0)[0]
            if len(dup):
                raise FormatError("omegaI", int(order[dup[0] + 1]), "row references an element twice")
        return
    raise TypeError(f"not an encoded matrix: {type(x)!r}")


def decode(x: AnyMatrix) -> DenseMatrix:
    """Exact dense reconstruction; validates structure first."""
    if isinstance(x, DenseMatrix):
        return x
    validate(x)
    if isinstance(x, CsrMatrix):
        out = np.zeros((x.m, x.n))
        row_of_entry = np.repeat(np.arange(x.m), np.diff(x.row_ptr.astype(np.int64)))
        out[row_of_entry, x.col_index.astype(np.int64)] = x.values
        return DenseMatrix(out, element_bits=x.element_bits)

    segs_per_row = np.diff(x.row_ptr.astype(np.int64))
    row_of_seg = np.repeat(np.arange(x.m), segs_per_row)
    seg_sizes = np.diff(x.omega_ptr.astype(np.int64))
    if isinstance(x, CerMatrix):
        background = x.omega[0]
        seg_start = x.row_ptr.astype(np.int64)[:-1]
        seg_element = x.omega[np.arange(len(seg_sizes)) - seg_start[row_of_seg] + 1]
    else:
        background = x.omega[x.mode_index]
        seg_element = x.omega[x.omega_index.astype(np.int64)]
    out = np.full((x.m, x.n), background)
    row_of_entry = np.repeat(row_of_seg, seg_sizes)
    out[row_of_entry, x.col_index.astype(np.int64)] = np.repeat(seg_element, seg_sizes)
    return DenseMatrix(out, element_bits=x.element_bits)


def entry_count(x: AnyMatrix) -> dict[str, int]:
    """Number of stored entries per array plus their total."""
    if isinstance(x, DenseMatrix):
        counts = {"values": x.size}
    elif isinstance(x, CsrMatrix):
        counts = {"values": len(x.values), "colI": len(x.col_index), "rowPtr": len(x.row_ptr)}
    elif isinstance(x, CerMatrix):
        counts = {
            "omega": len(x.omega),
            "colI": len(x.col_index),
            "omegaPtr": len(x.omega_ptr),
            "rowPtr": len(x.row_ptr),
        }
    elif isinstance(x, CserMatrix):
        counts = {
            "omega": len(x.omega),
            "colI": len(x.col_index),
            "omegaI": len(x.omega_index),
            "omegaPtr": len(x.omega_ptr),
            "rowPtr": len(x.row_ptr),
        }
    else:
        raise TypeError(f"not a matrix: {type(x)!r}")
    counts["total"] = sum(counts.values())
    return counts


def storage_bits(x: AnyMatrix) -> int:
    """Exact payload size: sum over arrays of length x bit-width."""
    if isinstance(x, DenseMatrix):
        return x.size * x.element_bits
    if isinstance(x, CsrMatrix):
        return (
            len(x.values) * x.element_bits
            + len(x.col_index) * x.col_index_bits
            + len(x.row_ptr) * x.row_ptr_bits
        )
    if isinstance(x, CerMatrix):
        return (
            len(x.omega) * x.element_bits
            + len(x.col_index) * x.col_index_bits
            + len(x.omega_ptr) * x.omega_ptr_bits
            + len(x.row_ptr) * x.row_ptr_bits
        )
    if isinstance(x, CserMatrix):
        return (
            len(x.omega) * x.element_bits
            + len(x.col_index) * x.col_index_bits
            + len(x.omega_index) * x.omega_index_bits
            + len(x.omega_ptr) * x.omega_ptr_bits
            + len(x.row_ptr) * x.row_ptr_bits
        )
    raise TypeError(f"not a matrix: {type(x)!r}")


def array_bytes(x: AnyMatrix, input_bits: int = 32, output_bits: int | None = None) -> dict[str, float]:
    """Byte size of every addressable array, for tiered read/write pricing."""
    if output_bits is None:
        output_bits = max(input_bits, x.element_bits)
    sizes = {
        TAG_INPUT: x.n * input_bits / 8,
        TAG_OUTPUT: x.m * output_bits / 8,
    }
    if isinstance(x, DenseMatrix):
        sizes[TAG_OMEGA] = x.size * x.element_bits / 8
    elif isinstance(x, CsrMatrix):
        sizes[TAG_OMEGA] = len(x.values) * x.element_bits / 8
        sizes[TAG_COLI] = len(x.col_index) * x.col_index_bits / 8
        sizes[TAG_ROWPTR] = len(x.row_ptr) * x.row_ptr_bits / 8
    else:
        sizes[TAG_OMEGA] = len(x.omega) * x.element_bits / 8
        sizes[TAG_COLI] = len(x.col_index) * x.col_index_bits / 8
        sizes[TAG_OMEGAPTR] = len(x.omega_ptr) * x.omega_ptr_bits / 8
        sizes[TAG_ROWPTR] = len(x.row_ptr) * x.row_ptr_bits / 8
        if isinstance(x, CserMatrix):
            sizes[TAG_OMEGAI] = len(x.omega_index) * x.omega_index_bits / 8
    return sizes
