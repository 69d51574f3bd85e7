"""Portable on-disk formats for tensors, encoded matrices, tables, reports.

Tensor container (magic ``LEMT``), little-endian throughout::

    magic    4 bytes  b"LEMT"
    version  u16
    hlen     u32      header length in bytes
    header   UTF-8 JSON {"dtype": "f32"|"f64", "shape": [...],
                         "layout": "row-major", "name": str}
    payload  row-major scalars, hlen-declared dtype

Encoded matrix container (magic ``LEMX``)::

    magic    4 bytes  b"LEMX"
    version  u16
    tag      u8       0 dense, 1 csr, 2 cer, 3 cser
    m, n     u32 each
    ebits    u8       element bit-width
    widths   u8 per index array (format order below)
    extras   cser only: mode_index u16
    lengths  u64 per variable-length array
    arrays   packed at their declared widths, format order:
             dense: values
             csr:   values, colI, rowPtr
             cer:   omega, colI, omegaPtr, rowPtr
             cser:  omega, colI, omegaI, omegaPtr, rowPtr

Array payloads are stored at exactly their declared bit-widths, so the
file size equals the encoding's storage bits plus a fixed per-format
header.  Element payloads use f64/f32/f16 for 64/32/16 bits and signed
8-bit integers for 8-bit elements; values must be representable at the
declared width.

Cost tables are JSON documents {unit, name, metadata, entries:
[{op, bits, tier, cost}]}.  Benchmark reports serialize to CSV and JSON
with identical data; floats carry 6 significant digits in both.  No
timestamps are embedded, so outputs are byte-identical across runs.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .matrices import DenseMatrix
from .formats import CerMatrix, CsrMatrix, CserMatrix, EncodedMatrix, AnyMatrix
from .costmodel import CostTable
from .quantize import ConvLayerMeta

TENSOR_MAGIC = b"LEMT"
MATRIX_MAGIC = b"LEMX"
VERSION = 1

_FORMAT_TAGS = {"dense": 0, "csr": 1, "cer": 2, "cser": 3}
_TAG_FORMATS = {v: k for k, v in _FORMAT_TAGS.items()}


class IoFormatError(ValueError):
    """File-format failure with a machine-readable code."""

    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(f"{code}: {message}")


def _element_dtype(element_bits: int) -> np.dtype:
    return {64: np.dtype("<f8"), 32: np.dtype("<f4"), 16: np.dtype("<f2"), 8: np.dtype("<i1")}[
        element_bits
    ]


def _index_dtype(bits: int) -> np.dtype:
    return {8: np.dtype("<u1"), 16: np.dtype("<u2"), 32: np.dtype("<u4")}[bits]


def _pack_values(values: np.ndarray, element_bits: int) -> bytes:
    dtype = _element_dtype(element_bits)
    packed = values.astype(dtype)
    if not np.array_equal(packed.astype(np.float64), values):
        raise IoFormatError(
            "value-width", f"values are not representable at {element_bits} bits"
        )
    return packed.tobytes()


def _read_exact(buf: bytes, offset: int, count: int, what: str) -> tuple[bytes, int]:
    if offset + count > len(buf):
        raise IoFormatError("payload-mismatch", f"payload length mismatch reading {what}")
    return buf[offset : offset + count], offset + count


# ---------------------------------------------------------------------------
# tensors


def write_tensor(path, matrix: DenseMatrix, name: str = "", dtype: str | None = None) -> None:
    """Write a dense matrix; dtype defaults to the narrowest lossless float."""
    values = matrix.values
    if dtype is None:
        dtype = "f32" if np.array_equal(values.astype(np.float32).astype(np.float64), values) else "f64"
    if dtype not in ("f32", "f64"):
        raise IoFormatError("bad-header", f"unsupported dtype {dtype!r}")
    payload = values.astype("<f4" if dtype == "f32" else "<f8").tobytes()
    header = json.dumps(
        {"dtype": dtype, "shape": list(values.shape), "layout": "row-major", "name": name}
    ).encode("utf-8")
    with open(path, "wb") as f:
        f.write(TENSOR_MAGIC)
        f.write(struct.pack("<HI", VERSION, len(header)))
        f.write(header)
        f.write(payload)


def read_tensor(path, element_bits: int = 32) -> DenseMatrix:
    """Read a tensor; rank-4 filter banks reshape to (filters, rest)."""
    raw = Path(path).read_bytes()
    if raw[:4] != TENSOR_MAGIC:
        raise IoFormatError("bad-magic", f"not a tensor container: {path}")
    version, hlen = struct.unpack_from("<HI", raw, 4)
    if version != VERSION:
        raise IoFormatError("bad-version", f"unsupported version {version}")
    header_bytes, offset = _read_exact(raw, 10, hlen, "header")
    try:
        header = json.loads(header_bytes.decode("utf-8"))
        shape = tuple(int(s) for s in header["shape"])
        dtype = header["dtype"]
    except (ValueError, KeyError) as exc:
        raise IoFormatError("bad-header", str(exc)) from exc
    if dtype not in ("f32", "f64"):
        raise IoFormatError("bad-header", f"unsupported dtype {dtype!r}")
    npdtype = np.dtype("<f4" if dtype == "f32" else "<f8")
    count = int(np.prod(shape)) if shape else 0
    payload, offset = _read_exact(raw, offset, count * npdtype.itemsize, "payload")
    if offset != len(raw):
        raise IoFormatError("payload-mismatch", "payload length mismatch: trailing bytes")
    values = np.frombuffer(payload, dtype=npdtype).astype(np.float64).reshape(shape)
    if values.ndim == 2:
        pass
    elif values.ndim == 4:
        values = values.reshape(shape[0], shape[1] * shape[2] * shape[3])
    else:
        raise IoFormatError("bad-rank", f"rank {values.ndim} unsupported (need 2 or 4)")
    bits = 64 if dtype == "f64" and element_bits == 32 else element_bits
    return DenseMatrix(values, element_bits=bits)


def write_conv_meta(path, meta: ConvLayerMeta) -> None:
    Path(path).write_text(json.dumps(meta.to_dict(), indent=2) + "\n")


def read_conv_meta(path) -> ConvLayerMeta:
    return ConvLayerMeta.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# encoded matrices


def format_kind(x: AnyMatrix) -> str:
    if isinstance(x, DenseMatrix):
        return "dense"
    if isinstance(x, CsrMatrix):
        return "csr"
    if isinstance(x, CerMatrix):
        return "cer"
    if isinstance(x, CserMatrix):
        return "cser"
    raise TypeError(f"not a matrix: {type(x)!r}")


def write_matrix(path, x: AnyMatrix) -> None:
    kind = format_kind(x)
    out = bytearray()
    out += MATRIX_MAGIC
    out += struct.pack("<HBIIB", VERSION, _FORMAT_TAGS[kind], x.m, x.n, x.element_bits)
    if kind == "dense":
        out += _pack_values(x.values.ravel(), x.element_bits)
    elif kind == "csr":
        out += struct.pack("<BBQ", x.col_index_bits, x.row_ptr_bits, x.nnz)
        out += _pack_values(x.values, x.element_bits)
        out += x.col_index.astype(_index_dtype(x.col_index_bits)).tobytes()
        out += x.row_ptr.astype(_index_dtype(x.row_ptr_bits)).tobytes()
    elif kind == "cer":
        out += struct.pack(
            "<BBBIQQ",
            x.col_index_bits, x.omega_ptr_bits, x.row_ptr_bits,
            len(x.omega), x.nnz, x.segment_count,
        )
        out += _pack_values(x.omega, x.element_bits)
        out += x.col_index.astype(_index_dtype(x.col_index_bits)).tobytes()
        out += x.omega_ptr.astype(_index_dtype(x.omega_ptr_bits)).tobytes()
        out += x.row_ptr.astype(_index_dtype(x.row_ptr_bits)).tobytes()
    else:
        out += struct.pack(
            "<BBBBHIQQ",
            x.col_index_bits, x.omega_index_bits, x.omega_ptr_bits, x.row_ptr_bits,
            x.mode_index, len(x.omega), x.nnz, x.segment_count,
        )
        out += _pack_values(x.omega, x.element_bits)
        out += x.col_index.astype(_index_dtype(x.col_index_bits)).tobytes()
        out += x.omega_index.astype(_index_dtype(x.omega_index_bits)).tobytes()
        out += x.omega_ptr.astype(_index_dtype(x.omega_ptr_bits)).tobytes()
        out += x.row_ptr.astype(_index_dtype(x.row_ptr_bits)).tobytes()
    Path(path).write_bytes(bytes(out))


def header_bytes(kind: str) -> int:
    """Fixed container header size per format."""
    base = 4 + struct.calcsize("<HBIIB")
    return base + {
        "dense": 0,
        "csr": struct.calcsize("<BBQ"),
        "cer": struct.calcsize("<BBBIQQ"),
        "cser": struct.calcsize("<BBBBHIQQ"),
    }[kind]


def _unpack_values(buf: bytes, offset: int, count: int, element_bits: int):
    dtype = _element_dtype(element_bits)
    raw, offset = _read_exact(buf, offset, count * dtype.itemsize, "values")
    return np.frombuffer(raw, dtype=dtype).astype(np.float64), offset


def _unpack_index(buf: bytes, offset: int, count: int, bits: int):
    dtype = _index_dtype(bits)
    raw, offset = _read_exact(buf, offset, count * dtype.itemsize, "index array")
    return np.frombuffer(raw, dtype=dtype), offset


def read_matrix(path) -> AnyMatrix:
    raw = Path(path).read_bytes()
    if raw[:4] != MATRIX_MAGIC:
        raise IoFormatError("bad-magic", f"not an encoded-matrix container: {path}")
    version, tag, m, n, ebits = struct.unpack_from("<HBIIB", raw, 4)
    if version != VERSION:
        raise IoFormatError("bad-version", f"unsupported version {version}")
    if tag not in _TAG_FORMATS:
        raise IoFormatError("bad-header", f"unknown format tag {tag}")
    kind = _TAG_FORMATS[tag]
    offset = 4 + struct.calcsize("<HBIIB")
    if kind == "dense":
        values, offset = _unpack_values(raw, offset, m * n, ebits)
        result: AnyMatrix = DenseMatrix(values.reshape(m, n), element_bits=ebits)
    elif kind == "csr":
        cbits, rbits, nnz = struct.unpack_from("<BBQ", raw, offset)
        offset += struct.calcsize("<BBQ")
        values, offset = _unpack_values(raw, offset, nnz, ebits)
        col_index, offset = _unpack_index(raw, offset, nnz, cbits)
        row_ptr, offset = _unpack_index(raw, offset, m + 1, rbits)
        result = CsrMatrix(values, col_index, row_ptr, m, n, ebits)
    elif kind == "cer":
        cbits, obits, rbits, k, nnz, segs = struct.unpack_from("<BBBIQQ", raw, offset)
        offset += struct.calcsize("<BBBIQQ")
        omega, offset = _unpack_values(raw, offset, k, ebits)
        col_index, offset = _unpack_index(raw, offset, nnz, cbits)
        omega_ptr, offset = _unpack_index(raw, offset, segs + 1, obits)
        row_ptr, offset = _unpack_index(raw, offset, m + 1, rbits)
        result = CerMatrix(omega, col_index, omega_ptr, row_ptr, m, n, ebits)
    else:
        cbits, ibits, obits, rbits, mode_index, k, nnz, segs = struct.unpack_from(
            "<BBBBHIQQ", raw, offset
        )
        offset += struct.calcsize("<BBBBHIQQ")
        omega, offset = _unpack_values(raw, offset, k, ebits)
        col_index, offset = _unpack_index(raw, offset, nnz, cbits)
        omega_index, offset = _unpack_index(raw, offset, segs, ibits)
        omega_ptr, offset = _unpack_index(raw, offset, segs + 1, obits)
        row_ptr, offset = _unpack_index(raw, offset, m + 1, rbits)
        result = CserMatrix(omega, col_index, omega_index, omega_ptr, row_ptr, m, n, ebits, mode_index)
    if offset != len(raw):
        raise IoFormatError("payload-mismatch", "payload length mismatch: trailing bytes")
    return result


# ---------------------------------------------------------------------------
# cost tables


def write_cost_table(path, table: CostTable) -> None:
    Path(path).write_text(json.dumps(table.to_dict(), indent=2) + "\n")


def read_cost_table(path) -> CostTable:
    return CostTable.from_dict(json.loads(Path(path).read_text()))


# ---------------------------------------------------------------------------
# benchmark reports


def _sig6(value: float) -> float:
    return float(f"{value:.6g}")


@dataclass(frozen=True)
class BenchRecord:
    """One (matrix, format) benchmark row."""

    matrix_id: str
    format: str
    storage_bits_exact: float  # per element
    storage_bits_formula: float
    ops_input_load: int
    ops_coli_load: int
    ops_omega_load: int
    ops_add: int
    ops_mul: int
    ops_others: int
    ops_total: int
    energy_pj: float | None
    time_ns_modeled: float | None
    time_ns_wallclock: float | None
    entropy: float
    p0: float
    k_bar: float
    k_tilde: float
    m: int
    n: int
    seed: int | None
    tables_used: str

    def rounded(self) -> "BenchRecord":
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = _sig6(v) if isinstance(v, float) else v
        return BenchRecord(**out)


REPORT_COLUMNS = tuple(f.name for f in dataclasses.fields(BenchRecord))


@dataclass
class BenchReport:
    records: list[BenchRecord] = field(default_factory=list)
    run_label: str = ""

    def rounded(self) -> "BenchReport":
        return BenchReport([r.rounded() for r in self.records], self.run_label)


def write_report(report: BenchReport, fmt: str, path) -> None:
    """Emit CSV or JSON; both carry the same 6-significant-digit floats."""
    rounded = report.rounded()
    if fmt == "csv":
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(REPORT_COLUMNS)
            for rec in rounded.records:
                writer.writerow(
                    ["" if getattr(rec, c) is None else getattr(rec, c) for c in REPORT_COLUMNS]
                )
    elif fmt == "json":
        doc = {
            "run_label": rounded.run_label,
            "records": [dataclasses.asdict(rec) for rec in rounded.records],
        }
        Path(path).write_text(json.dumps(doc, indent=2) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def read_report(path) -> BenchReport:
    doc = json.loads(Path(path).read_text())
    records = [BenchRecord(**rec) for rec in doc["records"]]
    return BenchReport(records, doc.get("run_label", ""))
