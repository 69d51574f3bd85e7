"""Entropy-aware matrix representations and their cost models.

Matrices whose elements repeat heavily (low-entropy weight matrices, e.g.
quantized neural network layers) admit representations whose storage and
dot-product cost shrink with the entropy rather than only with the zero
count.  This package implements the dense, CSR, CER, and CSER formats,
their instrumented dot-product kernels, and tiered energy/latency cost
models, plus synthesis and sweep tooling to map where each format wins.
"""

from .matrices import DenseMatrix, Vector
from .stats import (
    Alphabet,
    DistributionSpec,
    InfeasibleError,
    MatrixStats,
    empirical_distribution,
    entropy,
    feasible_band,
    matrix_stats,
    sample_matrix,
    synthesize_distribution,
)
from .formats import (
    CerMatrix,
    CsrMatrix,
    CserMatrix,
    FormatError,
    decode,
    encode_cer,
    encode_cser,
    encode_csr,
    entry_count,
    index_bitwidth,
    storage_bits,
    validate,
)
from .kernels import OpTrace, dot, dot_cer, dot_cser, dot_csr, dot_dense, row_trace, trace_of
from .costmodel import (
    CostModelError,
    CostReport,
    CostTable,
    FormulaInputs,
    calibrate_latency_table,
    corrected_energy_table,
    default_energy_table,
    estimate_energy,
    estimate_storage,
    price_trace,
    tier_of,
    unit_table,
)
from .quantize import (
    ConvLayerMeta,
    DecomposedMatrix,
    QuantizerSpec,
    conv_weighted_report,
    corrected_dot,
    decompose_most_frequent,
    uniform_quantize,
)
from .bench import SweepSpec, bench_matrix, run_column_sweep, run_plane_sweep

__version__ = "0.1.0"
