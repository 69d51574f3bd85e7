"""Benchmark pipeline: encode, trace, price, and sweep matrices.

A benchmark run scores one matrix in up to four representations against
four criteria: exact storage bits per element, elementary operation count,
modeled energy, and modeled time (plus an informational wall-clock
measurement of the numeric kernel).  Sweeps repeat this over grids of
synthesized distributions.

Plane sweeps price reads and writes in a single fixed memory tier by
default: at the default 100x100 scale, per-array tiering puts the dense
value grid in a far more expensive tier than every compressed-format
array, which masks the operation-count structure the sweep is meant to
map.  Single-matrix benchmarks keep per-array pricing (the realistic
setting); both accept a ``tier_policy`` override.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import costmodel, formats, kernels, quantize, stats
from .costmodel import CostTable, FormulaInputs, PER_ARRAY
from .io import BenchRecord, BenchReport
from .matrices import DenseMatrix, Vector

FORMATS = ("dense", "csr", "cer", "cser")
CRITERIA = ("storage", "ops", "energy", "time")
#: winner grouping: the two segmented formats compete as one category
GROUP_OF = {"dense": "dense", "csr": "csr", "cer": "cer-or-cser", "cser": "cer-or-cser"}


def encode_as(dense: DenseMatrix, kind: str, index_bits="auto"):
    if kind == "dense":
        return dense
    if kind == "csr":
        return formats.encode_csr(dense, index_bits)
    if kind == "cer":
        return formats.encode_cer(dense, index_bits)
    if kind == "cser":
        return formats.encode_cser(dense, index_bits)
    raise ValueError(f"unknown format kind {kind!r}")


def op_categories(trace: kernels.OpTrace) -> dict[str, int]:
    """Fold a trace into report columns (bookkeeping ops excluded)."""
    in_load = trace.count("read", formats.TAG_INPUT)
    coli_load = trace.count("read", formats.TAG_COLI)
    omega_load = trace.count("read", formats.TAG_OMEGA)
    add = trace.count("sum")
    mul = trace.count("mul")
    others = (
        trace.count("read", formats.TAG_ROWPTR)
        + trace.count("read", formats.TAG_OMEGAPTR)
        + trace.count("read", formats.TAG_OMEGAI)
        + trace.count("write")
    )
    total = in_load + coli_load + omega_load + add + mul + others
    return {
        "ops_input_load": in_load,
        "ops_coli_load": coli_load,
        "ops_omega_load": omega_load,
        "ops_add": add,
        "ops_mul": mul,
        "ops_others": others,
        "ops_total": total,
    }


def _wallclock_ns(encoded, x, repeats: int) -> float | None:
    if repeats < 1:
        return None
    kernels.dot(encoded, x)  # warm-up, discarded
    samples = []
    for _ in range(repeats):
        t0 = time.perf_counter_ns()
        kernels.dot(encoded, x)
        samples.append(time.perf_counter_ns() - t0)
    return float(np.median(samples))


def bench_matrix(
    dense: DenseMatrix,
    formats_list=FORMATS,
    energy_table: CostTable | None = None,
    latency_table: CostTable | None = None,
    repeats: int = 3,
    tier_policy: str = PER_ARRAY,
    index_bits="auto",
    input_bits: int = 32,
    output_bits: int | None = None,
    matrix_id: str = "matrix",
    seed: int | None = None,
) -> list[BenchRecord]:
    """Score one matrix in each requested format.

    When the matrix mode is non-zero the mode is subtracted first, so zero
    is the background element for every format (the dot-product correction
    this requires is constant per row and excluded, as for all formats the
    comparison is per-element).
    """
    if energy_table is None:
        energy_table = costmodel.default_energy_table()
    st = stats.matrix_stats(dense)
    alphabet = stats.empirical_distribution(dense)
    working = dense
    if alphabet.mode != 0.0:
        working = quantize.decompose_most_frequent(dense).hat
    rng = np.random.default_rng(0 if seed is None else seed)
    x = Vector(rng.standard_normal(dense.n), element_bits=input_bits)

    tables_used = energy_table.name
    if latency_table is not None:
        tables_used += "+" + latency_table.name

    records = []
    for kind in formats_list:
        encoded = encode_as(working, kind, index_bits)
        trace = kernels.trace_of(encoded, input_bits, output_bits)
        sizes = formats.array_bytes(encoded, input_bits, output_bits)
        if tier_policy == PER_ARRAY:
            energy = costmodel.price_trace(trace, energy_table, array_sizes=sizes)
            modeled = (
                costmodel.price_trace(trace, latency_table, array_sizes=sizes)
                if latency_table is not None
                else None
            )
        else:
            energy = costmodel.price_trace(trace, energy_table, fixed_tier=tier_policy)
            modeled = (
                costmodel.price_trace(trace, latency_table, fixed_tier=tier_policy)
                if latency_table is not None
                else None
            )
        b_i = (
            formats.index_bitwidth(max(dense.n - 1, 0))
            if kind == "dense"
            else encoded.col_index_bits
        )
        inputs = FormulaInputs.from_stats(
            st,
            element_bits=dense.element_bits,
            index_bits=b_i,
            input_bits=input_bits,
            output_bits=output_bits,
        )
        cats = op_categories(trace)
        records.append(
            BenchRecord(
                matrix_id=matrix_id,
                format=kind,
                storage_bits_exact=formats.storage_bits(encoded) / dense.size,
                storage_bits_formula=costmodel.estimate_storage(kind, inputs),
                energy_pj=energy.total,
                time_ns_modeled=None if modeled is None else modeled.total,
                time_ns_wallclock=_wallclock_ns(encoded, x, repeats),
                entropy=st.entropy,
                p0=st.p0,
                k_bar=st.k_bar,
                k_tilde=st.k_tilde,
                m=dense.m,
                n=dense.n,
                seed=seed,
                tables_used=tables_used,
                **cats,
            )
        )
    return records


# ---------------------------------------------------------------------------
# sweeps


@dataclass(frozen=True)
class SweepSpec:
    """Grid of synthesized distributions to benchmark."""

    kind: str  # "plane" or "columns"
    entropies: tuple[float, ...]
    sparsities: tuple[float, ...]
    columns: tuple[int, ...] = ()
    m: int = 100
    n: int = 100
    samples: int = 10
    alphabet_size: int = 128
    seed: int = 0
    tier_policy: str = "<8KB"
    synth_tolerance: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("plane", "columns"):
            raise ValueError("kind must be 'plane' or 'columns'")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.kind == "plane" and (not self.entropies or not self.sparsities):
            raise ValueError("plane sweep needs a non-empty grid")
        if self.kind == "columns" and not self.columns:
            raise ValueError("columns sweep needs a column list")


def grid_range(start: float, stop: float, step: float) -> tuple[float, ...]:
    count = int(round((stop - start) / step)) + 1
    return tuple(round(start + i * step, 10) for i in range(count))


def plane_default_spec(**overrides) -> SweepSpec:
    base = dict(
        kind="plane",
        entropies=grid_range(0.25, 7.0, 0.25),
        sparsities=grid_range(0.05, 0.95, 0.05),
        m=100,
        n=100,
        samples=10,
        alphabet_size=128,
    )
    base.update(overrides)
    return SweepSpec(**base)


def columns_default_spec(**overrides) -> SweepSpec:
    base = dict(
        kind="columns",
        entropies=(4.0,),
        sparsities=(0.55,),
        columns=(100, 1000, 10_000, 100_000),
        m=100,
        samples=20,
        alphabet_size=128,
    )
    base.update(overrides)
    return SweepSpec(**base)


def _sample_seed(base_seed: int, *path: int) -> int:
    return int(np.random.SeedSequence([base_seed, *path]).generate_state(1, np.uint64)[0])


def _criterion_values(record: BenchRecord) -> dict[str, float | None]:
    return {
        "storage": record.storage_bits_exact,
        "ops": float(record.ops_total),
        "energy": record.energy_pj,
        "time": record.time_ns_modeled,
    }


def _majority_winner(per_sample_groups: list[str]) -> str:
    counts: dict[str, int] = {}
    for g in per_sample_groups:
        counts[g] = counts.get(g, 0) + 1
    best = max(counts.values())
    winners = sorted(g for g, c in counts.items() if c == best)
    return winners[0]


def _point_rows(
    label: dict,
    sample_records: list[list[BenchRecord]],
    latency: bool,
) -> list[dict]:
    """Per-criterion means and majority-vote winner for one grid point."""
    rows = []
    criteria = CRITERIA if latency else tuple(c for c in CRITERIA if c != "time")
    for criterion in criteria:
        votes = []
        sums = {kind: 0.0 for kind in FORMATS}
        for records in sample_records:
            values = {}
            for rec in records:
                v = _criterion_values(rec)[criterion]
                values[rec.format] = v
                sums[rec.format] += v
            best = min(values, key=lambda k: values[k])
            votes.append(GROUP_OF[best])
        means = {kind: sums[kind] / len(sample_records) for kind in FORMATS}
        rows.append(
            {
                **label,
                "criterion": criterion,
                "status": "ok",
                "winner": _majority_winner(votes),
                **means,
            }
        )
    return rows


def run_plane_sweep(
    spec: SweepSpec,
    energy_table: CostTable | None = None,
    latency_table: CostTable | None = None,
) -> tuple[BenchReport, list[dict]]:
    """Benchmark every feasible (entropy, p0) cell; returns report + winner map.

    Infeasible cells are reported with status "infeasible" rather than
    silently dropped.
    """
    if energy_table is None:
        energy_table = costmodel.default_energy_table()
    report = BenchReport(run_label=f"plane-seed{spec.seed}")
    rows: list[dict] = []
    feasible_cells = 0
    for i, h in enumerate(spec.entropies):
        for j, p0 in enumerate(spec.sparsities):
            label = {"entropy": h, "p0": p0}
            try:
                alphabet = stats.synthesize_distribution(
                    stats.DistributionSpec(h, p0, spec.alphabet_size, spec.synth_tolerance)
                )
            except stats.InfeasibleError:
                rows.append(
                    {**label, "criterion": "all", "status": "infeasible", "winner": "",
                     **{kind: float("nan") for kind in FORMATS}}
                )
                continue
            feasible_cells += 1
            sample_records = []
            for s in range(spec.samples):
                seed = _sample_seed(spec.seed, i, j, s)
                matrix = stats.sample_matrix(alphabet, spec.m, spec.n, seed)
                records = bench_matrix(
                    matrix,
                    energy_table=energy_table,
                    latency_table=latency_table,
                    repeats=0,
                    tier_policy=spec.tier_policy,
                    matrix_id=f"plane_h{h}_p{p0}_s{s}",
                    seed=seed,
                )
                sample_records.append(records)
                report.records.extend(records)
            rows.extend(_point_rows(label, sample_records, latency_table is not None))
    if feasible_cells == 0:
        raise stats.InfeasibleError("no feasible cell in the sweep grid")
    return report, rows


def run_column_sweep(
    spec: SweepSpec,
    energy_table: CostTable | None = None,
    latency_table: CostTable | None = None,
) -> tuple[BenchReport, list[dict]]:
    """Benchmark one distribution at growing column counts; ratios vs dense."""
    if energy_table is None:
        energy_table = costmodel.default_energy_table()
    h, p0 = spec.entropies[0], spec.sparsities[0]
    alphabet = stats.synthesize_distribution(
        stats.DistributionSpec(h, p0, spec.alphabet_size, spec.synth_tolerance)
    )
    report = BenchReport(run_label=f"columns-seed{spec.seed}")
    rows: list[dict] = []
    criteria = CRITERIA if latency_table is not None else tuple(c for c in CRITERIA if c != "time")
    for i, n in enumerate(spec.columns):
        sums: dict[tuple[str, str], float] = {}
        for s in range(spec.samples):
            seed = _sample_seed(spec.seed, i, s)
            matrix = stats.sample_matrix(alphabet, spec.m, n, seed)
            records = bench_matrix(
                matrix,
                energy_table=energy_table,
                latency_table=latency_table,
                repeats=0,
                tier_policy=spec.tier_policy,
                matrix_id=f"columns_n{n}_s{s}",
                seed=seed,
            )
            report.records.extend(records)
            for rec in records:
                for criterion, value in _criterion_values(rec).items():
                    if value is not None:
                        sums[(rec.format, criterion)] = sums.get((rec.format, criterion), 0.0) + value
        for criterion in criteria:
            dense_mean = sums[("dense", criterion)] / spec.samples
            for kind in FORMATS:
                mean = sums[(kind, criterion)] / spec.samples
                rows.append(
                    {
                        "n": n,
                        "format": kind,
                        "criterion": criterion,
                        "value": mean,
                        "ratio_vs_dense": dense_mean / mean if mean else float("inf"),
                    }
                )
    return report, rows
