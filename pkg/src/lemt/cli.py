"""Command-line surface.

Subcommands::

    stats      distribution statistics of weight tensors
    quantize   uniform quantization (optionally mode decomposition)
    convert    lossless tensor <-> encoded-matrix conversion
    bench      storage / operation / energy / time benchmark of one or more
               tensors across formats
    estimate   closed-form storage and energy per element
    sweep      plane or column-growth sweeps over synthesized matrices
    calibrate  per-operation latency table for this host

Exit codes: 0 success, 1 usage error, 2 data or validation error,
3 infeasible specification.  ``LEMT_COST_DIR`` provides a directory in
which bare cost-table names are resolved.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bench as bench_mod
from . import costmodel, formats, io, kernels, quantize, stats
from .costmodel import PER_ARRAY
from .matrices import DenseMatrix

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INFEASIBLE = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); keep codes ours
        raise UsageError(message)


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def resolve_table(name: str | None, kind: str) -> costmodel.CostTable | None:
    """Map a table argument to a CostTable.

    Accepts a path, a bare filename under $LEMT_COST_DIR, or the built-in
    names ``default`` and ``corrected`` (energy only).
    """
    if name is None:
        return costmodel.default_energy_table() if kind == "energy" else None
    if kind == "energy" and name == "default":
        return costmodel.default_energy_table()
    if kind == "energy" and name == "corrected":
        return costmodel.corrected_energy_table()
    if name == "unit":
        return costmodel.unit_table()
    path = Path(name)
    if not path.exists():
        cost_dir = os.environ.get("LEMT_COST_DIR")
        if cost_dir and (Path(cost_dir) / name).exists():
            path = Path(cost_dir) / name
        else:
            raise io.IoFormatError("missing-file", f"cost table not found: {name}")
    return io.read_cost_table(path)


def _parse_formats(text: str) -> tuple[str, ...]:
    kinds = tuple(k.strip() for k in text.split(",") if k.strip())
    for k in kinds:
        if k not in bench_mod.FORMATS:
            raise UsageError(f"unknown format {k!r}")
    return kinds


def _parse_grid(text: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    try:
        h_part, p_part = text.split(",")
        h0, h1, dh = (float(v) for v in h_part.split(":"))
        p0, p1, dp = (float(v) for v in p_part.split(":"))
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}; expected H0:H1:dH,p0:p1:dp") from exc
    return bench_mod.grid_range(h0, h1, dh), bench_mod.grid_range(p0, p1, dp)


def _parse_cols(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise UsageError(f"bad --cols {text!r}; expected n1,n2,...") from exc


def _load_inputs(paths) -> list[tuple[str, DenseMatrix]]:
    if not paths:
        raise UsageError("at least one --input is required")
    return [(str(p), io.read_tensor(p)) for p in paths]


# ---------------------------------------------------------------------------
# subcommands


def cmd_stats(args) -> int:
    inputs = _load_inputs(args.input)
    rows = []
    for name, matrix in inputs:
        st = stats.matrix_stats(matrix)
        rows.append((name, st))
    print(f"{'input':<32} {'H':>8} {'p0':>8} {'k_bar':>8} {'k_tilde':>8} {'m':>6} {'n':>8} {'k_bar/n':>9}")
    for name, st in rows:
        print(
            f"{Path(name).name:<32} {st.entropy:>8.4f} {st.p0:>8.4f} {st.k_bar:>8.2f}"
            f" {st.k_tilde:>8.2f} {st.m:>6} {st.n:>8} {st.k_bar / st.n:>9.4f}"
        )
    total_elems = sum(st.size for _, st in rows)
    total_rows = sum(st.m for _, st in rows)
    agg = {
        "entropy": sum(st.entropy * st.size for _, st in rows) / total_elems,
        "p0": sum(st.p0 * st.size for _, st in rows) / total_elems,
        "k_bar": sum(st.k_bar * st.m for _, st in rows) / total_rows,
        "n": sum(st.n for _, st in rows) / len(rows),
    }
    print(
        f"{'effective':<32} {agg['entropy']:>8.4f} {agg['p0']:>8.4f} {agg['k_bar']:>8.2f}"
        f" {'-':>8} {'-':>6} {agg['n']:>8.1f} {agg['k_bar'] / agg['n']:>9.4f}"
    )
    if args.out:
        doc = {
            "matrices": [
                {"input": name, **st.__dict__} for name, st in rows
            ],
            "effective": agg,
            "weighting": {
                "entropy": "element-weighted",
                "p0": "element-weighted",
                "k_bar": "row-weighted",
                "n": "matrix-weighted (plain mean over inputs)",
            },
        }
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_quantize(args) -> int:
    inputs = _load_inputs(args.input)
    if len(inputs) != 1:
        raise UsageError("quantize takes exactly one --input")
    name, matrix = inputs[0]
    lo = hi = None
    if args.range:
        try:
            lo, hi = (float(v) for v in args.range.split(","))
        except ValueError as exc:
            raise UsageError(f"bad --range {args.range!r}; expected lo,hi") from exc
    spec = quantize.QuantizerSpec(bits=args.bits, lo=lo, hi=hi)
    wq = quantize.uniform_quantize(matrix, spec)
    st = stats.matrix_stats(wq)
    print(f"quantized {Path(name).name}: {spec.levels} levels, H={st.entropy:.4f}, "
          f"p0={st.p0:.4f}, alphabet={st.alphabet_size}")
    out_matrix = wq
    if args.decompose:
        dec = quantize.decompose_most_frequent(wq)
        out_matrix = dec.hat
        print(f"decomposed: offset={dec.offset:.6g} (background is now 0)")
        if args.out:
            Path(str(args.out) + ".offset.json").write_text(
                json.dumps({"offset": dec.offset}) + "\n"
            )
    if args.out:
        io.write_tensor(args.out, out_matrix, name=Path(name).stem + f"-q{args.bits}")
    return EXIT_OK


def cmd_convert(args) -> int:
    src = Path(args.input[0]) if args.input else None
    if src is None:
        raise UsageError("convert needs --input")
    magic = src.read_bytes()[:4]
    if magic == io.MATRIX_MAGIC:
        encoded = io.read_matrix(src)
        if args.to != "dense":
            raise UsageError("encoded inputs can only convert back to dense")
        dense = formats.decode(encoded)
        io.write_tensor(args.out, dense, name=src.stem)
        print(f"decoded {io.format_kind(encoded)} -> dense tensor {args.out}")
        return EXIT_OK
    matrix = io.read_tensor(src)
    encoded = bench_mod.encode_as(matrix, args.to, args.index_bits)
    if args.to == "dense":
        io.write_tensor(args.out, matrix, name=src.stem)
    else:
        io.write_matrix(args.out, encoded)
    counts = formats.entry_count(encoded)
    bits = formats.storage_bits(encoded)
    print(
        f"encoded {src.name} as {args.to}: {counts['total']} entries, "
        f"{bits} payload bits ({bits / matrix.size:.4g} bits/element)"
    )
    round_trip = formats.decode(encoded)
    if not np.array_equal(round_trip.values, matrix.values):
        raise formats.FormatError("values", 0, "round-trip mismatch after encoding")
    return EXIT_OK


def _print_bench(records) -> None:
    by_id: dict[str, list] = {}
    for rec in records:
        by_id.setdefault(rec.matrix_id, []).append(rec)
    for matrix_id, recs in by_id.items():
        dense = next((r for r in recs if r.format == "dense"), None)
        print(f"\n{matrix_id}  (m={recs[0].m}, n={recs[0].n}, H={recs[0].entropy:.4f}, "
              f"p0={recs[0].p0:.4f}, k_bar={recs[0].k_bar:.2f})")
        print(f"{'format':<7} {'bits/elem':>10} {'ops':>12} {'energy[pJ]':>14} "
              f"{'time[ns]':>12} {'wall[ns]':>12} {'S gain':>8} {'E gain':>8}")
        for rec in recs:
            s_gain = dense.storage_bits_exact / rec.storage_bits_exact if dense else float("nan")
            e_gain = (
                dense.energy_pj / rec.energy_pj if dense and rec.energy_pj else float("nan")
            )
            print(
                f"{rec.format:<7} {rec.storage_bits_exact:>10.4f} {rec.ops_total:>12} "
                f"{_fmt(rec.energy_pj):>14} {_fmt(rec.time_ns_modeled):>12} "
                f"{_fmt(rec.time_ns_wallclock):>12} {s_gain:>8.2f} {e_gain:>8.2f}"
            )


def cmd_bench(args) -> int:
    formats_list = _parse_formats(args.formats)
    inputs = _load_inputs(args.input)
    energy = resolve_table(args.energy_table, "energy")
    latency = resolve_table(args.latency_table, "latency")
    report = io.BenchReport(run_label=args.run_label)
    for name, matrix in inputs:
        report.records.extend(
            bench_mod.bench_matrix(
                matrix,
                formats_list=formats_list,
                energy_table=energy,
                latency_table=latency,
                repeats=args.repeats,
                tier_policy=args.tier_policy,
                index_bits=args.index_bits,
                matrix_id=Path(name).name,
                seed=args.seed,
            )
        )
    _print_bench(report.records)
    if args.out:
        io.write_report(report, args.format, args.out)
    return EXIT_OK


def cmd_estimate(args) -> int:
    energy = resolve_table(args.energy_table, "energy")
    if args.input:
        name, matrix = _load_inputs(args.input)[0]
        st = stats.matrix_stats(matrix)
        inputs = costmodel.FormulaInputs.from_stats(
            st,
            element_bits=args.element_bits,
            index_bits=args.index_bits or formats.index_bitwidth(max(matrix.n - 1, 0)),
            input_bits=args.input_bits,
            output_bits=args.output_bits,
        )
        print(f"{name}: H={st.entropy:.4f} p0={st.p0:.4f} k_bar={st.k_bar:.2f} "
              f"k_tilde={st.k_tilde:.2f} m={st.m} n={st.n}")
    else:
        for flag in ("p0", "k_bar", "m", "n"):
            if getattr(args, flag) is None:
                raise UsageError(f"--{flag.replace('_', '-')} is required without --input")
        inputs = costmodel.FormulaInputs(
            p0=args.p0,
            k_bar=args.k_bar,
            k_tilde=args.k_tilde,
            m=args.m,
            n=args.n,
            element_bits=args.element_bits,
            index_bits=args.index_bits or 32,
            input_bits=args.input_bits,
            output_bits=args.output_bits,
            alphabet_size=args.alphabet_size,
        )
    print(f"{'format':<7} {'S formula':>12} {'S exact':>12} {'E formula':>12}  [{energy.unit}/element, "
          f"tier policy {args.tier_policy}]")
    for kind in bench_mod.FORMATS:
        s_formula = costmodel.estimate_storage(kind, inputs)
        try:
            s_exact = costmodel.estimate_storage(kind, inputs, exact=True)
        except ValueError:
            s_exact = None
        e_formula = costmodel.estimate_energy(kind, inputs, energy, args.tier_policy)
        print(f"{kind:<7} {s_formula:>12.4f} {_fmt(s_exact):>12} {e_formula:>12.4f}")
    return EXIT_OK


def _write_rows(path, rows, columns) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) if isinstance(row.get(c), float) else row.get(c, "")
                             for c in columns])


def cmd_sweep(args) -> int:
    energy = resolve_table(args.energy_table, "energy")
    latency = resolve_table(args.latency_table, "latency")
    overrides = dict(
        m=args.m,
        alphabet_size=args.alphabet_size,
        seed=args.seed,
        tier_policy=args.tier_policy,
    )
    if args.samples is not None:
        overrides.update(samples=args.samples)
    if args.kind == "plane":
        if args.grid:
            entropies, sparsities = _parse_grid(args.grid)
            overrides.update(entropies=entropies, sparsities=sparsities)
        if args.n:
            overrides.update(n=args.n)
        spec = bench_mod.plane_default_spec(**overrides)
        report, rows = bench_mod.run_plane_sweep(spec, energy, latency)
        columns = ["entropy", "p0", "criterion", "status", "winner", *bench_mod.FORMATS]
        rows_name = "winners"
    else:
        if args.cols:
            overrides.update(columns=_parse_cols(args.cols))
        if args.grid:
            entropies, sparsities = _parse_grid(args.grid)
            overrides.update(entropies=entropies, sparsities=sparsities)
        spec = bench_mod.columns_default_spec(**overrides)
        report, rows = bench_mod.run_column_sweep(spec, energy, latency)
        columns = ["n", "format", "criterion", "value", "ratio_vs_dense"]
        rows_name = "ratios"
    prefix = args.out or f"sweep-{args.kind}"
    io.write_report(report, args.format, f"{prefix}-records.{args.format}")
    _write_rows(f"{prefix}-{rows_name}.csv", rows, columns)
    ok = sum(1 for r in rows if r.get("status", "ok") == "ok")
    print(f"{args.kind} sweep: {len(rows)} result rows ({ok} ok), records in "
          f"{prefix}-records.{args.format}, map in {prefix}-{rows_name}.csv")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    table = costmodel.calibrate_latency_table(repetitions=args.repetitions)
    if args.out:
        io.write_cost_table(args.out, table)
        print(f"latency table written to {args.out}")
    reads = {t: table.cost("read", 32, t) for t in costmodel.TIERS}
    print("read latency ns/op (32-bit):", " ".join(f"{t}={v:.3g}" for t, v in reads.items()))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    parser = _Parser(prog="lemt", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--input", action="append", default=[], help="input tensor path (repeatable)")
        p.add_argument("--out", default=None, help="output path")

    p = sub.add_parser("stats", help="distribution statistics")
    add_common(p)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("quantize", help="uniform quantization")
    add_common(p)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--range", default=None, help="explicit lo,hi quantizer range")
    p.add_argument("--decompose", action="store_true", help="shift so the mode becomes 0")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("convert", help="encode/decode between tensor and matrix containers")
    add_common(p)
    p.add_argument("--to", required=True, choices=bench_mod.FORMATS)
    p.add_argument("--index-bits", default="auto")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("bench", help="benchmark formats on tensors")
    add_common(p)
    p.add_argument("--formats", default="dense,csr,cer,cser")
    p.add_argument("--energy-table", default=None)
    p.add_argument("--latency-table", default=None)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tier-policy", default=PER_ARRAY,
                   help=f"'{PER_ARRAY}' or one of {costmodel.TIERS}")
    p.add_argument("--index-bits", default="auto")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.add_argument("--run-label", default="")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("estimate", help="closed-form storage/energy per element")
    add_common(p)
    p.add_argument("--p0", type=float, default=None)
    p.add_argument("--k-bar", dest="k_bar", type=float, default=None)
    p.add_argument("--k-tilde", dest="k_tilde", type=float, default=0.0)
    p.add_argument("-m", type=int, default=None)
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--alphabet-size", type=int, default=None)
    p.add_argument("--element-bits", type=int, default=32)
    p.add_argument("--index-bits", type=int, default=None)
    p.add_argument("--input-bits", type=int, default=32)
    p.add_argument("--output-bits", type=int, default=None)
    p.add_argument("--energy-table", default=None)
    p.add_argument("--tier-policy", default=PER_ARRAY)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("sweep", help="plane or column sweeps on synthesized matrices")
    p.add_argument("--kind", choices=("plane", "columns"), default="plane")
    p.add_argument("--grid", default=None, help="H0:H1:dH,p0:p1:dp")
    p.add_argument("--cols", default=None, help="n1,n2,...")
    p.add_argument("-m", type=int, default=100)
    p.add_argument("-n", type=int, default=None)
    p.add_argument("--samples", type=int, default=None, help="matrices per grid point (plane: 10, columns: 20)")
    p.add_argument("--alphabet-size", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tier-policy", default="<8KB")
    p.add_argument("--energy-table", default=None)
    p.add_argument("--latency-table", default=None)
    p.add_argument("--out", default=None, help="output prefix")
    p.add_argument("--format", default="csv", choices=("csv", "json"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("calibrate", help="measure per-operation latencies")
    p.add_argument("--repetitions", type=int, default=100_000)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_calibrate)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except stats.InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (formats.FormatError, io.IoFormatError, costmodel.CostModelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
