import json

import numpy as np
import pytest

from lemt import (
    ConvLayerMeta,
    DenseMatrix,
    decode,
    default_energy_table,
    encode_cer,
    encode_cser,
    encode_csr,
    storage_bits,
)
from lemt.io import (
    BenchRecord,
    BenchReport,
    IoFormatError,
    header_bytes,
    read_conv_meta,
    read_cost_table,
    read_matrix,
    read_report,
    read_tensor,
    write_conv_meta,
    write_cost_table,
    write_matrix,
    write_report,
    write_tensor,
)
from conftest import random_low_entropy_matrix


class TestTensorContainer:
    def test_round_trip(self, tmp_path, ref_matrix):
        path = tmp_path / "m.lemt"
        write_tensor(path, ref_matrix, name="ref")
        back = read_tensor(path)
        assert np.array_equal(back.values, ref_matrix.values)

    def test_round_trip_f64(self, tmp_path):
        matrix = DenseMatrix(np.array([[np.pi, np.e], [1 / 3, 2 / 3]]), element_bits=64)
        path = tmp_path / "m.lemt"
        write_tensor(path, matrix)
        back = read_tensor(path)
        assert np.array_equal(back.values, matrix.values)  # f64 chosen automatically

    def test_rank4_reshapes(self, tmp_path):
        rng = np.random.default_rng(0)
        tensor = rng.integers(0, 3, size=(20, 1, 5, 5)).astype(float)
        path = tmp_path / "w.lemt"
        flat = DenseMatrix(tensor.reshape(20, 25))
        import struct

        # write a rank-4 header by hand through the public writer on the raw shape
        payload = tensor.astype("<f4").tobytes()
        header = json.dumps(
            {"dtype": "f32", "shape": [20, 1, 5, 5], "layout": "row-major", "name": "conv"}
        ).encode()
        path.write_bytes(b"LEMT" + struct.pack("<HI", 1, len(header)) + header + payload)
        back = read_tensor(path)
        assert back.values.shape == (20, 25)
        assert np.array_equal(back.values, flat.values)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.lemt"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(IoFormatError) as err:
            read_tensor(path)
        assert err.value.code == "bad-magic"

    def test_truncated_payload(self, tmp_path, ref_matrix):
        path = tmp_path / "m.lemt"
        write_tensor(path, ref_matrix)
        data = path.read_bytes()
        path.write_bytes(data[:-8])
        with pytest.raises(IoFormatError) as err:
            read_tensor(path)
        assert err.value.code == "payload-mismatch"

    def test_unsupported_rank(self, tmp_path):
        import struct

        header = json.dumps(
            {"dtype": "f32", "shape": [8], "layout": "row-major", "name": ""}
        ).encode()
        path = tmp_path / "r1.lemt"
        path.write_bytes(
            b"LEMT" + struct.pack("<HI", 1, len(header)) + header + np.zeros(8, "<f4").tobytes()
        )
        with pytest.raises(IoFormatError) as err:
            read_tensor(path)
        assert err.value.code == "bad-rank"

    def test_byte_identical_across_runs(self, tmp_path, ref_matrix):
        a, b = tmp_path / "a.lemt", tmp_path / "b.lemt"
        write_tensor(a, ref_matrix, name="same")
        write_tensor(b, ref_matrix, name="same")
        assert a.read_bytes() == b.read_bytes()


class TestMatrixContainer:
    def test_round_trip_all_formats(self, tmp_path, ref_matrix):
        rng = np.random.default_rng(1)
        matrices = [ref_matrix] + [random_low_entropy_matrix(rng) for _ in range(10)]
        for i, matrix in enumerate(matrices):
            for encode in (encode_csr, encode_cer, encode_cser):
                enc = encode(matrix)
                path = tmp_path / f"m{i}.lemx"
                write_matrix(path, enc)
                back = read_matrix(path)
                assert type(back) is type(enc)
                assert np.array_equal(decode(back).values, matrix.values)

    def test_dense_round_trip(self, tmp_path, ref_matrix):
        path = tmp_path / "d.lemx"
        write_matrix(path, ref_matrix)
        back = read_matrix(path)
        assert np.array_equal(back.values, ref_matrix.values)

    def test_on_disk_size_is_storage_bits_plus_header(self, tmp_path, ref_matrix):
        for encode, kind in ((encode_csr, "csr"), (encode_cer, "cer"), (encode_cser, "cser")):
            enc = encode(ref_matrix)
            path = tmp_path / f"{kind}.lemx"
            write_matrix(path, enc)
            assert path.stat().st_size == storage_bits(enc) // 8 + header_bytes(kind)

    def test_value_width_enforced(self, tmp_path):
        matrix = DenseMatrix([[0.1, 0.0]], element_bits=8)  # 0.1 not an 8-bit integer
        with pytest.raises(IoFormatError) as err:
            write_matrix(tmp_path / "bad.lemx", encode_csr(matrix))
        assert err.value.code == "value-width"

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "x.lemx"
        path.write_bytes(b"LEMT" + b"\x00" * 30)
        with pytest.raises(IoFormatError) as err:
            read_matrix(path)
        assert err.value.code == "bad-magic"


class TestConvMetaSidecar:
    def test_round_trip(self, tmp_path):
        meta = ConvLayerMeta(filters=20, channels=1, filter_h=5, filter_w=5, patches=576)
        path = tmp_path / "layer.meta.json"
        write_conv_meta(path, meta)
        assert read_conv_meta(path) == meta


class TestCostTableIo:
    def test_round_trip(self, tmp_path):
        table = default_energy_table()
        path = tmp_path / "energy.json"
        write_cost_table(path, table)
        back = read_cost_table(path)
        assert back.entries == table.entries
        assert back.unit == "pJ"
        assert back.name == table.name

    def test_document_shape(self, tmp_path):
        path = tmp_path / "energy.json"
        write_cost_table(path, default_energy_table())
        doc = json.loads(path.read_text())
        assert set(doc) == {"unit", "name", "metadata", "entries"}
        assert {"op", "bits", "tier", "cost"} == set(doc["entries"][0])


def _record(**overrides):
    base = dict(
        matrix_id="m0",
        format="cer",
        storage_bits_exact=6.533333,
        storage_bits_formula=5.1234567,
        ops_input_load=28,
        ops_coli_load=28,
        ops_omega_load=10,
        ops_add=41,
        ops_mul=10,
        ops_others=23,
        ops_total=140,
        energy_pj=1234.56789,
        time_ns_modeled=None,
        time_ns_wallclock=8000.0,
        entropy=1.4903313725998946,
        p0=0.5333333333,
        k_bar=2.0,
        k_tilde=0.0,
        m=5,
        n=12,
        seed=7,
        tables_used="energy-45nm",
    )
    base.update(overrides)
    return BenchRecord(**base)


class TestBenchReport:
    def test_empty_report_header_only_csv(self, tmp_path):
        path = tmp_path / "r.csv"
        write_report(BenchReport(), "csv", path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("matrix_id,format,storage_bits_exact")

    def test_single_record_row(self, tmp_path):
        path = tmp_path / "r.csv"
        write_report(BenchReport([_record()]), "csv", path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 2
        assert lines[1].split(",")[0] == "m0"
        assert "" in lines[1].split(",")  # None column stays empty

    def test_json_round_trip_exact(self, tmp_path):
        report = BenchReport([_record(), _record(format="csr", energy_pj=99.5)], run_label="t")
        path = tmp_path / "r.json"
        write_report(report, "json", path)
        back = read_report(path)
        assert back.run_label == "t"
        assert back.records == report.rounded().records

    def test_csv_json_identical_data(self, tmp_path):
        report = BenchReport([_record()])
        write_report(report, "csv", tmp_path / "r.csv")
        write_report(report, "json", tmp_path / "r.json")
        csv_row = (tmp_path / "r.csv").read_text().strip().splitlines()[1].split(",")
        json_rec = json.loads((tmp_path / "r.json").read_text())["records"][0]
        from lemt.io import REPORT_COLUMNS

        for col, cell in zip(REPORT_COLUMNS, csv_row):
            expected = json_rec[col]
            if expected is None:
                assert cell == ""
            else:
                assert str(expected) == cell

    def test_six_significant_digits(self, tmp_path):
        path = tmp_path / "r.json"
        write_report(BenchReport([_record(energy_pj=1234.56789)]), "json", path)
        rec = json.loads(path.read_text())["records"][0]
        assert rec["energy_pj"] == 1234.57
        assert rec["storage_bits_exact"] == 6.53333

    def test_byte_identical_across_runs(self, tmp_path):
        report = BenchReport([_record()])
        write_report(report, "csv", tmp_path / "a.csv")
        write_report(report, "csv", tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
