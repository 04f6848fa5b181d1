"""End-to-end command-line behavior via cli.main()."""

import csv
import json
import math
import pathlib

import numpy as np
import pytest

from histkit import decode, encode, build_histogram, Histogram, BinMoments
from histkit.cli import main, parse_breaks_spec, run_gain_study
from histkit.errors import DomainError

FIXTURES = pathlib.Path(__file__).resolve().parents[1] / "testdata" / "dtrace"


def write_samples(path, values):
    path.write_text("".join(f"{v}\n" for v in values))


class TestBreaksSpec:
    def test_comma_list(self):
        assert parse_breaks_spec("0,1,2.5").tolist() == [0.0, 1.0, 2.5]

    def test_lin(self):
        assert parse_breaks_spec("lin:0:9:9").tolist() == list(np.linspace(0, 9, 10))

    def test_log2(self):
        b = parse_breaks_spec("log2:0:24")
        assert b.size == 25
        assert b[0] == 1.0
        assert b[-1] == 2.0**24  # 16 MiB
        assert np.all(b[1:] / b[:-1] == 2.0)

    def test_bad_specs(self):
        for spec in ("lin:0:9", "log2:3:3", "5", "a,b", "lin:9:0:3"):
            with pytest.raises(DomainError):
                parse_breaks_spec(spec)


class TestBuildCommand:
    def test_reference_example(self, tmp_path, capsys):
        inp = tmp_path / "samples.txt"
        write_samples(inp, [1, 2, 3])
        out = tmp_path / "h.hgt"
        assert main(["build", "--input", str(inp), "--breaks", "lin:0:9:9",
                     "--moments", "0", "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary == {"bins": 9, "count": 3, "mean": 1.5}
        h = decode(out.read_bytes())
        assert h.counts.tolist() == [1, 1, 1, 0, 0, 0, 0, 0, 0]

    def test_empty_file(self, tmp_path, capsys):
        inp = tmp_path / "empty.txt"
        inp.write_text("")
        out = tmp_path / "h.hgt"
        assert main(["build", "--input", str(inp), "--breaks", "0,1",
                     "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["count"] == 0
        assert summary["mean"] is None

    def test_out_of_range_sample_fails(self, tmp_path, capsys):
        inp = tmp_path / "samples.txt"
        write_samples(inp, [5.0])
        assert main(["build", "--input", str(inp), "--breaks", "0,1",
                     "--out", str(tmp_path / "h.hgt")]) == 1
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "5.0" in captured.err

    def test_missing_input_file(self, tmp_path, capsys):
        assert main(["build", "--input", str(tmp_path / "nope.txt"),
                     "--breaks", "0,1", "--out", str(tmp_path / "h.hgt")]) == 1
        assert "error" in capsys.readouterr().err


class TestMergeTrimStats:
    def _build(self, tmp_path, name, values, moments=0):
        inp = tmp_path / f"{name}.txt"
        write_samples(inp, values)
        out = tmp_path / f"{name}.hgt"
        assert main(["build", "--input", str(inp), "--breaks", "lin:0:9:9",
                     "--moments", str(moments), "--out", str(out)]) == 0
        return out

    def test_merge_with_self_doubles(self, tmp_path, capsys):
        f = self._build(tmp_path, "a", [1, 2, 3])
        out = tmp_path / "merged.hgt"
        assert main(["merge", str(f), str(f), "--out", str(out)]) == 0
        assert decode(out.read_bytes()).counts.tolist() == [2, 2, 2, 0, 0, 0, 0, 0, 0]

    def test_merge_incompatible_names_files(self, tmp_path, capsys):
        f1 = self._build(tmp_path, "a", [1, 2, 3])
        inp = tmp_path / "b.txt"
        write_samples(inp, [1.0])
        f2 = tmp_path / "b.hgt"
        main(["build", "--input", str(inp), "--breaks", "0,1,2", "--out", str(f2)])
        capsys.readouterr()
        assert main(["merge", str(f1), str(f2), "--out", str(tmp_path / "m.hgt")]) == 1
        err = capsys.readouterr().err
        assert "a.hgt" in err and "b.hgt" in err

    def test_trim(self, tmp_path, capsys):
        f = self._build(tmp_path, "a", [1, 2, 3])
        out = tmp_path / "trimmed.hgt"
        assert main(["trim", str(f), "--out", str(out)]) == 0
        h = decode(out.read_bytes())
        assert h.breaks.tolist() == [0.0, 1.0, 2.0, 3.0]

    def test_trim_all_zero_warns(self, tmp_path, capsys):
        inp = tmp_path / "z.txt"
        inp.write_text("")
        f = tmp_path / "z.hgt"
        main(["build", "--input", str(inp), "--breaks", "lin:0:4:4", "--out", str(f)])
        capsys.readouterr()
        out = tmp_path / "zt.hgt"
        assert main(["trim", str(f), "--out", str(out)]) == 0
        assert "warning" in capsys.readouterr().err
        assert decode(out.read_bytes()).counts.tolist() == [0]

    def test_stats(self, tmp_path, capsys):
        f = self._build(tmp_path, "a", [1, 2, 3])
        capsys.readouterr()
        assert main(["stats", str(f), "--quantiles", "0.05,0.5,0.95"]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["count"] == 3
        assert doc["mean"] == pytest.approx(1.5)
        h = build_histogram([1, 2, 3], np.linspace(0, 9, 10))
        assert doc["quantiles"]["0.5"] == pytest.approx(h.approx_quantile(0.5))
        assert doc["quantiles"]["0.05"] == pytest.approx(h.approx_quantile(0.05))


class TestEmdccGainBounds:
    def test_emdcc_equal_bins(self, tmp_path, capsys):
        inp = tmp_path / "s.txt"
        write_samples(inp, np.linspace(0.25, 23.75, 200))
        f = tmp_path / "h.hgt"
        main(["build", "--input", str(inp), "--breaks", "lin:0:24:24", "--out", str(f)])
        capsys.readouterr()
        assert main(["emdcc", str(f)]) == 0
        doc = json.loads(capsys.readouterr().out)
        assert doc["total"] == 1 / 24
        assert doc["method"] == "closed_form"
        assert len(doc["per_bin"]) == 24

    def test_gain_inf_sentinel(self, tmp_path, capsys):
        counts = [3, 3]
        sums = [[3.0, 6.0]]  # both bin means on right edges
        h = Histogram([0.0, 1.0, 2.0], counts, BinMoments(1, sums))
        f = tmp_path / "edge.hgt"
        f.write_bytes(encode(h))
        assert main(["gain", str(f)]) == 0
        assert capsys.readouterr().out.strip() == "inf"

    def test_gain_value(self, tmp_path, capsys):
        h = Histogram([0.0, 1.0, 2.0], [3, 3], BinMoments(1, [[1.5, 4.5]]))
        f = tmp_path / "mid.hgt"
        f.write_bytes(encode(h))
        assert main(["gain", str(f)]) == 0
        value = float(capsys.readouterr().out)
        assert value == pytest.approx(1.0 / (2.0 * math.log(2.0)), rel=1e-12)

    def test_bounds_grid3(self, capsys):
        assert main(["bounds", "--m1", "0.5", "--grid", "3"]) == 0
        rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
        assert [float(r["x"]) for r in rows] == [0.0, 0.5, 1.0]
        assert [float(r["upper"]) for r in rows] == [0.5, 1.0, 1.0]
        assert [float(r["lower"]) for r in rows] == [0.0, 0.0, 1.0]
        assert [r["regime"] for r in rows] == ["F1", "F1", "F2"]

    def test_bounds_mean_var_to_file(self, tmp_path):
        out = tmp_path / "curves.csv"
        assert main(["bounds", "--m1", "0.5", "--var", "0.1", "--grid", "11",
                     "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert len(rows) == 11
        mid = rows[5]
        assert float(mid["upper"]) == pytest.approx(0.8)
        assert float(mid["lower"]) == pytest.approx(0.2)
        assert mid["regime"] == "F4"
        assert rows[1]["regime"] == "F3"

    def test_bounds_pth(self, capsys):
        assert main(["bounds", "--m1", "0.5", "--p", "2", "--grid", "5"]) == 0
        rows = list(csv.DictReader(capsys.readouterr().out.splitlines()))
        assert rows[0]["regime"] == "p-moment"

    def test_bounds_infeasible_params(self, capsys):
        assert main(["bounds", "--m1", "0.9", "--var", "0.2", "--grid", "5"]) == 1
        assert "attainable" in capsys.readouterr().err

    def test_bounds_flag_conflicts(self, capsys):
        assert main(["bounds", "--m1", "0.5", "--var", "0.1", "--p", "2"]) == 1
        assert main(["bounds", "--var", "0.1"]) == 1
        capsys.readouterr()


class TestDtraceCommand:
    def test_fixture_to_json(self, capsys):
        assert main(["dtrace", str(FIXTURES / "two_blocks.txt")]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        docs = [json.loads(line) for line in lines]
        assert [d["name"] for d in docs] == ["read_latency", "write_latency"]
        assert docs[0]["counts"] == [0, 5, 10, 0]


class TestDemoAndStudy:
    @pytest.mark.parametrize("method", ["1", "2"])
    def test_mapreduce_demo_pass(self, method, capsys):
        assert main(["mapreduce-demo", "--shards", "7", "--method", method,
                     "--samples", "2000"]) == 0
        assert capsys.readouterr().out.strip() == "PASS"

    def test_gain_study_csv_and_summary(self, tmp_path, capsys):
        out = tmp_path / "gains.csv"
        assert main(["gain-study", "--users", "20", "--seed", "7",
                     "--out", str(out)]) == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["users"] == 20
        rows = list(csv.DictReader(out.read_text().splitlines()))
        assert len(rows) == 20
        assert all(float(r["gain"]) >= 1.0 / (2.0 * math.log(2.0)) - 1e-9 for r in rows)

    def test_gain_study_deterministic(self):
        rows1, summary1 = run_gain_study(10, 3)
        rows2, summary2 = run_gain_study(10, 3)
        assert rows1 == rows2
        assert summary1 == summary2
