import os

import pytest
import yaml

from plotkit import PlotSpec, SchemaError, load_aggregate, load_trace, render
from plotkit.cli import main as cli_main

TRACE_HEADER = "step,loss,grad_norm,full_pass_equivalent,wall_clock_s,recombinations"


def write_trace(path, rows):
    lines = [TRACE_HEADER] + [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def sample_traces(tmp_path):
    a = write_trace(
        tmp_path / "gd.csv",
        [(0, 0.7, 0.2, 1.0, 0.0, 0), (1, 0.5, 0.1, 2.0, 0.1, 0), (2, 0.4, 0.05, 3.0, 0.2, 0)],
    )
    b = write_trace(
        tmp_path / "cagd.csv",
        [(0, 0.7, 0.2, 1.0, 0.0, 0), (1, 0.45, "nan", 1.1, 0.05, 1), (2, 0.35, 0.04, 2.1, 0.1, 1)],
    )
    return a, b


def write_aggregate(path):
    lines = [
        "gamma,n,gd_wall_s,gd_full_passes,cagd_wall_s,cagd_full_passes,ratio,fpe_ratio_cagd",
        "0.1,1000,1.0,300.0,0.2,30.0,5.0,10.0",
        "0.05,1000,2.0,600.0,0.25,40.0,8.0,15.0",
        "0.1,5000,4.0,310.0,0.3,25.0,13.3,12.4",
        "0.05,5000,8.0,620.0,0.4,35.0,20.0,17.7",
    ]
    path.write_text("\n".join(lines) + "\n")
    return str(path)


class TestLoaders:
    def test_load_trace(self, tmp_path):
        a, _ = sample_traces(tmp_path)
        data = load_trace(a)
        assert data["loss"] == [0.7, 0.5, 0.4]
        assert data["full_pass_equivalent"] == [1.0, 2.0, 3.0]

    def test_missing_column_named(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("step,loss\n0,0.5\n")
        with pytest.raises(SchemaError, match="grad_norm"):
            load_trace(str(path))

    def test_non_numeric_cell_located(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text(TRACE_HEADER + "\n0,oops,0.1,1.0,0.0,0\n")
        with pytest.raises(SchemaError, match="row 2, column 'loss'"):
            load_trace(str(path))

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(SchemaError, match="empty"):
            load_trace(str(path))

    def test_header_only(self, tmp_path):
        path = tmp_path / "headeronly.csv"
        path.write_text(TRACE_HEADER + "\n")
        with pytest.raises(SchemaError, match="no data rows"):
            load_trace(str(path))

    def test_aggregate_missing_ratio(self, tmp_path):
        path = tmp_path / "agg.csv"
        path.write_text("gamma,n\n0.1,100\n")
        with pytest.raises(SchemaError, match="'ratio'"):
            load_aggregate(str(path))

    def test_aggregate_roundtrip(self, tmp_path):
        rows = load_aggregate(write_aggregate(tmp_path / "agg.csv"))
        assert len(rows) == 4
        assert {r["n"] for r in rows} == {1000.0, 5000.0}


class TestRender:
    def test_loss_vs_full_pass_two_traces(self, tmp_path):
        a, b = sample_traces(tmp_path)
        out = str(tmp_path / "loss.png")
        render(PlotSpec(inputs=[a, b], out=out))
        assert os.path.getsize(out) > 0

    def test_ratio_curves_from_aggregate(self, tmp_path):
        agg = write_aggregate(tmp_path / "agg.csv")
        out = str(tmp_path / "ratio.png")
        render(PlotSpec(inputs=[agg], out=out, kind="ratio"))
        assert os.path.getsize(out) > 0

    def test_grad_norm_skips_nan_rows(self, tmp_path):
        _, b = sample_traces(tmp_path)
        out = str(tmp_path / "gn.png")
        render(PlotSpec(inputs=[b], out=out, y="grad_norm"))
        assert os.path.getsize(out) > 0

    def test_invalid_axis_rejected(self, tmp_path):
        a, _ = sample_traces(tmp_path)
        with pytest.raises(ValueError):
            render(PlotSpec(inputs=[a], out=str(tmp_path / "x.png"), y="ratio"))


class TestCli:
    def test_flag_mode(self, tmp_path, capsys):
        a, b = sample_traces(tmp_path)
        out = str(tmp_path / "fig.png")
        assert cli_main([a, b, "--out", out]) == 0
        assert os.path.exists(out)
        assert "wrote" in capsys.readouterr().out

    def test_spec_file_mode(self, tmp_path):
        agg = write_aggregate(tmp_path / "agg.csv")
        out = str(tmp_path / "fig.png")
        spec_path = tmp_path / "spec.yaml"
        spec_path.write_text(yaml.safe_dump({"kind": "ratio", "inputs": [agg], "out": out}))
        assert cli_main([str(spec_path)]) == 0
        assert os.path.exists(out)

    def test_malformed_csv_exits_nonzero_with_column(self, tmp_path, capsys):
        path = tmp_path / "bad.csv"
        path.write_text("step,loss\n0,0.5\n")
        rc = cli_main([str(path), "--out", str(tmp_path / "fig.png")])
        assert rc == 1
        err = capsys.readouterr().err
        assert "grad_norm" in err

    def test_empty_trace_exits_nonzero(self, tmp_path, capsys):
        path = tmp_path / "empty.csv"
        path.write_text("")
        rc = cli_main([str(path), "--out", str(tmp_path / "fig.png")])
        assert rc == 1
        assert "empty" in capsys.readouterr().err

    def test_unknown_spec_key_rejected(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.yaml"
        spec_path.write_text(yaml.safe_dump({"inputs": ["x.csv"], "out": "o.png", "bogus": 1}))
        assert cli_main([str(spec_path)]) == 1
        assert "bogus" in capsys.readouterr().err
