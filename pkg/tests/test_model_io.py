"""Tests for the MINSUM1 model format and the trace/summary outputs."""

import csv
import json

import pytest

from engine import Checkpoint, SolveConfig, SolveTrace, solve
from generate import gen_random
from model_io import (ModelFormatError, format_float, merge_traces, parse_model, read_model,
                      read_trace_csv, serialize_model, write_merged_csv, write_model,
                      write_summary, write_trace_csv)

TWO_NODE_TEXT = """MINSUM1
2
2 2
1
0 1
4 0
2 0
0 1 7 5
"""


def with_lines(*lines):
    return "\n".join(lines) + "\n"


class TestParse:

    def test_two_node_file(self, two_node_model):
        assert parse_model(TWO_NODE_TEXT) == two_node_model

    def test_scientific_notation(self):
        model = parse_model(with_lines("MINSUM1", "1", "2", "0", "1e15 -2.5E-3"))
        assert model.unary[0][0] == 1e15
        assert model.unary[0][1] == -0.0025

    def test_empty_model(self):
        model = parse_model(with_lines("MINSUM1", "0", "", "0"))
        assert model.num_nodes == 0

    def test_missing_magic(self):
        with pytest.raises(ModelFormatError) as info:
            parse_model(TWO_NODE_TEXT.replace("MINSUM1", "MINSUM2"))
        assert info.value.line == 1

    def test_duplicate_edge_names_line(self):
        text = with_lines("MINSUM1", "2", "2 2", "2", "0 1", "0 1", "0 0", "0 0", "0 0 0 0", "0 0 0 0")
        with pytest.raises(ModelFormatError) as info:
            parse_model(text)
        assert info.value.line == 6
        assert "line 6" in str(info.value)

    def test_reversed_edge(self):
        with pytest.raises(ModelFormatError) as info:
            parse_model(TWO_NODE_TEXT.replace("0 1\n4 0", "1 0\n4 0"))
        assert info.value.line == 5

    def test_wrong_value_count(self):
        with pytest.raises(ModelFormatError) as info:
            parse_model(TWO_NODE_TEXT.replace("0 1 7 5", "0 1 7"))
        assert info.value.line == 8

    def test_non_numeric_cost(self):
        with pytest.raises(ModelFormatError) as info:
            parse_model(TWO_NODE_TEXT.replace("2 0\n", "2 x\n"))
        assert info.value.line == 7

    def test_truncated_file(self):
        with pytest.raises(ModelFormatError):
            parse_model(with_lines("MINSUM1", "2", "2 2", "1", "0 1", "4 0"))

    def test_trailing_content(self):
        with pytest.raises(ModelFormatError):
            parse_model(TWO_NODE_TEXT + "1 2 3\n")

    def test_infinite_cost(self):
        with pytest.raises(ModelFormatError):
            parse_model(TWO_NODE_TEXT.replace("0 1 7 5", "0 1 inf 5"))

    @pytest.mark.parametrize("old,new,line", [
        ("\n4 0\n", "\ninf 0\n", 6),
        ("\n2 0\n", "\n2 nan\n", 7),
        ("\n4 0\n", "\n1e400 0\n", 6),
        ("0 1 7 5", "0 -inf 7 5", 8),
    ])
    def test_non_finite_cost_names_its_line(self, old, new, line):
        with pytest.raises(ModelFormatError) as info:
            parse_model(TWO_NODE_TEXT.replace(old, new))
        assert info.value.line == line
        assert f"line {line}:" in str(info.value)

    def test_non_finite_unary_without_edges(self):
        with pytest.raises(ModelFormatError) as info:
            parse_model(with_lines("MINSUM1", "1", "2", "0", "nan 1"))
        assert info.value.line == 5


class TestSerialize:

    def test_round_trip_fuzz(self):
        for seed in range(100):
            model = gen_random(2 + seed % 6, 4, [0.5, 1.0][seed % 2], seed)
            assert parse_model(serialize_model(model)) == model

    def test_format_float_is_exact(self):
        x = 0.1 + 0.2
        assert float(format_float(x)) == x

    def test_file_round_trip(self, tmp_path, two_node_model):
        path = tmp_path / "two.txt"
        write_model(two_node_model, path)
        assert read_model(path) == two_node_model

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_model(tmp_path / "nope.txt")

    def test_non_utf8_file(self, tmp_path):
        path = tmp_path / "binary.txt"
        path.write_bytes(b"MINSUM1\n\xff\xfe\n")
        with pytest.raises(ModelFormatError) as info:
            read_model(path)
        assert info.value.line == 2

    def test_directory_is_not_a_model(self, tmp_path):
        with pytest.raises(ModelFormatError):
            read_model(tmp_path)


def make_trace(duals, step=1.0, calls_per_step=3):
    return SolveTrace(checkpoints=[
        Checkpoint(k * step, k * calls_per_step, dual, float(k)) for k, dual in enumerate(duals)
    ])


class TestTraces:

    def test_trace_csv(self, tmp_path, two_node_model):
        trace = solve(two_node_model, SolveConfig(rule='H'))
        path = tmp_path / "trace.csv"
        write_trace_csv(trace, path)
        assert path.read_text().splitlines()[0] == "normalized_iterations,oracle_calls,dual,wall_time_ms"
        rows = read_trace_csv(path)
        assert len(rows) == len(trace.checkpoints)
        assert rows[1]["oracle_calls"] == 3.0
        assert rows[-1]["dual"] == pytest.approx(5.0)

    def test_summary_json(self, tmp_path, two_node_model):
        path = tmp_path / "summary.json"
        write_summary(solve(two_node_model), path, {"pool_order": "lexicographic"})
        summary = json.loads(path.read_text())
        assert summary["final_energy"] == 5.0
        assert summary["pool_order"] == "lexicographic"

    def test_merge_is_a_step_function(self):
        rows = merge_traces({
            "M": make_trace([0.0, 2.0, 3.0], step=2.0),
            "H": make_trace([0.0, 4.0], step=3.0),
        })
        assert [r["normalized_iterations"] for r in rows] == ["0", "2", "3", "4"]
        assert [r["dual_m"] for r in rows] == ["0", "2", "2", "3"]
        assert [r["dual_h"] for r in rows] == ["0", "0", "4", "4"]

    def test_merge_blank_before_first_point(self):
        late = SolveTrace(checkpoints=[Checkpoint(1.0, 1, 2.0, 0.0)])
        rows = merge_traces({"U": late, "M": make_trace([0.0, 1.0])})
        assert rows[0]["dual_u"] == ""

    def test_merged_csv_header(self, tmp_path):
        path = tmp_path / "merged.csv"
        write_merged_csv({"U": make_trace([0.0]), "H": make_trace([0.0])}, path)
        with open(path, newline="") as f:
            assert next(csv.reader(f)) == ["normalized_iterations", "dual_u", "dual_h"]
