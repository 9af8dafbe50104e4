#!/usr/bin/env python3
"""
Model and Trace Files
Reader/writer for the MINSUM1 text model format and the CSV/JSON outputs
of the experiment harness.
"""

import csv
import json
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional

from engine import SolveTrace
from model import GraphicalModel, ModelError

logger = logging.getLogger(__name__)

MAGIC = "MINSUM1"
TRACE_FIELDS = ["normalized_iterations", "oracle_calls", "dual", "wall_time_ms"]


class ModelFormatError(ModelError):
    """Raised when a model file cannot be parsed; names the offending line"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def format_float(x: float) -> str:
    """17 significant digits, enough to round-trip any float64"""
    return format(float(x), ".17g")


class ModelFileReader:
    """Line-oriented parser that keeps track of where it is in the file"""

    def __init__(self, text: str):
        self.lines = text.splitlines()
        self.pos = 0

    def _next_line(self, what: str) -> List[str]:
        if self.pos >= len(self.lines):
            raise ModelFormatError(f"unexpected end of file, expected {what}", self.pos + 1)
        tokens = self.lines[self.pos].split()
        self.pos += 1
        return tokens

    def _ints(self, what: str, count: Optional[int] = None) -> List[int]:
        tokens = self._next_line(what)
        line = self.pos
        if count is not None and len(tokens) != count:
            raise ModelFormatError(f"expected {count} values for {what}, found {len(tokens)}", line)
        try:
            return [int(tok) for tok in tokens]
        except ValueError:
            raise ModelFormatError(f"non-integer value in {what}", line)

    def _floats(self, what: str, count: int) -> List[float]:
        tokens = self._next_line(what)
        line = self.pos
        if len(tokens) != count:
            raise ModelFormatError(f"expected {count} values for {what}, found {len(tokens)}", line)
        try:
            values = [float(tok) for tok in tokens]
        except ValueError:
            raise ModelFormatError(f"non-numeric value in {what}", line)
        if not all(math.isfinite(x) for x in values):
            raise ModelFormatError(f"non-finite value in {what}", line)
        return values

    def read(self) -> GraphicalModel:
        """
        Parse the whole file

        Returns:
            GraphicalModel

        Raises:
            ModelFormatError: On any syntax or consistency error
        """
        header = self._next_line("magic")
        if header != [MAGIC]:
            raise ModelFormatError(f"missing magic {MAGIC!r}", 1)

        (num_nodes,) = self._ints("node count", 1)
        if num_nodes < 0:
            raise ModelFormatError("negative node count", self.pos)
        label_counts = self._ints("label counts", num_nodes)
        (num_edges,) = self._ints("edge count", 1)
        if num_edges < 0:
            raise ModelFormatError("negative edge count", self.pos)

        for u, count in enumerate(label_counts):
            if count < 1:
                raise ModelFormatError(f"node {u} has {count} labels, at least 1 required", 3)

        edges = []
        seen = set()
        for i in range(num_edges):
            u, v = self._ints(f"edge {i}", 2)
            if not (0 <= u < v < num_nodes):
                raise ModelFormatError(f"edge ({u}, {v}) must satisfy 0 <= u < v < {num_nodes}", self.pos)
            if (u, v) in seen:
                raise ModelFormatError(f"duplicate edge ({u}, {v})", self.pos)
            seen.add((u, v))
            edges.append((u, v))

        unary = [self._floats(f"unary costs of node {u}", count) for u, count in enumerate(label_counts)]
        pairwise = [self._floats(f"pairwise costs of edge ({u}, {v})", label_counts[u] * label_counts[v])
                    for u, v in edges]

        for rest in self.lines[self.pos:]:
            if rest.strip():
                raise ModelFormatError("trailing content after last pairwise table", self.pos + 1)
        try:
            return GraphicalModel(label_counts, edges, unary, pairwise)
        except ModelError as e:
            raise ModelFormatError(str(e), max(1, self.pos)) from e


def parse_model(text: str) -> GraphicalModel:
    return ModelFileReader(text).read()


def serialize_model(model: GraphicalModel) -> str:
    """MINSUM1 text for a model"""
    lines = [MAGIC, str(model.num_nodes), " ".join(str(c) for c in model.label_counts), str(model.num_edges)]
    lines += [f"{u} {v}" for u, v in model.edges]
    lines += [" ".join(format_float(x) for x in table) for table in model.unary]
    lines += [" ".join(format_float(x) for x in table.ravel()) for table in model.pairwise]
    return "\n".join(lines) + "\n"


def read_model(path) -> GraphicalModel:
    """
    Load a model file

    Args:
        path: Path to a MINSUM1 file

    Returns:
        GraphicalModel

    Raises:
        FileNotFoundError: If the file does not exist
        ModelFormatError: If it cannot be read as UTF-8 text or does not parse
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Model file not found: {path}")
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ModelFormatError(f"cannot read model file {path}: {e.strerror or e}") from e
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ModelFormatError("not valid UTF-8 text", data.count(b"\n", 0, e.start) + 1) from e
    model = parse_model(text)
    logger.info(f"Loaded {model} from {path}")
    return model


def write_model(model: GraphicalModel, path) -> None:
    Path(path).write_text(serialize_model(model), encoding="utf-8")


def write_trace_csv(trace: SolveTrace, path) -> None:
    """One CSV row per checkpoint"""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=TRACE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for point in trace.checkpoints:
            writer.writerow({
                "normalized_iterations": format_float(point.normalized_iterations),
                "oracle_calls": point.oracle_calls,
                "dual": format_float(point.dual),
                "wall_time_ms": f"{point.wall_time_ms:.3f}",
            })


def read_trace_csv(path) -> List[Dict[str, float]]:
    with open(path, newline="", encoding="utf-8") as f:
        return [{key: float(value) for key, value in row.items()} for row in csv.DictReader(f)]


def write_summary(trace: SolveTrace, path, extra: Optional[Dict] = None) -> None:
    summary = trace.summary()
    if extra:
        summary.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(summary, f, indent=2)


def merge_traces(traces: Dict[str, SolveTrace]) -> List[Dict[str, object]]:
    """
    Join several traces on normalized_iterations

    Each rule column holds the dual of that rule's latest checkpoint at or
    before the row's key (empty before its first checkpoint), so every
    column stays nondecreasing.

    Args:
        traces: Rule letter -> trace

    Returns:
        Rows with keys normalized_iterations and dual_<rule>
    """
    keys = sorted({p.normalized_iterations for t in traces.values() for p in t.checkpoints})
    rows = []
    cursors = {rule: -1 for rule in traces}
    for key in keys:
        row = {"normalized_iterations": format_float(key)}
        for rule, trace in traces.items():
            points = trace.checkpoints
            while cursors[rule] + 1 < len(points) and points[cursors[rule] + 1].normalized_iterations <= key:
                cursors[rule] += 1
            row[f"dual_{rule.lower()}"] = format_float(points[cursors[rule]].dual) if cursors[rule] >= 0 else ""
        rows.append(row)
    return rows


def write_merged_csv(traces: Dict[str, SolveTrace], path) -> None:
    fieldnames = ["normalized_iterations"] + [f"dual_{rule.lower()}" for rule in traces]
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=fieldnames, lineterminator="\n")
        writer.writeheader()
        writer.writerows(merge_traces(traces))
