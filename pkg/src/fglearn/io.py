"""Text formats for factor graphs, learned models and sample files.

Model files::

    # comment
    vars 3
    var 0 2 rain
    var 1 2
    var 2 3
    baseline 0 0 0        (learned models only)
    factor 2 0 1
    given 1 2             (optional; "given 0" is an empty conditioning set)
    0.0
    ...                   (one log value per line, last scope variable fastest)

Sample files: a header of comma-separated variable names, then one row of
comma-separated value indices per sample.  ``#`` lines are comments; the
writer records ``# seed: <s>`` and ``# cardinalities: <c,...>`` so a file
read back reproduces the dataset exactly.
"""
from __future__ import annotations

import os
from io import StringIO
from typing import Iterator, TextIO

import numpy as np

from .canonical import CanonicalFactor
from .model import Factor, FactorGraph, ValidationError, VariableSpec
from .params import LearnedModel
from .sampling import Dataset


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _lines(text: str) -> Iterator[tuple[int, list[str]]]:
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _write_header(out: TextIO, variables) -> None:
    out.write(f"vars {len(variables)}\n")
    for v in variables:
        out.write(f"var {v.id} {v.cardinality}" + (f" {v.name}" if v.name else "") + "\n")


def _write_factor(out: TextIO, factor: Factor, given=None) -> None:
    out.write(f"factor {len(factor.scope)} " + " ".join(map(str, factor.scope)) + "\n")
    if given is not None:
        out.write(f"given {len(given)}" + "".join(f" {i}" for i in given) + "\n")
    for value in factor.log_values.ravel():
        out.write(_fmt(value) + "\n")


def format_graph(graph: FactorGraph) -> str:
    buf = StringIO()
    _write_header(buf, graph.variables)
    for f in graph.factors:
        _write_factor(buf, f)
    return buf.getvalue()


def format_model(model: LearnedModel) -> str:
    buf = StringIO()
    _write_header(buf, model.variables)
    buf.write("baseline " + " ".join(map(str, model.baseline)) + "\n")
    for cf in model.canonical_factors:
        _write_factor(buf, cf.factor, cf.given)
    return buf.getvalue()


def parse_model_text(text: str):
    """Parse either format; returns ``(variables, baseline, [(factor, given), ...])``."""
    tokens = list(_lines(text))
    pos = 0

    def take(expected: str) -> tuple[int, list[str]]:
        nonlocal pos
        if pos >= len(tokens):
            raise ValidationError(f"unexpected end of file, expected {expected!r}")
        lineno, parts = tokens[pos]
        pos += 1
        if parts[0] != expected:
            raise ValidationError(f"line {lineno}: expected {expected!r}, got {parts[0]!r}")
        return lineno, parts

    try:
        lineno, parts = take("vars")
        n = int(parts[1])
        variables = []
        for _ in range(n):
            lineno, parts = take("var")
            name = " ".join(parts[3:]) or None
            variables.append(VariableSpec(int(parts[1]), int(parts[2]), name))
        baseline = None
        if pos < len(tokens) and tokens[pos][1][0] == "baseline":
            lineno, parts = take("baseline")
            baseline = tuple(int(v) for v in parts[1:])
            if len(baseline) != n:
                raise ValidationError(f"line {lineno}: baseline needs {n} values")
        entries = []
        while pos < len(tokens):
            lineno, parts = take("factor")
            size = int(parts[1])
            scope = tuple(int(i) for i in parts[2:])
            if len(scope) != size:
                raise ValidationError(f"line {lineno}: factor declares {size} ids, lists {len(scope)}")
            given = None
            if pos < len(tokens) and tokens[pos][1][0] == "given":
                lineno, parts = take("given")
                given = tuple(int(i) for i in parts[2:])
                if len(given) != int(parts[1]):
                    raise ValidationError(f"line {lineno}: given size mismatch")
            shape = tuple(variables[i].cardinality for i in scope)
            count = int(np.prod(shape))
            if pos + count > len(tokens):
                raise ValidationError(f"factor over {scope} is missing table entries")
            values = [float(tokens[pos + t][1][0]) for t in range(count)]
            pos += count
            entries.append((Factor(scope, np.array(values).reshape(shape)), given))
    except (IndexError, ValueError) as err:
        if isinstance(err, ValidationError):
            raise
        raise ValidationError(f"malformed model file: {err}") from None
    return tuple(variables), baseline, entries


def parse_graph(text: str) -> FactorGraph:
    variables, _, entries = parse_model_text(text)
    return FactorGraph(variables, tuple(f for f, _ in entries))


def parse_model(text: str) -> LearnedModel:
    variables, baseline, entries = parse_model_text(text)
    if baseline is None:
        raise ValidationError("learned model file needs a baseline line")
    factors = tuple(CanonicalFactor(f, baseline, g) for f, g in entries)
    return LearnedModel(variables, baseline, factors)


def read_graph(path: str | os.PathLike) -> FactorGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())


def read_model(path: str | os.PathLike) -> LearnedModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def write_graph(graph: FactorGraph, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_graph(graph))


def write_model(model: LearnedModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_model(model))


def format_samples(data: Dataset) -> str:
    lines = [",".join(v.label for v in data.variables)]
    if data.seed is not None:
        lines.append(f"# seed: {data.seed}")
    lines.append("# cardinalities: " + ",".join(str(c) for c in data.cardinalities))
    lines.extend(",".join(map(str, row)) for row in data.rows.tolist())
    return "\n".join(lines) + "\n"


def parse_samples(text: str, variables=None) -> Dataset:
    """Parse a sample file; cardinalities come from ``variables``, the file, or the data."""
    header = None
    seed = None
    cards = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            key = key.strip()
            if key == "seed":
                seed = int(value)
            elif key == "cardinalities":
                cards = [int(c) for c in value.split(",")]
            continue
        fields = [f.strip() for f in line.split(",")]
        if header is None:
            header = fields
            continue
        try:
            rows.append([int(f) for f in fields])
        except ValueError:
            raise ValidationError(f"line {lineno}: non-integer value in sample row") from None
        if len(fields) != len(header):
            raise ValidationError(f"line {lineno}: expected {len(header)} values")
    if header is None or not rows:
        raise ValidationError("sample file has no header or no rows")
    arr = np.array(rows, dtype=np.int64)
    if variables is None:
        if cards is None:
            cards = [max(2, int(c) + 1) for c in arr.max(axis=0)]
        variables = tuple(VariableSpec(i, c, None if name == f"X{i}" else name)
                          for i, (name, c) in enumerate(zip(header, cards)))
    return Dataset(variables, arr, seed)


def read_samples(path: str | os.PathLike, variables=None) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return parse_samples(fh.read(), variables)


def write_samples(data: Dataset, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_samples(data))
