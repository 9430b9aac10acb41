"""Expression-matrix ingestion and deterministic TSV/JSON emission."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path


class DataError(Exception):
    """Input file is malformed; the message carries the location."""


def _delimiter(path: Path) -> str:
    return "," if path.suffix.lower() == ".csv" else "\t"


def read_matrix(path):
    """Read a delimited matrix: header row of sample names, first column feature ids.

    Returns ``(feature_ids, sample_names, rows)`` where ``rows`` is a list of
    float lists. Tab-delimited unless the file ends in ``.csv``.
    """
    path = Path(path)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh, delimiter=_delimiter(path))
        header = None
        ids, rows = [], []
        for lineno, rec in enumerate(reader, start=1):
            if not rec or all(not f.strip() for f in rec):
                continue
            if header is None:
                header = [f.strip() for f in rec[1:]]
                if not header:
                    raise DataError(f"{path}:{lineno}: header has no sample columns")
                continue
            if len(rec) != len(header) + 1:
                raise DataError(f"{path}:{lineno}: expected {len(header) + 1} fields, found {len(rec)}")
            vals = []
            for col, field in enumerate(rec[1:], start=2):
                try:
                    v = float(field)
                except ValueError:
                    raise DataError(f"{path}:{lineno}: column {col}: cannot parse {field!r} as a number") from None
                if not math.isfinite(v):
                    raise DataError(f"{path}:{lineno}: column {col}: non-finite value {field!r}")
                vals.append(v)
            ids.append(rec[0].strip())
            rows.append(vals)
    if header is None:
        raise DataError(f"{path}: empty file")
    if not rows:
        raise DataError(f"{path}: no feature rows")
    return ids, header, rows


def read_groups(path, ncol: int) -> list[str]:
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"{path}: {exc.strerror}") from None
    labels = [ln.strip() for ln in lines]
    while labels and not labels[-1]:
        labels.pop()
    for lineno, lab in enumerate(labels, start=1):
        if not lab:
            raise DataError(f"{path}:{lineno}: empty group label")
    if len(labels) != ncol:
        raise DataError(f"{path}: {len(labels)} group labels for {ncol} matrix columns")
    if len(set(labels)) != 2:
        raise DataError(f"{path}: expected exactly 2 distinct group labels, found {len(set(labels))}")
    return labels


def fmt_float(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, int):
        return str(x)
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def write_tsv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(v if isinstance(v, str) else fmt_float(v) for v in row) + "\n")


def _json(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return "null"
        return format(obj, ".17g")
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json(str(k), indent, 0)}: {_json(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [pad + _json(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):
        return _json(obj.item(), indent, level)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON text with floats printed to 17 significant digits, key order as given."""
    return _json(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj))
