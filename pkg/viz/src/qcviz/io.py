"""Readers for the qcdyn file formats.

CSV files start with ``# qcdyn-csv: <kind> v<version>`` followed by a header
row.  Snapshots are raw little-endian float64 with a JSON sidecar.  All
readers validate the version marker and required columns before returning
data.
"""

from __future__ import annotations

import csv
import json
import re

import numpy as np

SUPPORTED_VERSION = 1
_MARKER = re.compile(r"#\s*qcdyn-csv:\s*(\S+)\s+v(\d+)\s*$")


class QcvizError(Exception):
    """Base error for qcviz input problems."""


class SchemaMismatch(QcvizError):
    """Version marker or file kind does not match what the plot needs."""


class MissingColumns(QcvizError):
    """A required CSV column is absent."""


class Table:
    def __init__(self, kind, columns, rows):
        self.kind = kind
        self.columns = columns
        self.rows = rows  # list of lists of raw strings

    def column(self, name, dtype=float):
        if name not in self.columns:
            raise MissingColumns(f"column {name!r} not in {self.columns}")
        i = self.columns.index(name)
        out = []
        for row in self.rows:
            v = row[i]
            out.append(np.nan if (dtype is float and v == "") else dtype(v))
        return np.array(out)

    def text_column(self, name):
        if name not in self.columns:
            raise MissingColumns(f"column {name!r} not in {self.columns}")
        i = self.columns.index(name)
        return [row[i] for row in self.rows]


def read_csv(path, expect_kind=None) -> Table:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
        m = _MARKER.match(first.strip())
        if not m:
            raise SchemaMismatch(f"{path}: missing '# qcdyn-csv: <kind> v1' marker")
        kind, version = m.group(1), int(m.group(2))
        if version != SUPPORTED_VERSION:
            raise SchemaMismatch(f"{path}: format v{version}, "
                                 f"supported v{SUPPORTED_VERSION}")
        if expect_kind is not None and kind != expect_kind:
            raise SchemaMismatch(f"{path}: kind {kind!r}, expected {expect_kind!r}")
        reader = csv.reader(fh)
        try:
            columns = next(reader)
        except StopIteration:
            raise SchemaMismatch(f"{path}: no header row")
        rows = [row for row in reader if row]
    if not rows:
        raise SchemaMismatch(f"{path}: no data rows")
    return Table(kind, columns, rows)


def read_thresholds(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if data.get("format_version") != SUPPORTED_VERSION:
        raise SchemaMismatch(f"{path}: format_version "
                             f"{data.get('format_version')}, supported "
                             f"{SUPPORTED_VERSION}")
    for key in ("q0", "lambda0"):
        if key not in data:
            raise MissingColumns(f"{path}: missing {key!r}")
    return data


def read_snapshot(json_path):
    with open(json_path, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("format_version") != SUPPORTED_VERSION:
        raise SchemaMismatch(f"{json_path}: format_version "
                             f"{meta.get('format_version')}, supported "
                             f"{SUPPORTED_VERSION}")
    for key in ("field", "shape", "dtype", "time"):
        if key not in meta:
            raise MissingColumns(f"{json_path}: missing {key!r}")
    raw = np.fromfile(json_path[: -len(".json")] + ".f64", dtype=meta["dtype"])
    return meta, raw.reshape(meta["shape"])
