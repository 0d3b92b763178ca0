"""Artifact writers with versioned headers.

CSV files start with comment lines naming the schema, its version and
the hash of the generating config, followed by a column header row.
Numbers are written with 17 significant digits so that a float64
round-trips exactly.  No timestamps are written, so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .config import as_jsonable

SCHEMA_VERSION = 1

SCHEMAS = {
    "trajectory": ("t", "x", "p", "psi", "phi", "E_total", "E_bath"),
    "kernel": ("tau", "w"),
    "modes": ("nu", "weight", "a_hat"),
    "gap_table": ("nu", "w_diamond", "phi"),
    "sweep": ("parameter", "value", "predicted", "measured", "agrees", "lambda0",
              "lambda_measured", "alpha_abs", "x_inf"),
    "windows": ("window_start", "frequency", "amplitude", "persistence"),
}


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def write_csv(path, schema: str, rows: Iterable[Sequence], config_hash: str,
              columns: Optional[Sequence[str]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = tuple(columns or SCHEMAS[schema])
    with open(path, "w", newline="") as fh:
        fh.write(f"# bathsim schema={schema} version={SCHEMA_VERSION}\n")
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            if len(row) != len(cols):
                raise ValueError(f"row of length {len(row)} for {len(cols)} columns")
            w.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[dict, list[str], np.ndarray]:
    """Header metadata, column names and numeric data of a written CSV."""
    meta = {}
    with open(path) as fh:
        lines = fh.read().splitlines()
    i = 0
    while i < len(lines) and lines[i].startswith("#"):
        for tok in lines[i][1:].split():
            if "=" in tok:
                k, v = tok.split("=", 1)
                meta[k] = v
        i += 1
    cols = next(csv.reader([lines[i]]))
    body = [r for r in csv.reader(lines[i + 1:]) if r]
    data = np.array([[float(c) if c else np.nan for c in r] for r in body]) if body else np.empty((0, len(cols)))
    return meta, cols, data


def write_json(path, payload: dict, config_hash: str, kind: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"schema": kind, "version": SCHEMA_VERSION, "config_hash": config_hash,
           **as_jsonable(payload)}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
    return path
