"""Deterministic CSV output with a provenance comment line."""
from __future__ import annotations

import csv
import os


def fmt(x):
    if isinstance(x, str):
        return x
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return "%.17g" % float(x)


def write_csv(path, columns, rows, meta=None):
    """Write ``rows`` under ``columns``; ``meta`` goes into a leading ``#`` line.

    Floats are written with 17 significant digits, so identical inputs give
    byte-identical files.
    """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(x) for x in row])


def read_csv(path):
    """Return ``(meta, columns, rows)``; rows are lists of strings."""
    meta = {}
    with open(path, newline="") as fh:
        lines = [ln for ln in fh]
    body = []
    for ln in lines:
        if ln.startswith("#"):
            for item in ln[1:].split():
                if "=" in item:
                    k, v = item.split("=", 1)
                    meta[k] = v
        elif ln.strip():
            body.append(ln)
    reader = list(csv.reader(body))
    if not reader:
        return meta, [], []
    return meta, reader[0], reader[1:]
