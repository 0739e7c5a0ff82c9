"""CSV export of simulation traces."""

import csv
from pathlib import Path

import numpy as np

from .sim import CSV_COLUMNS, TRACE_COLUMNS

_CSV_INDEX = [TRACE_COLUMNS.index(c) for c in CSV_COLUMNS]


def write_csv(trace, path):
    """
    Write ``trace`` with the fixed :data:`~vatrack.sim.CSV_COLUMNS` header.

    Floats are written as their shortest round-trip decimal (``repr``), so
    reading the file back recovers every logged value exactly.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in trace.data[:, _CSV_INDEX].tolist():
            writer.writerow([repr(v) for v in row])
    return path


def read_csv(path):
    """Read a trace CSV back into ``(header, rows)`` with float rows."""
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    return header, rows
