"""Plain delimited text tables with a comment header block."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def write_table(path, header_lines, column_names, rows) -> None:
    """Write rows as tab-separated text; header lines become '#' comments."""
    path = Path(path)
    rows = np.atleast_2d(np.asarray(rows))
    with open(path, "w") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write("# " + "\t".join(column_names) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (complex, np.complexfloating)):
        return f"{v.real:.12e}\t{v.imag:.12e}"
    return f"{float(v):.12e}"
