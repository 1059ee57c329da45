"""Deterministic text output helpers shared by the trace and CLI writers."""

import json


def fmt(x):
    """Shortest round-trip decimal form of a float."""
    return repr(float(x))


def write_csv(path, header, rows):
    """Write rows of floats/ints/strings with a header, full precision."""
    lines = [",".join(header)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, (int,)) and not isinstance(cell, bool):
                cells.append(str(cell))
            else:
                cells.append(fmt(cell))
        lines.append(",".join(cells))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
