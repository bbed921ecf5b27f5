#!/usr/bin/env python3
"""Build data/ionosphere.csv from a raw UCI ionosphere.data file.

The raw file has 34 numeric features and a trailing g/b class per row;
'b' (bad radar return) maps to anomaly label 1. Download it yourself from
the UCI repository (ionosphere.data) and run:

    python scripts/make_ionosphere_csv.py /path/to/ionosphere.data
"""

from __future__ import annotations

import sys
from pathlib import Path


def main() -> int:
    if len(sys.argv) != 2:
        print(__doc__, file=sys.stderr)
        return 1
    src = Path(sys.argv[1])
    rows = []
    for line in src.read_text().strip().splitlines():
        cells = line.split(",")
        *features, cls = cells
        label = {"g": 0, "b": 1}.get(cls.strip().lower())
        if label is None:
            print(f"unexpected class {cls!r}", file=sys.stderr)
            return 1
        rows.append((features, label))

    out = Path(__file__).resolve().parent.parent / "data" / "ionosphere.csv"
    out.parent.mkdir(exist_ok=True)
    width = len(rows[0][0])
    header = ",".join([f"f{i}" for i in range(width)] + ["label"])
    lines = [header]
    for features, label in rows:
        lines.append(",".join(features) + f",{label}")
    out.write_text("\n".join(lines) + "\n")
    anomalies = sum(label for _, label in rows)
    print(f"wrote {out} ({len(rows)} rows, {anomalies} anomalies)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
