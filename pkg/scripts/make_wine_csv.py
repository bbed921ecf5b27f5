#!/usr/bin/env python3
"""Build data/wine.csv in the outlier-detection layout.

Uses scikit-learn's bundled copy of the UCI wine data: cultivars 2 and 3
(119 points) become inliers, the first 10 points of cultivar 1 become the
outliers, giving the usual 129-instance / 7.75%-anomaly variant.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np


def main() -> int:
    try:
        from sklearn.datasets import load_wine
    except ImportError:
        print("scikit-learn is required: pip install scikit-learn", file=sys.stderr)
        return 1
    raw = load_wine()
    inliers = raw.data[raw.target != 0]
    outliers = raw.data[raw.target == 0][:10]
    points = np.vstack([inliers, outliers])
    labels = np.concatenate([np.zeros(len(inliers), int), np.ones(len(outliers), int)])

    out = Path(__file__).resolve().parent.parent / "data" / "wine.csv"
    out.parent.mkdir(exist_ok=True)
    header = ",".join([f"f{i}" for i in range(points.shape[1])] + ["label"])
    lines = [header]
    for row, label in zip(points, labels):
        lines.append(",".join(repr(float(v)) for v in row) + f",{label}")
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {out} ({points.shape[0]} rows, {int(labels.sum())} anomalies)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
