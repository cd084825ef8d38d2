#!/usr/bin/env python3
"""Plot every curve CSV in an experiment output directory.

The tool itself never renders figures; this companion script turns each
`<out>/<curve>.csv` into `<out>/<curve>.png`, using the first column as
the x axis and every numeric column after it as one line.

Usage: python scripts/plot_curves.py RESULTS_DIR [RESULTS_DIR ...]
"""
import csv
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_csv(path: Path) -> Path:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], rows[1:]
    numeric = []
    for j in range(len(header)):
        try:
            numeric.append([float(r[j]) for r in data])
        except ValueError:
            numeric.append(None)  # label column, skipped
    xs = next(col for col in numeric if col is not None)
    x_name = header[numeric.index(xs)]
    fig, ax = plt.subplots(figsize=(6, 4))
    for name, col in zip(header, numeric):
        if col is None or col is xs:
            continue
        ax.plot(xs, col, marker="o", ms=3, label=name)
    ax.set_xlabel(x_name)
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    out = path.with_suffix(".png")
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def main() -> int:
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    for arg in sys.argv[1:]:
        for path in sorted(Path(arg).glob("*.csv")):
            print(plot_csv(path))
    return 0


if __name__ == "__main__":
    sys.exit(main())
