#!/usr/bin/env python3
"""
Plot dual vs normalized iterations for every trace CSV in a directory.

Usage: python plot_traces.py OUT_DIR [--output dual.png]
"""

import argparse
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from model_io import read_trace_csv


def main():
    parser = argparse.ArgumentParser(description="Plot solver traces")
    parser.add_argument("directory", help="Directory containing trace_<rule>.csv files")
    parser.add_argument("--output", default=None, help="Image path (default: DIR/dual.png)")
    args = parser.parse_args()

    directory = Path(args.directory)
    for path in sorted(directory.glob("trace_*.csv")):
        rows = read_trace_csv(path)
        plt.plot([r["normalized_iterations"] for r in rows], [r["dual"] for r in rows],
                 label=path.stem.replace("trace_", "").upper())
    plt.xlabel("normalized iterations")
    plt.ylabel("dual")
    plt.legend()
    plt.savefig(args.output or directory / "dual.png")
    plt.close()


if __name__ == "__main__":
    main()
