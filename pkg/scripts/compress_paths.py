#!/usr/bin/env python3
"""Compression error study on reference paths.

Fits a circle and an S-curve with K selected basis paths for each selection
rule and prints the Frobenius reconstruction error, plus a CSV for plotting.
"""
import argparse
import csv
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from flexpath import compress, fourier_basis, shifted_sine_basis

ORDER = 24
ALTITUDE = 100.0


def reference_paths(order: int) -> dict:
    s = np.arange(order + 1) / order
    flat = np.full(order + 1, ALTITUDE)
    return {
        "circle": np.stack([100 * np.cos(2 * np.pi * s), 100 * np.sin(2 * np.pi * s), flat]),
        "s_curve": np.stack([300 * s, 80 * np.sin(2 * np.pi * s), flat]),
    }


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--keeps", type=int, nargs="+", default=[4, 6, 8, 10, 14, 18])
    ap.add_argument("--out", default="compression.csv")
    args = ap.parse_args()

    fits = {
        "lfb": lambda q, k: compress(q, fourier_basis(ORDER), k, selection="lfb"),
        "ssb": lambda q, k: compress(q, shifted_sine_basis(ORDER), k, selection="lfb"),
        "hfb": lambda q, k: compress(q, fourier_basis(ORDER), k, selection="hfb"),
    }
    rows = []
    for name, q in reference_paths(ORDER).items():
        for k in args.keeps:
            line = [f"{name} K={k:2d}"]
            for rule, fit in fits.items():
                cb = fit(q, k)
                err = float(np.linalg.norm(q - cb.reconstruct()))
                rows.append([name, k, rule, cb.compression_ratio, err])
                line.append(f"{rule} {err:10.4f}")
            print("  ".join(line))

    with open(args.out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["path", "keep", "selection", "compression_ratio", "frobenius_error"])
        w.writerows(rows)
    print(f"{len(rows)} rows -> {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
