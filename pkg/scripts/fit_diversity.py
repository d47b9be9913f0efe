"""Fit log-log outage slopes from an EMR sweep CSV (outage quantity).

Usage: python3 scripts/fit_diversity.py results/fig7_emr.csv
"""

from __future__ import annotations

import csv
import sys

from surveil.analytics import InsufficientData, estimate_diversity_order


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 1:
        print(__doc__, file=sys.stderr)
        return 2
    with open(argv[0], newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "EMR" not in rows[0]:
        print("expected a CSV with an EMR column", file=sys.stderr)
        return 2
    for col in rows[0]:
        if col == "EMR" or col.endswith(("_asym", "_se", "_mc")):
            continue
        pts = [(float(r["EMR"]), float(r[col])) for r in rows if r[col]]
        try:
            print(f"{col}: diversity order {estimate_diversity_order(pts):.3f}")
        except InsufficientData as exc:
            print(f"{col}: {exc}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
