"""Run every sweep in configs/ and write the CSVs.

Usage: python3 scripts/run_figures.py [--quick] [--trials N] [--workers K] [--outdir DIR] [names...]
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import replace
from pathlib import Path

from surveil.sweep import load_spec, run_sweep

ROOT = Path(__file__).resolve().parent.parent


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("names", nargs="*", help="config stems to run (default: all)")
    ap.add_argument("--configs", type=Path, default=ROOT / "configs")
    ap.add_argument("--outdir", type=Path, default=ROOT / "results")
    ap.add_argument("--trials", type=int, help="override Monte Carlo trials")
    ap.add_argument("--quick", action="store_true", help="5000 trials per point")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    files = sorted(args.configs.glob("*.cfg"))
    if args.names:
        files = [f for f in files if f.stem in args.names]
    if not files:
        print("no matching configs", file=sys.stderr)
        return 2
    trials = 5000 if args.quick else args.trials
    for f in files:
        spec, params = load_spec(f.read_text())
        changes = {"output_path": str(args.outdir / f"{f.stem}.csv")}
        if trials:
            changes["trials"] = trials
        spec = replace(spec, **changes)
        start = time.perf_counter()
        run_sweep(spec, params, workers=args.workers)
        print(f"{f.stem}: {spec.output_path} ({time.perf_counter() - start:.1f} s)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
