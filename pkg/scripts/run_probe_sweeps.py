#!/usr/bin/env python3
"""Run the inequality probes at configurable scale and save the reports.

Three sweeps: the L^p size of free shell data across frequencies, the
paired-frequency product bound over increasing N1, and the triple-frequency
product bound over increasing N2.  Summaries go to stdout, long-format CSVs
to --out.

Example:
    python3 scripts/run_probe_sweeps.py --samples 10 --out /tmp/probes
"""
import argparse
import sys
import time
from pathlib import Path

from cqnls import (ProbeConfig, probe_bilinear_sweep, probe_strichartz,
                   probe_trilinear_sweep)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--samples", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--cap", type=int, default=32,
                    help="per-shell lattice radius cap (runtime knob)")
    ap.add_argument("--time-nodes", type=int, default=17)
    ap.add_argument("--n-values", type=int, nargs="+",
                    default=[1, 2, 4, 8, 16, 32, 64],
                    help="shell ladder for the L^p sweep")
    ap.add_argument("--n1-values", type=int, nargs="+", default=[4, 8, 16, 32])
    ap.add_argument("--n2-values", type=int, nargs="+", default=[2, 4, 8, 16])
    ap.add_argument("--out", type=Path, default=None)
    args = ap.parse_args()

    cfg = ProbeConfig(sample_count=args.samples, seed=args.seed,
                      n_values=tuple(args.n_values),
                      mode_radius_cap=args.cap, time_nodes=args.time_nodes)

    runs = (
        ("strichartz", lambda: probe_strichartz(cfg)),
        ("bilinear_sweep", lambda: probe_bilinear_sweep(args.n1_values, 2, cfg)),
        ("trilinear_sweep", lambda: probe_trilinear_sweep(16, args.n2_values, 1, cfg)),
    )
    for name, fn in runs:
        t0 = time.time()
        rep = fn()
        dt = time.time() - t0
        print(f"== {name} ({dt:.1f}s, {len(rep.rows)} rows)")
        for key, value in sorted(rep.summary.items()):
            print(f"   {key}: {value}")
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / f"{name}.csv"
            path.write_text(rep.to_csv(), encoding="utf-8")
            print(f"   wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
