#!/usr/bin/env python3
"""Run the four default convergence experiments and write their reports.

Usage: python scripts/run_default_suite.py [--out-root OUT] [--seed S]

Equivalent to `hullsim run --config configs/<name>.cfg` for each config, with
reports under <out-root>/<label>/.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from hullsim import harness

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"
CONFIGS = (
    "e1_interval_rate.cfg",
    "e2_state_sigma.cfg",
    "e3_shrinking_ball.cfg",
    "e4_square_hpoly.cfg",
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out-root", default="out")
    parser.add_argument("--seed", type=int, default=None)
    args = parser.parse_args(argv)

    for name in CONFIGS:
        overrides = {"seed": args.seed} if args.seed is not None else None
        config = harness.load_config(CONFIG_DIR / name, overrides)
        t0 = time.perf_counter()
        report = harness.run_experiment(config)
        elapsed = time.perf_counter() - t0
        out_dir = Path(args.out_root) / config.label
        harness.emit_report(report, out_dir, config.formats)
        print(f"{config.label}: {elapsed:.1f}s -> {out_dir}")
        probe_indices = [-1] if report.dim == 1 else range(len(report.probes))
        for j in config.j_indices:
            for p in probe_indices:
                medians = [f"{m:.5f}" for m in report.median_errors(j, p)]
                tag = f"j={j}" if p == -1 else f"j={j} probe={p}"
                print(f"  {tag}: median errors over N={report.n_grid}: {medians}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
