"""Run one experiment config and summarise the LEC win fractions.

    python scripts/run_experiment.py scripts/configs/desk_example1.toml [--out DIR]
"""
import argparse
import logging
import time
from pathlib import Path

import numpy as np

from maxregion.config import apply_overrides, load_config
from maxregion.experiment import combo_name, load_winners, run_experiment


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config", type=Path)
    ap.add_argument("--out")
    ap.add_argument("--replicates", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = apply_overrides(load_config(args.config),
                          {"out": args.out, "simulation.replicates": args.replicates})
    t0 = time.time()
    manifest = run_experiment(cfg)
    print(f"finished in {time.time() - t0:.0f} s")
    for stage, sec in manifest["timings_seconds"].items():
        print(f"  {stage:10s} {sec:8.1f} s")
    for nu, alpha in cfg.fit.globals:
        frac = load_winners(Path(cfg.out) / f"winners_{combo_name(nu, alpha)}.csv")
        ok = np.isfinite(frac)
        print(f"{combo_name(nu, alpha)}: mean LEC fraction {np.nanmean(frac):.3f}, "
              f"share of locations >= 0.6: {np.mean(frac[ok] >= 0.6):.3f} "
              f"({ok.sum()} scored)")


if __name__ == "__main__":
    main()
