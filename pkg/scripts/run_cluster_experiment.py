#!/usr/bin/env python3
"""Cluster-recognition comparison of the two plasticity arms over several seeds.

    python3 scripts/run_cluster_experiment.py --seeds 5

Each seed draws a fresh signal and topology; both arms see the same signal.
Prints one row per seed and a summary.
"""

import argparse
import time
from pathlib import Path

import numpy as np

from scobul.config import load_config
from scobul.experiment import make_signal, run_cluster

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--scobul", type=Path, default=CONFIGS / "cluster_scobul.ini")
    ap.add_argument("--stdp", type=Path, default=CONFIGS / "cluster_stdp.ini")
    args = ap.parse_args()

    cfg_s, cfg_b = load_config(args.scobul), load_config(args.stdp)
    rows = []
    print("seed  scobul_f1  stdp_f1  seconds")
    for seed in range(args.seeds):
        t0 = time.perf_counter()
        over = {"seed": seed, "signal.seed": seed}
        a, b = cfg_s.replace(**over), cfg_b.replace(**over)
        signal = make_signal(a)
        fs = run_cluster(a, signal, "scobul")["mean_matched_f1"]
        fb = run_cluster(b, signal, "stdp")["mean_matched_f1"]
        rows.append((fs, fb))
        print(f"{seed:4d}  {fs:9.3f}  {fb:7.3f}  {time.perf_counter() - t0:7.1f}")
    f = np.array(rows)
    print(f"mean  {f[:, 0].mean():9.3f}  {f[:, 1].mean():7.3f}")
    print(f"scobul >= 0.8 in {int((f[:, 0] >= 0.8).sum())}/{len(f)}, "
          f"beats stdp in {int((f[:, 0] > f[:, 1]).sum())}/{len(f)}")


if __name__ == "__main__":
    main()
