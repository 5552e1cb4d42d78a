#!/usr/bin/env python3
"""GA-tuned light-spot tracking: both arms searched on one shared signal.

    python3 scripts/run_dvs_comparison.py --out runs/dvs --workers 1

Writes the signal, one optimize directory per arm and a report (table.csv,
plot.csv with best-so-far per generation) under ``--out``. This is the same
sequence as the CLI verbs ``signal``, ``optimize`` and ``report``.
"""

import argparse
import logging
from pathlib import Path

from scobul.cli import cmd_optimize, cmd_report, cmd_signal
from scobul.config import load_config

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=CONFIGS / "dvs_desk.ini")
    ap.add_argument("--out", type=Path, default=Path("runs/dvs"))
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed, **{"signal.seed": args.seed, "ga.seed": args.seed})
    sig = args.out / "signal"
    sig.mkdir(parents=True, exist_ok=True)
    cmd_signal(cfg, sig)
    best = {}
    for arm in ("scobul", "stdp"):
        res = cmd_optimize(cfg, arm, args.out / arm, sig, workers=args.workers)
        best[arm] = res.best_fitness
        print(f"{arm}: best normalized_msd {res.best_fitness:.4f} after {len(res.history)} generations")
    cmd_report([args.out / arm / "history.csv" for arm in best], args.out / "report")
    print(f"scobul < stdp: {best['scobul'] < best['stdp']}, scobul < 1: {best['scobul'] < 1.0}")


if __name__ == "__main__":
    main()
