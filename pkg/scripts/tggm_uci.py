"""TruG-TGGM regression on a UCI-style CSV (Boston Housing by default).

Each split shuffles the rows with its own seed and holds out 10%.  RMSE is
reported in the original target units.  Example::

    python scripts/tggm_uci.py --splits 10 --settings [0,inf) [0,1] [-1,1] c-Learn
"""
import argparse
from pathlib import Path

from trugnet import experiments

from _common import pick_settings, summarize, write_results


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--csv", type=Path)
    p.add_argument("--settings", nargs="+", default=["[0,inf)"])
    p.add_argument("--splits", type=int, default=10)
    p.add_argument("--epochs", type=int)
    p.add_argument("--out")
    args = p.parse_args()
    cfg = experiments.TggmUciConfig()
    if args.csv is not None:
        cfg.csv_path = args.csv
    if args.epochs is not None:
        cfg.epochs = args.epochs
    rows = []
    for setting in pick_settings(args.settings):
        for split in range(args.splits):
            r = experiments.tggm_uci_run(cfg, setting, split)
            print(f"{setting.name:>10s} split {split}: RMSE {r['rmse']:.3f} in {r['seconds']:.0f} s", flush=True)
            rows.append(r)
    summarize(rows, "rmse")
    write_results(args.out, rows)


if __name__ == "__main__":
    main()
