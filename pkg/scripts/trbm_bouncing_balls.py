"""Temporal TruG-RBM on generated bouncing-ball videos.

Reports the one-step prediction error on held-out sequences before and
after training.  Example::

    python scripts/trbm_bouncing_balls.py --seeds 0 1 2 --settings c-Learn [0,1]
"""
import argparse

from trugnet import experiments

from _common import pick_settings, summarize, write_results


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--settings", nargs="+", default=["c-Learn"])
    p.add_argument("--seeds", nargs="+", type=int, default=[0])
    p.add_argument("--epochs", type=int)
    p.add_argument("--n-hidden", type=int)
    p.add_argument("--out")
    args = p.parse_args()
    cfg = experiments.TrbmBallsConfig()
    if args.epochs is not None:
        cfg.epochs = args.epochs
    if args.n_hidden is not None:
        cfg.n_hidden = args.n_hidden
    rows = []
    for setting in pick_settings(args.settings):
        for seed in args.seeds:
            r = experiments.trbm_balls_run(cfg, setting, seed)
            drop = 1 - r["trained_error"] / r["untrained_error"]
            print(f"{setting.name:>10s} seed {seed}: error {r['untrained_error']:.2f} -> {r['trained_error']:.2f} "
                  f"({drop:.0%} lower) in {r['seconds']:.0f} s", flush=True)
            rows.append(r)
    summarize(rows, "trained_error")
    write_results(args.out, rows)


if __name__ == "__main__":
    main()
