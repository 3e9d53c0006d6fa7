"""TruG-RBM on binarized MNIST digits, scored by AIS test log-probability.

Defaults are the desk-scale settings (1000 training digits, 50 hidden
units, 100 epochs, 5000 AIS temperatures).  Example::

    python scripts/rbm_mnist.py --settings c-Learn [-1,1] --seeds 0 1 2 --out rbm.json
"""
import argparse

from trugnet import experiments

from _common import pick_settings, summarize, write_results


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--settings", nargs="+", default=["c-Learn", "[-1,1]"])
    p.add_argument("--seeds", nargs="+", type=int, default=[0])
    p.add_argument("--epochs", type=int)
    p.add_argument("--n-hidden", type=int)
    p.add_argument("--ais-temps", type=int)
    p.add_argument("--out")
    args = p.parse_args()
    cfg = experiments.RbmMnistConfig()
    for key in ("epochs", "n_hidden", "ais_temps"):
        if getattr(args, key) is not None:
            setattr(cfg, key, getattr(args, key))
    datasets = experiments.load_mnist(cfg)
    rows = []
    for setting in pick_settings(args.settings):
        for seed in args.seeds:
            r = experiments.rbm_mnist_run(cfg, setting, seed, datasets)
            print(f"{setting.name:>10s} seed {seed}: test log-prob {r['test_log_prob']:.2f} "
                  f"(log Z s.e. {r['std_err']:.2f}, ESS {r['ess']:.1f}) in {r['seconds']:.0f} s", flush=True)
            rows.append(r)
    summarize(rows, "test_log_prob")
    write_results(args.out, rows)


if __name__ == "__main__":
    main()
