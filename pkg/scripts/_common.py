"""Shared helpers for the experiment scripts."""
import json
from pathlib import Path

import numpy as np

from trugnet import experiments

SETTINGS = {s.name: s for s in (experiments.RELU, experiments.SIGMOID, experiments.TANH,
                                experiments.C_LEARN, experiments.S_LEARN)}


def pick_settings(names):
    unknown = [n for n in names if n not in SETTINGS]
    if unknown:
        raise SystemExit(f"unknown settings {unknown}; choose from {list(SETTINGS)}")
    return [SETTINGS[n] for n in names]


def write_results(path, rows):
    if path is None:
        return
    clean = [{k: v for k, v in r.items() if k != "model"} for r in rows]
    Path(path).write_text(json.dumps(clean, indent=2, default=float) + "\n")
    print(f"results written to {path}")


def summarize(rows, key):
    by = {}
    for r in rows:
        by.setdefault(r["setting"], []).append(r[key])
    for name, vals in by.items():
        v = np.array(vals, dtype=float)
        se = v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else float("nan")
        print(f"{name:>10s}  {key} {v.mean():.4f} +- {se:.4f}  (n={len(v)})")
