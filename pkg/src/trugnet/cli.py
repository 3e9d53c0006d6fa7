"""Command-line entry point: ``trugnet {train,eval,sample,gen-data}``.

Exit codes: 0 success, 2 configuration or checkpoint error, 3 numerical
failure during training (the last good checkpoint is kept).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import ais, checkpoint, data, rbm, tggm, trbm
from .config import ConfigError, RunConfig, dump_config, load_config, resolve_path, validate
from .optim import NumericalError
from .training import TrainConfig, Trainer
from .trug import TrugParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


class UnsupportedOperation(ValueError):
    pass


# ---------------------------------------------------------------- setup helpers

def _trug(cfg: RunConfig) -> TrugParams:
    m = cfg.model
    kw = dict(train_lower=m.learn_lower, train_upper=m.learn_upper)
    if m.trunc_mode == "per_unit":
        return TrugParams.per_unit(m.n_hidden, m.xi_lower, m.xi_upper, **kw)
    return TrugParams.shared(m.xi_lower, m.xi_upper, **kw)


def build_model(cfg: RunConfig, datasets: dict, rng: np.random.Generator):
    m = cfg.model
    kind = cfg.run.model
    if kind == "rbm":
        return rbm.RbmModel.init(datasets["train"].shape[1], m.n_hidden, rng, _trug(cfg), m.weight_var)
    if kind == "trbm":
        return trbm.TrbmModel.init(datasets["train"].shape[2], m.n_hidden, rng, _trug(cfg), m.weight_var)
    tr = datasets["train"]
    return tggm.TggmModel.init(tr.inputs.shape[1], m.n_hidden, tr.targets.shape[1], rng, _trug(cfg),
                               m.weight_var, m.sigma2)


def _limit(arr, n):
    return arr[:n] if n else arr


def _load_images(path: Path, cfg: RunConfig, rng, limit: int) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == data.BITMAP_MAGIC:
        seqs = data.read_bitmaps(path)
        return _limit(seqs.reshape(seqs.shape[0], -1), limit).astype(float)
    stochastic = cfg.data.binarize == "stochastic"
    ds = data.load_idx_images(path, cfg.data.threshold, stochastic, rng if stochastic else None,
                              limit=limit or None)
    return ds.images.astype(float)


def load_datasets(cfg: RunConfig) -> dict:
    """Training and test data for the configured model."""
    d = cfg.data
    kind = cfg.run.model
    if kind == "tggm":
        train, test = data.load_regression_csv(resolve_path(d.csv_path), d.target_column, d.split_seed,
                                               d.test_fraction, d.header)
        return {"train": train, "test": test}
    if kind == "rbm":
        rng = np.random.default_rng([cfg.run.seed, 7])  # only used by stochastic binarization
        return {"train": _load_images(resolve_path(d.train_path), cfg, rng, d.train_limit),
                "test": _load_images(resolve_path(d.test_path), cfg, rng, d.test_limit)}
    return {"train": _limit(data.read_bitmaps(resolve_path(d.train_path)), d.train_limit).astype(float),
            "test": _limit(data.read_bitmaps(resolve_path(d.test_path)), d.test_limit).astype(float)}


def train_config(cfg: RunConfig) -> TrainConfig:
    return TrainConfig(epochs=cfg.run.epochs, optimizer=cfg.optimizer_config(), cd_k=cfg.cd.k,
                       persistent=cfg.cd.persistent, n_cycles=cfg.tggm.n_cycles,
                       filter_mode=cfg.trbm.filter_mode, train_precision=cfg.model.train_precision,
                       learn_sigma2=cfg.model.learn_sigma2, anneal_horizon=cfg.optim.trunc_horizon)


def training_data(kind: str, train):
    if kind == "tggm":
        return (train.inputs, train.targets)
    return train


# ---------------------------------------------------------------- metrics

def train_proxy(kind: str, model, train) -> float:
    """Cheap training objective proxy: reconstruction, prediction or fit error."""
    if kind == "rbm":
        x = train[:1000]
        st = rbm.phase_stats(model, x)
        return float(np.mean((rbm.visible_conditional(model, st.eh) - x) ** 2))
    if kind == "trbm":
        return trbm.prediction_error(model, train[:100])
    return tggm.rmse(model, train.inputs, train.targets, train.target_stats.std)


def evaluate(cfg: RunConfig, model, datasets: dict, rng: np.random.Generator) -> dict:
    kind = cfg.run.model
    test = datasets["test"]
    if kind == "rbm":
        a = cfg.ais
        base = ais.base_bias_from_data(datasets["train"]) if a.base_from_data and "train" in datasets else None
        acfg = ais.AisConfig(n_temps=a.n_temps, n_chains=a.n_chains, base_bias=base)
        res = ais.test_log_prob(acfg, model, test, rng, n_runs=a.n_runs)
        return {"test_log_prob": res.mean, "log_z": res.log_z, "log_z_std_err": res.std_err,
                "ais_ess": float(np.mean([e.ess for e in res.estimates]))}
    if kind == "trbm":
        return {"prediction_error": trbm.prediction_error(model, test)}
    return {"rmse": tggm.rmse(model, test.inputs, test.targets, test.target_stats.std)}


def _finite_or_none(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


class MetricWriter:
    """Append-only JSON lines; non-finite numbers become null."""

    def __init__(self, path: Path):
        self.path = path
        self.start = time.monotonic()

    def write(self, record: dict) -> dict:
        rec = {"wall_time": round(time.monotonic() - self.start, 3)}
        rec.update({k: _finite_or_none(v) for k, v in record.items()})
        with open(self.path, "a") as fh:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return rec


def _trunc_summary(model) -> dict:
    return {"xi_lower_mean": float(np.mean(model.trug.lower)), "xi_upper_mean": float(np.mean(model.trug.upper))}


# ---------------------------------------------------------------- commands

def cmd_train(cfg: RunConfig) -> int:
    validate(cfg)
    out = Path(cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(dump_config(cfg))
    metrics_path = out / "metrics.jsonl"
    metrics_path.write_text("")
    writer = MetricWriter(metrics_path)
    kind = cfg.run.model
    datasets = load_datasets(cfg)
    rng = np.random.default_rng(cfg.run.seed)
    model = build_model(cfg, datasets, rng)
    trainer = Trainer(model, training_data(kind, datasets["train"]), train_config(cfg), rng)
    ckpt = out / "model.ckpt"
    checkpoint.save(ckpt, trainer.model)

    def record(tr: Trainer, with_eval: bool):
        rec = {"epoch": tr.epoch, "step": tr.opt_state.step,
               "train_proxy": train_proxy(kind, tr.model, datasets["train"])}
        rec.update(_trunc_summary(tr.model))
        if with_eval:
            # separate stream: evaluation never perturbs the training trajectory
            rec.update(evaluate(cfg, tr.model, datasets, np.random.default_rng([cfg.run.seed, 1, tr.epoch])))
        return writer.write(rec)

    def on_epoch(tr: Trainer):
        if tr.epoch % cfg.run.checkpoint_every == 0:
            checkpoint.save(ckpt, tr.model)
        every = cfg.run.eval_every
        last = tr.epoch == cfg.run.epochs
        rec = record(tr, with_eval=last or (every > 0 and tr.epoch % every == 0))
        print(json.dumps(rec, sort_keys=True), flush=True)

    try:
        trainer.fit(on_epoch)
    except (NumericalError, FloatingPointError) as exc:
        writer.write({"epoch": trainer.epoch, "error": str(exc)})
        print(f"numerical failure: {exc}; last good checkpoint kept at {ckpt}", file=sys.stderr)
        return EXIT_NUMERIC
    if cfg.run.epochs == 0:
        print(json.dumps(record(trainer, with_eval=True), sort_keys=True))
    checkpoint.save(ckpt, trainer.model)
    return EXIT_OK


def cmd_eval(cfg: RunConfig, ckpt_path) -> int:
    validate(cfg)
    model = checkpoint.load(ckpt_path, expect_kind=cfg.run.model)
    datasets = load_datasets(cfg)
    report = evaluate(cfg, model, datasets, np.random.default_rng([cfg.run.seed, 2]))
    report = {k: _finite_or_none(v) for k, v in report.items()}
    out = Path(cfg.run.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "eval.jsonl", "a") as fh:
        fh.write(json.dumps({"checkpoint": str(ckpt_path), **report}, sort_keys=True) + "\n")
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def _grid_width(n: int) -> int:
    w = int(round(math.sqrt(n)))
    return w if w * w == n else n


def cmd_sample(cfg: RunConfig, ckpt_path, count: int, steps: int, out_path, frames: int = 30) -> int:
    if cfg.run.model == "tggm":
        raise UnsupportedOperation("sampling is not defined for the conditional TGGM; use eval")
    validate(cfg, need_data=False)
    if count < 0 or steps < 1 or frames < 1:
        raise ConfigError(["count must be >= 0, steps and frames >= 1"])
    model = checkpoint.load(ckpt_path, expect_kind=cfg.run.model)
    rng = np.random.default_rng([cfg.run.seed, 3])
    n = model.n_visible
    if cfg.run.model == "rbm":
        x = rbm.sample_fantasy(model, steps, count, rng) if count else np.zeros((0, n))
        seqs = x[:, None, :]
        n_frames = 1
    else:
        seqs = trbm.generate(model, count, frames, rng, gibbs_steps=steps) if count else np.zeros((0, frames, n))
        n_frames = frames
    data.write_bitmaps(out_path, list(seqs.astype(np.uint8)), n_pixels=n, n_frames=n_frames)
    w = _grid_width(n)
    text = "\n\n".join(data.render_ascii(s[-1], w) for s in seqs[:16])
    Path(str(out_path) + ".txt").write_text(text + "\n")
    print(f"wrote {count} samples to {out_path}")
    return EXIT_OK


def cmd_gen_data(cfg: RunConfig, what: str, out_path) -> int:
    if what == "balls":
        b = cfg.balls
        try:
            bcfg = data.BouncingBallConfig(b.n_balls, b.frame_size, b.n_frames, b.radius, b.speed,
                                           b.seed, b.n_sequences)
        except ValueError as exc:
            raise ConfigError([f"balls: {exc}"]) from exc
        seqs = data.generate_bouncing_balls(bcfg)
        data.write_bitmaps(out_path, seqs, n_pixels=b.frame_size ** 2, n_frames=b.n_frames)
    elif what == "regression":
        s = cfg.synth
        if s.n_rows < 2 or s.n_features < 1 or s.noise < 0:
            raise ConfigError(["synth: need n_rows >= 2, n_features >= 1, noise >= 0"])
        rng = np.random.default_rng(s.seed)
        x = rng.normal(size=(s.n_rows, s.n_features))
        y = x @ rng.normal(size=s.n_features) + 1.0 + s.noise * rng.normal(size=s.n_rows)
        np.savetxt(out_path, np.column_stack([x, y]), delimiter=",", fmt="%.17g")
    else:
        raise ConfigError([f"unknown dataset kind {what!r}"])
    print(f"wrote {what} data to {out_path}")
    return EXIT_OK


# ---------------------------------------------------------------- argument parsing

def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trugnet", description="TruG networks: train, evaluate, sample.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", "-c", help="INI run configuration")
        sp.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a configuration key (repeatable)")

    common(sub.add_parser("train", help="train a model"))
    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    common(ev)
    ev.add_argument("--checkpoint", required=True)
    sm = sub.add_parser("sample", help="draw samples from a checkpoint")
    common(sm)
    sm.add_argument("--checkpoint", required=True)
    sm.add_argument("--count", type=int, default=16)
    sm.add_argument("--steps", type=int, default=1000, help="Gibbs sweeps (per frame for trbm)")
    sm.add_argument("--frames", type=int, default=30, help="sequence length for trbm")
    sm.add_argument("--out", required=True)
    gd = sub.add_parser("gen-data", help="generate a synthetic dataset")
    common(gd)
    gd.add_argument("what", choices=["balls", "regression"])
    gd.add_argument("--out", required=True)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.set)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "eval":
            return cmd_eval(cfg, args.checkpoint)
        if args.command == "sample":
            return cmd_sample(cfg, args.checkpoint, args.count, args.steps, args.out, args.frames)
        return cmd_gen_data(cfg, args.what, args.out)
    except (ConfigError, checkpoint.CheckpointError, UnsupportedOperation, data.FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
