"""Desk-scale versions of the three experimental protocols.

Each runner trains one model from a seed and returns its evaluation
numbers.  The defaults are the scaled-down settings used by the acceptance
checks and the scripts in ``scripts/``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ais, data, optim, rbm, tggm, trbm
from .training import TrainConfig, Trainer
from .trug import TrugParams

DATA_DIR = Path(__file__).resolve().parents[2] / "data"


@dataclass
class TrugSetting:
    """A truncation setting: fixed interval, or learned from an initial one."""

    name: str
    lower: float
    upper: float
    learn: bool = False
    per_unit: bool = False
    fix_lower: bool = False  # keep the lower point frozen even when learning

    def params(self, n_hidden: int) -> TrugParams:
        kw = dict(train_lower=self.learn and not self.fix_lower, train_upper=self.learn)
        if self.per_unit:
            return TrugParams.per_unit(n_hidden, self.lower, self.upper, **kw)
        return TrugParams.shared(self.lower, self.upper, **kw)


RELU = TrugSetting("[0,inf)", 0.0, np.inf)
SIGMOID = TrugSetting("[0,1]", 0.0, 1.0)
TANH = TrugSetting("[-1,1]", -1.0, 1.0)
C_LEARN = TrugSetting("c-Learn", 0.0, 1.0, learn=True)
# per-unit learning keeps the lower points at zero, as in the RBM protocol
S_LEARN = TrugSetting("s-Learn", 0.0, 1.0, learn=True, per_unit=True, fix_lower=True)


def _optimizer(kind, lr, decay, batch, trunc_start, trunc_end) -> optim.OptimizerConfig:
    return optim.OptimizerConfig(kind=kind, learning_rate=lr, decay=decay, batch_size=batch,
                                 trunc_schedule=optim.AnnealSchedule(trunc_start, trunc_end))


# ---------------------------------------------------------------- RBM on MNIST

@dataclass
class RbmMnistConfig:
    train_path: Path = DATA_DIR / "mnist_train-images-idx3-ubyte.gz"
    test_path: Path = DATA_DIR / "mnist_test-images-idx3-ubyte.gz"
    n_train: int = 1000
    n_test: int = 500
    n_hidden: int = 50
    epochs: int = 100
    learning_rate: float = 1e-3
    decay: float = 0.95
    batch_size: int = 100
    trunc_lr_start: float = 1e-4
    trunc_lr_end: float = 1e-6
    cd_k: int = 1
    ais_temps: int = 5000
    ais_chains: int = 100


def load_mnist(cfg: RbmMnistConfig):
    x_train = data.load_idx_images(cfg.train_path, limit=cfg.n_train).images.astype(float)
    x_test = data.load_idx_images(cfg.test_path, limit=cfg.n_test).images.astype(float)
    return x_train, x_test


def rbm_mnist_run(cfg: RbmMnistConfig, setting: TrugSetting, seed: int, datasets=None) -> dict:
    x_train, x_test = datasets if datasets is not None else load_mnist(cfg)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    model = rbm.RbmModel.init(x_train.shape[1], cfg.n_hidden, rng, setting.params(cfg.n_hidden))
    tcfg = TrainConfig(epochs=cfg.epochs, cd_k=cfg.cd_k,
                       optimizer=_optimizer(optim.RMSPROP, cfg.learning_rate, cfg.decay, cfg.batch_size,
                                            cfg.trunc_lr_start, cfg.trunc_lr_end))
    model = Trainer(model, x_train, tcfg, rng).fit()
    acfg = ais.AisConfig(n_temps=cfg.ais_temps, n_chains=cfg.ais_chains,
                         base_bias=ais.base_bias_from_data(x_train))
    res = ais.test_log_prob(acfg, model, x_test, np.random.default_rng([seed, 99]))
    return {"setting": setting.name, "seed": seed, "test_log_prob": res.mean, "std_err": res.std_err,
            "ess": res.estimates[0].ess, "xi_lower": model.trug.lower.tolist(),
            "xi_upper": model.trug.upper.tolist(), "seconds": time.perf_counter() - t0, "model": model}


# ---------------------------------------------------------------- TRBM on bouncing balls

@dataclass
class TrbmBallsConfig:
    balls: data.BouncingBallConfig = field(default_factory=lambda: data.BouncingBallConfig(
        n_balls=2, frame_size=10, n_frames=30, radius=1.5, speed=1.0))
    n_train: int = 200
    n_test: int = 20
    n_hidden: int = 50
    epochs: int = 20
    optimizer: str = optim.SGD_MOMENTUM
    learning_rate: float = 1e-3
    momentum: float = 0.9
    batch_size: int = 10
    trunc_lr_start: float = 1e-4
    trunc_lr_end: float = 1e-6
    cd_k: int = 1


def make_balls(cfg: TrbmBallsConfig, seed: int):
    """Independent train and test videos; the test set uses a shifted seed."""
    b = cfg.balls
    train = data.generate_bouncing_balls(
        data.BouncingBallConfig(b.n_balls, b.frame_size, b.n_frames, b.radius, b.speed, seed, cfg.n_train))
    test = data.generate_bouncing_balls(
        data.BouncingBallConfig(b.n_balls, b.frame_size, b.n_frames, b.radius, b.speed, seed + 10_000, cfg.n_test))
    return np.stack(train).astype(float), np.stack(test).astype(float)


def trbm_balls_run(cfg: TrbmBallsConfig, setting: TrugSetting, seed: int) -> dict:
    x_train, x_test = make_balls(cfg, seed)
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    model = trbm.TrbmModel.init(x_train.shape[2], cfg.n_hidden, rng, setting.params(cfg.n_hidden))
    before = trbm.prediction_error(model, x_test)
    tcfg = TrainConfig(epochs=cfg.epochs, cd_k=cfg.cd_k,
                       optimizer=_optimizer(cfg.optimizer, cfg.learning_rate, cfg.momentum, cfg.batch_size,
                                            cfg.trunc_lr_start, cfg.trunc_lr_end))
    model = Trainer(model, x_train, tcfg, rng).fit()
    after = trbm.prediction_error(model, x_test)
    return {"setting": setting.name, "seed": seed, "untrained_error": before, "trained_error": after,
            "seconds": time.perf_counter() - t0, "model": model}


# ---------------------------------------------------------------- TGGM on UCI regression

@dataclass
class TggmUciConfig:
    csv_path: Path = DATA_DIR / "boston_housing.csv"
    target_column: int = -1
    test_fraction: float = 0.1
    n_hidden: int = 50
    epochs: int = 25
    learning_rate: float = 1e-3
    decay: float = 0.9
    batch_size: int = 50
    trunc_lr_start: float = 1e-4
    trunc_lr_end: float = 1e-6
    n_cycles: int = 10
    weight_var: float = 0.1


def tggm_uci_run(cfg: TggmUciConfig, setting: TrugSetting, split: int) -> dict:
    train, test = data.load_regression_csv(cfg.csv_path, cfg.target_column, split, cfg.test_fraction)
    rng = np.random.default_rng(split)
    t0 = time.perf_counter()
    model = tggm.TggmModel.init(train.inputs.shape[1], cfg.n_hidden, train.targets.shape[1], rng,
                                setting.params(cfg.n_hidden), weight_var=cfg.weight_var)
    tcfg = TrainConfig(epochs=cfg.epochs, n_cycles=cfg.n_cycles,
                       optimizer=_optimizer(optim.RMSPROP, cfg.learning_rate, cfg.decay, cfg.batch_size,
                                            cfg.trunc_lr_start, cfg.trunc_lr_end))
    model = Trainer(model, (train.inputs, train.targets), tcfg, rng).fit()
    return {"setting": setting.name, "split": split,
            "rmse": tggm.rmse(model, test.inputs, test.targets, test.target_stats.std),
            "xi_lower": model.trug.lower.tolist(), "xi_upper": model.trug.upper.tolist(),
            "seconds": time.perf_counter() - t0, "model": model}
