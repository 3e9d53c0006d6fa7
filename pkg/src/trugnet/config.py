"""Run configuration: INI files with typed sections.

Grammar: standard ``configparser`` INI.  Each ``[section]`` maps onto one
dataclass below and each ``key = value`` onto a field; values are parsed by
the field type (``true/false`` for booleans, ``inf`` allowed for floats).
Unknown sections or keys are errors.  ``--set section.key=value`` on the
command line overrides the file.  Relative data paths resolve against
``$TRUGNET_DATA_DIR`` when set, else the working directory.
"""
from __future__ import annotations

import configparser
import dataclasses
import os
from dataclasses import dataclass, field
from io import StringIO
from pathlib import Path

from . import optim, trbm

DATA_DIR_ENV = "TRUGNET_DATA_DIR"
MODELS = ("rbm", "trbm", "tggm")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass
class RunSection:
    model: str = "rbm"
    seed: int | None = None  # mandatory
    epochs: int = 10
    out_dir: str = "runs/default"
    eval_every: int = 0  # epochs between evaluations; 0 evaluates only at the end
    checkpoint_every: int = 1


@dataclass
class DataSection:
    train_path: str = ""
    test_path: str = ""
    csv_path: str = ""
    target_column: int = -1
    header: bool = False
    test_fraction: float = 0.1
    split_seed: int = 0
    binarize: str = "threshold"  # or "stochastic"
    threshold: float = 0.5
    train_limit: int = 0  # 0 keeps every example
    test_limit: int = 0


@dataclass
class ModelSection:
    n_hidden: int = 500  # RBM experiments
    trunc_mode: str = "shared"
    xi_lower: float = 0.0  # truncation points start at [0, 1]
    xi_upper: float = 1.0
    learn_lower: bool = True
    learn_upper: bool = True
    weight_var: float = 0.01
    train_precision: bool = True
    sigma2: float = 1.0
    learn_sigma2: bool = True


@dataclass
class OptimSection:
    kind: str = optim.RMSPROP
    learning_rate: float = 1e-4
    decay: float = 0.95  # RMSprop delay; use 0.9 momentum with sgd-momentum
    batch_size: int = 100
    trunc_lr_start: float = 1e-4
    trunc_lr_end: float = 1e-6
    trunc_horizon: int = 0  # 0: all planned steps


@dataclass
class CdSection:
    k: int = 1
    persistent: bool = False


@dataclass
class AisSection:
    n_temps: int = 10_000
    n_chains: int = 100
    n_runs: int = 1
    base_from_data: bool = True


@dataclass
class TggmSection:
    n_cycles: int = 10  # VB cycles


@dataclass
class TrbmSection:
    filter_mode: str = trbm.SAMPLE
    gibbs_steps: int = 30


@dataclass
class BallsSection:
    n_balls: int = 3
    frame_size: int = 30
    n_frames: int = 100
    radius: float = 3.0
    speed: float = 1.0
    n_sequences: int = 200
    seed: int = 0


@dataclass
class SynthSection:
    n_rows: int = 200
    n_features: int = 3
    noise: float = 0.0
    seed: int = 0


@dataclass
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    optim: OptimSection = field(default_factory=OptimSection)
    cd: CdSection = field(default_factory=CdSection)
    ais: AisSection = field(default_factory=AisSection)
    tggm: TggmSection = field(default_factory=TggmSection)
    trbm: TrbmSection = field(default_factory=TrbmSection)
    balls: BallsSection = field(default_factory=BallsSection)
    synth: SynthSection = field(default_factory=SynthSection)

    def sections(self):
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    def optimizer_config(self) -> optim.OptimizerConfig:
        o = self.optim
        return optim.OptimizerConfig(
            kind=o.kind, learning_rate=o.learning_rate, decay=o.decay, batch_size=o.batch_size,
            trunc_schedule=optim.AnnealSchedule(o.trunc_lr_start, o.trunc_lr_end, max(1, o.trunc_horizon)))


def _parse(raw: str, typ: str):
    raw = raw.strip()
    if "bool" in typ:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if "int" in typ:
        if raw.lower() in ("", "none"):
            return None
        return int(raw)
    if "float" in typ:
        return float(raw)
    return raw


def _assign(cfg: RunConfig, section: str, key: str, raw: str, problems: list) -> None:
    sections = cfg.sections()
    if section not in sections:
        problems.append(f"unknown section [{section}]")
        return
    obj = sections[section]
    types = {f.name: str(f.type) for f in dataclasses.fields(obj)}
    if key not in types:
        problems.append(f"unknown key {section}.{key}")
        return
    try:
        setattr(obj, key, _parse(raw, types[key]))
    except ValueError as exc:
        problems.append(f"{section}.{key}: {exc}")


def load_config(path=None, overrides=()) -> RunConfig:
    """Parse an INI file (optional) and ``section.key=value`` overrides, then validate."""
    cfg = RunConfig()
    problems = []
    if path is not None:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise ConfigError([f"cannot read {path}: {exc}"]) from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                _assign(cfg, section, key, raw, problems)
    for item in overrides:
        lhs, sep, raw = item.partition("=")
        section, dot, key = lhs.strip().partition(".")
        if not sep or not dot:
            problems.append(f"override {item!r} is not section.key=value")
            continue
        _assign(cfg, section, key, raw, problems)
    if problems:
        raise ConfigError(problems)
    return cfg


def resolve_path(p: str) -> Path:
    path = Path(p)
    if path.is_absolute():
        return path
    return Path(os.environ.get(DATA_DIR_ENV, ".")) / path


def validate(cfg: RunConfig, need_data: bool = True) -> None:
    """Raise ConfigError listing every violation."""
    problems = []
    r, d, m, o = cfg.run, cfg.data, cfg.model, cfg.optim
    if r.model not in MODELS:
        problems.append(f"run.model must be one of {MODELS}, got {r.model!r}")
    if r.seed is None:
        problems.append("run.seed is mandatory")
    if r.epochs < 0:
        problems.append("run.epochs must be >= 0")
    if r.eval_every < 0 or r.checkpoint_every < 1:
        problems.append("run.eval_every must be >= 0 and run.checkpoint_every >= 1")
    if m.n_hidden < 1:
        problems.append("model.n_hidden must be positive")
    if m.trunc_mode not in ("shared", "per_unit"):
        problems.append("model.trunc_mode must be shared or per_unit")
    if not m.xi_lower < m.xi_upper:
        problems.append("model.xi_lower must be below model.xi_upper")
    if m.weight_var <= 0 or m.sigma2 <= 0:
        problems.append("model.weight_var and model.sigma2 must be positive")
    if o.kind not in (optim.RMSPROP, optim.SGD_MOMENTUM):
        problems.append(f"optim.kind must be {optim.RMSPROP} or {optim.SGD_MOMENTUM}")
    if o.learning_rate <= 0 or o.batch_size < 1 or not 0 <= o.decay < 1:
        problems.append("optim.learning_rate > 0, optim.batch_size >= 1 and 0 <= optim.decay < 1 required")
    if not 0 < o.trunc_lr_end <= o.trunc_lr_start or o.trunc_horizon < 0:
        problems.append("need 0 < optim.trunc_lr_end <= optim.trunc_lr_start and optim.trunc_horizon >= 0")
    if cfg.cd.k < 1:
        problems.append("cd.k must be >= 1")
    if cfg.ais.n_temps < 1 or cfg.ais.n_chains < 1 or cfg.ais.n_runs < 1:
        problems.append("ais.n_temps, ais.n_chains and ais.n_runs must be positive")
    if cfg.tggm.n_cycles < 1:
        problems.append("tggm.n_cycles must be >= 1")
    if cfg.trbm.filter_mode not in (trbm.SAMPLE, trbm.MEAN):
        problems.append("trbm.filter_mode must be sample or mean")
    if d.binarize not in ("threshold", "stochastic"):
        problems.append("data.binarize must be threshold or stochastic")
    if not 0 < d.threshold < 1 or not 0 < d.test_fraction < 1:
        problems.append("data.threshold and data.test_fraction must lie in (0, 1)")
    if need_data and r.model in MODELS:
        keys = ("csv_path",) if r.model == "tggm" else ("train_path", "test_path")
        for key in keys:
            val = getattr(d, key)
            if not val:
                problems.append(f"data.{key} is required for {r.model}")
            elif not resolve_path(val).is_file():
                problems.append(f"data.{key}: {resolve_path(val)} does not exist")
    if problems:
        raise ConfigError(problems)


def dump_config(cfg: RunConfig) -> str:
    """Resolved INI text; loading it back reproduces ``cfg``."""
    parser = configparser.ConfigParser(interpolation=None)
    for name, sec in cfg.sections().items():
        parser[name] = {}
        for f in dataclasses.fields(sec):
            val = getattr(sec, f.name)
            parser[name][f.name] = "none" if val is None else str(val).lower() if isinstance(val, bool) else str(val)
    buf = StringIO()
    parser.write(buf)
    return buf.getvalue()
