"""Run configuration: a flat dataclass mirrored by the JSON config files,
with CLI-style key=value overrides."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .network import Network, init_layer
from .neurons import Kind, NeuronKind

DATASETS = ("smnist", "psmnist", "shd")
NEURONS = ("lif", "tclif_vanilla", "tclif_modified", "tclif_adaptive")
OPTIMIZERS = ("sgd", "adam")
SCHEDULES = ("cosine", "step", "constant")
TRAINERS = ("eprop", "bptt")


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    dataset: str = "smnist"
    # full width list: input, hidden..., classes
    arch: list[int] = dataclasses.field(default_factory=lambda: [64, 256, 256, 10])
    recurrent: bool = False
    neuron: str = "tclif_adaptive"
    frame_size: int = 64
    v_th: float = 1.0
    gamma: float = 0.5
    a_d: float = 0.7
    a_s: float = 0.8
    alpha1: float = 0.5
    alpha2: float = 0.5
    lif_alpha: float = 0.9
    # fixed couplings; set train_couplings to learn c1/c2 under BPTT instead
    beta1: float = -0.5
    beta2: float = 1.0
    train_couplings: bool = False
    c1: float = 0.0
    c2: float = 2.1972
    optimizer: str = "sgd"
    lr0: float = 0.08
    schedule: str = "cosine"
    step_every: int = 15
    step_factor: float = 0.8
    epochs: int = 5
    batch_size: int = 64
    seed: int = 0
    trainer: str = "eprop"
    readout_kappa: float = 0.9
    update_per_step: bool = False
    reset_enabled: bool = True
    grad_clip: float = 1.0
    shd_bins: int = 250
    shd_binary: bool = False
    permutation_seed: int = 0

    def validate(self) -> None:
        if self.dataset not in DATASETS:
            raise ConfigError(f"unknown dataset {self.dataset!r}")
        if self.neuron not in NEURONS:
            raise ConfigError(f"unknown neuron {self.neuron!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.schedule not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.trainer not in TRAINERS:
            raise ConfigError(f"unknown trainer {self.trainer!r}")
        if len(self.arch) < 2 or any(w <= 0 for w in self.arch):
            raise ConfigError("arch must list positive widths (input..classes)")
        if self.lr0 <= 0:
            raise ConfigError("lr0 must be positive")
        if not 0.0 < self.step_factor < 1.0:
            raise ConfigError("step_factor must lie in (0, 1)")
        if not 1 <= self.frame_size <= 784:
            raise ConfigError("frame_size must lie in [1, 784]")
        if not 0.0 <= self.readout_kappa < 1.0:
            raise ConfigError("readout_kappa must lie in [0, 1)")
        if not (0.0 < self.a_d <= 1.0 and 0.0 < self.a_s <= 1.0):
            raise ConfigError("decay floors must lie in (0, 1]")
        if self.epochs < 0 or self.batch_size <= 0:
            raise ConfigError("epochs must be >= 0 and batch_size > 0")

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


_FIELDS = {f.name: f for f in dataclasses.fields(TrainConfig)}


def _coerce(name: str, raw):
    f = _FIELDS[name]
    if f.type in ("bool", bool):
        if isinstance(raw, bool):
            return raw
        if str(raw).lower() in ("1", "true", "yes", "on"):
            return True
        if str(raw).lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"cannot parse boolean {name}={raw!r}")
    if f.type in ("int", int):
        return int(raw)
    if f.type in ("float", float):
        return float(raw)
    if name == "arch":
        if isinstance(raw, str):
            return [int(w) for w in raw.replace(",", "-").split("-")]
        return [int(w) for w in raw]
    return str(raw)


def config_from_dict(d: dict) -> TrainConfig:
    unknown = set(d) - set(_FIELDS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = TrainConfig(**{k: _coerce(k, v) for k, v in d.items()})
    cfg.validate()
    return cfg


def load_config(path: str) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return config_from_dict(json.load(fh))


def apply_overrides(cfg: TrainConfig, overrides: list[str]) -> TrainConfig:
    """Apply repeatable ``key=value`` overrides; unknown keys are rejected."""
    d = dataclasses.asdict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, value = item.partition("=")
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        d[key] = value
    return config_from_dict(d)


def default_config(dataset: str, recurrent: bool = False) -> TrainConfig:
    """Per-dataset defaults following the published hyperparameter table."""
    if dataset == "smnist":
        cfg = TrainConfig(dataset=dataset, recurrent=recurrent,
                          arch=[64, 256, 256, 10], frame_size=64,
                          v_th=1.0, gamma=0.5,
                          a_d=0.8 if recurrent else 0.7,
                          a_s=0.9 if recurrent else 0.8,
                          optimizer="sgd", lr0=0.08, schedule="cosine",
                          epochs=300)
    elif dataset == "psmnist":
        cfg = TrainConfig(dataset=dataset, recurrent=recurrent,
                          arch=[64, 256, 256, 10], frame_size=64,
                          v_th=1.8 if recurrent else 1.0,
                          gamma=1.0 if recurrent else 0.5,
                          a_d=0.75 if recurrent else 0.7,
                          a_s=0.85 if recurrent else 0.8,
                          optimizer="adam", lr0=5e-4, schedule="step",
                          epochs=200)
    elif dataset == "shd":
        cfg = TrainConfig(dataset=dataset, recurrent=recurrent,
                          arch=[700, 128, 128, 20], frame_size=64,
                          v_th=1.6, gamma=0.5,
                          a_d=0.75 if recurrent else 0.65,
                          a_s=0.85 if recurrent else 0.75,
                          optimizer="adam", lr0=5e-5, schedule="step",
                          epochs=200)
    else:
        raise ConfigError(f"unknown dataset {dataset!r}")
    cfg.validate()
    return cfg


def desk_smnist_config(neuron: str = "tclif_adaptive") -> TrainConfig:
    """Scaled-down S-MNIST benchmark (10k/2k samples, row frames, one hidden
    layer, 5 epochs): small enough for a laptop CPU, large enough to separate
    the neuron variants."""
    return TrainConfig(dataset="smnist", arch=[28, 128, 10], frame_size=28,
                       neuron=neuron, epochs=5, batch_size=64, seed=0,
                       trainer="eprop", v_th=1.0, gamma=0.5, a_d=0.7, a_s=0.8,
                       optimizer="adam", lr0=5e-3, schedule="constant",
                       readout_kappa=0.95)


def desk_shd_config(neuron: str = "tclif_adaptive", seed: int = 0
                    ) -> TrainConfig:
    """Scaled-down SHD ablation run (1k samples, 100 bins, one hidden
    layer, 2 epochs) comparing decay variants."""
    return TrainConfig(dataset="shd", arch=[700, 64, 20], neuron=neuron,
                       epochs=2, batch_size=100, seed=seed, trainer="eprop",
                       v_th=1.0, gamma=0.5, a_d=0.65, a_s=0.75,
                       alpha1=0.65, alpha2=0.75,
                       optimizer="adam", lr0=3e-3, schedule="constant",
                       readout_kappa=0.95, shd_bins=100)


def neuron_kind(cfg: TrainConfig) -> NeuronKind:
    return NeuronKind(tag=Kind(cfg.neuron), reset_enabled=cfg.reset_enabled)


def build_network(cfg: TrainConfig, rng: np.random.Generator) -> Network:
    """Instantiate the layer stack and readout described by the config."""
    cfg.validate()
    kind = neuron_kind(cfg)
    widths = cfg.arch
    layers = []
    common = dict(
        v_th=cfg.v_th, gamma=cfg.gamma,
        alpha1=cfg.alpha1, alpha2=cfg.alpha2,
        a_d=cfg.a_d, a_s=cfg.a_s, alpha=cfg.lif_alpha,
        c1=cfg.c1, c2=cfg.c2,
        beta_fixed=None if cfg.train_couplings else (cfg.beta1, cfg.beta2),
    )
    for n_pre, n_post in zip(widths[:-2], widths[1:-1]):
        layers.append(init_layer(rng, kind, n_pre, n_post,
                                 recurrent=cfg.recurrent, **common))
    top = widths[-2]
    bound = float(np.sqrt(1.0 / top))
    w_out = rng.uniform(-bound, bound, size=(widths[-1], top))
    return Network(layers=layers, w_out=w_out, kappa=cfg.readout_kappa)
