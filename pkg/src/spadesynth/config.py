"""Training configuration and the line-oriented config file format.

Files hold `section.key = value` lines; `#` starts a comment. Sections map
onto the dataclasses below: train.*, data.*, gen.*, disc.*, loss.*,
ablate.*. Unknown keys are errors, values are coerced to the field's type.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from .errors import ConfigError
from .losses import LossWeights
from .networks import DiscriminatorConfig, GeneratorConfig


@dataclass
class DataConfig:
    root: str = "data"
    n_train: int = 96
    n_val: int = 16
    resolution: int = 32
    num_labels: int = 6


@dataclass
class AblateConfig:
    seeds: int = 5
    axis: str = "concat"


@dataclass
class TrainConfig:
    epochs: int = 30
    steps_per_epoch: int = 20
    batch_size: int = 8
    lr_g: float = 0.0001
    lr_d: float = 0.0004
    beta1: float = 0.0
    beta2: float = 0.999
    adam_eps: float = 1e-8
    decay_start_epoch: int = -1  # -1: half of epochs
    seed: int = 1
    eval_every: int = 0  # 0 disables mid-run evaluation
    use_encoder: bool = True
    out_dir: str = "runs/out"
    gen: GeneratorConfig = field(default_factory=GeneratorConfig)
    disc: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    loss: LossWeights = field(default_factory=LossWeights)
    data: DataConfig = field(default_factory=DataConfig)
    ablate: AblateConfig = field(default_factory=AblateConfig)

    def __post_init__(self):
        if self.decay_start_epoch < 0:
            self.decay_start_epoch = self.epochs // 2
        if self.epochs < 1 or self.steps_per_epoch < 1 or self.batch_size < 1:
            raise ConfigError("epochs, steps_per_epoch, batch_size must be >= 1")
        if self.decay_start_epoch >= self.epochs and self.epochs > 1:
            raise ConfigError(
                f"decay_start_epoch {self.decay_start_epoch} outside {self.epochs} epochs"
            )
        if self.gen.out_size != self.data.resolution:
            raise ConfigError(
                f"gen.out_size {self.gen.out_size} != data.resolution {self.data.resolution}"
            )
        if self.gen.num_labels != self.data.num_labels:
            raise ConfigError(
                f"gen.num_labels {self.gen.num_labels} != data.num_labels "
                f"{self.data.num_labels}"
            )
        if self.disc.num_labels != self.data.num_labels:
            raise ConfigError("disc.num_labels must match data.num_labels")


_SECTIONS = {
    "train": None,  # top-level TrainConfig fields
    "data": "data",
    "gen": "gen",
    "disc": "disc",
    "loss": "loss",
    "ablate": "ablate",
}


def _coerce(raw: str, target_type, where: str):
    raw = raw.strip()
    if target_type is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{where}: expected a boolean, got {raw!r}")
    try:
        if target_type is int:
            return int(raw)
        if target_type is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected {target_type.__name__}, got {raw!r}") from None
    return raw


def parse_config(text: str) -> TrainConfig:
    """Build a TrainConfig from file text; later lines override earlier."""
    overrides: dict[str, dict[str, str]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if "." not in key:
            raise ConfigError(f"line {lineno}: key {key!r} needs a section prefix")
        section, name = key.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigError(f"line {lineno}: unknown section {section!r}")
        overrides.setdefault(section, {})[name] = (value, lineno)

    kwargs = {}
    top_fields = {f.name: f for f in dataclasses.fields(TrainConfig)}
    sub_types = {
        "data": DataConfig, "gen": GeneratorConfig,
        "disc": DiscriminatorConfig, "loss": LossWeights, "ablate": AblateConfig,
    }
    for section, values in overrides.items():
        if section == "train":
            for name, (value, lineno) in values.items():
                f = top_fields.get(name)
                if f is None or name in sub_types:
                    raise ConfigError(f"line {lineno}: unknown key train.{name}")
                kwargs[name] = _coerce(value, type(f.default), f"line {lineno}")
        else:
            cls = sub_types[section]
            sub_kwargs = {}
            sub_fields = {f.name: f for f in dataclasses.fields(cls)}
            for name, (value, lineno) in values.items():
                f = sub_fields.get(name)
                if f is None:
                    raise ConfigError(f"line {lineno}: unknown key {section}.{name}")
                default = f.default
                if default is dataclasses.MISSING:
                    default = f.default_factory()
                sub_kwargs[name] = _coerce(value, type(default), f"line {lineno}")
            kwargs[section] = cls(**sub_kwargs)
    return TrainConfig(**kwargs)


def load_config(path: str) -> TrainConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text)


def dump_config(cfg: TrainConfig) -> str:
    """Config as file text; parse_config(dump_config(c)) reproduces c."""
    lines = []
    for f in dataclasses.fields(TrainConfig):
        val = getattr(cfg, f.name)
        if dataclasses.is_dataclass(val):
            for sf in dataclasses.fields(val):
                lines.append(f"{f.name}.{sf.name} = {getattr(val, sf.name)}")
        else:
            lines.append(f"train.{f.name} = {val}")
    return "\n".join(lines) + "\n"


def desk_profile() -> TrainConfig:
    """Default: 32x32, nf=16, batch 8, 600 steps."""
    return TrainConfig()


def paper_profile() -> TrainConfig:
    """Full-scale values for reference; hours-to-days on CPU, not default."""
    return TrainConfig(
        epochs=200,
        steps_per_epoch=500,
        batch_size=32,
        decay_start_epoch=100,
        gen=GeneratorConfig(out_size=256, nf=64, z_dim=256, modulation_hidden=128),
        disc=DiscriminatorConfig(nf=64, num_scales=2, num_blocks=4),
        data=DataConfig(resolution=256, n_train=1024, n_val=128),
    )


def ablate_profile() -> TrainConfig:
    """Smallest credible training: used for the variant comparison runs."""
    return TrainConfig(
        epochs=30,
        steps_per_epoch=20,
        batch_size=4,
        gen=GeneratorConfig(nf=8, modulation_hidden=16),
        disc=DiscriminatorConfig(nf=8),
        data=DataConfig(n_train=80, n_val=16),
    )
