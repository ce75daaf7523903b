"""Run configuration: a flat ``key = value`` text format with a typed schema.

Blank lines and lines starting with ``#`` are ignored.  Unknown keys are
rejected so typos fail loudly.  The full schema is documented in the README;
``seeds`` drives multi-seed averaging and a CLI ``--seed`` overrides it with
a single seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .data import SynthConfig
from .errors import ConfigError
from .losses import LossConfig
from .scorers import SCORER_KINDS


@dataclass
class RunConfig:
    source: str = "synth"  # synth | embed | text
    synth: SynthConfig = field(default_factory=SynthConfig)
    embed_id_path: str | None = None
    embed_ood_path: str | None = None
    text_id_path: str | None = None
    text_ood_path: str | None = None
    text_dim: int = 256
    text_seed: int = 0
    loss: LossConfig = field(default_factory=LossConfig)
    hidden_dims: list[int] = field(default_factory=lambda: [64])
    rep_dim: int = 32
    lr: float = 1e-3
    epochs: int = 10
    batch_size: int = 32
    eval_every: int = 0  # in batches; 0 = once per epoch
    scorers: list[str] = field(default_factory=lambda: list(SCORER_KINDS))
    energy_ignore_bias: bool = False
    maha_fit_on: str = "val"  # val | train_val
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3, 4, 5])
    out_dir: str | None = None

    def validate(self) -> None:
        if self.source not in ("synth", "embed", "text"):
            raise ConfigError(f"source must be synth, embed or text, got {self.source!r}")
        if self.source == "embed" and not self.embed_id_path:
            raise ConfigError("source embed requires embed.id_path")
        if self.source == "text" and not self.text_id_path:
            raise ConfigError("source text requires text.id_path")
        if not self.scorers:
            raise ConfigError("at least one scorer is required")
        unknown = [k for k in self.scorers if k not in SCORER_KINDS]
        if unknown:
            raise ConfigError(f"unknown scorers {unknown}; choose from {list(SCORER_KINDS)}")
        if self.rep_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ConfigError("encoder dimensions must be >= 1")
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 2:
            raise ConfigError(f"batch size must be >= 2, got {self.batch_size}")
        if self.eval_every < 0:
            raise ConfigError(f"eval_every must be >= 0 (0 = once per epoch), got {self.eval_every}")
        if self.maha_fit_on not in ("val", "train_val"):
            raise ConfigError(f"maha_fit_on must be val or train_val, got {self.maha_fit_on!r}")
        if not self.seeds:
            raise ConfigError("seeds must be a nonempty list")
        try:
            self.loss.validate()
            if self.source == "synth":
                self.synth.validate()
        except Exception as exc:
            raise ConfigError(str(exc))


def _parse_bool(value: str) -> bool:
    lowered = value.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"expected a boolean, got {value!r}")


def _parse_int_list(value: str) -> list[int]:
    return [int(part.strip()) for part in value.split(",") if part.strip()]


def _parse_str_list(value: str) -> list[str]:
    return [part.strip() for part in value.split(",") if part.strip()]


def _setter(*path: str):
    def assign(cfg: RunConfig, value) -> None:
        target = cfg
        for attr in path[:-1]:
            target = getattr(target, attr)
        setattr(target, path[-1], value)

    return assign


# key -> (caster, assignment path)
_SCHEMA = {
    "source": (str, _setter("source")),
    "synth.num_classes": (int, _setter("synth", "num_classes")),
    "synth.dim": (int, _setter("synth", "dim")),
    "synth.per_class": (int, _setter("synth", "per_class")),
    "synth.std": (float, _setter("synth", "std")),
    "synth.separation": (float, _setter("synth", "separation")),
    "synth.displacement": (float, _setter("synth", "displacement")),
    "synth.seed": (int, _setter("synth", "seed")),
    "embed.id_path": (str, _setter("embed_id_path")),
    "embed.ood_path": (str, _setter("embed_ood_path")),
    "text.id_path": (str, _setter("text_id_path")),
    "text.ood_path": (str, _setter("text_ood_path")),
    "text.dim": (int, _setter("text_dim")),
    "text.seed": (int, _setter("text_seed")),
    "loss.mode": (str, _setter("loss", "mode")),
    "loss.temperature": (float, _setter("loss", "temperature")),
    "loss.weight": (float, _setter("loss", "weight")),
    "loss.metric": (str, _setter("loss", "metric")),
    "loss.margin_grad": (str, _setter("loss", "margin_grad")),
    "encoder.hidden_dims": (_parse_int_list, _setter("hidden_dims")),
    "encoder.rep_dim": (int, _setter("rep_dim")),
    "optim.lr": (float, _setter("lr")),
    "optim.epochs": (int, _setter("epochs")),
    "optim.batch_size": (int, _setter("batch_size")),
    "optim.eval_every": (int, _setter("eval_every")),
    "scorers": (_parse_str_list, _setter("scorers")),
    "scorer.energy_ignore_bias": (_parse_bool, _setter("energy_ignore_bias")),
    "scorer.maha_fit_on": (str, _setter("maha_fit_on")),
    "seeds": (_parse_int_list, _setter("seeds")),
    "out_dir": (str, _setter("out_dir")),
}


def parse_config_text(text: str) -> RunConfig:
    cfg = RunConfig()
    seen: dict[str, int] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"line {line_no}: unknown config key {key!r}")
        if key in seen:
            raise ConfigError(f"line {line_no}: duplicate key {key!r} (first set on line {seen[key]})")
        seen[key] = line_no
        caster, assign = _SCHEMA[key]
        try:
            assign(cfg, caster(value))
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"line {line_no}: bad value for {key}: {exc}")
    cfg.validate()
    return cfg


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as handle:
        return parse_config_text(handle.read())


def config_echo(cfg: RunConfig) -> dict[str, str]:
    """Flatten a RunConfig back into its key -> value text form."""
    echo: dict[str, str] = {}
    for key, (_, _assign) in _SCHEMA.items():
        value = _lookup(cfg, key)
        if value is None:
            continue
        if isinstance(value, list):
            echo[key] = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            echo[key] = "true" if value else "false"
        else:
            echo[key] = str(value)
    return echo


_LOOKUP_PATHS = {
    "source": ("source",),
    "synth.num_classes": ("synth", "num_classes"),
    "synth.dim": ("synth", "dim"),
    "synth.per_class": ("synth", "per_class"),
    "synth.std": ("synth", "std"),
    "synth.separation": ("synth", "separation"),
    "synth.displacement": ("synth", "displacement"),
    "synth.seed": ("synth", "seed"),
    "embed.id_path": ("embed_id_path",),
    "embed.ood_path": ("embed_ood_path",),
    "text.id_path": ("text_id_path",),
    "text.ood_path": ("text_ood_path",),
    "text.dim": ("text_dim",),
    "text.seed": ("text_seed",),
    "loss.mode": ("loss", "mode"),
    "loss.temperature": ("loss", "temperature"),
    "loss.weight": ("loss", "weight"),
    "loss.metric": ("loss", "metric"),
    "loss.margin_grad": ("loss", "margin_grad"),
    "encoder.hidden_dims": ("hidden_dims",),
    "encoder.rep_dim": ("rep_dim",),
    "optim.lr": ("lr",),
    "optim.epochs": ("epochs",),
    "optim.batch_size": ("batch_size",),
    "optim.eval_every": ("eval_every",),
    "scorers": ("scorers",),
    "scorer.energy_ignore_bias": ("energy_ignore_bias",),
    "scorer.maha_fit_on": ("maha_fit_on",),
    "seeds": ("seeds",),
    "out_dir": ("out_dir",),
}


def _lookup(cfg: RunConfig, key: str):
    value = cfg
    for attr in _LOOKUP_PATHS[key]:
        value = getattr(value, attr)
    return value
