"""Run configuration: an INI file with [data], [model], [train], [output] sections."""

from __future__ import annotations

import configparser
import hashlib
import json
import typing
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .classifier import ModelConfig, TrainConfig


class ConfigError(ValueError):
    pass


def _f(section: str, default, help: str):
    return field(default=default, metadata={"section": section, "help": help})


@dataclass
class Config:
    corpus: str | None = _f("data", None, "JSON-lines corpus path")
    stopwords: str | None = _f("data", None, "stop-word list (bundled list if unset)")
    abbreviations: str | None = _f("data", None, "abbreviation list (bundled list if unset)")
    embeddings: str | None = _f("data", None, "text-format word vectors (random init if unset)")
    dev_per_class: int = _f("data", 67, "dev documents sampled per class")
    test_per_class: int = _f("data", 67, "test documents sampled per class")
    max_sentences: int = _f("data", 60, "truncate documents beyond this many sentences")
    min_count: int = _f("data", 1, "minimum training-split frequency for a vocabulary entry")

    embedding_dim: int = _f("model", 50, "word embedding size")
    hidden_size: int = _f("model", 100, "BLSTM hidden units")
    leaky_slope: float = _f("model", 0.01, "LeakyReLU negative slope")
    init_scale: float = _f("model", 0.1, "uniform initialization half-width")
    child_context: str = _f("model", "printed", "child context: printed or cited-work")

    steps: int = _f("train", 200, "optimizer steps")
    batch_size: int = _f("train", 40, "documents per mini-batch")
    lr0: float = _f("train", 0.01, "initial learning rate")
    decay: float = _f("train", 0.9, "learning-rate decay factor")
    decay_every: int = _f("train", 50, "steps between decays")
    seed: int = _f("train", 0, "seed for initialization, splits and batches")
    beta1: float = _f("train", 0.9, "ADAM beta1")
    beta2: float = _f("train", 0.999, "ADAM beta2")
    eps: float = _f("train", 1e-8, "ADAM epsilon")
    eval_every: int = _f("train", 10, "steps between dev evaluations")

    out: str = _f("output", "runs", "output directory")
    checkpoint: str | None = _f("output", None, "checkpoint path (default OUT/checkpoint.json)")

    def __post_init__(self):
        try:
            self.train_config()
            ModelConfig(1, self.embedding_dim, self.hidden_size, self.leaky_slope,
                        self.init_scale, self.child_context)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        for name in ("dev_per_class", "test_per_class", "max_sentences", "min_count"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.steps, self.batch_size, self.lr0, self.decay, self.decay_every,
                           self.seed, self.beta1, self.beta2, self.eps, self.eval_every)

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size, self.embedding_dim, self.hidden_size, self.leaky_slope,
                           self.init_scale, self.child_context)

    def checkpoint_path(self) -> Path:
        return Path(self.checkpoint) if self.checkpoint else Path(self.out) / "checkpoint.json"

    def hashed_fields(self) -> dict:
        """Everything that can influence results; output locations excluded."""
        return {k: v for k, v in asdict(self).items() if FIELD_SECTIONS[k] != "output"}

    def digest(self) -> str:
        blob = json.dumps(self.hashed_fields(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


FIELD_SECTIONS = {f.name: f.metadata["section"] for f in fields(Config)}
_HINTS = typing.get_type_hints(Config)


def field_type(name: str):
    hint = _HINTS[name]
    args = [a for a in typing.get_args(hint) if a is not type(None)]
    return args[0] if args else hint


def coerce(name: str, raw: str):
    kind = field_type(name)
    if raw.strip().lower() in ("", "none") and type(None) in typing.get_args(_HINTS[name]):
        return None
    try:
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot read {raw!r} as {kind.__name__}") from None


def load_config(path=None, overrides: dict | None = None) -> Config:
    values: dict = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file {path} not found")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read(path, encoding="utf-8")
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
        sections = set(FIELD_SECTIONS.values())
        for section in parser.sections():
            if section not in sections:
                raise ConfigError(f"{path}: unknown section [{section}]")
            for key, raw in parser.items(section):
                name = key.replace("-", "_")
                if FIELD_SECTIONS.get(name) != section:
                    raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
                values[name] = coerce(name, raw)
    for name, value in (overrides or {}).items():
        if name not in FIELD_SECTIONS:
            raise ConfigError(f"unknown config field {name!r}")
        if value is not None:
            values[name] = value
    return Config(**values)


def dump_config(config: Config) -> str:
    """INI text that :func:`load_config` reads back to an equal Config."""
    by_section: dict[str, list[str]] = {}
    for f in fields(Config):
        value = getattr(config, f.name)
        text = "none" if value is None else repr(value) if isinstance(value, float) else str(value)
        by_section.setdefault(f.metadata["section"], []).append(f"{f.name} = {text}")
    return "\n\n".join(f"[{s}]\n" + "\n".join(lines) for s, lines in by_section.items()) + "\n"
