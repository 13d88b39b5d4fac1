"""Checkpoints: a '#' provenance line followed by one JSON object.

The JSON carries a format version, the run configuration, the vocabulary and
every parameter as a flat list of floats (repr round-trips exactly).
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .classifier import HDSF
from .config import Config
from .corpus import Vocabulary

FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def save_checkpoint(path, model: HDSF, vocab: Vocabulary, config: Config, header: str) -> None:
    params = {name: {"shape": list(p.shape), "data": p.data.reshape(-1).tolist()}
              for name, p in model.parameters().items()}
    body = {
        "format_version": FORMAT_VERSION,
        "config": config.hashed_fields(),
        "model": asdict(model.config),
        "vocab": vocab.tokens,
        "params": params,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"# {header}\n")
        json.dump(body, fh, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path) -> tuple[HDSF, Vocabulary, Config]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"checkpoint {path} not found")
    text = "".join(line for line in path.read_text(encoding="utf-8").splitlines(keepends=True)
                   if not line.startswith("#"))
    try:
        body = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: unreadable checkpoint ({exc.msg})") from None
    if body.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {body.get('format_version')!r}")
    try:
        config = Config(**body["config"])
        vocab = Vocabulary(list(body["vocab"]))
        model_cfg = config.model_config(len(vocab))
        if body["model"].get("vocab_size") != len(vocab):
            raise CheckpointError(f"{path}: model expects {body['model'].get('vocab_size')} "
                                  f"vocabulary entries, checkpoint has {len(vocab)}")
        model = HDSF(model_cfg)
        params = model.parameters()
        stored = body["params"]
        if set(stored) != set(params):
            raise CheckpointError(f"{path}: parameter set does not match the model")
        for name, p in params.items():
            shape = tuple(stored[name]["shape"])
            if shape != p.shape:
                raise CheckpointError(f"{path}: {name} has shape {shape}, model expects {p.shape}")
            p.data[...] = np.array(stored[name]["data"], dtype=np.float64).reshape(shape)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: malformed checkpoint ({exc})") from None
    return model, vocab, config
