"""Run configuration: one YAML file with flat sections mirroring the module
configs. Precedence: CLI flags > file values > defaults. The snapshot written
into the run directory is sufficient to reproduce the run with the same seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from .corpus import DEFAULT_INSTRUCTION
from .reward import RewardConfig
from .sampling import SamplingConfig
from .trainer import TrainConfig


@dataclass(frozen=True)
class ModelConfig:
    context: int = 8
    embed_dim: int = 32
    hidden_dim: int = 128
    init_scale: float = 0.05


@dataclass(frozen=True)
class RunConfig:
    corpus: str = "corpus.jsonl"
    eval_corpus: str | None = None
    run_dir: str = "runs/default"
    seed: int = 0
    jobs: int = 1
    interpreter: str | None = None
    instruction: str = DEFAULT_INSTRUCTION
    noise_floor: float = 0.02
    eval_repeats: int = 3
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    @property
    def sampling(self) -> SamplingConfig:
        return self.train.sampling

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False))


def _build_train(raw: dict, seed: int) -> TrainConfig:
    sampling_raw = dict(raw.pop("sampling", {}))
    sampling_raw.setdefault("seed", seed)
    reward_raw = raw.pop("reward", {})
    return TrainConfig(
        sampling=SamplingConfig(**sampling_raw),
        reward=RewardConfig(**reward_raw),
        **raw,
    )


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> RunConfig:
    """Build a RunConfig from an optional YAML file plus flat CLI overrides."""
    raw: dict = {}
    if path is not None:
        raw = yaml.safe_load(Path(path).read_text()) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: config must be a mapping")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    seed = overrides.get("seed", raw.get("seed", 0))
    train_raw = dict(raw.get("train", {}))
    for key in ("rl_steps", "timeout"):
        if key in overrides:
            train_raw[key] = overrides.pop(key)
    if "instruction" in overrides:
        train_raw["instruction"] = overrides["instruction"]
    elif "instruction" in raw:
        train_raw.setdefault("instruction", raw["instruction"])

    model_cfg = ModelConfig(**raw.get("model", {}))
    top = {
        k: raw[k]
        for k in ("corpus", "eval_corpus", "run_dir", "jobs", "interpreter",
                  "instruction", "noise_floor", "eval_repeats")
        if k in raw
    }
    top.update(
        {k: v for k, v in overrides.items()
         if k in ("corpus", "eval_corpus", "run_dir", "jobs", "interpreter",
                  "instruction", "noise_floor", "eval_repeats")}
    )
    return RunConfig(
        seed=seed,
        model=model_cfg,
        train=_build_train(train_raw, seed),
        **top,
    )
