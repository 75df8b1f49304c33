"""Run configuration: one flat key = value file, every key overridable."""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class RunConfig:
    """Knobs for the train/edit/evaluate pipeline and the edit service."""

    seed: int = 0
    dim: int = 32
    answer_slots: int = 4
    max_len: int = 32
    classifier_variant: str = "embed"
    optimizer: str = "gd"
    base_epochs: int = 1000
    base_lr: float = 0.5
    classifier_epochs: int = 800
    classifier_lr: float = 0.5
    cf_epochs: int = 1000
    cf_lr: float = 0.5
    k: int = 10
    delta: float = 2.75
    unlikelihood_weight: float = 1.0
    data_dir: str = "data"
    model_dir: str = "models"
    memory_path: str = "models/memory.jsonl"
    host: str = "127.0.0.1"
    port: int = 8080

    def __post_init__(self) -> None:
        for name in ("seed", "dim", "answer_slots", "max_len", "base_epochs",
                     "classifier_epochs", "cf_epochs", "k", "port"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("base_lr", "classifier_lr", "cf_lr", "delta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.classifier_variant not in ("embed", "cross"):
            raise ValueError("classifier_variant must be 'embed' or 'cross'")

    def to_text(self) -> str:
        return "\n".join(f"{f.name} = {getattr(self, f.name)}" for f in fields(self)) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        values: dict[str, object] = {}
        names = {f.name: f for f in fields(cls)}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
            key, _, val = (part.strip() for part in line.partition("="))
            if key not in names:
                raise ValueError(f"line {lineno}: unknown config key {key!r}")
            values[key] = _parse_value(names[key].type, val)
        return cls(**values)

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        return cls.from_text(Path(path).read_text(encoding="utf-8"))

    def override(self, **kwargs) -> "RunConfig":
        """New config with the given non-None fields replaced."""
        values = {f.name: getattr(self, f.name) for f in fields(self)}
        for key, val in kwargs.items():
            if val is None:
                continue
            if key not in values:
                raise ValueError(f"unknown config key {key!r}")
            values[key] = val
        return RunConfig(**values)


def _parse_value(typ: str | type, val: str):
    name = typ if isinstance(typ, str) else typ.__name__
    if name == "int":
        return int(val)
    if name == "float":
        return float(val)
    return val
