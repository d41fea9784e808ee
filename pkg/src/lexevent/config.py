"""Training configuration: hyperparameters, ablation switches, file parsing.

The config file is flat ``key=value`` text whose keys match the field names
below; any key can also be overridden by a CLI flag of the same name.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from pathlib import Path


class ConfigError(ValueError):
    """Invalid or contradictory configuration."""


@dataclass(frozen=True)
class Ablation:
    """Structural switches matching the model-variant experiments."""

    no_Wtau: bool = False          # share one projection matrix across node types
    no_c2c: bool = False           # drop inter-character edges, keep self-loops
    last_char_only: bool = False   # word information flows only to its last character
    no_c2w: bool = False           # characters do not feed word nodes
    no_word: bool = False          # remove word nodes entirely
    no_margin_loss: bool = False   # objective reduces to the CRF loss
    no_prototype_init: bool = False  # label embeddings start random, not trigger means

    def validate(self) -> None:
        if self.no_word and (self.last_char_only or self.no_c2w):
            raise ConfigError("no_word contradicts word-edge flags (last_char_only/no_c2w)")

    @property
    def any_graph_flag(self) -> bool:
        return self.no_c2c or self.last_char_only or self.no_c2w or self.no_word


_ABLATION_KEYS = tuple(f.name for f in fields(Ablation))


@dataclass
class TrainConfig:
    d: int = 100
    hgat_layers: int = 2
    margin: float = 2.0
    alpha0: float = 0.85
    alpha_decay: float = 0.95
    lr: float = 0.1
    momentum: float = 0.9
    l2: float = 1e-5
    clip: float = 1.0  # global gradient-norm cap; <= 0 disables
    max_len: int = 250
    epochs: int = 100
    seed: int = 7
    no_Wtau: bool = False
    no_c2c: bool = False
    last_char_only: bool = False
    no_c2w: bool = False
    no_word: bool = False
    no_margin_loss: bool = False
    no_prototype_init: bool = False

    def __post_init__(self):
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        if self.alpha0 < 0:
            raise ConfigError("alpha0 must be non-negative")
        if self.lr <= 0:
            raise ConfigError("lr must be positive")
        if self.d % 2:
            raise ConfigError("d must be even (BiLSTM splits it across directions)")
        self.ablation.validate()

    @property
    def ablation(self) -> Ablation:
        return Ablation(**{k: getattr(self, k) for k in _ABLATION_KEYS})

    def alpha(self, epoch: int) -> float:
        return self.alpha0 * self.alpha_decay**epoch


def _parse_value(name: str, raw: str, target_type: type):
    raw = raw.strip()
    if target_type is bool:
        lowered = raw.lower()
        if lowered in ("true", "1", "yes"):
            return True
        if lowered in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected a boolean, got {raw!r}")
    try:
        return target_type(raw)
    except ValueError:
        raise ConfigError(f"{name}: expected {target_type.__name__}, got {raw!r}") from None


def load_config(path=None, overrides: dict | None = None) -> TrainConfig:
    """Build a TrainConfig from an optional key=value file plus overrides."""
    known = {f.name: f.type for f in fields(TrainConfig)}
    types = {name: (bool if "bool" in t else int if "int" in t else float) for name, t in known.items()}
    values: dict = {}
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in known:
                raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
            values[key] = _parse_value(key, raw, types[key])
    for key, value in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        if value is None:
            continue
        values[key] = value if not isinstance(value, str) else _parse_value(key, value, types[key])
    return TrainConfig(**values)
