"""Model configuration and its flat ``key = value`` file format."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

CHANNELS = ("title_abstract", "intro", "methods", "results", "discuss")
# record sections feeding each channel
CHANNEL_SECTIONS = {
    "title_abstract": ("title", "abstract"),
    "intro": ("intro",),
    "methods": ("methods",),
    "results": ("results",),
    "discuss": ("discuss",),
}
DEFAULT_LENGTHS = {"title_abstract": 64, "intro": 256, "methods": 512, "results": 512, "discuss": 512}


@dataclass
class ModelConfig:
    d: int = 200
    kernel_size: int = 3
    dilations: tuple[int, ...] = (1, 2, 3)
    conv_channels: Optional[int] = None  # width of the conv stack; None means 2*d
    channels: tuple[str, ...] = CHANNELS
    channel_lengths: dict[str, int] = field(default_factory=lambda: dict(DEFAULT_LENGTHS))
    dropout: float = 0.2
    lr: float = 3e-4
    decay: float = 0.9
    batch_size: int = 8
    epochs: int = 20
    patience: int = 3
    seed: int = 0
    min_freq: int = 2
    init_scale: float = 0.05
    normalize_adjacency: bool = False
    gcn_activation: str = "relu"
    dtype: str = "float64"

    def __post_init__(self):
        self.dilations = tuple(int(x) for x in self.dilations)
        self.channels = tuple(self.channels)
        if self.d <= 0:
            raise ValueError("d must be positive")
        if self.kernel_size < 1:
            raise ValueError("kernel_size must be positive")
        if not self.dilations or any(x < 1 for x in self.dilations):
            raise ValueError("dilations must be positive integers")
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        unknown = set(self.channels) - set(CHANNELS)
        if unknown or not self.channels:
            raise ValueError(f"channels must be a non-empty subset of {CHANNELS}, got {self.channels}")
        for ch in self.channels:
            if self.channel_lengths.get(ch, 0) < self.receptive_field:
                raise ValueError(
                    f"channel {ch} length {self.channel_lengths.get(ch)} is below the receptive field {self.receptive_field}"
                )
        if self.gcn_activation not in ("relu", "identity"):
            raise ValueError("gcn_activation must be relu or identity")
        if self.dtype not in ("float64", "float32"):
            raise ValueError("dtype must be float64 or float32")

    @property
    def width(self) -> int:
        return self.conv_channels if self.conv_channels is not None else 2 * self.d

    @property
    def receptive_field(self) -> int:
        return (self.kernel_size - 1) * sum(self.dilations) + 1

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["dilations"] = list(self.dilations)
        d["channels"] = list(self.channels)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown model config keys: {sorted(extra)}")
        kw = dict(d)
        if "channel_lengths" in kw:
            lengths = dict(DEFAULT_LENGTHS)
            lengths.update({k: int(v) for k, v in kw["channel_lengths"].items()})
            kw["channel_lengths"] = lengths
        return cls(**kw)

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()


def _coerce(key: str, raw: str, typ) -> Any:
    raw = raw.strip()
    if key in ("dilations",):
        return tuple(int(x) for x in raw.split(",") if x.strip())
    if key == "channels":
        return tuple(x.strip() for x in raw.split(",") if x.strip())
    if key == "channel_lengths":
        out = {}
        for part in raw.split(","):
            name, _, n = part.partition(":")
            out[name.strip()] = int(n)
        return out
    if raw.lower() in ("none", ""):
        return None
    if typ in (bool, "bool"):
        return raw.lower() in ("1", "true", "yes", "on")
    if typ in (int, "int", "Optional[int]"):
        return int(raw)
    if typ in (float, "float"):
        return float(raw)
    return raw


def parse_flat_config(text: str) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValueError(f"config line {lineno}: expected key = value")
        out[key.strip()] = value.strip()
    return out


def coerce_model_fields(raw: Mapping[str, str]) -> dict[str, Any]:
    types = {f.name: f.type for f in dataclasses.fields(ModelConfig)}
    out = {}
    for k, v in raw.items():
        if k in types:
            out[k] = _coerce(k, v, types[k])
    return out


def format_flat_config(cfg: ModelConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, list):
            v = ",".join(str(x) for x in v)
        elif isinstance(v, dict):
            v = ",".join(f"{a}:{b}" for a, b in v.items())
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def load_flat_config(path) -> dict[str, str]:
    return parse_flat_config(Path(path).read_text(encoding="utf-8"))
