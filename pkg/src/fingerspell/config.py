"""Model and training configuration plus key=value config-file parsing.

Defaults follow the reference setup: a 6-block width-64 temporal graph
network over 2000-frame inputs and a 12-layer width-768 character
transformer over 600-character sentences. Tests and desk-scale runs shrink
these through the same knobs.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError


@dataclass(frozen=True)
class ModelConfig:
    video_blocks: int = 6
    video_hidden: int = 64
    temporal_kernel: int = 9
    video_target_len: int = 2000
    text_layers: int = 12
    text_heads: int = 12
    text_width: int = 768
    text_buckets: int = 16384
    text_target_len: int = 600

    def validate(self) -> None:
        if self.video_blocks < 1 or self.video_hidden < 1:
            raise ValidationError("video encoder needs >= 1 block and positive width")
        if self.temporal_kernel < 1 or self.temporal_kernel % 2 == 0:
            raise ValidationError("temporal_kernel must be odd and positive")
        if self.text_width % self.text_heads != 0:
            raise ValidationError(
                f"text_width {self.text_width} must be divisible by text_heads {self.text_heads}"
            )
        if min(self.video_target_len, self.text_target_len, self.text_layers, self.text_buckets) < 1:
            raise ValidationError("all model dimensions must be >= 1")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")
        if not self.lr > 0:
            raise ValidationError("lr must be > 0")


@dataclass(frozen=True)
class PretrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 0.001
    seed: int = 0
    clip_len: int = 200
    sentential_text_len: int = 300
    samples_per_epoch: int = 0  # 0 means one sample per video per objective
    objectives: str = "temporal,sentential"

    def validate(self) -> None:
        if self.epochs < 0:
            raise ValidationError("epochs must be >= 0")
        if self.batch_size < 1 or self.clip_len < 1:
            raise ValidationError("batch_size and clip_len must be >= 1")
        if not self.lr > 0:
            raise ValidationError("lr must be > 0")
        names = self.objective_list()
        if not names or any(n not in ("temporal", "sentential") for n in names):
            raise ValidationError(f"objectives must name temporal and/or sentential, got {self.objectives!r}")

    def objective_list(self) -> list[str]:
        return [n.strip() for n in self.objectives.split(",") if n.strip()]


def parse_config_file(path) -> dict[str, str]:
    """Read key=value lines; blank lines and '#' comments are skipped."""
    path = Path(path)
    overrides: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValidationError(f"{path}:{line_no}: expected key=value, got {stripped!r}")
            key, value = stripped.split("=", 1)
            overrides[key.strip()] = value.strip()
    return overrides


def apply_overrides(cfg, overrides: dict[str, str]):
    """Return a copy of a config dataclass with matching keys replaced.

    Values are coerced to the field's type; unconsumed keys are returned so
    callers can route one file through several configs and reject leftovers.
    """
    fields = {f.name: f for f in dataclasses.fields(cfg)}
    updates = {}
    remaining = {}
    for key, raw in overrides.items():
        if key not in fields:
            remaining[key] = raw
            continue
        ftype = fields[key].type
        try:
            if ftype in ("int", int):
                updates[key] = int(raw)
            elif ftype in ("float", float):
                updates[key] = float(raw)
            else:
                updates[key] = raw
        except ValueError as exc:
            raise ValidationError(f"config key {key}: {exc}") from exc
    return dataclasses.replace(cfg, **updates), remaining
