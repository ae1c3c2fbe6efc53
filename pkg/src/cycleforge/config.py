"""Run configuration: a flat JSON document with CLI overrides."""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .blending import BlendConfig
from .errors import ValidationError
from .imaging import ALIGNED_SIZE
from .reshaping import InpaintConfig

CONFIG_ENV = "CYCLEFORGE_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    levels: int | None = None
    erode_radius: int = 2
    inpaint_iterations: int = 2000
    inpaint_tolerance: float = 1e-4
    iqa_threshold: float = 0.4
    ratio: float = 0.4
    recon_fraction: float = 0.3
    seed: int = 0
    workers: int = 1
    crop_left: int = 28
    crop_top: int = 56
    crop_size: int = 56

    def __post_init__(self):
        problems = []
        if self.levels is not None and self.levels < 2:
            problems.append("levels must be >= 2")
        if self.erode_radius < 0:
            problems.append("erode_radius must be >= 0")
        if self.inpaint_iterations < 1:
            problems.append("inpaint_iterations must be >= 1")
        if not self.inpaint_tolerance > 0:
            problems.append("inpaint_tolerance must be > 0")
        if not 0.0 <= self.iqa_threshold <= 1.0:
            problems.append("iqa_threshold must lie in [0, 1]")
        if self.ratio < 0:
            problems.append("ratio must be >= 0")
        if not 0.0 <= self.recon_fraction <= 1.0:
            problems.append("recon_fraction must lie in [0, 1]")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if (min(self.crop_left, self.crop_top) < 0 or self.crop_size <= 0
                or max(self.crop_left, self.crop_top) + self.crop_size > ALIGNED_SIZE):
            problems.append(f"crop window must fit inside {ALIGNED_SIZE}x{ALIGNED_SIZE}")
        if problems:
            raise ValidationError("; ".join(problems))

    @property
    def blend(self) -> BlendConfig:
        return BlendConfig(self.levels, self.erode_radius)

    @property
    def inpaint(self) -> InpaintConfig:
        return InpaintConfig(self.inpaint_iterations, self.inpaint_tolerance)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    def override(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def load_config(path: str | Path | None = None) -> RunConfig:
    """Read ``path``, else the file named by ``$CYCLEFORGE_CONFIG``, else defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    try:
        return RunConfig.from_json(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from None
