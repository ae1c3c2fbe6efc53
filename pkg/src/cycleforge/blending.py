"""Multi-band blending of a reenacted face into its target frame."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LevelCountError
from .imaging import (
    as_image,
    as_mask,
    build_pyramid,
    check_levels,
    check_same_dims,
    collapse_pyramid,
    default_levels,
    mask_morphology,
    Pyramid,
)


@dataclass(frozen=True)
class BlendConfig:
    """``levels=None`` picks ``default_levels`` for the raster size."""

    levels: int | None = None
    mask_erode_radius: int = 2

    def __post_init__(self):
        if self.levels is not None and self.levels < 2:
            raise LevelCountError(f"levels must be >= 2, got {self.levels}")
        if self.mask_erode_radius < 0:
            raise ValueError(f"mask_erode_radius must be >= 0, got {self.mask_erode_radius}")

    def resolve_levels(self, h: int, w: int) -> int:
        return default_levels(h, w) if self.levels is None else self.levels


def multiband_blend(target, reenacted, inner_face_mask, cfg: BlendConfig = BlendConfig()) -> np.ndarray:
    """Blend ``reenacted`` into ``target`` inside ``inner_face_mask``.

    Each laplacian band is mixed with the matching level of the mask's
    gaussian pyramid, then the mixed pyramid is collapsed and clamped.
    """
    tgt = as_image(target, name="target")
    src = as_image(reenacted, name="reenacted")
    mask = as_mask(inner_face_mask, name="inner_face_mask")
    h, w = check_same_dims(tgt, src, mask, names=("target", "reenacted", "inner_face_mask"))
    levels = cfg.resolve_levels(h, w)
    check_levels(h, w, levels)

    if cfg.mask_erode_radius:
        # shrink away from the face boundary only; the raster edge is not one,
        # so a mask touching it keeps its edge pixels
        r = cfg.mask_erode_radius
        padded = np.pad(mask, r, constant_values=True)
        mask = mask_morphology(padded, "erode", r)[r:-r, r:-r]
    weights = build_pyramid(mask.astype(np.float32), levels, "gaussian")
    l_src = build_pyramid(src, levels, "laplacian")
    l_tgt = build_pyramid(tgt, levels, "laplacian")

    bands = []
    for g, a, b in zip(weights.levels, l_src.levels, l_tgt.levels):
        g = g[:, :, None]
        bands.append(g * a + (1.0 - g) * b)
    return collapse_pyramid(Pyramid(tuple(bands), "laplacian"))
