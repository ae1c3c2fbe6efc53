"""Synthetic face-swap supervision: triplet forging, routing manifests and metrics."""

from .blending import BlendConfig, multiband_blend
from .forge import (
    ManifestRow,
    PairInputs,
    Triplet,
    build_manifest,
    build_naive_triplets,
    iqa_gate,
    rotate_to_cycle,
    synthesize_swap,
)
from .imaging import build_pyramid, collapse_pyramid, crop_lower_face, mask_morphology, resample
from .reshaping import InpaintConfig, Region, compute_region_map, reshape_inpaint

__version__ = "0.1.0"
