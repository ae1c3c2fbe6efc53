"""Cycle-triplet and lower-face (Fixer) loss algebra.

These are forward-only reference values; a trainer computes the same numbers
on its own tensors. L1 norms are per-element means.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .metrics import cosine_similarity


@dataclass(frozen=True)
class LossWeights:
    ct: tuple[float, float, float] = (1.0, 5.0, 10.0)
    fix: tuple[float, float] = (1.0, 2.0)

    def __post_init__(self):
        object.__setattr__(self, "ct", tuple(float(x) for x in self.ct))
        object.__setattr__(self, "fix", tuple(float(x) for x in self.fix))
        if len(self.ct) != 3 or len(self.fix) != 2:
            raise ValidationError("need three cycle-triplet weights and two fixer weights")
        if min(self.ct + self.fix) < 0:
            raise ValidationError("loss weights must be non-negative")

    def scaled(self, factor: float) -> "LossWeights":
        return LossWeights(tuple(factor * x for x in self.ct), tuple(factor * x for x in self.fix))

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(tuple(d.get("ct", cls.ct)), tuple(d.get("fix", cls.fix)))


FACESHIFTER_WEIGHTS = LossWeights((1.0, 5.0, 10.0), (1.0, 2.0))
SIMSWAP_WEIGHTS = LossWeights((0.5, 5.0, 10.0), (0.5, 0.5))


def pixel_loss(y, ref) -> float:
    a = np.asarray(y, dtype=np.float64)
    b = np.asarray(ref, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"pixel_loss: shape mismatch {a.shape} vs {b.shape}")
    return float(np.mean(np.abs(a - b)))


def perceptual_loss(fy: Sequence[np.ndarray], fr: Sequence[np.ndarray]) -> float:
    """Sum over layers of the per-layer mean absolute feature difference."""
    if len(fy) != len(fr):
        raise ValidationError(f"feature stacks have {len(fy)} and {len(fr)} layers")
    total = 0.0
    for k, (a, b) in enumerate(zip(fy, fr)):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if a.shape != b.shape:
            raise ValidationError(f"layer {k}: shape mismatch {a.shape} vs {b.shape}")
        total += float(np.mean(np.abs(a - b)))
    return total


def identity_loss(e_y, e_ref) -> float:
    return 1.0 - cosine_similarity(e_y, e_ref)


@dataclass(frozen=True)
class CycleLoss:
    pixel: float
    lpips: float
    id: float
    total: float


@dataclass(frozen=True)
class FixerLoss:
    source: float
    reference: float
    total: float


def cycle_triplet_total(y, ref, fy, fr, ey, er, w: LossWeights = FACESHIFTER_WEIGHTS) -> CycleLoss:
    pix = pixel_loss(y, ref)
    lp = perceptual_loss(fy, fr)
    idl = identity_loss(ey, er)
    l1, l2, l3 = w.ct
    return CycleLoss(pix, lp, idl, l1 * pix + l2 * lp + l3 * idl)


def fixer_total(e_src, e_ref, e_y, w: LossWeights = FACESHIFTER_WEIGHTS,
                has_reference: bool = True) -> FixerLoss:
    """Lower-face identity loss against the source and, for real references, the reference.

    When ``has_reference`` is false the reference term is exactly zero and
    ``e_ref`` is never read.
    """
    src = identity_loss(e_src, e_y)
    refl = identity_loss(e_ref, e_y) if has_reference else 0.0
    l1, l2 = w.fix
    total = l1 * src + (l2 * refl if has_reference else 0.0)
    return FixerLoss(src, refl, total)


def loss_report(ct: CycleLoss, fx: FixerLoss) -> dict[str, float]:
    return {
        "pixel": ct.pixel, "lpips": ct.lpips, "id": ct.id, "ct_total": ct.total,
        "fix_s": fx.source, "fix_ref": fx.reference, "fix_total": fx.total,
    }


def weights_dict(w: LossWeights) -> dict:
    return {k: list(v) for k, v in asdict(w).items()}
