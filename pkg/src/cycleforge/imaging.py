"""Pixel containers, binomial pyramids, binary morphology and crop geometry.

Images are ``float32`` arrays of shape ``(H, W, 3)`` with values in ``[0, 1]``;
masks are boolean arrays of shape ``(H, W)``. Pyramid routines also accept
single-channel ``(H, W)`` float rasters so the same code smooths masks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
from PIL import Image as PILImage
from scipy import ndimage

from .errors import ContractError, GeometryError, LevelCountError, WrongKindError

KERNEL = np.array([1.0, 4.0, 6.0, 4.0, 1.0], dtype=np.float32) / 16.0
MIN_IMAGE_SIDE = 8
MIN_LEVEL_SIDE = 4

ALIGNED_SIZE = 112
LOWER_FACE_LEFT = 28
LOWER_FACE_TOP = 56
LOWER_FACE_SIZE = 56


def as_image(arr, *, name: str = "image") -> np.ndarray:
    """Validate ``arr`` as an RGB image and return it as float32."""
    img = np.asarray(arr, dtype=np.float32)
    if img.ndim != 3 or img.shape[2] != 3:
        raise GeometryError(f"{name}: expected (H, W, 3) raster, got shape {img.shape}")
    if img.shape[0] < MIN_IMAGE_SIDE or img.shape[1] < MIN_IMAGE_SIDE:
        raise GeometryError(f"{name}: sides must be >= {MIN_IMAGE_SIDE}, got {img.shape[:2]}")
    if not np.all(np.isfinite(img)):
        raise ContractError(f"{name}: non-finite pixel values")
    return img


def as_mask(arr, *, name: str = "mask") -> np.ndarray:
    m = np.asarray(arr)
    if m.ndim == 3 and m.shape[2] == 1:
        m = m[:, :, 0]
    if m.ndim != 2:
        raise GeometryError(f"{name}: expected (H, W) raster, got shape {m.shape}")
    return m != 0


def check_same_dims(*rasters: np.ndarray, names: Sequence[str] | None = None) -> tuple[int, int]:
    dims = {r.shape[:2] for r in rasters}
    if len(dims) != 1:
        label = ", ".join(names) if names else "rasters"
        shapes = [r.shape[:2] for r in rasters]
        raise GeometryError(f"{label}: dimension mismatch {shapes}")
    return rasters[0].shape[:2]


def clamp01(img: np.ndarray) -> np.ndarray:
    return np.clip(img, 0.0, 1.0).astype(np.float32, copy=False)


# -- resampling ---------------------------------------------------------------

def _smooth_axis(a: np.ndarray, axis: int, kernel: np.ndarray) -> np.ndarray:
    pad = [(0, 0)] * a.ndim
    pad[axis] = (2, 2)
    p = np.pad(a, pad, mode="reflect")
    n = a.shape[axis]
    out = np.zeros_like(a)
    window = [slice(None)] * a.ndim
    for k, w in enumerate(kernel):
        window[axis] = slice(k, k + n)
        out += w * p[tuple(window)]
    return out


def _smooth(a: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    return _smooth_axis(_smooth_axis(a, 0, kernel), 1, kernel)


def down_dims(h: int, w: int) -> tuple[int, int]:
    return (h + 1) // 2, (w + 1) // 2


def resample(img: np.ndarray, direction: Literal["down", "up"],
             target_dims: tuple[int, int]) -> np.ndarray:
    """Halve or double a raster with the 5-tap binomial kernel.

    ``down`` smooths with ``[1, 4, 6, 4, 1] / 16`` (separable, reflect border)
    and keeps even rows and columns, so ``target_dims`` must be the ceil-half
    of the input. ``up`` zero-inserts into ``target_dims`` (which must halve
    back to the input dims) and smooths with twice the kernel per axis.
    """
    a = np.asarray(img, dtype=np.float32)
    h, w = a.shape[:2]
    th, tw = (int(d) for d in target_dims)
    if direction == "down":
        if (th, tw) != down_dims(h, w):
            raise ContractError(f"down: {h}x{w} halves to {down_dims(h, w)}, not {(th, tw)}")
        return _smooth(a, KERNEL)[::2, ::2]
    if direction == "up":
        if down_dims(th, tw) != (h, w):
            raise ContractError(f"up: {(th, tw)} does not halve to {h}x{w}")
        z = np.zeros((th, tw) + a.shape[2:], dtype=np.float32)
        z[::2, ::2] = a
        return _smooth(z, 2.0 * KERNEL)
    raise ContractError(f"unknown resample direction {direction!r}")


def down(img: np.ndarray) -> np.ndarray:
    return resample(img, "down", down_dims(*img.shape[:2]))


def up(img: np.ndarray, target_dims: tuple[int, int]) -> np.ndarray:
    return resample(img, "up", target_dims)


# -- pyramids -----------------------------------------------------------------

@dataclass(frozen=True)
class Pyramid:
    levels: tuple[np.ndarray, ...]
    kind: Literal["gaussian", "laplacian"]

    def __len__(self) -> int:
        return len(self.levels)

    @property
    def dims(self) -> list[tuple[int, int]]:
        return [lv.shape[:2] for lv in self.levels]


def level_dims(h: int, w: int, levels: int) -> list[tuple[int, int]]:
    dims = [(h, w)]
    for _ in range(levels - 1):
        dims.append(down_dims(*dims[-1]))
    return dims


def default_levels(h: int, w: int) -> int:
    return max(2, min(5, int(math.floor(math.log2(min(h, w)))) - 2))


def check_levels(h: int, w: int, levels: int) -> None:
    if levels < 2:
        raise LevelCountError(f"pyramid needs at least 2 levels, got {levels}")
    sh, sw = level_dims(h, w, levels)[-1]
    if min(sh, sw) < MIN_LEVEL_SIDE:
        raise LevelCountError(
            f"{levels} levels on {h}x{w} leaves a {sh}x{sw} top level (< {MIN_LEVEL_SIDE})")


def build_pyramid(img: np.ndarray, levels: int,
                  kind: Literal["gaussian", "laplacian"] = "laplacian") -> Pyramid:
    a = np.asarray(img, dtype=np.float32)
    check_levels(a.shape[0], a.shape[1], levels)
    gauss = [a]
    for _ in range(levels - 1):
        gauss.append(down(gauss[-1]))
    if kind == "gaussian":
        return Pyramid(tuple(gauss), "gaussian")
    if kind != "laplacian":
        raise WrongKindError(f"unknown pyramid kind {kind!r}")
    bands = [gauss[k] - up(gauss[k + 1], gauss[k].shape[:2]) for k in range(levels - 1)]
    bands.append(gauss[-1])
    return Pyramid(tuple(bands), "laplacian")


def collapse_pyramid(pyr: Pyramid) -> np.ndarray:
    if pyr.kind != "laplacian":
        raise WrongKindError(f"collapse needs a laplacian pyramid, got {pyr.kind}")
    acc = pyr.levels[-1]
    for band in reversed(pyr.levels[:-1]):
        acc = up(acc, band.shape[:2]) + band
    return clamp01(acc)


# -- crop geometry ------------------------------------------------------------

def crop_lower_face(aligned: np.ndarray, left: int = LOWER_FACE_LEFT,
                    top: int = LOWER_FACE_TOP, size: int = LOWER_FACE_SIZE) -> np.ndarray:
    """Cut the lower-face patch out of a 112x112 recognition-aligned face.

    The default window covers columns 28..83 and rows 56..111.
    """
    a = np.asarray(aligned)
    if a.shape[:2] != (ALIGNED_SIZE, ALIGNED_SIZE):
        raise GeometryError(f"expected a {ALIGNED_SIZE}x{ALIGNED_SIZE} aligned face, got {a.shape[:2]}")
    if left < 0 or top < 0 or size <= 0 or left + size > ALIGNED_SIZE or top + size > ALIGNED_SIZE:
        raise GeometryError(f"crop window ({left}, {top}, {size}) leaves the aligned face")
    return a[top:top + size, left:left + size].copy()


# -- morphology ---------------------------------------------------------------

def disc(radius: int) -> np.ndarray:
    r = int(radius)
    yy, xx = np.mgrid[-r:r + 1, -r:r + 1]
    return xx * xx + yy * yy <= r * r


def mask_morphology(m: np.ndarray, op: Literal["erode", "dilate"], radius: int) -> np.ndarray:
    """Binary erosion or dilation with a disc; pixels outside the raster count as 0."""
    mask = as_mask(m)
    if radius < 0:
        raise ContractError(f"radius must be >= 0, got {radius}")
    if radius == 0:
        return mask.copy()
    se = disc(radius)
    if op == "erode":
        return ndimage.binary_erosion(mask, structure=se, border_value=0)
    if op == "dilate":
        return ndimage.binary_dilation(mask, structure=se, border_value=0)
    raise ContractError(f"unknown morphology op {op!r}")


# -- file IO ------------------------------------------------------------------

def to_uint8(img: np.ndarray) -> np.ndarray:
    a = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.floor(a * 255.0 + 0.5).astype(np.uint8)


def read_image(path: str | Path) -> np.ndarray:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return as_image(arr / np.float32(255.0), name=str(path))


def write_image(path: str | Path, img: np.ndarray) -> None:
    PILImage.fromarray(to_uint8(img), mode="RGB").save(path, format="PNG")


def read_mask(path: str | Path) -> np.ndarray:
    with PILImage.open(path) as im:
        arr = np.asarray(im.convert("L"))
    return arr != 0


def write_mask(path: str | Path, m: np.ndarray) -> None:
    PILImage.fromarray(as_mask(m).astype(np.uint8) * 255, mode="L").save(path, format="PNG")
