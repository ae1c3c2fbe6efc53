"""Region map of two face masks and diffusion refill of the dropped bulge."""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy import ndimage

from .errors import GeometryError, UnfillableError
from .imaging import as_image, as_mask, check_same_dims


class Region(IntEnum):
    GRAY = 0  # background in both
    YELLOW = 1  # face in both
    GREEN = 2  # face only in the reenacted image
    BLUE = 3  # face only in the blend; dropped and refilled


PALETTE = np.array(
    [[128, 128, 128], [255, 255, 0], [0, 200, 0], [0, 0, 255]], dtype=np.uint8)


@dataclass(frozen=True)
class InpaintConfig:
    max_iterations: int = 2000
    residual_tolerance: float = 1e-4
    method: str = "diffusion"

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.residual_tolerance > 0:
            raise ValueError(f"residual_tolerance must be > 0, got {self.residual_tolerance}")
        if self.method != "diffusion":
            raise ValueError(f"unsupported inpainting method {self.method!r}")


def compute_region_map(m_face, r_face) -> np.ndarray:
    """Label each pixel by which of the two face masks contains it.

    ``m_face`` is the face region of the coarse blend, ``r_face`` that of the
    reenacted image. Returns a ``uint8`` raster of ``Region`` values.
    """
    m = as_mask(m_face, name="m_face")
    r = as_mask(r_face, name="r_face")
    check_same_dims(m, r, names=("m_face", "r_face"))
    labels = np.full(m.shape, Region.GRAY, dtype=np.uint8)
    labels[m & r] = Region.YELLOW
    labels[~m & r] = Region.GREEN
    labels[m & ~r] = Region.BLUE
    return labels


def region_counts(region_map: np.ndarray) -> dict[Region, int]:
    counts = np.bincount(np.asarray(region_map).ravel(), minlength=4)
    return {reg: int(counts[reg]) for reg in Region}


def colorize_region_map(region_map: np.ndarray) -> np.ndarray:
    return PALETTE[np.asarray(region_map)]


@dataclass(frozen=True)
class FillReport:
    iterations: int
    residuals: tuple[float, ...]

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else 0.0


def _neighbour_table(hole: np.ndarray, pw: int, parity: int):
    """Flat indices (in the zero-padded raster) of hole pixels of one colour and their 4-neighbours."""
    h, w = hole.shape
    ys, xs = np.nonzero(hole & (((np.indices(hole.shape).sum(axis=0)) % 2) == parity))
    flat = (ys + 1) * pw + (xs + 1)
    nbrs = np.stack([flat - pw, flat + pw, flat - 1, flat + 1])
    inside = np.stack([ys > 0, ys < h - 1, xs > 0, xs < w - 1])
    return flat, nbrs, inside.sum(axis=0).astype(np.float64)


def diffusion_fill(image, hole, cfg: InpaintConfig = InpaintConfig()) -> tuple[np.ndarray, FillReport]:
    """Replace ``hole`` pixels by the harmonic extension of their surroundings.

    Non-hole 4-neighbours act as fixed boundary values; the raster edge is a
    zero-flux boundary. Each hole component starts at the mean of its
    boundary values, then red-black Gauss-Seidel sweeps run until the largest
    per-sweep update falls to ``cfg.residual_tolerance``.
    """
    img = np.asarray(image, dtype=np.float32)
    hole = as_mask(hole, name="hole")
    check_same_dims(img, hole, names=("image", "hole"))
    out = img.copy()
    if not hole.any():
        return out, FillReport(0, ())
    if hole.all():
        raise UnfillableError("fill region covers the whole raster; no boundary to diffuse from")

    h, w = hole.shape
    nch = img.shape[2] if img.ndim == 3 else 1
    pw = w + 2
    padded = np.zeros((h + 2, pw, nch), dtype=np.float64)
    padded[1:-1, 1:-1] = img.reshape(h, w, nch)

    labels, ncomp = ndimage.label(hole, structure=ndimage.generate_binary_structure(2, 1))
    sums = np.zeros((ncomp + 1, nch))
    counts = np.zeros(ncomp + 1)
    interior = padded[1:-1, 1:-1]
    hole_p = np.pad(hole, 1, constant_values=True)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        nb_is_boundary = ~hole_p[1 + dy:h + 1 + dy, 1 + dx:w + 1 + dx] & hole
        ys, xs = np.nonzero(nb_is_boundary)
        comp = labels[ys, xs]
        counts += np.bincount(comp, minlength=ncomp + 1)
        vals = interior[ys + dy, xs + dx]
        for c in range(nch):
            sums[:, c] += np.bincount(comp, weights=vals[:, c], minlength=ncomp + 1)
    if np.any(counts[1:] == 0):
        raise UnfillableError("a fill component has no boundary pixels")
    interior[hole] = (sums / np.maximum(counts, 1)[:, None])[labels[hole]]

    # channel-major so every gather is a contiguous 1-D take per channel
    u = np.ascontiguousarray(padded.reshape(-1, nch).T)
    sweeps = [_neighbour_table(hole, pw, parity) for parity in (0, 1)]
    residuals = []
    for _ in range(cfg.max_iterations):
        change = 0.0
        for flat, nbrs, count in sweeps:
            if flat.size == 0:
                continue
            new = np.take(u, nbrs, axis=1).sum(axis=1) / count
            change = max(change, float(np.abs(new - u[:, flat]).max()))
            u[:, flat] = new
        residuals.append(change)
        if change <= cfg.residual_tolerance:
            break

    padded = u.T.reshape(padded.shape)
    filled = padded[1:-1, 1:-1].reshape(img.shape)
    out[hole] = filled[hole].astype(np.float32)
    return out, FillReport(len(residuals), tuple(residuals))


def reshape_inpaint(blended, region_map, cfg: InpaintConfig = InpaintConfig()) -> np.ndarray:
    """Drop the BLUE pixels of ``blended`` and refill them from the background.

    Pixels with any other label are returned unchanged, bit for bit. GREEN
    pixels show reenacted face content only as far as the blend mask reached;
    outside it they still hold the target's background.
    """
    img = as_image(blended, name="blended")
    labels = np.asarray(region_map)
    if labels.shape != img.shape[:2]:
        raise GeometryError(f"region map {labels.shape} does not match image {img.shape[:2]}")
    out, _ = diffusion_fill(img, labels == Region.BLUE, cfg)
    return out
