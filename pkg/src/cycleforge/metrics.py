"""Identity, attribute and distribution metrics over precomputed embeddings."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateError, NumericalError, ValidationError

EIG_CLAMP = 1e-6
FIXER_DIM = 256


@dataclass(frozen=True)
class Gallery:
    ids: tuple[str, ...]
    embeddings: np.ndarray

    def __post_init__(self):
        emb = np.asarray(self.embeddings)
        if emb.ndim != 2:
            raise ValidationError(f"gallery embeddings must be 2-D, got shape {emb.shape}")
        if len(self.ids) != emb.shape[0]:
            raise ValidationError(f"{len(self.ids)} ids for {emb.shape[0]} gallery rows")
        if emb.shape[0] == 0:
            raise ValidationError("gallery is empty")
        object.__setattr__(self, "ids", tuple(self.ids))

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]


def _as_matrix(vectors, name: str) -> np.ndarray:
    a = np.asarray(vectors, dtype=np.float64)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValidationError(f"{name}: expected a list of vectors, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name}: non-finite values")
    return a


def _unit_rows(a: np.ndarray, name: str) -> np.ndarray:
    norms = np.linalg.norm(a, axis=1)
    if np.any(norms == 0):
        raise DegenerateError(f"{name}: zero-norm embedding at row {int(np.argmin(norms))}")
    return a / norms[:, None]


def _aligned(a, b, names: tuple[str, str]) -> tuple[np.ndarray, np.ndarray]:
    x = _as_matrix(a, names[0])
    y = _as_matrix(b, names[1])
    if x.shape != y.shape:
        raise ValidationError(f"{names[0]} {x.shape} and {names[1]} {y.shape} are not aligned")
    if x.shape[0] == 0:
        raise ValidationError("empty embedding lists")
    return x, y


def cosine_similarity(a, b) -> float:
    x = np.asarray(a, dtype=np.float64).ravel()
    y = np.asarray(b, dtype=np.float64).ravel()
    if x.shape != y.shape:
        raise ValidationError(f"dimension mismatch {x.shape[0]} vs {y.shape[0]}")
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx == 0 or ny == 0:
        raise DegenerateError("cosine similarity of a zero vector")
    return float(np.clip(x @ y / (nx * ny), -1.0, 1.0))


def id_similarity(swapped, source) -> float:
    """Mean cosine similarity over aligned embedding pairs.

    With whole-face recognition embeddings this is ID Sim.; with lower-face
    crop embeddings it is L Sim.
    """
    x, y = _aligned(swapped, source, ("swapped", "source"))
    cos = np.sum(_unit_rows(x, "swapped") * _unit_rows(y, "source"), axis=1)
    return float(np.mean(np.clip(cos, -1.0, 1.0)))


def nearest_gallery_index(queries, gallery: Gallery, block: int = 2048) -> np.ndarray:
    """Index of the max-cosine gallery row for each query; ties go to the lowest index."""
    q = _as_matrix(queries, "queries")
    g = _as_matrix(gallery.embeddings, "gallery")
    if q.shape[1] != g.shape[1]:
        raise ValidationError(f"query dim {q.shape[1]} != gallery dim {g.shape[1]}")
    qn = _unit_rows(q, "queries")
    gn = _unit_rows(g, "gallery").T
    out = np.empty(q.shape[0], dtype=np.int64)
    for start in range(0, q.shape[0], block):
        out[start:start + block] = np.argmax(qn[start:start + block] @ gn, axis=1)
    return out


def id_retrieval(queries, query_ids: Sequence[str], gallery: Gallery) -> float:
    """Top-1 retrieval accuracy in percent (ID Ret. or L Ret.)."""
    if len(query_ids) != len(queries):
        raise ValidationError(f"{len(query_ids)} ids for {len(queries)} queries")
    if len(query_ids) == 0:
        raise ValidationError("no queries")
    nearest = nearest_gallery_index(queries, gallery)
    gids = np.asarray(gallery.ids, dtype=object)
    hits = gids[nearest] == np.asarray(query_ids, dtype=object)
    return 100.0 * float(np.mean(hits))


def vector_l2_error(a, b) -> float:
    """Mean Euclidean distance between aligned pose or expression vectors."""
    x, y = _aligned(a, b, ("a", "b"))
    return float(np.mean(np.linalg.norm(x - y, axis=1)))


def _psd_sqrt(s: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(s)
    if vals.min() < -EIG_CLAMP:
        raise NumericalError(f"covariance has eigenvalue {vals.min():.3g} below -{EIG_CLAMP}")
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(mu_a, sigma_a, mu_b, sigma_b) -> float:
    """Frechet distance between two Gaussians.

    The cross term ``Tr((Sa Sb)^1/2)`` is evaluated as the sum of square
    roots of the eigenvalues of the symmetric ``Sa^1/2 Sb Sa^1/2``.
    """
    mu_a, mu_b = np.atleast_1d(mu_a), np.atleast_1d(mu_b)
    sigma_a, sigma_b = np.atleast_2d(sigma_a), np.atleast_2d(sigma_b)
    root_a = _psd_sqrt(sigma_a)
    middle = root_a @ sigma_b @ root_a
    vals = np.linalg.eigvalsh((middle + middle.T) / 2.0)
    if vals.min() < -EIG_CLAMP:
        raise NumericalError(f"covariance product has eigenvalue {vals.min():.3g} below -{EIG_CLAMP}")
    cross = np.sum(np.sqrt(np.clip(vals, 0.0, None)))
    diff = mu_a - mu_b
    value = diff @ diff + np.trace(sigma_a) + np.trace(sigma_b) - 2.0 * cross
    return float(max(value, 0.0))


def gaussian_fit(features) -> tuple[np.ndarray, np.ndarray]:
    f = _as_matrix(features, "features")
    if f.shape[0] < 2:
        raise ValidationError("need at least two feature rows to estimate a covariance")
    if f.shape[0] <= f.shape[1]:
        warnings.warn(f"{f.shape[0]} samples for {f.shape[1]} dims; covariance is rank deficient",
                      stacklevel=3)
    return f.mean(axis=0), np.atleast_2d(np.cov(f, rowvar=False, ddof=1))


def fid_from_features(set_a, set_b) -> float:
    a = _as_matrix(set_a, "set_a")
    b = _as_matrix(set_b, "set_b")
    if a.shape[1] != b.shape[1]:
        raise ValidationError(f"feature dims differ: {a.shape[1]} vs {b.shape[1]}")
    mu_a, s_a = gaussian_fit(a)
    mu_b, s_b = gaussian_fit(b)
    return frechet_distance(mu_a, s_a, mu_b, s_b)


def fuse_identity(v_id, v_fix) -> np.ndarray:
    """Concatenate the recognition embedding with the lower-face embedding."""
    a = np.asarray(v_id, dtype=np.float32)
    b = np.asarray(v_fix, dtype=np.float32)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValidationError("non-finite embedding values")
    return np.concatenate([a, b], axis=-1)
