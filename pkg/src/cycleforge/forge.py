"""Swap synthesis, triplet assembly, quality gating and manifest routing.

Row kinds and what a trainer does with them::

    kind           target  source  reference
    vanilla_swap   I_t     I_s     None        (no pixel supervision)
    vanilla_recon  I_t     I_t     I_t
    naive          C_a     C_b     C_ab        (synthetic reference)
    cycle          C_ab    C_ba    C_a         (synthetic inputs, real reference)
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .blending import BlendConfig, multiband_blend
from .errors import PairingError, ValidationError
from .imaging import as_image, as_mask, check_same_dims, read_image, read_mask
from .reshaping import InpaintConfig, compute_region_map, reshape_inpaint

PAIR_FIELDS = (
    "c_a", "c_b", "r_ab", "r_ba",
    "inner_mask_ab", "inner_mask_ba",
    "face_mask_a", "face_mask_b", "face_mask_rab", "face_mask_rba",
)
# Optional parsed face masks of the blends themselves; default to the target's face mask.
OPTIONAL_PAIR_FIELDS = ("face_mask_mab", "face_mask_mba")
MASK_FIELDS = frozenset(f for f in PAIR_FIELDS + OPTIONAL_PAIR_FIELDS if "mask" in f)

ROW_KINDS = ("vanilla_recon", "vanilla_swap", "naive", "cycle")


# -- deterministic generator ----------------------------------------------------

class SplitMix64:
    """64-bit counter-based generator (SplitMix64).

    ``state`` advances by the golden-gamma constant each draw and the output
    is a fixed bijective mix of the state, so sequences are identical on
    every platform and numpy version.
    """

    GAMMA = 0x9E3779B97F4A7C15
    MASK = (1 << 64) - 1

    def __init__(self, seed: int):
        self.state = int(seed) & self.MASK

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & self.MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self.MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self.MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Uniform integer in ``[0, n)`` by rejection (no modulo bias)."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates, walking from the last slot down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n: int) -> list[int]:
        order = list(range(n))
        self.shuffle(order)
        return order


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


# -- records -----------------------------------------------------------------

@dataclass(frozen=True)
class ImageRef:
    path: str
    synthetic: bool = False
    data: np.ndarray | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Triplet:
    target: ImageRef
    source: ImageRef
    reference: ImageRef
    kind: str
    pair_id: str

    @property
    def refs(self) -> tuple[ImageRef, ImageRef, ImageRef]:
        return self.target, self.source, self.reference

    def to_json(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "kind": self.kind,
            "target": self.target.path,
            "source": self.source.path,
            "reference": self.reference.path,
            "synthetic": [r.synthetic for r in self.refs],
        }

    @classmethod
    def from_json(cls, rec: dict) -> "Triplet":
        flags = rec["synthetic"]
        return cls(ImageRef(rec["target"], bool(flags[0])), ImageRef(rec["source"], bool(flags[1])),
                   ImageRef(rec["reference"], bool(flags[2])), rec["kind"], str(rec["pair_id"]))


@dataclass(frozen=True)
class ManifestRow:
    kind: str
    target: str
    source: str
    reference: str | None
    pair_id: str | None
    synthetic: tuple[bool, bool, bool] = (False, False, False)

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "target": self.target, "source": self.source,
            "reference": self.reference, "pair_id": self.pair_id, "synthetic": list(self.synthetic),
        }

    @classmethod
    def from_json(cls, rec: dict) -> "ManifestRow":
        return cls(rec["kind"], rec["target"], rec["source"], rec.get("reference"),
                   rec.get("pair_id"), tuple(bool(x) for x in rec.get("synthetic", (False,) * 3)))

    @classmethod
    def from_triplet(cls, t: Triplet) -> "ManifestRow":
        return cls(t.kind, t.target.path, t.source.path, t.reference.path, t.pair_id,
                   tuple(r.synthetic for r in t.refs))


def routing_violations(row: ManifestRow) -> list[str]:
    """Structural problems of one row against the routing table in the module docstring."""
    out = []
    if row.kind not in ROW_KINDS:
        return [f"unknown kind {row.kind!r}"]
    t_syn, s_syn, r_syn = row.synthetic
    if row.kind == "vanilla_recon":
        if not (row.target == row.source == row.reference):
            out.append("vanilla_recon rows need target = source = reference")
        if any(row.synthetic):
            out.append("vanilla rows must use real images")
    elif row.kind == "vanilla_swap":
        if row.reference is not None:
            out.append("vanilla_swap rows must not carry a reference")
        if t_syn or s_syn:
            out.append("vanilla rows must use real images")
    elif row.kind == "naive":
        if row.reference is None:
            out.append("naive rows need a reference")
        if t_syn or s_syn:
            out.append("naive inputs must be real")
        if not r_syn:
            out.append("naive reference must be synthetic")
    else:
        if row.reference is None:
            out.append("cycle rows need a reference")
        if r_syn:
            out.append("cycle reference must be real")
        if not (t_syn and s_syn):
            out.append("cycle target and source must be synthetic")
    return out


# -- pair inputs ---------------------------------------------------------------

@dataclass(frozen=True)
class PairInputs:
    pair_id: str
    c_a: str
    c_b: str
    r_ab: str
    r_ba: str
    inner_mask_ab: str
    inner_mask_ba: str
    face_mask_a: str
    face_mask_b: str
    face_mask_rab: str
    face_mask_rba: str
    face_mask_mab: str | None = None
    face_mask_mba: str | None = None

    @classmethod
    def from_json(cls, rec: dict, base_dir: str | Path | None = None) -> "PairInputs":
        if not isinstance(rec, dict):
            raise ValidationError("pair record must be a JSON object")
        missing = [k for k in ("pair_id",) + PAIR_FIELDS if k not in rec]
        if missing:
            raise ValidationError(f"pair record missing {', '.join(missing)}")
        unknown = set(rec) - {"pair_id", *PAIR_FIELDS, *OPTIONAL_PAIR_FIELDS}
        if unknown:
            raise ValidationError(f"pair record has unknown keys {sorted(unknown)}")
        base = Path(base_dir) if base_dir is not None else None

        def resolve(p):
            if p is None:
                return None
            if not isinstance(p, str):
                raise ValidationError(f"path fields must be strings, got {p!r}")
            return str(base / p) if base is not None and not Path(p).is_absolute() else p

        kw = {k: resolve(rec.get(k)) for k in PAIR_FIELDS + OPTIONAL_PAIR_FIELDS}
        return cls(pair_id=str(rec["pair_id"]), **kw)

    def paths(self) -> dict[str, str]:
        return {k: getattr(self, k) for k in PAIR_FIELDS + OPTIONAL_PAIR_FIELDS if getattr(self, k)}

    def load(self) -> dict[str, np.ndarray]:
        """Read every referenced raster; raises ``OSError`` on missing files."""
        arrays = {k: (read_mask(p) if k in MASK_FIELDS else read_image(p))
                  for k, p in self.paths().items()}
        check_same_dims(*arrays.values(), names=tuple(arrays))
        return arrays


def read_pairs(path: str | Path) -> list[PairInputs]:
    """Parse a pairs JSONL file; paths are relative to the file's directory."""
    path = Path(path)
    pairs, seen = [], set()
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                pair = PairInputs.from_json(json.loads(line), path.parent)
            except (json.JSONDecodeError, ValidationError) as exc:
                raise ValidationError(f"{path}:{lineno}: {exc}") from None
            if pair.pair_id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate pair_id {pair.pair_id!r}")
            seen.add(pair.pair_id)
            pairs.append(pair)
    return pairs


# -- synthesis -----------------------------------------------------------------

@dataclass(frozen=True)
class SwapStages:
    blended: np.ndarray
    region_map: np.ndarray
    swapped: np.ndarray


def synthesize_stages(target, reenacted, inner_mask, m_face, r_face,
                      blend_cfg: BlendConfig = BlendConfig(),
                      inpaint_cfg: InpaintConfig = InpaintConfig()) -> SwapStages:
    tgt = as_image(target, name="target")
    src = as_image(reenacted, name="reenacted")
    masks = [as_mask(m, name=n) for m, n in
             ((inner_mask, "inner_mask"), (m_face, "m_face"), (r_face, "r_face"))]
    check_same_dims(tgt, src, *masks, names=("target", "reenacted", "inner_mask", "m_face", "r_face"))
    blended = multiband_blend(tgt, src, masks[0], blend_cfg)
    region_map = compute_region_map(masks[1], masks[2])
    return SwapStages(blended, region_map, reshape_inpaint(blended, region_map, inpaint_cfg))


def synthesize_swap(target, reenacted, inner_mask, m_face, r_face,
                    blend_cfg: BlendConfig = BlendConfig(),
                    inpaint_cfg: InpaintConfig = InpaintConfig()) -> np.ndarray:
    """Blend, then reshape: the synthetic swap carrying the reenacted identity."""
    return synthesize_stages(target, reenacted, inner_mask, m_face, r_face,
                             blend_cfg, inpaint_cfg).swapped


@dataclass(frozen=True)
class ForgedPair:
    naive: tuple[Triplet, Triplet]
    stages_ab: SwapStages
    stages_ba: SwapStages


def synthetic_path(pair_id: str, name: str) -> str:
    return f"{pair_id}/{name}.png"


def forge_pair(pair: PairInputs, arrays: dict[str, np.ndarray] | None = None,
               blend_cfg: BlendConfig = BlendConfig(),
               inpaint_cfg: InpaintConfig = InpaintConfig()) -> ForgedPair:
    a = pair.load() if arrays is None else arrays
    m_ab = a.get("face_mask_mab", a["face_mask_a"])
    m_ba = a.get("face_mask_mba", a["face_mask_b"])
    ab = synthesize_stages(a["c_a"], a["r_ab"], a["inner_mask_ab"], m_ab, a["face_mask_rab"],
                           blend_cfg, inpaint_cfg)
    ba = synthesize_stages(a["c_b"], a["r_ba"], a["inner_mask_ba"], m_ba, a["face_mask_rba"],
                           blend_cfg, inpaint_cfg)
    c_a = ImageRef(pair.c_a, False, a["c_a"])
    c_b = ImageRef(pair.c_b, False, a["c_b"])
    c_ab = ImageRef(synthetic_path(pair.pair_id, "c_ab"), True, ab.swapped)
    c_ba = ImageRef(synthetic_path(pair.pair_id, "c_ba"), True, ba.swapped)
    naive = (Triplet(c_a, c_b, c_ab, "naive", pair.pair_id),
             Triplet(c_b, c_a, c_ba, "naive", pair.pair_id))
    return ForgedPair(naive, ab, ba)


def build_naive_triplets(pair: PairInputs, arrays: dict[str, np.ndarray] | None = None,
                         blend_cfg: BlendConfig = BlendConfig(),
                         inpaint_cfg: InpaintConfig = InpaintConfig()) -> tuple[Triplet, Triplet]:
    return forge_pair(pair, arrays, blend_cfg, inpaint_cfg).naive


def rotate_to_cycle(naives: tuple[Triplet, Triplet]) -> tuple[Triplet, Triplet]:
    """Turn the two naive triplets of a pair into its two cycle triplets.

    ``(C_a, C_b, C_ab), (C_b, C_a, C_ba)`` becomes
    ``(C_ab, C_ba, C_a), (C_ba, C_ab, C_b)``. The map sends cycle triplets
    back to naive ones, so applying it twice is the identity.
    """
    first, second = naives
    if first.pair_id != second.pair_id:
        raise PairingError(f"triplets come from pairs {first.pair_id!r} and {second.pair_id!r}")
    if first.kind != second.kind:
        raise PairingError(f"cannot rotate a {first.kind} with a {second.kind} triplet")
    if first.target != second.source or first.source != second.target:
        raise PairingError(f"pair {first.pair_id!r}: triplets are not mirror images of each other")
    kind = "cycle" if first.kind == "naive" else "naive"
    return (Triplet(first.reference, second.reference, first.target, kind, first.pair_id),
            Triplet(second.reference, first.reference, second.target, kind, first.pair_id))


# -- quality gate --------------------------------------------------------------

IQA_THRESHOLD = 0.4


def iqa_gate(score_real_pair: Sequence[float], score_synth_pair: Sequence[float],
             threshold: float = IQA_THRESHOLD) -> str:
    """``"drop"`` iff quality fell by more than ``threshold`` in either direction.

    ``score_real_pair`` is ``(q(C_a), q(C_b))`` and ``score_synth_pair`` is
    ``(q(C_ab), q(C_ba))``; each synthetic image is compared with the real
    image whose background it keeps.
    """
    scores = list(score_real_pair) + list(score_synth_pair)
    if len(scores) != 4:
        raise ValidationError("need two real and two synthetic scores")
    for s in scores:
        if not (0.0 <= s <= 1.0):
            raise ValidationError(f"IQA score {s!r} outside [0, 1]")
    decrease = max(r - s for r, s in zip(score_real_pair, score_synth_pair))
    return "drop" if decrease > threshold else "keep"


# -- manifest ------------------------------------------------------------------

def build_manifest(vanilla: Sequence[str], cycles: Sequence[Triplet], ratio: float = 0.4,
                   recon_fraction: float = 0.3, seed: int = 0) -> list[ManifestRow]:
    """Mix vanilla samples with cycle triplets and shuffle deterministically.

    Draw order from one ``SplitMix64(seed)`` stream: a permutation of the
    vanilla list whose first ``round(recon_fraction * n)`` entries become
    reconstruction rows; one partner index per remaining swap row (in input
    order); a permutation of the cycle triplets (sorted by pair id, then
    target) whose head supplies ``round(ratio * n)`` rows; finally a
    Fisher-Yates shuffle of all rows.
    """
    n = len(vanilla)
    if n == 0:
        raise ValidationError("vanilla list is empty")
    if ratio < 0:
        raise ValidationError(f"ratio must be >= 0, got {ratio}")
    if not 0.0 <= recon_fraction <= 1.0:
        raise ValidationError(f"recon_fraction must lie in [0, 1], got {recon_fraction}")
    rng = SplitMix64(seed)

    recon = set(rng.permutation(n)[:round_half_up(recon_fraction * n)])
    rows = []
    for i, path in enumerate(vanilla):
        if i in recon:
            rows.append(ManifestRow("vanilla_recon", path, path, path, None))
            continue
        if n == 1:
            partner = 0
        else:
            partner = rng.below(n - 1)
            partner += partner >= i
        rows.append(ManifestRow("vanilla_swap", path, vanilla[partner], None, None))

    if any(t.kind != "cycle" for t in cycles):
        raise ValidationError("build_manifest mixes in cycle triplets only")
    pool = sorted(cycles, key=lambda t: (t.pair_id, t.target.path, t.source.path))
    want = round_half_up(ratio * n)
    if want > len(pool):
        warnings.warn(f"ratio {ratio} asks for {want} cycle rows but only {len(pool)} exist; using all",
                      stacklevel=2)
        want = len(pool)
    for j in rng.permutation(len(pool))[:want]:
        rows.append(ManifestRow.from_triplet(pool[j]))

    rng.shuffle(rows)
    return rows
