"""Draw a small synthetic pair corpus: cartoon faces, stand-in reenactments and masks.

Each pair gets two "identities" (face width, skin tone, jaw) and two "poses"
(face centre, mouth opening). The stand-in reenactment R_ab draws identity b
in the pose of a over a's background, which is what an external reenactment
model would be asked to produce.

    python scripts/make_fixture.py tests/fixtures/corpus --pairs 3 --size 64
"""

import argparse
import json
from pathlib import Path

import numpy as np
from PIL import Image


def ellipse(h, w, cy, cx, ry, rx):
    yy, xx = np.mgrid[:h, :w]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def draw(size, background, identity, pose):
    h = w = size
    img = background.copy()
    cy, cx = pose["cy"], pose["cx"]
    face = ellipse(h, w, cy, cx, 0.36 * size, identity["half_width"] * size)
    img[face] = identity["skin"]
    for dx in (-0.1, 0.1):
        img[ellipse(h, w, cy - 0.08 * size, cx + dx * size, 0.03 * size, 0.05 * size)] = identity["eyes"]
    mouth = ellipse(h, w, cy + 0.17 * size, cx, pose["mouth"] * size, 0.09 * size)
    img[mouth] = (0.55, 0.15, 0.2)
    inner = ellipse(h, w, cy, cx, 0.32 * size, 0.85 * identity["half_width"] * size)
    return np.clip(img, 0, 1), face, inner


def background(rng, size):
    ramp = np.linspace(0, 1, size)[None, :, None]
    lo, hi = rng.uniform(0.1, 0.5, 3), rng.uniform(0.5, 0.9, 3)
    bg = lo + (hi - lo) * ramp
    return np.broadcast_to(bg, (size, size, 3)) + 0.02 * rng.standard_normal((size, size, 3))


def save_rgb(path, img):
    Image.fromarray(np.floor(np.clip(img, 0, 1) * 255 + 0.5).astype(np.uint8), "RGB").save(path)


def save_mask(path, m):
    Image.fromarray(m.astype(np.uint8) * 255, "L").save(path)


def make_pair(out: Path, pair_id: str, rng, size: int) -> dict:
    d = out / pair_id
    d.mkdir(parents=True, exist_ok=True)
    # one narrow and one wide face so both bulge regions show up
    ids = [{"half_width": hw, "skin": rng.uniform(0.5, 0.95, 3), "eyes": rng.uniform(0.0, 0.3, 3)}
           for hw in (rng.uniform(0.19, 0.22), rng.uniform(0.28, 0.31))]
    poses = [{"cy": size / 2 + rng.uniform(-3, 3), "cx": size / 2 + rng.uniform(-3, 3),
              "mouth": rng.uniform(0.02, 0.06)} for _ in range(2)]
    bgs = [background(rng, size) for _ in range(2)]

    c_a, face_a, _ = draw(size, bgs[0], ids[0], poses[0])
    c_b, face_b, _ = draw(size, bgs[1], ids[1], poses[1])
    r_ab, face_rab, inner_ab = draw(size, bgs[0], ids[1], poses[0])
    r_ba, face_rba, inner_ba = draw(size, bgs[1], ids[0], poses[1])
    files = {
        "c_a": ("c_a.png", c_a), "c_b": ("c_b.png", c_b),
        "r_ab": ("r_ab.png", r_ab), "r_ba": ("r_ba.png", r_ba),
    }
    masks = {
        "inner_mask_ab": ("inner_ab.png", inner_ab), "inner_mask_ba": ("inner_ba.png", inner_ba),
        "face_mask_a": ("face_a.png", face_a), "face_mask_b": ("face_b.png", face_b),
        "face_mask_rab": ("face_rab.png", face_rab), "face_mask_rba": ("face_rba.png", face_rba),
    }
    rec = {"pair_id": pair_id}
    for key, (name, img) in files.items():
        save_rgb(d / name, img)
        rec[key] = f"{pair_id}/{name}"
    for key, (name, m) in masks.items():
        save_mask(d / name, m)
        rec[key] = f"{pair_id}/{name}"
    return rec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--pairs", type=int, default=3)
    ap.add_argument("--size", type=int, default=64)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    recs = [make_pair(out, f"p{i:03d}", rng, args.size) for i in range(args.pairs)]
    with open(out / "pairs.jsonl", "w") as fh:
        for rec in recs:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    with open(out / "vanilla.txt", "w") as fh:
        for rec in recs:
            fh.write(rec["c_a"] + "\n" + rec["c_b"] + "\n")
    print(f"wrote {len(recs)} pairs to {out}")


if __name__ == "__main__":
    main()
