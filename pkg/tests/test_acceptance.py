"""Acceptance criteria, one test each. Run with ``pytest -m acceptance``."""

import filecmp
import json
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import ndimage

import oracles
from cycleforge.blending import multiband_blend
from cycleforge.cli import main
from cycleforge.forge import (
    ImageRef,
    ManifestRow,
    Triplet,
    build_manifest,
    forge_pair,
    iqa_gate,
    read_pairs,
    rotate_to_cycle,
    routing_violations,
)
from cycleforge.imaging import build_pyramid, collapse_pyramid
from cycleforge.losses import LossWeights, cycle_triplet_total, fixer_total
from cycleforge.metrics import Gallery, fid_from_features, id_retrieval, nearest_gallery_index
from cycleforge.pipeline import validate, write_manifest
from cycleforge.reshaping import Region, compute_region_map, diffusion_fill, region_counts, reshape_inpaint

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parents[1]


def test_01_pyramid_roundtrip():
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        x = rng.random((256, 256, 3), dtype=np.float32)
        worst = max(worst, float(np.abs(collapse_pyramid(build_pyramid(x, 5)) - x).max()))
    elapsed = time.perf_counter() - start
    print(f"\nround-trip max error {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-5
    assert elapsed < 30.0


def test_02_blend_extremes():
    rng = np.random.default_rng(2)
    for _ in range(50):
        h, w = rng.integers(16, 97, 2)
        t = rng.random((h, w, 3)).astype(np.float32)
        r = rng.random((h, w, 3)).astype(np.float32)
        m = rng.random((h, w)) < 0.5
        assert np.abs(multiband_blend(t, r, np.zeros((h, w), bool)) - t).max() <= 1e-5
        assert np.abs(multiband_blend(t, r, np.ones((h, w), bool)) - r).max() <= 1e-5
        assert np.abs(multiband_blend(t, t, m) - t).max() <= 1e-5


def test_03_region_map_oracle():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        p, q = rng.random(2)
        m = rng.random((64, 64)) < p
        r = rng.random((64, 64)) < q
        labels = compute_region_map(m, r)
        assert np.array_equal(labels, oracles.brute_region_map(m, r))
        assert sum(region_counts(labels).values()) == 4096


def _blob_mask(rng, n):
    yy, xx = np.mgrid[:n, :n]
    out = np.zeros((n, n), bool)
    for _ in range(rng.integers(1, 4)):
        cy, cx = rng.uniform(0, n, 2)
        ry, rx = rng.uniform(n / 8, n / 3, 2)
        out |= ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1
    return out


def test_04_reshape_non_evolution():
    rng = np.random.default_rng(4)
    done = 0
    while done < 100:
        n = int(rng.integers(24, 65))
        labels = compute_region_map(_blob_mask(rng, n), _blob_mask(rng, n))
        blue = labels == Region.BLUE
        if not blue.any() or blue.all():
            continue
        done += 1
        img = rng.random((n, n, 3)).astype(np.float32)
        out = reshape_inpaint(img, labels)
        assert out[~blue].tobytes() == img[~blue].tobytes()

        filled, report = diffusion_fill(img, blue)
        assert report.final_residual <= 1e-4
        assert np.array_equal(filled, out)
        comp, k = ndimage.label(blue)
        for c in range(1, k + 1):
            region = comp == c
            ring = ndimage.binary_dilation(region) & ~blue
            if not ring.any():
                continue
            lo, hi = img[ring].min(0), img[ring].max(0)
            vals = out[region]
            assert (vals >= lo - 1e-6).all() and (vals <= hi + 1e-6).all()


def _names(row, legend):
    return tuple(None if p is None else legend[p] for p in (row.target, row.source, row.reference))


def test_05_routing_table(corpus, tmp_path):
    pair = read_pairs(corpus / "pairs.jsonl")[0]
    naive = forge_pair(pair).naive
    cycle = rotate_to_cycle(naive)
    vanilla = [ManifestRow("vanilla_swap", pair.c_a, pair.c_b, None, None),
               ManifestRow("vanilla_recon", pair.c_a, pair.c_a, pair.c_a, None)]
    rows = vanilla + [ManifestRow.from_triplet(t) for t in naive + cycle]
    legend = {pair.c_a: "C_a", pair.c_b: "C_b", "p000/c_ab.png": "C_ab", "p000/c_ba.png": "C_ba"}
    table = [(r.kind, _names(r, legend)) for r in rows]
    assert table == [
        ("vanilla_swap", ("C_a", "C_b", None)),
        ("vanilla_recon", ("C_a", "C_a", "C_a")),
        ("naive", ("C_a", "C_b", "C_ab")),
        ("naive", ("C_b", "C_a", "C_ba")),
        ("cycle", ("C_ab", "C_ba", "C_a")),
        ("cycle", ("C_ba", "C_ab", "C_b")),
    ]
    for t in cycle:
        assert [r.synthetic for r in t.refs] == [True, True, False]
    assert all(routing_violations(r) == [] for r in rows)

    # the two vanilla forms go through the manifest validator with real files
    manifest = tmp_path / "vanilla.jsonl"
    write_manifest(vanilla, manifest)
    assert validate("manifest", manifest) == []


def test_06_mixing_and_gating():
    vanilla = [f"v{i:04d}.png" for i in range(1000)]
    cycles = []
    for i in range(250):
        a, b = ImageRef(f"a{i}.png"), ImageRef(f"b{i}.png")
        ab, ba = ImageRef(f"p{i}/c_ab.png", True), ImageRef(f"p{i}/c_ba.png", True)
        cycles.extend(rotate_to_cycle((Triplet(a, b, ab, "naive", f"p{i}"), Triplet(b, a, ba, "naive", f"p{i}"))))
    rows = build_manifest(vanilla, cycles, ratio=0.4, seed=6)
    assert sum(r.kind == "cycle" for r in rows) == 400
    assert sum(r.kind.startswith("vanilla") for r in rows) == 1000

    rng = np.random.default_rng(6)
    table = rng.random((1000, 4))
    # exact threshold crossings are part of the table
    table[:50, 0] = 0.4 + 0.6 * table[:50, 0]
    table[:50, 2] = table[:50, 0] - 0.4
    for real_a, real_b, syn_a, syn_b in table:
        oracle = "drop" if max(real_a - syn_a, real_b - syn_b) > 0.4 else "keep"
        assert iqa_gate((real_a, real_b), (syn_a, syn_b), 0.4) == oracle


def test_07_retrieval_oracle():
    rng = np.random.default_rng(7)
    gallery = rng.standard_normal((1000, 512)).astype(np.float32)
    truth = rng.integers(0, 1000, 10000)
    queries = (gallery[truth] + 1.5 * rng.standard_normal((10000, 512))).astype(np.float32)
    ids = [f"id{i}" for i in range(1000)]
    gal = Gallery(ids, gallery)
    start = time.perf_counter()
    pct = id_retrieval(queries, [ids[t] for t in truth], gal)
    elapsed = time.perf_counter() - start
    best = oracles.exhaustive_nearest(queries, gallery)
    assert np.array_equal(nearest_gallery_index(queries, gal), best)
    assert pct == 100.0 * float(np.mean(best == truth))
    print(f"\nretrieval {pct:.2f}% in {elapsed:.2f} s")
    assert elapsed < 10.0


def test_08_loss_algebra():
    y, ref = np.full((4, 4, 3), 0.7), np.full((4, 4, 3), 0.5)
    fy, fr = [np.full((2, 3), 0.1)], [np.zeros((2, 3))]
    ey = np.array([1.0, 0.0])
    er = np.array([0.95, np.sqrt(1 - 0.95**2)])
    w = LossWeights((1, 5, 10), (1, 2))
    ct = cycle_triplet_total(y, ref, fy, fr, ey, er, w)
    assert abs(ct.total - (1 * 0.2 + 5 * 0.1 + 10 * 0.05)) <= 1e-6
    e_src = np.array([0.7, np.sqrt(1 - 0.49)])
    e_ref = np.array([0.8, 0.6])
    fx = fixer_total(e_src, e_ref, ey, w)
    assert abs(fx.total - (1 * 0.3 + 2 * 0.2)) <= 1e-6

    assert cycle_triplet_total(y, ref, fy, fr, ey, er, w.scaled(2.0)).total == 2.0 * ct.total
    assert fixer_total(e_src, e_ref, ey, w.scaled(2.0)).total == 2.0 * fx.total
    gated = fixer_total(e_src, e_ref, ey, w, has_reference=False)
    assert gated.reference == 0.0
    assert gated.total == fixer_total(e_src, -e_ref, ey, w, has_reference=False).total
    assert gated.total == w.fix[0] * gated.source


def test_09_fid():
    rng = np.random.default_rng(9)
    a = rng.standard_normal((1000, 16))
    assert fid_from_features(a, a) <= 1e-6
    x = rng.standard_normal(2000)
    x = (x - x.mean()) / x.std(ddof=1)
    assert abs(fid_from_features(x[:, None], x[:, None] + 1.0) - 1.0) <= 1e-3
    p = rng.multivariate_normal([0, 1], [[2.0, 0.6], [0.6, 1.0]], 1500)
    q = rng.multivariate_normal([0.5, -1], [[1.0, -0.3], [-0.3, 0.5]], 1200)
    want = oracles.fid_2x2(p.mean(0), np.cov(p.T), q.mean(0), np.cov(q.T))
    assert abs(fid_from_features(p, q) - want) <= 1e-4


def _tree(root: Path) -> list[str]:
    return sorted(str(p.relative_to(root)) for p in root.rglob("*"))


def _same_tree(a: Path, b: Path) -> bool:
    files = _tree(a)
    if files != _tree(b):
        return False
    return all(filecmp.cmp(a / f, b / f, shallow=False) for f in files if (a / f).is_file())


def test_10_end_to_end_determinism(corpus, tmp_path, capsys):
    runs = [("w1_first", 1), ("w8", 8), ("w1_second", 1)]
    for name, workers in runs:
        code = main(["forge", str(corpus / "pairs.jsonl"), "--out", str(tmp_path / name),
                     "--seed", "5", "--workers", str(workers), "--dump-stages"])
        assert code == 0
    capsys.readouterr()
    assert len(_tree(tmp_path / "w1_first")) > 10
    assert _same_tree(tmp_path / "w1_first", tmp_path / "w8")
    assert _same_tree(tmp_path / "w1_first", tmp_path / "w1_second")


def test_11_performance_soft(capsys):
    sys.path.insert(0, str(ROOT / "scripts"))
    try:
        import bench_synthesis
    finally:
        sys.path.pop(0)
    with tempfile.TemporaryDirectory() as d:
        rate = bench_synthesis.measure(Path(d), pairs=4, size=256, repeats=2)
    with capsys.disabled():
        print(f"\n[soft] {rate:.2f} pair-syntheses/s/core at 256x256 (budget 5.0)")
    if rate < 5.0:
        pytest.xfail(f"soft budget missed: {rate:.2f} pairs/s")
