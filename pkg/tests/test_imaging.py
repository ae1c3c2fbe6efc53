import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

import oracles
from cycleforge.errors import ContractError, GeometryError, LevelCountError, WrongKindError
from cycleforge.imaging import (
    Pyramid,
    build_pyramid,
    collapse_pyramid,
    crop_lower_face,
    default_levels,
    mask_morphology,
    read_image,
    read_mask,
    resample,
    to_uint8,
    write_image,
    write_mask,
)


def test_down_preserves_constant():
    img = np.full((16, 16, 3), 0.5, np.float32)
    assert np.array_equal(resample(img, "down", (8, 8)), np.full((8, 8, 3), 0.5, np.float32))


def test_down_impulse_matches_direct_convolution():
    img = np.zeros((8, 8), np.float32)
    img[0, 0] = 1.0
    out = resample(img, "down", (4, 4))
    expected = oracles.direct_convolve_down(img)
    np.testing.assert_allclose(out, expected, atol=1e-7)
    # frozen from the oracle: centre tap 6/16 per axis, reflected neighbour 1/16
    assert out[0, 0] == pytest.approx(0.140625)
    assert out[0, 1] == pytest.approx(0.0234375)
    assert out[1, 1] == pytest.approx(1 / 256)
    assert np.count_nonzero(out) == 4


def test_up_down_constant_fixed_point():
    img = np.full((32, 32, 3), 0.25, np.float32)
    back = resample(resample(img, "down", (16, 16)), "up", (32, 32))
    np.testing.assert_allclose(back, img, atol=1e-7)


@pytest.mark.parametrize("shape", [(16, 16), (17, 23), (9, 30)])
def test_resample_matches_dense_matrices(rng, shape):
    img = rng.random(shape + (3,)).astype(np.float32)
    small = resample(img, "down", ((shape[0] + 1) // 2, (shape[1] + 1) // 2))
    np.testing.assert_allclose(small, oracles.dense_down(img), atol=1e-6)
    big = resample(small, "up", shape)
    np.testing.assert_allclose(big, oracles.dense_up(small, shape), atol=1e-6)


@pytest.mark.parametrize("direction,dims", [("down", (7, 8)), ("up", (40, 32)), ("down", (8, 9))])
def test_resample_rejects_wrong_dims(direction, dims):
    with pytest.raises(ContractError):
        resample(np.zeros((16, 16, 3), np.float32), direction, dims)


def test_constant_laplacian_has_no_band_energy():
    pyr = build_pyramid(np.full((64, 64, 3), 0.5, np.float32), 4, "laplacian")
    for band in pyr.levels[:-1]:
        assert np.abs(band).max() <= 1e-6
    np.testing.assert_allclose(pyr.levels[-1], 0.5, atol=1e-7)


def test_pyramid_level_sizes(rng):
    pyr = build_pyramid(rng.random((64, 64, 3)).astype(np.float32), 4)
    assert [d[0] for d in pyr.dims] == [64, 32, 16, 8]


@pytest.mark.parametrize("kind", ["gaussian", "laplacian"])
def test_pyramid_matches_dense_composition(rng, kind):
    img = rng.random((64, 64, 3)).astype(np.float32)
    pyr = build_pyramid(img, 4, kind)
    for got, want in zip(pyr.levels, oracles.dense_pyramid(img, 4, kind)):
        np.testing.assert_allclose(got, want, atol=1e-5)


def test_pyramid_level_count_errors(rng):
    img = rng.random((32, 32, 3)).astype(np.float32)
    with pytest.raises(LevelCountError):
        build_pyramid(img, 1)
    with pytest.raises(LevelCountError):
        build_pyramid(img, 5)  # top level would be 2x2
    build_pyramid(img, 4)


def test_collapse_roundtrip(rng):
    img = rng.random((64, 64, 3)).astype(np.float32)
    assert np.abs(collapse_pyramid(build_pyramid(img, 4)) - img).max() <= 1e-5


def test_collapse_zero_bands_constant_residual():
    levels = [np.zeros((32 >> k, 32 >> k, 3), np.float32) for k in range(3)]
    levels.append(np.ones((4, 4, 3), np.float32))
    np.testing.assert_allclose(collapse_pyramid(Pyramid(tuple(levels), "laplacian")), 1.0, atol=1e-7)


def test_two_level_ramp_roundtrip():
    ramp = np.tile(np.linspace(0, 1, 40, dtype=np.float32)[None, :, None], (24, 1, 3))
    assert np.abs(collapse_pyramid(build_pyramid(ramp, 2)) - ramp).max() <= 1e-5


def test_collapse_rejects_gaussian(rng):
    with pytest.raises(WrongKindError):
        collapse_pyramid(build_pyramid(rng.random((16, 16, 3)).astype(np.float32), 2, "gaussian"))


@settings(max_examples=40, deadline=None)
@given(h=st.integers(8, 70), w=st.integers(8, 70), seed=st.integers(0, 2**32 - 1))
def test_roundtrip_and_dimension_law(h, w, seed):
    img = np.random.default_rng(seed).random((h, w, 3)).astype(np.float32)
    levels = default_levels(h, w)
    pyr = build_pyramid(img, levels)
    for k, (lh, lw) in enumerate(pyr.dims):
        assert (lh, lw) == (-(-h // 2**k), -(-w // 2**k))
    assert np.abs(collapse_pyramid(pyr) - img).max() <= 1e-5


@pytest.mark.parametrize("side,expected", [(8, 2), (16, 2), (32, 3), (64, 4), (256, 5), (1024, 5)])
def test_default_levels(side, expected):
    assert default_levels(side, side) == expected


def test_crop_geometry():
    img = np.zeros((112, 112, 3), np.float32)
    img[56, 28] = 1.0
    img[111, 83] = 0.5
    crop = crop_lower_face(img)
    assert crop.shape == (56, 56, 3)
    assert crop[0, 0, 0] == 1.0
    assert crop[55, 55, 0] == 0.5
    assert np.count_nonzero(crop[:, :, 0]) == 2


def test_crop_is_projection(rng):
    img = rng.random((112, 112, 3)).astype(np.float32)
    crop = crop_lower_face(img)
    i, j = np.meshgrid(np.arange(56), np.arange(56), indexing="ij")
    assert np.array_equal(crop, img[i + 56, j + 28])


def test_crop_uniform_and_errors():
    assert np.all(crop_lower_face(np.full((112, 112, 3), 0.3, np.float32)) == np.float32(0.3))
    with pytest.raises(GeometryError):
        crop_lower_face(np.zeros((128, 128, 3)))
    with pytest.raises(GeometryError):
        crop_lower_face(np.zeros((112, 112, 3)), left=60)


def test_morphology_identity_at_radius_zero(rng):
    m = rng.random((20, 20)) < 0.5
    assert np.array_equal(mask_morphology(m, "erode", 0), m)
    assert np.array_equal(mask_morphology(m, "dilate", 0), m)


def test_erode_full_mask_strips_border():
    out = mask_morphology(np.ones((10, 10), bool), "erode", 1)
    expected = np.zeros((10, 10), bool)
    expected[1:-1, 1:-1] = True
    assert np.array_equal(out, expected)
    assert np.array_equal(out, oracles.brute_morphology(np.ones((10, 10), bool), "erode", 1))


def test_dilate_single_pixel_gives_disc():
    m = np.zeros((9, 9), bool)
    m[4, 4] = True
    out = mask_morphology(m, "dilate", 1)
    assert np.array_equal(out, oracles.brute_morphology(m, "dilate", 1))
    assert sorted(zip(*np.nonzero(out))) == [(3, 4), (4, 3), (4, 4), (4, 5), (5, 4)]


@settings(max_examples=30, deadline=None)
@given(m=hnp.arrays(bool, st.tuples(st.integers(6, 14), st.integers(6, 14))),
       r=st.integers(0, 3), op=st.sampled_from(["erode", "dilate"]))
def test_morphology_matches_brute_force(m, r, op):
    assert np.array_equal(mask_morphology(m, op, r), oracles.brute_morphology(m, op, r))


@settings(max_examples=30, deadline=None)
@given(m=hnp.arrays(bool, st.tuples(st.integers(8, 16), st.integers(8, 16))), r=st.integers(1, 3))
def test_morphology_duality_away_from_border(m, r):
    # the raster edge reads as background for both ops, so duality holds at distance > r from it
    lhs = mask_morphology(m, "dilate", r)
    rhs = ~mask_morphology(~m, "erode", r)
    assert np.array_equal(lhs[r:-r, r:-r], rhs[r:-r, r:-r])


def test_png_roundtrip(tmp_path, rng):
    img = rng.random((12, 10, 3)).astype(np.float32)
    write_image(tmp_path / "a.png", img)
    back = read_image(tmp_path / "a.png")
    assert back.dtype == np.float32
    assert np.array_equal(to_uint8(back), to_uint8(img))
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-6


def test_round_half_up_on_write():
    assert to_uint8(np.array([0.5 / 255, 1.5 / 255, 1.0, 0.0]))[:].tolist() == [1, 2, 255, 0]


def test_mask_io_nonzero_is_one(tmp_path):
    m = np.zeros((9, 9), bool)
    m[2:5, 3] = True
    write_mask(tmp_path / "m.png", m)
    assert np.array_equal(read_mask(tmp_path / "m.png"), m)
