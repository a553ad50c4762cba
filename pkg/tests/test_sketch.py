import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from treesketch.mesh import Mesh
from treesketch.raster import RasterImage, canonical_view, render_part
from treesketch.sketch import (area_matrix, color_ramp, denoise, erode, foliage_chain, gaussian, invert,
                               multiply_mix, remove_background, resize_for_input, scaled_sigma, sketch_tree,
                               skeleton_chain, sobel)
from treesketch.synthesis import Stem, sweep_stem

from conftest import symmetric_mesh

unit_images = arrays(np.float64, st.tuples(st.integers(3, 12), st.integers(3, 12)),
                     elements=st.floats(0, 1, allow_nan=False))
binary_images = arrays(np.float64, st.tuples(st.integers(3, 12), st.integers(3, 12)),
                       elements=st.sampled_from([0.0, 1.0]))


def img(a):
    return RasterImage(np.asarray(a, dtype=float))


def white(n=16):
    return RasterImage.blank(n)


# -- color ramp / invert ----------------------------------------------------------

def test_color_ramp_boundary():
    out = color_ramp(img([[0.89, 0.90, 0.95, 0.0]]), 0.9).data
    assert out.tolist() == [[0.0, 1.0, 1.0, 0.0]]
    assert np.all(color_ramp(img(np.zeros((3, 3))), 0.9).data == 0)
    with pytest.raises(ValueError):
        color_ramp(white(), 1.0)


@given(unit_images)
def test_invert_involution_and_mean(a):
    x = img(a)
    assert np.allclose(invert(invert(x)).data, a, rtol=0, atol=1e-15)
    b = img(a > 0.5)
    assert invert(invert(b)) == b
    assert invert(x).data.mean() == pytest.approx(1 - a.mean())


# -- sobel --------------------------------------------------------------------------

@given(st.floats(0, 1), st.integers(3, 20))
def test_sobel_of_constant_is_zero(c, n):
    assert np.all(sobel(img(np.full((n, n), c))).data == 0)


def test_sobel_step_edge_two_pixel_band():
    a = np.zeros((9, 10))
    a[:, 5:] = 1.0
    out = sobel(img(a)).data
    nz = np.nonzero(out.any(axis=0))[0].tolist()
    assert nz == [4, 5]
    assert np.all(out[:, 4:6] == 1.0)


@settings(max_examples=30)
@given(unit_images)
def test_sobel_rotation_equivariant(a):
    r = sobel(img(np.rot90(a))).data
    assert np.allclose(r, np.rot90(sobel(img(a)).data), atol=1e-12)


@settings(max_examples=30)
@given(unit_images)
def test_sobel_matches_hand_convolution(a):
    kx = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], float)
    p = np.pad(a, 1, mode="edge")
    h, w = a.shape
    gx = np.zeros_like(a)
    gy = np.zeros_like(a)
    for i in range(h):
        for j in range(w):
            win = p[i:i + 3, j:j + 3]
            gx[i, j] = (win * kx).sum()
            gy[i, j] = (win * kx.T).sum()
    assert np.allclose(sobel(img(a)).data, np.clip(np.hypot(gx, gy), 0, 1), atol=1e-12)


# -- erode --------------------------------------------------------------------------

def brute_erode(a, r):
    h, w = a.shape
    out = np.ones_like(a)
    for i in range(h):
        for j in range(w):
            ok = True
            for di in range(-r, r + 1):
                for dj in range(-r, r + 1):
                    y, x = i + di, j + dj
                    if not (0 <= y < h and 0 <= x < w) or a[y, x] != 0.0:
                        ok = False
            if ok:
                out[i, j] = 0.0
    return out


def test_erode_examples():
    assert erode(white(), 1) == white()
    a = np.ones((9, 9))
    a[4, 4] = 0
    assert erode(img(a), 1) == white(9)
    a = np.ones((9, 9))
    a[2:7, 2:7] = 0
    out = erode(img(a), 1).data
    expected = np.ones((9, 9))
    expected[3:6, 3:6] = 0
    assert np.array_equal(out, expected)


def test_erode_rejects_grey():
    with pytest.raises(ValueError, match="erode requires binary image"):
        erode(img([[0.5, 1, 1], [1, 1, 1], [1, 1, 1]]))


@settings(max_examples=40)
@given(binary_images, st.integers(1, 2))
def test_erode_matches_brute_force_and_never_adds_dark(a, r):
    out = erode(img(a), r)
    assert np.array_equal(out.data, brute_erode(a, r))
    assert out.dark_count() <= img(a).dark_count()


# -- gaussian / denoise -------------------------------------------------------------

@given(st.floats(0, 1), st.floats(0.5, 4))
def test_gaussian_constant_preserved(c, sigma):
    out = gaussian(img(np.full((20, 20), c)), sigma).data
    assert np.allclose(out, c, atol=1e-3)


def test_gaussian_matches_direct_2d_convolution():
    a = np.ones((41, 41))
    a[20, 20] = 0.0
    sigma = 2.0
    out = gaussian(img(a), sigma).data
    r = int(3 * sigma + 0.5)
    x = np.arange(-r, r + 1)
    k = np.exp(-(x[:, None] ** 2 + x[None, :] ** 2) / (2 * sigma ** 2))
    k /= k.sum()
    expected = np.ones_like(a)
    expected[20 - r:21 + r, 20 - r:21 + r] -= k
    assert np.allclose(out, expected, atol=1e-12)
    assert np.allclose(out, out.T) and np.allclose(out, out[::-1])


def test_larger_sigma_flattens_more():
    rng = np.random.default_rng(0)
    a = img(rng.integers(0, 2, (40, 40)).astype(float))
    dev = [np.abs(gaussian(a, s).data - a.data.mean()).max() for s in (1.0, 4.0)]
    assert dev[1] < dev[0]
    with pytest.raises(ValueError):
        gaussian(a, 0)


def test_denoise_removes_salt_keeps_strokes():
    assert denoise(white()) == white()
    a = np.ones((20, 20))
    a[3, 3] = a[10, 15] = 0
    a[:, 8:11] = 0
    out = denoise(img(a)).data
    assert out[3, 3] == 1 and out[10, 15] == 1
    assert np.all(out[:, 8:11] == 0)
    assert np.array_equal(out, ndimage.median_filter(a, 3, mode="nearest"))


def test_scaled_sigma():
    assert scaled_sigma(608) == 6.0
    assert scaled_sigma(304) == 3.0


# -- chains ---------------------------------------------------------------------------

def test_chains_preserve_blank():
    assert skeleton_chain(white(32)) == white(32)
    assert foliage_chain(white(32)) == white(32)


def test_remove_background_is_object_matte():
    out = remove_background(img([[0.0, 0.4, 0.5, 1.0]]), 0.5).data
    assert out.tolist() == [[1.0, 1.0, 0.0, 0.0]]


def _tube_render(res=96):
    pts = np.array([[0, 0, -1.0], [0, 0, 0.0], [0, 0, 1.0]])
    m = sweep_stem(Stem(0, pts, np.array([0.3, 0.3, 0.3])), 12, smooth=False)
    return render_part(m, canonical_view("front", *m.bounds()), res, thinning=1.0)


def test_skeleton_chain_outlines_tube_sides():
    out = skeleton_chain(_tube_render())
    assert out.is_binary()
    row = out.data[48]
    dark = np.nonzero(row == 0)[0]
    runs = np.split(dark, np.nonzero(np.diff(dark) > 1)[0] + 1)
    assert len(runs) == 2  # left and right side of the tube
    left, right = runs
    assert right.min() - left.max() > 3  # interior stays white


def test_foliage_chain_single_closed_contour():
    rng = np.random.default_rng(2)
    quads = []
    for k in range(60):
        c = rng.uniform(-0.4, 0.4, 3)
        quads.append(c + np.array([[0, 0, 0], [0.08, 0, 0], [0.08, 0, 0.08], [0, 0, 0.08]]))
    v = np.concatenate(quads)
    t = np.concatenate([[[4 * k, 4 * k + 1, 4 * k + 2], [4 * k, 4 * k + 2, 4 * k + 3]] for k in range(60)])
    fo = Mesh(v, t, "foliage")
    raw = render_part(fo, canonical_view("front", [-1, -1, -1], [1, 1, 1]), 128)
    out = foliage_chain(raw, sigma=3.0)
    assert out.is_binary()
    dark = out.data < 0.5
    _, n_dark = ndimage.label(dark, structure=np.ones((3, 3)))
    assert n_dark == 1
    # contour encloses the cluster: the white region splits into outside + inside
    _, n_white = ndimage.label(~dark)
    assert n_white >= 2
    # every foliage pixel lies inside or on the contour
    outside, _ = ndimage.label(~dark)
    border_label = outside[0, 0]
    assert not np.any((raw.data < 0.5) & (outside == border_label))


def test_sketch_outputs_binary_with_white_border(palm_tree):
    s = sketch_tree(*palm_tree, "front", 128)
    assert s.is_binary() and s.dark_count() > 0
    border = np.concatenate([s.data[0], s.data[-1], s.data[:, 0], s.data[:, -1]])
    assert np.all(border == 1.0)


def test_sketch_back_is_flipped_front_on_symmetric_tree():
    m = symmetric_mesh(7, axis=1)
    fo = Mesh(m.vertices * 0.5, m.triangles, "foliage")
    f = sketch_tree(m, fo, "front", 96)
    b = sketch_tree(m, fo, "back", 96)
    assert b == f.flipped()


# -- mixing / resizing -------------------------------------------------------------------

def test_multiply_mix_table_identity_and_commutative():
    a = img([[1, 1, 0, 0]])
    b = img([[1, 0, 1, 0]])
    assert multiply_mix(a, b).data.tolist() == [[1, 0, 0, 0]]
    assert multiply_mix(a, b) == multiply_mix(b, a)
    assert multiply_mix(a, img(np.ones((1, 4)))) == a
    with pytest.raises(ValueError):
        multiply_mix(a, img(np.ones((2, 4))))


@given(unit_images)
def test_multiply_mix_never_exceeds_inputs(a):
    b = np.roll(a, 1, axis=0)
    out = multiply_mix(img(a), img(b)).data
    assert np.all(out <= np.minimum(a, b) + 1e-15)


def test_resize_all_white_and_checkerboard():
    assert resize_for_input(white(608)) == white(224)
    cb = np.indices((64, 64)).sum(axis=0) % 2
    out = resize_for_input(img(cb), 16).data
    assert np.allclose(out, 0.5)
    coarse = np.kron(np.indices((4, 4)).sum(axis=0) % 2, np.ones((16, 16)))
    assert np.array_equal(resize_for_input(img(coarse), 4).data, np.indices((4, 4)).sum(axis=0) % 2)


def test_resize_area_weights_non_integer_factor():
    r = area_matrix(608, 224)
    assert np.all(r.sum(axis=1) == 608) and np.all(r.sum(axis=0) == 224)
    a = np.random.default_rng(1).random((608, 608))
    out = resize_for_input(img(a), 224).data
    assert out.mean() == pytest.approx(a.mean(), abs=1e-12)
    assert 0 <= out.min() and out.max() <= 1


def test_resize_upscale_flag():
    with pytest.raises(ValueError, match="upscale"):
        resize_for_input(white(100), 224)
    assert resize_for_input(white(100), 224, allow_upscale=True) == white(100)
    with pytest.raises(ValueError):
        resize_for_input(img(np.ones((4, 5))), 2)
