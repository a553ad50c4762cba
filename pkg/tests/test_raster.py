import math

import numpy as np
import pytest

from treesketch.mesh import Mesh
from treesketch.raster import (CameraView, FramingError, RasterImage, canonical_view, canonical_views,
                               fit_distance, load_png, rasterize, render_gt, render_part, save_png)

from conftest import box_mesh, symmetric_mesh


def test_canonical_views_equidistant_on_axes():
    lo, hi = np.array([-1.0, -2.0, 0.0]), np.array([3.0, 2.0, 5.0])
    c = (lo + hi) / 2
    views = {v: canonical_view(v, lo, hi) for v in ("front", "back", "left", "right")}
    dists = {v: np.linalg.norm(np.subtract(cam.position, c)) for v, cam in views.items()}
    assert len({round(d, 9) for d in dists.values()}) == 1
    assert np.allclose(np.subtract(views["front"].position, c) / dists["front"], [0, -1, 0])
    assert np.allclose(np.subtract(views["right"].position, c) / dists["right"], [1, 0, 0])
    for cam in views.values():
        assert np.allclose(cam.target, c)


def test_fit_distance_frames_sphere_at_ninety_percent():
    d = fit_distance(1.0, 40.0)
    # apparent half-angle of a unit sphere at distance d
    half = math.asin(1.0 / d)
    assert math.tan(half) / math.tan(math.radians(20)) == pytest.approx(0.9)


def test_empty_mesh_renders_white():
    img = render_part(Mesh.empty(), "front", 32)
    assert np.all(img.data == 1.0)


def test_cube_renders_centered_square():
    img = render_part(box_mesh(), "front", 64)
    assert img.is_binary() and img.dark_count() > 0
    ys, xs = np.nonzero(img.data < 0.5)
    assert abs((xs.min() + xs.max()) / 2 - 31.5) <= 0.5
    assert abs((ys.min() + ys.max()) / 2 - 31.5) <= 0.5


def test_back_is_flipped_front_on_symmetric_mesh():
    m = symmetric_mesh(3, axis=1)
    lo, hi = m.bounds()
    for res in (64, 97, 128):
        f = render_part(m, canonical_view("front", lo, hi), res)
        b = render_part(m, canonical_view("back", lo, hi), res)
        assert f.dark_count() > 0
        assert b == f.flipped()


def test_right_is_flipped_left_on_symmetric_mesh():
    m = symmetric_mesh(5, axis=0)
    lo, hi = m.bounds()
    lv = render_part(m, canonical_view("left", lo, hi), 80)
    rv = render_part(m, canonical_view("right", lo, hi), 80)
    assert lv == rv.flipped()


def test_tree_behind_camera_not_framed():
    cam = CameraView((0, 5, 0), (0, 10, 0))
    with pytest.raises(FramingError, match="not framed"):
        render_part(box_mesh(), cam, 16)
    side = CameraView((100, -5, 0), (100, 0, 0))
    with pytest.raises(FramingError, match="not framed"):
        render_part(box_mesh(), side, 16)


def test_thinning_shrinks_skeleton(palm_tree):
    sk, _ = palm_tree
    lo, hi = sk.bounds()
    cam = canonical_view("front", lo, hi)
    full = render_part(sk, cam, 200, thinning=1.0)
    thin = render_part(sk, cam, 200, thinning=0.5)
    assert thin.dark_count() < full.dark_count()


def test_depth_test_nearest_wins():
    # two overlapping full-screen triangles; the nearer one has shade 0.3
    tx = np.array([[-3, 3, 0], [-3, 3, 0]], float)
    ty = np.array([[-3, -3, 3], [-3, -3, 3]], float)
    tz = np.array([[5, 5, 5], [2, 2, 2]], float)
    color, _ = rasterize(tx, ty, tz, np.array([0.7, 0.3]), 8, 8, numba=False)
    assert np.all(color == 0.3)
    color, _ = rasterize(tx[::-1], ty[::-1], tz[::-1], np.array([0.3, 0.7]), 8, 8, numba=False)
    assert np.all(color == 0.3)


def test_numba_and_numpy_rasterizers_agree(palm_tree):
    sk, fo = palm_tree
    for m in (sk, fo):
        a = render_part(m, "left", 150, numba=True)
        b = render_part(m, "left", 150, numba=False)
        assert a == b
    assert render_gt(sk, fo, "front", 96, numba=True) == render_gt(sk, fo, "front", 96, numba=False)


def test_gt_render_in_unit_range(palm_tree):
    img = render_gt(*palm_tree, "front", 64)
    assert img.data.min() >= 0 and img.data.max() <= 1 and img.data.min() < 0.5


def test_raster_image_validation_and_png_roundtrip(tmp_path):
    with pytest.raises(ValueError):
        RasterImage(np.full((2, 2), 1.5))
    img = RasterImage((np.arange(64).reshape(8, 8) % 2).astype(float))
    save_png(img, tmp_path / "a.png")
    assert load_png(tmp_path / "a.png") == img


def test_canonical_views_helper(palm_tree):
    views = canonical_views(palm_tree)
    assert set(views) == {"front", "back", "left", "right"}
