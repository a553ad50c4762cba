"""
Image stages and the two compositing chains that turn part renders into
line-art sketches.

Renders and sketches are white-background floats in [0, 1] ("dark" means
< 0.5). Inside a chain, background removal switches to a bright-object
matte, and the final inversion switches back.
"""
import numpy as np
from scipy import ndimage

from .raster import RasterImage, as_array, canonical_view, joint_bounds, render_part

BASE_RESOLUTION = 608
GAUSSIAN_SIGMA = 6.0
SKELETON_THRESHOLD = 0.5
FOLIAGE_THRESHOLD = 0.9
INPUT_SIDE = 224


def _img(a):
    return RasterImage(np.clip(a, 0.0, 1.0))


def color_ramp(img, threshold):
    """0 below ``threshold``, 1 at or above it."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    return RasterImage(np.where(as_array(img) < threshold, 0.0, 1.0))


def invert(img):
    return RasterImage(1.0 - as_array(img))


def remove_background(img, threshold):
    """Object matte: 1 where the render is darker than ``threshold``, else 0.

    Later stages work on this bright-object matte, so a blur followed by a
    low ramp grows the object outward rather than eating into it.
    """
    a = as_array(img)
    return RasterImage(np.where(a < threshold, 1.0, 0.0))


def sobel(img):
    """Clamped gradient magnitude of the 3x3 Sobel pair (edge-clamped borders)."""
    a = as_array(img)
    if min(a.shape) < 3:
        raise ValueError("sobel needs an image of at least 3x3")
    gx = ndimage.sobel(a, axis=1, mode="nearest")
    gy = ndimage.sobel(a, axis=0, mode="nearest")
    return _img(np.hypot(gx, gy))


def erode(img, kernel_radius=1):
    """Shrink the dark set: a pixel stays dark only if its whole square
    neighbourhood is dark. Outside the image counts as white."""
    a = as_array(img)
    if not np.isin(a, (0.0, 1.0)).all():
        raise ValueError("erode requires binary image")
    if kernel_radius <= 0:
        return RasterImage(a.copy())
    size = 2 * int(kernel_radius) + 1
    return RasterImage(ndimage.maximum_filter(a, size=size, mode="constant", cval=1.0))


def gaussian(img, sigma):
    """Separable Gaussian blur truncated at 3 sigma, edge-clamped."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return _img(ndimage.gaussian_filter(as_array(img), sigma, mode="nearest", truncate=3.0))


def denoise(img):
    """3x3 median filter; drops isolated specks, keeps strokes >= 2 px wide."""
    return RasterImage(ndimage.median_filter(as_array(img), size=3, mode="nearest"))


def scaled_sigma(resolution, sigma=GAUSSIAN_SIGMA):
    return sigma * resolution / BASE_RESOLUTION


def skeleton_chain(raw, stroke=2, erosion=1):
    """Branch outlines from a black-on-white skeleton render.

    A Sobel band is 2 px wide, which a radius-1 erosion would delete outright,
    so the edge response is first widened to ``stroke + erosion`` px each side
    of the boundary; erosion then trims it back and removes anything thinner.
    """
    a = remove_background(raw, SKELETON_THRESHOLD)
    a = denoise(a)
    edges = sobel(a).data
    grow = int(stroke) + int(erosion) - 2
    if grow > 0:
        edges = ndimage.maximum_filter(edges, size=2 * grow + 1, mode="constant", cval=0.0)
    a = color_ramp(edges, 0.9)
    a = invert(a)
    return erode(a, erosion)


def foliage_chain(raw, sigma=None):
    """Closed outline of the foliage mass from a black-on-white leaf render."""
    sigma = scaled_sigma(as_array(raw).shape[0]) if sigma is None else sigma
    a = remove_background(raw, FOLIAGE_THRESHOLD)
    a = gaussian(a, sigma)
    a = color_ramp(a, 0.01)
    a = sobel(a)
    return invert(a)


def multiply_mix(a, b):
    """Pixelwise product; dark wins."""
    x, y = as_array(a), as_array(b)
    if x.shape != y.shape:
        raise ValueError(f"image sizes differ: {x.shape} vs {y.shape}")
    return RasterImage(x * y)


def area_matrix(n_in, n_out):
    """Integer overlap (in units of 1/n_out source pixels) of each source pixel
    with each output pixel; every row sums to ``n_in``."""
    k = np.arange(n_out)[:, None]
    s = np.arange(n_in)[None, :]
    lo = np.maximum(k * n_in, s * n_out)
    hi = np.minimum((k + 1) * n_in, (s + 1) * n_out)
    return np.clip(hi - lo, 0, None).astype(np.float64)


def resize_for_input(img, side=INPUT_SIDE, allow_upscale=False):
    """Area-weighted downsample of a square image to ``side`` x ``side``.

    Weights are integer overlaps with one final division, so constant and
    binary inputs are resampled without rounding drift. Upscaling raises
    unless ``allow_upscale``, in which case the image is returned unchanged.
    """
    a = as_array(img)
    if a.shape[0] != a.shape[1]:
        raise ValueError("resize_for_input expects a square image")
    n = a.shape[0]
    if side > n:
        if allow_upscale:
            return RasterImage(a.copy())
        raise ValueError(f"refusing to upscale {n} px to {side} px")
    if side == n:
        return RasterImage(a.copy())
    r = area_matrix(n, side)
    return _img((r @ a @ r.T) / float(n * n))


def sketch_tree(skeleton, foliage, view, resolution=BASE_RESOLUTION, thinning=0.8, numba=None):
    """Full synthetic sketch of one tree from a canonical view name or camera.

    Both parts share one camera fitted to the whole tree.
    """
    if isinstance(view, str):
        lo, hi = joint_bounds([skeleton, foliage])
        view = canonical_view(view, lo, hi)
    sk = skeleton_chain(render_part(skeleton, view, resolution, thinning, numba))
    if foliage is None or foliage.is_empty():
        return sk
    fo = foliage_chain(render_part(foliage, view, resolution, thinning, numba))
    return multiply_mix(sk, fo)
