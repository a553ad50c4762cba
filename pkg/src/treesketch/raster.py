"""
Depth-buffered triangle rasterizer and the canonical tree cameras.

Pixel centres and triangle vertices are compared in normalized device
coordinates, with the inside test accepting both windings. Both choices keep
the rasterization exactly symmetric under a horizontal mirror, which the
front/back view relation depends on.
"""
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from ._accel import njit, use_numba
from .mesh import Mesh

DEFAULT_FOV = 40.0
FRAME_FILL = 0.9
VIEWS = ("front", "back", "left", "right")
_VIEW_OFFSETS = {
    "front": (0.0, -1.0, 0.0),
    "back": (0.0, 1.0, 0.0),
    "left": (-1.0, 0.0, 0.0),
    "right": (1.0, 0.0, 0.0),
}
NEAR = 1e-6


class FramingError(ValueError):
    pass


# -- images -------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RasterImage:
    """Single-channel float image in [0, 1], row-major, row 0 at the top."""

    data: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2:
            raise ValueError("RasterImage needs a 2-D array")
        if a.size and (np.nanmin(a) < 0.0 or np.nanmax(a) > 1.0 or np.isnan(a).any()):
            raise ValueError("RasterImage samples must lie in [0, 1]")
        object.__setattr__(self, "data", a)

    @classmethod
    def blank(cls, width, height=None, value=1.0):
        return cls(np.full((height or width, width), value))

    @property
    def width(self):
        return self.data.shape[1]

    @property
    def height(self):
        return self.data.shape[0]

    @property
    def shape(self):
        return self.data.shape

    def is_binary(self):
        return bool(np.isin(self.data, (0.0, 1.0)).all())

    def dark_count(self):
        return int(np.count_nonzero(self.data < 0.5))

    def flipped(self):
        return RasterImage(self.data[:, ::-1])

    def __eq__(self, other):
        return isinstance(other, RasterImage) and np.array_equal(self.data, other.data)

    __hash__ = None


def as_array(img):
    return img.data if isinstance(img, RasterImage) else np.asarray(img, dtype=np.float64)


def save_png(img, path):
    """8-bit grayscale PNG, no alpha."""
    a = np.clip(np.rint(as_array(img) * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(a, mode="L").save(Path(path), format="PNG", optimize=False)


def load_png(path):
    with Image.open(path) as im:
        return RasterImage(np.asarray(im.convert("L"), dtype=np.float64) / 255.0)


# -- cameras ------------------------------------------------------------------

@dataclass(frozen=True)
class CameraView:
    position: tuple
    target: tuple
    up: tuple = (0.0, 0.0, 1.0)
    fov: float = DEFAULT_FOV
    name: str = "free"

    def basis(self):
        pos = np.asarray(self.position, dtype=np.float64)
        fwd = np.asarray(self.target, dtype=np.float64) - pos
        fwd = fwd / np.linalg.norm(fwd)
        right = np.cross(fwd, np.asarray(self.up, dtype=np.float64))
        n = np.linalg.norm(right)
        if n < 1e-12:
            raise FramingError("camera up vector is parallel to the view direction")
        right = right / n
        return pos, fwd, right, np.cross(right, fwd)


def fit_distance(radius, fov=DEFAULT_FOV, fill=FRAME_FILL):
    """Camera distance at which a sphere of ``radius`` spans ``fill`` of the frame height."""
    half = math.atan(fill * math.tan(math.radians(fov) / 2.0))
    return radius / math.sin(half)


def canonical_view(view, lo, hi, fov=DEFAULT_FOV):
    """One of the four axis-aligned cameras, fitted to the box ``[lo, hi]``."""
    if view not in _VIEW_OFFSETS:
        raise ValueError(f"unknown view {view!r}; expected one of {VIEWS}")
    lo, hi = np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)
    center = (lo + hi) / 2.0
    radius = max(float(np.linalg.norm(hi - lo)) / 2.0, 1e-6)
    d = fit_distance(radius, fov)
    off = np.asarray(_VIEW_OFFSETS[view]) * d
    return CameraView(tuple(center + off), tuple(center), (0.0, 0.0, 1.0), fov, view)


def canonical_views(meshes, fov=DEFAULT_FOV):
    lo, hi = joint_bounds(meshes)
    return {v: canonical_view(v, lo, hi, fov) for v in VIEWS}


def joint_bounds(meshes):
    pts = [m.vertices for m in meshes if m is not None and len(m.vertices)]
    if not pts:
        raise FramingError("nothing to frame")
    allv = np.concatenate(pts)
    return allv.min(axis=0), allv.max(axis=0)


def project(vertices, camera):
    """NDC x, NDC y and view depth for each vertex."""
    pos, fwd, right, up = camera.basis()
    rel = vertices - pos
    # explicit per-axis products keep the arithmetic sign-symmetric
    x = rel[:, 0] * right[0] + rel[:, 1] * right[1] + rel[:, 2] * right[2]
    y = rel[:, 0] * up[0] + rel[:, 1] * up[1] + rel[:, 2] * up[2]
    z = rel[:, 0] * fwd[0] + rel[:, 1] * fwd[1] + rel[:, 2] * fwd[2]
    f = 1.0 / math.tan(math.radians(camera.fov) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        return f * x / z, f * y / z, z


# -- kernels ------------------------------------------------------------------

@njit
def _raster_numba(tx, ty, tz, shade, width, height, color, depth):
    for t in range(tx.shape[0]):
        x0, x1, x2 = tx[t, 0], tx[t, 1], tx[t, 2]
        y0, y1, y2 = ty[t, 0], ty[t, 1], ty[t, 2]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        xmin = min(x0, min(x1, x2))
        xmax = max(x0, max(x1, x2))
        ymin = min(y0, min(y1, y2))
        ymax = max(y0, max(y1, y2))
        i0 = max(0, int(math.floor((xmin * width + width - 1.0) / 2.0)))
        i1 = min(width - 1, int(math.ceil((xmax * width + width - 1.0) / 2.0)))
        j0 = max(0, int(math.floor((height - 1.0 - ymax * height) / 2.0)))
        j1 = min(height - 1, int(math.ceil((height - 1.0 - ymin * height) / 2.0)))
        if i0 > i1 or j0 > j1:
            continue
        iz0 = 1.0 / tz[t, 0]
        iz1 = 1.0 / tz[t, 1]
        iz2 = 1.0 / tz[t, 2]
        s = shade[t]
        for j in range(j0, j1 + 1):
            py = (height - 2.0 * j - 1.0) / height
            for i in range(i0, i1 + 1):
                px = (2.0 * i + 1.0 - width) / width
                w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                if (w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0) or (w0 <= 0.0 and w1 <= 0.0 and w2 <= 0.0):
                    inv = (w0 * iz0 + w1 * iz1 + w2 * iz2) / area
                    if inv > depth[j, i]:
                        depth[j, i] = inv
                        color[j, i] = s


def _raster_numpy(tx, ty, tz, shade, width, height, color, depth):
    for t in range(tx.shape[0]):
        x0, x1, x2 = tx[t]
        y0, y1, y2 = ty[t]
        area = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if area == 0.0:
            continue
        i0 = max(0, int(math.floor((min(x0, x1, x2) * width + width - 1.0) / 2.0)))
        i1 = min(width - 1, int(math.ceil((max(x0, x1, x2) * width + width - 1.0) / 2.0)))
        j0 = max(0, int(math.floor((height - 1.0 - max(y0, y1, y2) * height) / 2.0)))
        j1 = min(height - 1, int(math.ceil((height - 1.0 - min(y0, y1, y2) * height) / 2.0)))
        if i0 > i1 or j0 > j1:
            continue
        px = ((2.0 * np.arange(i0, i1 + 1) + 1.0 - width) / width)[None, :]
        py = ((height - 2.0 * np.arange(j0, j1 + 1) - 1.0) / height)[:, None]
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        inside = ((w0 >= 0) & (w1 >= 0) & (w2 >= 0)) | ((w0 <= 0) & (w1 <= 0) & (w2 <= 0))
        if not inside.any():
            continue
        inv = (w0 * (1.0 / tz[t, 0]) + w1 * (1.0 / tz[t, 1]) + w2 * (1.0 / tz[t, 2])) / area
        win = depth[j0:j1 + 1, i0:i1 + 1]
        hit = inside & (inv > win)
        win[hit] = inv[hit]
        color[j0:j1 + 1, i0:i1 + 1][hit] = shade[t]


def rasterize(tx, ty, tz, shade, width, height, numba=None):
    """Fill triangles given per-corner NDC coordinates and depths.

    Returns ``(color, inverse_depth)``; the background is white (1.0).
    """
    color = np.ones((height, width))
    depth = np.full((height, width), -np.inf)
    args = (np.ascontiguousarray(tx, dtype=np.float64), np.ascontiguousarray(ty, dtype=np.float64),
            np.ascontiguousarray(tz, dtype=np.float64), np.ascontiguousarray(shade, dtype=np.float64))
    if use_numba(numba):
        _raster_numba(*args, int(width), int(height), color, depth)
    else:
        _raster_numpy(*args, int(width), int(height), color, depth)
    return color, depth


def _triangles_ndc(mesh, camera):
    x, y, z = project(mesh.vertices, camera)
    if np.any(z <= NEAR):
        raise FramingError("tree not framed: geometry behind the camera")
    if x.max() < -1 or x.min() > 1 or y.max() < -1 or y.min() > 1:
        raise FramingError("tree not framed: geometry outside the view")
    t = mesh.triangles
    return x[t], y[t], z[t]


def render_mesh(mesh, camera, resolution, shade=None, numba=None):
    """Rasterize ``mesh`` (flat ``shade`` per triangle, default black)."""
    w = h = int(resolution)
    if mesh.is_empty():
        return RasterImage.blank(w, h)
    tx, ty, tz = _triangles_ndc(mesh, camera)
    if shade is None:
        shade = np.zeros(mesh.n_triangles)
    color, _ = rasterize(tx, ty, tz, shade, w, h, numba)
    return RasterImage(color)


def resolve_camera(camera, meshes):
    if isinstance(camera, CameraView):
        return camera
    lo, hi = joint_bounds(meshes)
    return canonical_view(camera, lo, hi)


def render_part(mesh, camera, resolution=608, thinning=0.8, numba=None):
    """Black silhouette of one tree part on white.

    ``camera`` is a :class:`CameraView` or a canonical view name, in which
    case the camera is fitted to this mesh alone. Skeleton tubes are thinned
    toward their centre lines first so sub-pixel twigs drop out.
    """
    if mesh.is_empty():
        return RasterImage.blank(int(resolution))
    camera = resolve_camera(camera, [mesh])
    if mesh.part == "skeleton" and thinning != 1.0:
        mesh = mesh.thinned(thinning)
    return render_mesh(mesh, camera, resolution, numba=numba)


def lambert_shade(mesh, camera, base=0.2, gain=0.6):
    """Grey level per triangle from a headlight, for ground-truth previews."""
    v = mesh.vertices[mesh.triangles]
    n = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    ln = np.linalg.norm(n, axis=1)
    n = n / np.where(ln > 0, ln, 1.0)[:, None]
    _, fwd, _, _ = camera.basis()
    return np.clip(base + gain * np.abs(n @ fwd), 0.0, 1.0)


def render_gt(skeleton, foliage, camera, resolution=608, numba=None):
    """Shaded grey preview of the whole tree (skeleton dark, foliage light)."""
    parts = [m for m in (skeleton, foliage) if m is not None and not m.is_empty()]
    if not parts:
        return RasterImage.blank(int(resolution))
    camera = resolve_camera(camera, parts)
    txs, tys, tzs, shades = [], [], [], []
    for m in parts:
        tx, ty, tz = _triangles_ndc(m, camera)
        base, gain = (0.1, 0.3) if m.part == "skeleton" else (0.45, 0.4)
        txs.append(tx), tys.append(ty), tzs.append(tz)
        shades.append(lambert_shade(m, camera, base, gain))
    color, _ = rasterize(np.concatenate(txs), np.concatenate(tys), np.concatenate(tzs),
                         np.concatenate(shades), int(resolution), int(resolution), numba)
    return RasterImage(color)
