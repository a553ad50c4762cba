"""
Weber-Penn tree growth.

Stems are grown segment by segment as polylines with ``curveRes + 1``
control points, then swept into polygonal tubes. Leaves are emitted as
quads on the last branch level. Angles in the parameter dictionary are in
degrees; lengths are in metres.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import Mesh, merge
from .params import N_LEVELS, SHAPES, validate

SAMPLES_PER_SEGMENT = 3
RADIUS_FLOOR = 1e-5
UP = np.array([0.0, 0.0, 1.0])


class GrowthError(ValueError):
    pass


# -- formulas -----------------------------------------------------------------

def trunk_radius(trunk_length, ratio, scale0, scale_v0, variation_draw):
    """Trunk base radius; ``variation_draw`` in [-1, 1] picks within ``scale0 +/- scaleV0``."""
    r = trunk_length * ratio * (scale0 + variation_draw * scale_v0)
    if not r > 0:
        raise GrowthError(f"degenerate trunk radius {r!r}")
    return r


def child_radius(parent_radius, child_len, parent_len, ratio_power, tweak=1.0, min_radius=0.0):
    return max(min_radius, parent_radius * (child_len / parent_len) ** ratio_power * tweak)


def split_count(seg_splits, error_acc):
    """Stems leaving a split point, with fractional splits carried as error.

    Returns ``(stems, new_error)``: ``stems = n + 1`` where ``n`` is the
    rounded split count, so a non-splitting segment yields one stem.
    """
    x = seg_splits + error_acc
    n = max(0, math.floor(x + 0.5))
    return n + 1, x - n


def shape_ratio(shape, level, position, custom=None):
    """Length multiplier of a stem attached at ``position`` (0 base, 1 top)."""
    if isinstance(shape, (int, np.integer)):
        if not 0 <= shape < len(SHAPES):
            raise GrowthError(f"unknown shape id {shape!r}")
        shape = SHAPES[shape]
    if shape == "custom" or (shape is None and custom is not None):
        if custom is None:
            raise GrowthError("custom shape needs customShape values")
        return max(float(custom[level]), 1e-3)
    r = 1.0 - min(max(position, 0.0), 1.0)  # distance from the top
    if shape == "conical":
        return 0.2 + 0.8 * r
    if shape == "spherical":
        return 0.2 + 0.8 * math.sin(math.pi * r)
    if shape == "hemispherical":
        return 0.2 + 0.8 * math.sin(0.5 * math.pi * r)
    if shape == "cylindrical":
        return 1.0
    if shape == "tapered_cylindrical":
        return 0.5 + 0.5 * r
    if shape == "flame":
        return 0.05 + 0.95 * (r / 0.7 if r <= 0.7 else (1.0 - r) / 0.3)
    if shape == "inverse_conical":
        return 1.0 - 0.8 * r
    if shape == "tend_flame":
        return 0.5 + 0.5 * (r / 0.7 if r <= 0.7 else (1.0 - r) / 0.3)
    if shape == "inverse_tapered_cylindrical":
        return 0.5 + 0.5 * (1.0 - r)
    raise GrowthError(f"unknown shape {shape!r}")


# -- small vector helpers -----------------------------------------------------

def _unit(v):
    n = math.sqrt(float(v @ v))
    return v / n if n > 1e-12 else v


def _rotate(v, axis, angle):
    """Rodrigues rotation of ``v`` about unit ``axis``."""
    c, s = math.cos(angle), math.sin(angle)
    return v * c + np.cross(axis, v) * s + axis * float(axis @ v) * (1.0 - c)


def _frame(t):
    """Two unit vectors completing ``t`` to a right-handed basis."""
    ref = np.array([1.0, 0.0, 0.0]) if abs(t[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = _unit(ref - t * float(ref @ t))
    return e1, np.cross(t, e1)


def _tilt(t, azimuth, angle):
    """Rotate direction ``t`` by ``angle`` toward the side at ``azimuth``."""
    e1, e2 = _frame(t)
    side = math.cos(azimuth) * e1 + math.sin(azimuth) * e2
    return _unit(math.cos(angle) * t + math.sin(angle) * side), np.cross(t, side)


# -- structure ----------------------------------------------------------------

@dataclass(eq=False)
class Stem:
    level: int
    control_points: np.ndarray
    radii: np.ndarray
    parent: "Stem" = None
    offset: float = 0.0
    start: int = 0          # first control point owned by this stem (split clones share history)
    family: int = 0
    length: float = 0.0

    def arc_fractions(self):
        d = np.linalg.norm(np.diff(self.control_points, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(d)])
        return s / s[-1] if s[-1] > 0 else np.linspace(0.0, 1.0, len(s))

    def point_at(self, u):
        """Position, unit tangent and radius at arc fraction ``u``."""
        f = self.arc_fractions()
        i = int(np.clip(np.searchsorted(f, u, side="right") - 1, 0, len(f) - 2))
        span = f[i + 1] - f[i]
        w = 0.0 if span <= 0 else (u - f[i]) / span
        p0, p1 = self.control_points[i], self.control_points[i + 1]
        return (p0 + w * (p1 - p0), _unit(p1 - p0),
                self.radii[i] + w * (self.radii[i + 1] - self.radii[i]))


@dataclass
class Leaf:
    position: np.ndarray
    direction: np.ndarray
    side: np.ndarray
    length: float
    width: float


@dataclass
class SplitEvent:
    level: int
    point: np.ndarray
    parent_direction: np.ndarray
    directions: list


@dataclass
class TreeStructure:
    stems: list
    leaves: list
    trunk_length: float
    splits: list = field(default_factory=list)

    def stems_at(self, level):
        return [s for s in self.stems if s.level == level]


# -- growth -------------------------------------------------------------------

class _Grower:
    def __init__(self, p, seed):
        self.p = p
        self.rng = np.random.default_rng([int(seed) & (2**64 - 1), 0x7EE5])
        self.levels = int(p["levels"])
        self.split_err = [0.0] * N_LEVELS
        self.stems = []
        self.leaves = []
        self.splits = []
        self.family = 0
        self.min_radius = max(float(p["minRadius"]), RADIUS_FLOOR)

    def u(self):
        return float(self.rng.uniform(-1.0, 1.0))

    def lvl(self, key, n):
        return self.p.level(key, min(n, N_LEVELS - 1))

    def shape_mult(self, n, position):
        p = self.p
        shape = p["shape"] if n <= 1 else p["shapeS"]
        return shape_ratio(shape, n, position, p["customShape"])

    def taper_of(self, n, r0):
        taper = self.lvl("taper", n)
        if self.p["autoTaper"]:
            if n + 1 < self.levels:
                tip = r0 * self.lvl("length", n + 1) ** self.p["ratioPower"] * self.lvl("radiusTweak", n + 1)
            else:
                tip = self.min_radius
            taper = taper * (1.0 - min(tip / r0, 1.0))
        return min(max(taper, 0.0), 1.0)

    # stems ------------------------------------------------------------------

    def grow(self):
        p = self.p
        scale = max(p["scale"] + self.u() * p["scaleV"], 1e-3)
        length = scale * self.lvl("length", 0) * (1.0 + self.u() * self.lvl("lengthV", 0))
        if p["shape"] == "custom":
            length *= max(p["customShape"][0], 1e-3)
        if not length > 0:
            raise GrowthError("degenerate tree: zero trunk length")
        r0 = max(trunk_radius(length, p["ratio"], p["scale0"], p["scaleV0"], self.u()), self.min_radius)
        trunk = self.grow_family(0, np.zeros(3), UP.copy(), length, r0, None, 0.0)
        self.populate(trunk, 0)
        return TreeStructure(self.stems, self.leaves, length, self.splits)

    def grow_family(self, n, origin, direction, length, r0, parent, offset):
        """Grow one stem and all clones produced by its splits."""
        p = self.p
        nseg = int(self.lvl("curveRes", n))
        fam = self.family
        self.family += 1
        if n == 0:
            e = min(max(2.0 ** -float(p["splitBias"]), 0.125), 8.0)
            bounds = (np.arange(nseg + 1) / nseg) ** e
            seg_len = np.diff(bounds) * length
        else:
            seg_len = np.full(nseg, length / nseg)
        fractions = np.concatenate([[0.0], np.cumsum(seg_len)]) / length
        taper = self.taper_of(n, r0)
        radii = np.maximum(r0 * (1.0 - taper * fractions), self.min_radius)
        if n == 0 and p["rootFlare"] > 1.0:
            radii[0] = r0 * p["rootFlare"]

        curve = math.radians(self.lvl("curve", n)) / nseg
        back = math.radians(self.lvl("curveBack", n)) / nseg
        curve_v = math.radians(self.lvl("curveV", n)) / nseg
        attract_up = self.lvl("attractUp", n)
        attract_out = self.lvl("attractOut", n)
        sign = float(p["sign"])
        bend_axis = np.cross(direction, UP) if n else np.array([1.0, 0.0, 0.0])
        if np.linalg.norm(bend_axis) < 1e-9:
            bend_axis = np.array([1.0, 0.0, 0.0])
        bend_axis = _unit(bend_axis)

        # each active entry: [points, direction, bend_axis, segment scale, start index]
        active = [[[np.asarray(origin, dtype=np.float64)], _unit(direction), bend_axis, 1.0, 0]]
        done = []
        for i in range(nseg):
            if i > 0:
                nxt = []
                for st in active:
                    if n == 0 and (i / nseg) < p["splitHeight"]:
                        k = 1
                    elif n == 0 and p["baseSplits"] > 0 and not self._base_split_done:
                        k = int(p["baseSplits"]) + 1
                        self._base_split_done = True
                    else:
                        k, self.split_err[n] = split_count(self.lvl("segSplits", n), self.split_err[n])
                    if k == 1:
                        nxt.append(st)
                        continue
                    angle = math.radians(self.lvl("splitAngle", n) + self.u() * self.lvl("splitAngleV", n))
                    angle *= sign
                    phase = float(self.rng.uniform(0.0, 2.0 * math.pi))
                    dirs = []
                    for j in range(k):
                        d, ax = _tilt(st[1], phase + 2.0 * math.pi * j / k, angle)
                        dirs.append(d)
                        scale = st[3] * (1.0 - p["taperCrown"])
                        start = st[4] if j == 0 else i
                        nxt.append([list(st[0]), d, _unit(ax) if np.linalg.norm(ax) > 1e-9 else st[2],
                                    scale, start])
                    self.splits.append(SplitEvent(n, st[0][-1].copy(), st[1].copy(), dirs))
                active = nxt
            for st in active:
                pts, d, ax, scale = st[0], st[1], st[2], st[3]
                bend = (curve if i < nseg / 2.0 else back) + self.u() * curve_v
                d = _rotate(d, ax, bend)
                if attract_up:
                    d = self._attract_up(d, attract_up, nseg)
                if attract_out and n > 0:
                    d = self._attract_out(d, pts[-1], attract_out, nseg)
                d = _unit(d)
                pts.append(pts[-1] + d * seg_len[i] * scale)
                st[1] = d
        for st in active:
            stem = Stem(n, np.array(st[0]), radii.copy(), parent, offset, st[4], fam)
            stem.length = float(np.sum(np.linalg.norm(np.diff(stem.control_points, axis=0), axis=1)))
            done.append(stem)
        self.stems.extend(done)
        return done

    _base_split_done = False

    def _attract_up(self, d, k, nseg):
        dec = math.acos(max(-1.0, min(1.0, float(d[2]))))
        axis = np.cross(d, UP)
        if np.linalg.norm(axis) < 1e-9:
            return d
        angle = k * dec / nseg
        angle = min(max(angle, dec - math.pi), dec)
        return _rotate(d, _unit(axis), angle)

    def _attract_out(self, d, point, k, nseg):
        out = np.array([point[0], point[1], 0.0])
        if np.linalg.norm(out) < 1e-9:
            return d
        w = min(k / nseg, 1.0)
        return (1.0 - w) * d + w * _unit(out)

    # children ---------------------------------------------------------------

    def populate(self, family, n):
        p = self.p
        if n + 1 < self.levels:
            total = int(self.lvl("branches", n + 1))
            counts = self._share(family, total)
            for stem, m in zip(family, counts):
                for child_family in self._children(stem, n + 1, m):
                    self.populate(child_family, n + 1)
        if n == self.levels - 1 and p["leaves"] > 0:
            for stem in family:
                self._leaves(stem, int(p["leaves"]))

    def _base(self, n):
        return min(self.p["baseSize"] if n == 1 else self.p["baseSize_s"], 0.999)

    def _own_range(self, stem, base):
        f = stem.arc_fractions()
        lo = max(base, float(f[stem.start]))
        return lo, 1.0

    def _share(self, family, total):
        """Split ``total`` children over a family by owned length (largest remainder)."""
        if len(family) == 1:
            return [total]
        base = self._base(family[0].level + 1)
        w = []
        for s in family:
            lo, hi = self._own_range(s, base)
            w.append(max(hi - lo, 0.0) * s.length)
        w = np.array(w)
        if w.sum() <= 0:
            w = np.ones(len(family))
        exact = total * w / w.sum()
        counts = np.floor(exact).astype(int)
        rest = total - counts.sum()
        for i in np.argsort(-(exact - counts), kind="stable")[:rest]:
            counts[i] += 1
        return counts.tolist()

    def _children(self, parent, n, m):
        if m <= 0:
            return []
        p = self.p
        base = self._base(n)
        lo, hi = self._own_range(parent, base)
        dist = float(p["branchDist"])
        rings = int(p["nrings"]) if n == 1 else 0
        slots = []
        if rings > 0:
            k = min(rings, m)
            for j in range(m):
                slots.append((j % k, k, j // k, -(-(m - j % k) // k)))
        positions = []
        for j in range(m):
            if rings > 0:
                r, k, q, count = slots[j]
                t = (r + 0.5) / k
            else:
                t = (j + 0.5) / m
            if dist > 0:
                t = t ** (1.0 / dist)
            positions.append(lo + (hi - lo) * t)

        mode = p["rMode"]
        phi = math.radians(p["branchRotate"] + p["rotationLast"])
        rot = math.radians(self.lvl("rotate", n))
        rot_v = math.radians(self.lvl("rotateV", n))
        down_key = n - 1 if p["useOldDownAngle"] else n
        kids = []
        for j, u in enumerate(positions):
            point, tangent, r_at = parent.point_at(u)
            if not p["useParentAngle"]:
                tangent = UP.copy()
            var = self.u() * rot_v
            if rings > 0:
                r, k, q, count = slots[j]
                az = phi + r * rot + 2.0 * math.pi * q / count + var
            elif mode == "random":
                az = float(self.rng.uniform(0.0, 2.0 * math.pi))
            else:
                az = phi + j * rot + var
                ref = None
                if mode == "rotate":
                    ref = np.array([point[0], point[1], 0.0])
                elif mode == "distance":
                    ref = point - parent.control_points[0]
                if ref is not None:
                    ref = ref - tangent * float(ref @ tangent)
                    if np.linalg.norm(ref) > 1e-9:
                        e1, e2 = _frame(tangent)
                        az = math.atan2(float(ref @ e2), float(ref @ e1)) + var
            down = math.radians(self.lvl("downAngle", down_key) + self.u() * self.lvl("downAngleV", n))
            direction, _ = _tilt(tangent, az, down)

            position = (u - lo) / (hi - lo) if hi > lo else 0.0
            length = parent.length * self.lvl("length", n) * self.shape_mult(n, position)
            length *= 1.0 + self.u() * self.lvl("lengthV", n)
            if not length > 1e-6:
                continue
            r = child_radius(parent.radii[0], length, parent.length, p["ratioPower"],
                             self.lvl("radiusTweak", n), self.min_radius)
            r = min(r, max(r_at, self.min_radius))
            kids.append(self.grow_family(n, point, direction, length, r, parent, u))
        return kids

    def _leaves(self, stem, count):
        p = self.p
        n = stem.level
        lo = float(stem.arc_fractions()[stem.start])
        if n == 0:
            lo = max(lo, self._base(1))
        rot = math.radians(p["leafRotate"])
        rot_v = math.radians(p["leafRotateV"])
        pull = math.radians(p["leafangle"])
        for j in range(count):
            t = (j + 0.5) / count
            u = lo + (1.0 - lo) * t
            point, tangent, _ = stem.point_at(u)
            az = j * rot + self.u() * rot_v
            down = math.radians(p["leafDownAngle"] + self.u() * p["leafDownAngleV"])
            d, _ = _tilt(tangent, az, down)
            if pull:
                axis = np.cross(d, -UP)
                if np.linalg.norm(axis) > 1e-9:
                    d = _unit(_rotate(d, _unit(axis), pull))
            if p["horzLeaves"]:
                side = np.cross(d, UP)
            else:
                side = np.cross(d, tangent)
            if np.linalg.norm(side) < 1e-9:
                side = _frame(d)[0]
            size = p["leafScale"] * (1.0 + self.u() * p["leafScaleV"])
            size *= max(0.05, 1.0 + p["leafScaleT"] * (2.0 * t - 1.0))
            size *= shape_ratio(p["leafDist"], n, t, p["customShape"])
            width = size * p["leafScaleX"]
            if size * width <= 1e-12:
                continue
            self.leaves.append(Leaf(point, d, _unit(side), size, width))


def grow_stems(params, seed=None):
    """Grow the stem/leaf structure without meshing it."""
    problems = validate(params)
    if problems:
        raise GrowthError("invalid parameters: " + "; ".join(map(str, problems[:5])))
    if int(params["levels"]) < 1:
        raise GrowthError("degenerate tree: no levels")
    if seed is None:
        seed = params["seed"]
    return _Grower(params, seed).grow()


# -- meshing ------------------------------------------------------------------

def _catmull_rom(points, samples, prev=None):
    """Centripetal-free uniform Catmull-Rom through ``points``, ``samples`` per span."""
    k = len(points)
    head = points[0] * 2 - points[1] if prev is None else prev
    ext = np.vstack([head, points, points[-1] * 2 - points[-2]])
    t = np.arange(samples) / samples
    t2, t3 = t * t, t * t * t
    out = []
    for i in range(k - 1):
        p0, p1, p2, p3 = ext[i], ext[i + 1], ext[i + 2], ext[i + 3]
        seg = 0.5 * ((2 * p1)[None] + np.outer(t, p2 - p0) + np.outer(t2, 2 * p0 - 5 * p1 + 4 * p2 - p3)
                     + np.outer(t3, -p0 + 3 * p1 - 3 * p2 + p3))
        out.append(seg)
    out.append(points[-1][None])
    return np.vstack(out)


def _transport_frames(centers):
    tang = np.gradient(centers, axis=0) if len(centers) > 2 else np.repeat(
        (centers[-1] - centers[0])[None], len(centers), axis=0)
    norms = np.linalg.norm(tang, axis=1, keepdims=True)
    tang = tang / np.where(norms > 1e-12, norms, 1.0)
    normals = np.empty_like(centers)
    n0, _ = _frame(tang[0])
    normals[0] = n0
    for i in range(1, len(centers)):
        n = normals[i - 1] - tang[i] * float(normals[i - 1] @ tang[i])
        ln = np.linalg.norm(n)
        normals[i] = n / ln if ln > 1e-12 else _frame(tang[i])[0]
    binormals = np.cross(tang, normals)
    return normals, binormals


def sweep_stem(stem, sides, smooth=True, close_tip=False, samples=SAMPLES_PER_SEGMENT):
    """Tube mesh around the owned part of ``stem``."""
    pts = stem.control_points[stem.start:]
    rad = stem.radii[stem.start:]
    if len(pts) < 2:
        return None
    prev = stem.control_points[stem.start - 1] if stem.start > 0 else None
    if smooth:
        centers = _catmull_rom(pts, samples, prev)
        radii = np.interp(np.linspace(0, len(pts) - 1, len(centers)), np.arange(len(pts)), rad)
    else:
        centers, radii = pts, rad
    normals, binormals = _transport_frames(centers)
    ang = 2.0 * np.pi * np.arange(sides) / sides
    ring = np.cos(ang)[None, :, None] * normals[:, None] + np.sin(ang)[None, :, None] * binormals[:, None]
    verts = centers[:, None] + radii[:, None, None] * ring
    axis = np.repeat(centers[:, None], sides, axis=1)
    nr = len(centers)
    i = np.arange(nr - 1)[:, None] * sides
    j = np.arange(sides)[None]
    a, b = i + j, i + (j + 1) % sides
    c, d = a + sides, b + sides
    tris = np.concatenate([np.stack([a, b, d], -1).reshape(-1, 3), np.stack([a, d, c], -1).reshape(-1, 3)])
    verts = verts.reshape(-1, 3)
    axis = axis.reshape(-1, 3)
    if close_tip:
        tip = len(verts)
        last = (nr - 1) * sides
        fan = np.stack([np.full(sides, tip), last + (np.arange(sides) + 1) % sides, last + np.arange(sides)], -1)
        verts = np.vstack([verts, centers[-1]])
        axis = np.vstack([axis, centers[-1]])
        tris = np.concatenate([tris, fan])
    return Mesh(verts, tris, "skeleton", axis)


def skeleton_mesh(structure, params):
    sides = 2 * (int(params["bevelRes"]) + 2)
    smooth = params["handleType"] == "auto"
    parts = [sweep_stem(s, sides, smooth, bool(params["closeTip"])) for s in structure.stems]
    return merge([m for m in parts if m is not None], "skeleton").drop_degenerate()


def foliage_mesh(structure, params):
    leaves = structure.leaves
    if not leaves:
        return Mesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), "foliage", material=params["leafShape"])
    pos = np.array([lf.position for lf in leaves])
    d = np.array([lf.direction for lf in leaves])
    s = np.array([lf.side for lf in leaves])
    ln = np.array([lf.length for lf in leaves])[:, None]
    hw = 0.5 * np.array([lf.width for lf in leaves])[:, None]
    quads = np.stack([pos - s * hw, pos + s * hw, pos + s * hw + d * ln, pos - s * hw + d * ln], axis=1)
    base = 4 * np.arange(len(leaves))[:, None]
    tris = np.concatenate([base + [0, 1, 2], base + [0, 2, 3]])
    return Mesh(quads.reshape(-1, 3), tris, "foliage", material=params["leafShape"]).drop_degenerate()


def grow_tree(params, seed=None):
    """Skeleton and foliage meshes for one parameter dictionary."""
    structure = grow_stems(params, seed)
    skeleton = skeleton_mesh(structure, params)
    if skeleton.is_empty():
        raise GrowthError("degenerate tree: empty skeleton")
    return skeleton, foliage_mesh(structure, params)


def stem_count_by_level(structure):
    out = [0] * N_LEVELS
    for s in structure.stems:
        out[s.level] += 1
    return out
