"""Indexed triangle meshes and Wavefront OBJ export."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PARTS = ("skeleton", "foliage")


class MeshError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Mesh:
    """Triangle mesh tagged with the tree part it represents.

    ``axis`` optionally stores, per vertex, the point on the stem centre line
    the vertex was swept from; the sketch renderer uses it to thin branches.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    part: str = "skeleton"
    axis: np.ndarray = None
    material: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.ascontiguousarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if self.part not in PARTS:
            raise MeshError(f"unknown mesh part {self.part!r}")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise MeshError("triangle index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)
        if self.axis is not None:
            a = np.ascontiguousarray(self.axis, dtype=np.float64).reshape(-1, 3)
            if a.shape != v.shape:
                raise MeshError("axis must match vertices")
            object.__setattr__(self, "axis", a)

    @classmethod
    def empty(cls, part="skeleton"):
        return cls(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64), part)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_triangles(self):
        return len(self.triangles)

    def is_empty(self):
        return self.n_triangles == 0

    def bounds(self):
        if not len(self.vertices):
            raise MeshError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangle_areas(self):
        a, b, c = (self.vertices[self.triangles[:, i]] for i in range(3))
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def boundary_edges(self):
        """Edges used by exactly one triangle, as sorted ``(i, j)`` rows."""
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        uniq, count = np.unique(e, axis=0, return_counts=True)
        return uniq[count == 1]

    def transformed(self, matrix, offset=None):
        """Apply ``x -> matrix @ x + offset`` to vertices (and axis)."""
        m = np.asarray(matrix, dtype=np.float64)
        off = np.zeros(3) if offset is None else np.asarray(offset, dtype=np.float64)
        ax = None if self.axis is None else self.axis @ m.T + off
        return Mesh(self.vertices @ m.T + off, self.triangles, self.part, ax, self.material, dict(self.meta))

    def thinned(self, factor):
        """Shrink tube cross-sections toward their centre line."""
        if self.axis is None:
            return self
        v = self.axis + factor * (self.vertices - self.axis)
        return Mesh(v, self.triangles, self.part, self.axis, self.material, dict(self.meta))

    def drop_degenerate(self, min_area=1e-14):
        if not self.n_triangles:
            return self
        keep = self.triangle_areas() > min_area
        if keep.all():
            return self
        return Mesh(self.vertices, self.triangles[keep], self.part, self.axis, self.material, dict(self.meta))


def merge(meshes, part=None):
    meshes = [m for m in meshes if m is not None]
    if not meshes:
        return Mesh.empty(part or "skeleton")
    part = part or meshes[0].part
    verts, tris, axes = [], [], []
    base = 0
    with_axis = all(m.axis is not None for m in meshes)
    for m in meshes:
        verts.append(m.vertices)
        tris.append(m.triangles + base)
        if with_axis:
            axes.append(m.axis)
        base += m.n_vertices
    return Mesh(np.concatenate(verts), np.concatenate(tris), part,
                np.concatenate(axes) if with_axis else None, meshes[0].material)


def rotation_z(degrees):
    a = np.radians(degrees)
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotate_about_z(mesh, degrees, center):
    """Rotate about the vertical axis through ``center``."""
    r = rotation_z(degrees)
    center = np.asarray(center, dtype=np.float64)
    return mesh.transformed(r, center - r @ center)


# -- OBJ ----------------------------------------------------------------------

def obj_text(mesh):
    lines = [f"# treesketch {mesh.part} mesh", f"o {mesh.part}"]
    if mesh.material:
        lines.append(f"usemtl {mesh.material}")
    lines.extend("v %r %r %r" % tuple(float(c) for c in v) for v in mesh.vertices)
    lines.extend("f %d %d %d" % tuple(int(i) + 1 for i in t) for t in mesh.triangles)
    return "\n".join(lines) + "\n"


def write_obj(mesh, path):
    Path(path).write_text(obj_text(mesh))


def read_obj(path, part=None):
    verts, tris = [], []
    name, material = part, ""
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        tag, *rest = line.split()
        if tag == "v":
            verts.append([float(x) for x in rest[:3]])
        elif tag == "f":
            idx = [int(tok.split("/")[0]) - 1 for tok in rest]
            for k in range(1, len(idx) - 1):
                tris.append([idx[0], idx[k], idx[k + 1]])
        elif tag == "o" and part is None:
            name = rest[0]
        elif tag == "usemtl":
            material = rest[0]
    return Mesh(np.array(verts, dtype=np.float64).reshape(-1, 3),
                np.array(tris, dtype=np.int64).reshape(-1, 3), name or "skeleton", material=material)
