"""
Evaluation metrics: per-branch 1-RMSE on target bundles, Hausdorff distance
between tree meshes, and the rotation sweep.
"""
import json
import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit, use_numba
from .mesh import Mesh, merge, rotate_about_z
from .params import GROUPS
from .raster import joint_bounds

DEFAULT_SAMPLES = 10_000


class MetricError(ValueError):
    pass


# -- 1-RMSE ---------------------------------------------------------------------

@dataclass(frozen=True)
class AccuracyReport:
    groups: dict
    overall: float

    def as_dict(self):
        return {"groups": dict(self.groups), "overall": self.overall}

    def to_text(self):
        lines = [f"{g:>12}  {s:.6f}" for g, s in self.groups.items()]
        lines.append(f"{'overall':>12}  {self.overall:.6f}")
        return "\n".join(lines) + "\n"


def one_minus_rmse(pred, gt):
    """1 - RMSE per magnitude group; ``overall`` is the mean of the six."""
    scores = {}
    for g in GROUPS:
        p, t = pred.groups[g], gt.groups[g]
        if p.shape != t.shape:
            raise MetricError(f"shape mismatch in group {g}: {p.shape} vs {t.shape}")
        scores[g] = 1.0 - math.sqrt(float(np.mean((p - t) ** 2))) if p.size else 1.0
    return AccuracyReport(scores, sum(scores.values()) / len(scores))


def mean_report(reports):
    reports = list(reports)
    if not reports:
        raise MetricError("no reports to average")
    groups = {g: sum(r.groups[g] for r in reports) / len(reports) for g in GROUPS}
    return AccuracyReport(groups, sum(groups.values()) / len(groups))


# -- point sampling -------------------------------------------------------------

def _points(x):
    if isinstance(x, Mesh):
        return x.vertices
    a = np.asarray(x, dtype=np.float64)
    return a.reshape(-1, 3)


def sample_surface(mesh, n=DEFAULT_SAMPLES, seed=0):
    """Area-stratified uniform samples: each triangle gets its area share of
    ``n`` (largest remainder), drawn uniformly inside it."""
    if mesh.is_empty():
        raise MetricError("cannot sample an empty mesh")
    areas = mesh.triangle_areas()
    total = areas.sum()
    if total <= 0:
        return mesh.vertices.copy()
    quota = n * areas / total
    counts = np.floor(quota).astype(np.int64)
    short = n - counts.sum()
    if short > 0:
        order = np.argsort(-(quota - counts), kind="stable")
        counts[order[:short]] += 1
    tri = np.repeat(np.arange(mesh.n_triangles), counts)
    rng = np.random.default_rng(seed)
    u, v = rng.random(len(tri)), rng.random(len(tri))
    flip = u + v > 1
    u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
    a, b, c = (mesh.vertices[mesh.triangles[tri, k]] for k in range(3))
    return a + u[:, None] * (b - a) + v[:, None] * (c - a)


def unit_cube_normalize(pa, pb):
    """Shift/scale both point sets by their joint bounding box so its longest side is 1."""
    both = np.concatenate([pa, pb])
    lo = both.min(axis=0)
    ext = float((both.max(axis=0) - lo).max())
    s = 1.0 / ext if ext > 0 else 1.0
    return (pa - lo) * s, (pb - lo) * s


# -- directed distance kernels -----------------------------------------------------

@njit
def _directed_sq_numba(x, y):
    worst = 0.0
    for i in range(x.shape[0]):
        best = np.inf
        for j in range(y.shape[0]):
            dx = x[i, 0] - y[j, 0]
            dy = x[i, 1] - y[j, 1]
            dz = x[i, 2] - y[j, 2]
            d = dx * dx + dy * dy + dz * dz
            if d < best:
                best = d
                if best <= worst:
                    break
        if best > worst:
            worst = best
    return worst


def _directed_sq_numpy(x, y, chunk=512):
    worst = 0.0
    for s in range(0, len(x), chunk):
        xs = x[s:s + chunk]
        dx = xs[:, None, 0] - y[None, :, 0]
        dy = xs[:, None, 1] - y[None, :, 1]
        dz = xs[:, None, 2] - y[None, :, 2]
        d = dx * dx + dy * dy + dz * dz
        worst = max(worst, float(d.min(axis=1).max()))
    return worst


def directed_hausdorff(x, y, numba=None):
    """max over x of the distance to the nearest y."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if not len(x) or not len(y):
        raise MetricError("hausdorff of an empty point set")
    sq = _directed_sq_numba(x, y) if use_numba(numba) else _directed_sq_numpy(x, y)
    return math.sqrt(sq)


def hausdorff(a, b, samples=DEFAULT_SAMPLES, mode="surface", seed=0, symmetric=True,
              normalize=True, numba=None):
    """Hausdorff distance between two meshes (or raw ``(n, 3)`` point sets).

    ``mode="surface"`` samples ``samples`` points per mesh; ``mode="vertex"``
    uses the vertices directly. With ``normalize`` both sets are jointly
    rescaled into the unit cube first. ``symmetric=False`` gives h(a -> b).
    """
    for m in (a, b):
        if isinstance(m, Mesh) and (m.n_vertices == 0 or (mode == "surface" and m.is_empty())):
            raise MetricError("hausdorff of an empty mesh")
    if mode == "surface":
        pa = sample_surface(a, samples, seed) if isinstance(a, Mesh) else _points(a)
        pb = sample_surface(b, samples, seed) if isinstance(b, Mesh) else _points(b)
    elif mode == "vertex":
        pa, pb = _points(a), _points(b)
    else:
        raise ValueError(f"unknown hausdorff mode {mode!r}")
    if not len(pa) or not len(pb):
        raise MetricError("hausdorff of an empty point set")
    if normalize:
        pa, pb = unit_cube_normalize(pa, pb)
    d = directed_hausdorff(pa, pb, numba)
    if symmetric:
        d = max(d, directed_hausdorff(pb, pa, numba))
    return d


# -- rotation sweep ---------------------------------------------------------------

class SweepError(RuntimeError):
    def __init__(self, angle, cause):
        super().__init__(f"prediction failed at {angle} deg: {cause}")
        self.angle = angle
        self.cause = cause


def whole_tree(skeleton, foliage):
    parts = [m for m in (skeleton, foliage) if m is not None and not m.is_empty()]
    return merge([Mesh(m.vertices, m.triangles, "skeleton") for m in parts], "skeleton")


def rotate_tree(skeleton, foliage, degrees):
    """Rotate both parts about the vertical axis through the tree's bbox centre."""
    lo, hi = joint_bounds([skeleton, foliage])
    c = (lo + hi) / 2.0
    return rotate_about_z(skeleton, degrees, c), (rotate_about_z(foliage, degrees, c) if foliage is not None else None)


def rotation_sweep(params, predictor, step_degrees=5, resolution=608, view="front",
                   samples=DEFAULT_SAMPLES, seed=0, numba=None):
    """HDD between the rotated ground truth and the reconstruction from its sketch.

    For each angle the tree grown from ``params`` is rotated, sketched from
    ``view`` and handed to ``predictor`` (sketch -> TreeParams). The predicted
    tree is grown, rotated by the same angle and compared. Returns a list of
    ``(angle, hdd)``.
    """
    from .sketch import sketch_tree
    from .synthesis import grow_tree

    if step_degrees <= 0 or 360 % step_degrees:
        raise ValueError("step_degrees must divide 360")
    gt_sk, gt_fo = grow_tree(params)
    out = []
    for angle in range(0, 360, int(step_degrees)):
        r_sk, r_fo = rotate_tree(gt_sk, gt_fo, angle)
        try:
            img = sketch_tree(r_sk, r_fo, view, resolution, numba=numba)
            pred = predictor(img)
            p_sk, p_fo = rotate_tree(*grow_tree(pred), angle)
        except Exception as e:
            raise SweepError(angle, e) from e
        d = hausdorff(whole_tree(r_sk, r_fo), whole_tree(p_sk, p_fo), samples, seed=seed, numba=numba)
        out.append((angle, d))
    return out


def sweep_report(results):
    ds = [d for _, d in results]
    return {"angles": [a for a, _ in results], "hdd": ds,
            "mean": float(np.mean(ds)) if ds else None, "max": float(np.max(ds)) if ds else None}


def sweep_report_text(results):
    lines = ["angle  hdd"] + [f"{a:5d}  {d:.6f}" for a, d in results]
    rep = sweep_report(results)
    if results:
        lines.append(f"mean   {rep['mean']:.6f}")
        lines.append(f"max    {rep['max']:.6f}")
    return "\n".join(lines) + "\n"


def save_sweep(results, path):
    with open(path, "w") as fh:
        json.dump(sweep_report(results), fh, indent=1)
        fh.write("\n")


def plot_sweep(results, path):
    """Line plot of HDD per angle (needs matplotlib)."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as e:  # pragma: no cover - optional extra
        raise RuntimeError("plotting needs matplotlib (pip install artifact[plot])") from e
    fig, ax = plt.subplots(figsize=(6, 3))
    ax.plot([a for a, _ in results], [d for _, d in results], marker="o", ms=3)
    ax.set_xlabel("rotation (deg)")
    ax.set_ylabel("HDD")
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
