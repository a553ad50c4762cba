"""
Numba vs pure-numpy timings for the two hot kernels (triangle rasterizer,
Hausdorff nearest-point search). Also checks that both paths agree exactly.

    python3 benchmarks/bench_kernels.py [--species maple] [--resolution 608] [--samples 10000]
"""
import argparse
import time

import numpy as np

from treesketch._accel import HAS_NUMBA
from treesketch.metrics import hausdorff, whole_tree
from treesketch.params import builtin_profile, randomize
from treesketch.raster import canonical_view, joint_bounds, render_part
from treesketch.synthesis import grow_tree


def best_of(fn, repeat):
    times, out = [], None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.strip().splitlines()[0])
    ap.add_argument("--species", default="maple")
    ap.add_argument("--resolution", type=int, default=608)
    ap.add_argument("--samples", type=int, default=10_000)
    ap.add_argument("--repeat", type=int, default=3)
    a = ap.parse_args(argv)
    if not HAS_NUMBA:
        print("numba not installed; nothing to compare")
        return 1

    sk, fo = grow_tree(randomize(builtin_profile(a.species), 1))
    other = whole_tree(*grow_tree(randomize(builtin_profile(a.species), 2)))
    tree = whole_tree(sk, fo)
    cam = canonical_view("front", *joint_bounds([sk, fo]))
    print(f"{a.species}: {sk.n_triangles} skeleton + {fo.n_triangles} foliage triangles, "
          f"{a.resolution}px, {a.samples} HDD samples")

    cases = {
        "rasterize": lambda nb: render_part(sk, cam, a.resolution, numba=nb).data,
        "hausdorff": lambda nb: hausdorff(tree, other, a.samples, numba=nb),
    }
    print(f"{'kernel':<10} {'numba s':>9} {'numpy s':>9} {'speedup':>8}  equal")
    for name, fn in cases.items():
        fn(True)  # compile / load cache
        t_nb, r_nb = best_of(lambda: fn(True), a.repeat)
        t_np, r_np = best_of(lambda: fn(False), a.repeat)
        print(f"{name:<10} {t_nb:9.4f} {t_np:9.4f} {t_np / t_nb:8.1f}x  {bool(np.array_equal(r_nb, r_np))}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
