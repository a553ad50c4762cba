import numpy as np
import pytest

from treesketch.mesh import Mesh
from treesketch.params import builtin_profile, builtin_profiles, randomize
from treesketch.synthesis import grow_tree


@pytest.fixture(scope="session")
def profiles():
    return builtin_profiles()


@pytest.fixture(scope="session")
def palm_params():
    return randomize(builtin_profile("palm"), 7)


@pytest.fixture(scope="session")
def palm_tree(palm_params):
    return grow_tree(palm_params)


def box_mesh(lo=(-0.5, -0.5, -0.5), hi=(0.5, 0.5, 0.5), part="skeleton"):
    """Closed axis-aligned box, 12 triangles."""
    x0, y0, z0 = lo
    x1, y1, z1 = hi
    v = np.array([[x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
                  [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1]], dtype=float)
    f = np.array([[0, 2, 1], [0, 3, 2], [4, 5, 6], [4, 6, 7], [0, 1, 5], [0, 5, 4],
                  [1, 2, 6], [1, 6, 5], [2, 3, 7], [2, 7, 6], [3, 0, 4], [3, 4, 7]])
    return Mesh(v, f, part)


def mirror(mesh, axis):
    """Reflect through the plane ``coordinate[axis] = 0`` (winding flipped)."""
    s = np.ones(3)
    s[axis] = -1.0
    return Mesh(mesh.vertices * s, mesh.triangles[:, ::-1], mesh.part)


def symmetric_mesh(seed=0, n=40, axis=1):
    """Random triangle soup plus its mirror image across ``axis`` = 0.

    Under perspective, opposite cameras on that axis see exact mirror images
    of such a mesh.
    """
    rng = np.random.default_rng(seed)
    v = rng.uniform(-1, 1, size=(3 * n, 3)) * [0.8, 0.6, 1.0]
    t = np.arange(3 * n).reshape(n, 3)
    half = Mesh(v, t)
    m = mirror(half, axis)
    return Mesh(np.vstack([half.vertices, m.vertices]), np.vstack([t, m.triangles + len(v)]))


ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per criterion; printed in the terminal summary."""
    def record(n, ok, text):
        line = f"acceptance {n:>2}: {'PASS' if ok else 'FAIL'}  {text}"
        ACCEPTANCE.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
