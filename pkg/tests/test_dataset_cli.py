import json
from pathlib import Path

import numpy as np
import pytest

from treesketch import cli
from treesketch.dataset import (GenerateConfig, generate, iter_sketches, load_manifest, plan_counts, sample_seed,
                                validation_views)
from treesketch.mesh import read_obj
from treesketch.metrics import hausdorff
from treesketch.params import SPECIES, builtin_profile, load_params, randomize, save_params
from treesketch.raster import load_png
from treesketch.synthesis import grow_tree

SMALL = dict(species=("palm", "pine"), count=2, views=("front", "left"), resolution=64, seed=3)


@pytest.fixture(scope="module")
def small(tmp_path_factory):
    out = tmp_path_factory.mktemp("ds")
    return out, generate(out, **SMALL)


def _files(root):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(Path(root).rglob("*")) if p.is_file()}


# -- planning ------------------------------------------------------------------------

def test_plan_counts_full_and_desk():
    assert plan_counts(5, 250, 4) == {"total": 5000, "train": 3750, "val": 1250}
    assert plan_counts(5, 5, 4) == {"total": 100, "train": 75, "val": 25}


def test_dry_run_writes_nothing(tmp_path):
    m = generate(tmp_path / "x", count=250, dry_run=True)
    assert m["counts"] == {"total": 5000, "train": 3750, "val": 1250}
    assert not (tmp_path / "x").exists()


def test_sample_seeds_distinct_and_stable():
    seeds = {sample_seed(0, s, t) for s in range(5) for t in range(250)}
    assert len(seeds) == 1250
    assert sample_seed(0, 1, 2) == sample_seed(0, 1, 2) != sample_seed(1, 1, 2)


def test_validation_view_one_per_species():
    v = validation_views(SPECIES, ("front", "back", "left", "right"))
    assert set(v) == set(SPECIES) and len(set(v.values())) == 4


@pytest.mark.parametrize("kw", [dict(species=("oak",)), dict(views=("top",)), dict(count=0),
                                dict(views=("front", "front"))])
def test_config_rejects_bad_values(kw):
    with pytest.raises(ValueError):
        GenerateConfig(**kw).check()


# -- generated dataset -------------------------------------------------------------------

def test_manifest_counts_and_files(small):
    out, m = small
    assert m["counts"] == {"total": 8, "train": 4, "val": 4}
    assert load_manifest(out) == json.loads((out / "manifest.json").read_text())
    assert (out / "normalization.json").exists()
    for sample, view, entry in iter_sketches(m):
        img = load_png(out / entry["sketch"])
        assert img.width == img.height == 64 and img.is_binary()
        assert (out / entry["gt"]).exists()
    assert len(list(iter_sketches(m, "val"))) == 4


def test_sample_params_reproduce_meshes(small):
    out, m = small
    s = m["samples"][0]
    p = load_params(out / s["params"])
    assert p == randomize(builtin_profile(s["species"]), s["seed"])
    sk, fo = grow_tree(p)
    on_disk = read_obj(out / s["meshes"]["skeleton"])
    assert hausdorff(sk, on_disk, mode="vertex") <= 1e-6


def test_generate_is_byte_identical(small, tmp_path):
    out, _ = small
    generate(tmp_path, **SMALL)
    assert _files(out) == _files(tmp_path)


def test_failures_recorded_not_fatal(tmp_path, monkeypatch):
    import treesketch.dataset as ds
    real = ds.build_sample

    def flaky(cfg, entry, out):
        if entry["tree"] == 1:
            raise RuntimeError("synthetic failure")
        return real(cfg, entry, out)

    monkeypatch.setattr(ds, "build_sample", flaky)
    m = generate(tmp_path, **SMALL)
    assert len(m["failures"]) == 2 and m["counts"]["total"] == 4
    with pytest.raises(RuntimeError, match="synthetic failure"):
        generate(tmp_path / "b", fail_fast=True, **SMALL)


# -- CLI ------------------------------------------------------------------------------------

def test_cli_generate_dry_run(capsys, tmp_path):
    assert cli.main(["generate", "--out", str(tmp_path / "d"), "--paper-scale", "--dry-run"]) == 0
    assert "5000 sketches (3750 train / 1250 val)" in capsys.readouterr().out


def test_cli_reconstruct_and_identify(tmp_path, capsys, palm_params):
    save_params(palm_params, tmp_path / "p.json")
    assert cli.main(["reconstruct", str(tmp_path / "p.json"), "--out", str(tmp_path / "r")]) == 0
    meta = json.loads((tmp_path / "r" / "meta.json").read_text())
    assert meta["species"] == "palm" and meta["texture"]["bark"] == "palm_bark"
    sk, _ = grow_tree(palm_params)
    assert hausdorff(sk, read_obj(tmp_path / "r" / "skeleton.obj"), mode="vertex") <= 1e-6
    capsys.readouterr()
    assert cli.main(["identify", str(tmp_path / "p.json")]) == 0
    assert capsys.readouterr().out.startswith("palm\t")


def test_cli_encode_decode_evaluate(tmp_path, capsys, palm_params):
    save_params(palm_params, tmp_path / "p.json")
    assert cli.main(["encode", str(tmp_path / "p.json"), "--out", str(tmp_path / "b.bundle.json")]) == 0
    assert cli.main(["decode", str(tmp_path / "b.bundle.json"), "--out", str(tmp_path / "q.json")]) == 0
    assert load_params(tmp_path / "q.json") == palm_params
    assert cli.main(["evaluate", "--pred-params", str(tmp_path / "q.json"), "--gt-params", str(tmp_path / "p.json"),
                     "--out", str(tmp_path / "e.json")]) == 0
    assert json.loads((tmp_path / "e.json").read_text())["overall"] == 1.0


def test_cli_sketch_index_predict(small, tmp_path, capsys):
    out, m = small
    assert cli.main(["index", str(out), "--split", "all", "--out", str(tmp_path / "i.npz")]) == 0
    s = m["samples"][1]
    sketch = out / s["views"]["left"]["sketch"]
    assert cli.main(["predict", str(sketch), "--index", str(tmp_path / "i.npz"), "--out", str(tmp_path / "p.json")]) == 0
    assert load_params(tmp_path / "p.json") == load_params(out / s["params"])
    assert cli.main(["sketch", "--params", str(out / s["params"]), "--view", "left", "--resolution", "64",
                     "--out", str(tmp_path / "s.png")]) == 0
    assert (tmp_path / "s.png").read_bytes() == sketch.read_bytes()


def test_cli_sweep_identity(tmp_path, capsys, palm_params):
    save_params(palm_params, tmp_path / "p.json")
    assert cli.main(["sweep", str(tmp_path / "p.json"), "--step", "180", "--resolution", "48", "--samples", "200",
                     "--out", str(tmp_path / "s.json")]) == 0
    assert "mean" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{not json")
    assert cli.main(["identify", str(tmp_path / "bad.json")]) == 2
    assert cli.main(["encode", str(tmp_path / "missing.json"), "--out", str(tmp_path / "o")]) == 3
    assert cli.main(["evaluate", "--pred-params", "a", "--gt-mesh", "b"]) == 1
    assert cli.main(["generate", "--out", str(tmp_path), "--species", "oak"]) == 1
    with pytest.raises(SystemExit) as e:
        cli.main(["frobnicate"])
    assert e.value.code == 1
