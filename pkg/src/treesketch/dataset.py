"""
Synthetic dataset generation.

Layout under ``out``::

    manifest.json
    normalization.json
    <species>/<tree>/params.json
    <species>/<tree>/skeleton.obj, foliage.obj
    <species>/<tree>/<view>.sketch.png, <view>.gt.png

Every tree draws its own seed from (global seed, species, tree index), so any
sample can be regenerated on its own.
"""
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .codec import NormalizationRecord
from .mesh import write_obj
from .params import SPECIES, builtin_profile, randomize, save_params
from .raster import VIEWS, canonical_view, joint_bounds, render_gt, save_png
from .sketch import BASE_RESOLUTION, sketch_tree
from .synthesis import grow_tree

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "treesketch.dataset"
DESK_COUNT = 5
FULL_COUNT = 250


def sample_seed(seed, species_index, tree_index):
    """Independent 32-bit seed per (global seed, species, tree)."""
    ss = np.random.SeedSequence([int(seed), int(species_index), int(tree_index)])
    return int(ss.generate_state(1, np.uint32)[0])


def validation_views(species, views):
    """One held-out view per species, cycling through ``views``."""
    return {s: views[SPECIES.index(s) % len(views)] for s in species}


def plan_counts(n_species, count, n_views):
    total = n_species * count * n_views
    val = n_species * count
    return {"total": total, "train": total - val, "val": val}


@dataclass(frozen=True)
class GenerateConfig:
    species: tuple = SPECIES
    count: int = DESK_COUNT
    views: tuple = VIEWS
    resolution: int = BASE_RESOLUTION
    seed: int = 0
    gt: bool = True

    def check(self):
        bad = [s for s in self.species if s not in SPECIES]
        if bad:
            raise ValueError(f"unknown species: {', '.join(bad)}")
        bad = [v for v in self.views if v not in VIEWS]
        if bad:
            raise ValueError(f"unknown views: {', '.join(bad)}")
        if not self.species or not self.views:
            raise ValueError("need at least one species and one view")
        if len(set(self.views)) != len(self.views) or len(set(self.species)) != len(self.species):
            raise ValueError("species and views must not repeat")
        if self.count < 1 or self.resolution < 8:
            raise ValueError("count must be >= 1 and resolution >= 8")
        return self


def _sample_entry(cfg, species, tree, val_view):
    rel = Path(species) / f"{tree:04d}"
    return {
        "species": species,
        "tree": tree,
        "seed": sample_seed(cfg.seed, SPECIES.index(species), tree),
        "dir": rel.as_posix(),
        "params": (rel / "params.json").as_posix(),
        "meshes": {"skeleton": (rel / "skeleton.obj").as_posix(), "foliage": (rel / "foliage.obj").as_posix()},
        "views": {v: {"sketch": (rel / f"{v}.sketch.png").as_posix(),
                      "gt": (rel / f"{v}.gt.png").as_posix() if cfg.gt else None,
                      "split": "val" if v == val_view else "train"} for v in cfg.views},
    }


def build_sample(cfg, entry, out):
    """Randomize, grow, render and write one tree; returns its parameters."""
    params = randomize(builtin_profile(entry["species"]), entry["seed"])
    skeleton, foliage = grow_tree(params)
    d = Path(out) / entry["dir"]
    d.mkdir(parents=True, exist_ok=True)
    save_params(params, Path(out) / entry["params"])
    write_obj(skeleton, Path(out) / entry["meshes"]["skeleton"])
    write_obj(foliage, Path(out) / entry["meshes"]["foliage"])
    lo, hi = joint_bounds([skeleton, foliage])
    for view, files in entry["views"].items():
        cam = canonical_view(view, lo, hi)
        save_png(sketch_tree(skeleton, foliage, cam, cfg.resolution), Path(out) / files["sketch"])
        if files["gt"]:
            save_png(render_gt(skeleton, foliage, cam, cfg.resolution), Path(out) / files["gt"])
    return params


def _run(args):
    cfg, entry, out = args
    try:
        return entry, build_sample(cfg, entry, out), None
    except Exception as e:  # recorded in the manifest, not fatal unless fail_fast
        return entry, None, f"{type(e).__name__}: {e}"


def generate(out, config=None, fail_fast=False, workers=1, dry_run=False, **kw):
    """Build the dataset under ``out`` and return the manifest dict.

    Keyword arguments override fields of :class:`GenerateConfig`. With
    ``dry_run`` only the manifest plan is computed; nothing is written.
    """
    cfg = (config or GenerateConfig(**kw)).check()
    out = Path(out)
    val = validation_views(cfg.species, cfg.views)
    planned = [_sample_entry(cfg, s, t, val[s]) for s in cfg.species for t in range(cfg.count)]
    manifest = {
        "format": MANIFEST_FORMAT, "version": 1,
        "species": list(cfg.species), "count": cfg.count, "views": list(cfg.views),
        "resolution": cfg.resolution, "seed": cfg.seed, "validation_views": val,
        "normalization": "normalization.json",
    }
    if dry_run:
        manifest.update(samples=planned, failures=[], counts=_counts(planned))
        return manifest

    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, e, str(out)) for e in planned]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run, jobs))
    else:
        results = []
        for job in jobs:
            r = _run(job)
            results.append(r)
            if fail_fast and r[2]:
                break
    samples, failures, fitted = [], [], []
    for entry, params, err in results:
        if err:
            if fail_fast:
                raise RuntimeError(f"{entry['dir']} (seed {entry['seed']}): {err}")
            log.warning("skipping %s (seed %d): %s", entry["dir"], entry["seed"], err)
            failures.append({"species": entry["species"], "tree": entry["tree"], "seed": entry["seed"], "error": err})
            continue
        samples.append(entry)
        if any(v["split"] == "train" for v in entry["views"].values()):
            fitted.append(params)
    if not fitted:
        fitted = [randomize(builtin_profile(e["species"]), e["seed"]) for e in samples]
    if fitted:
        NormalizationRecord.fit_params(fitted).save(out / manifest["normalization"])
    manifest.update(samples=samples, failures=failures, counts=_counts(samples))
    write_manifest(manifest, out / "manifest.json")
    return manifest


def _counts(samples):
    splits = [v["split"] for s in samples for v in s["views"].values()]
    return {"total": len(splits), "train": splits.count("train"), "val": splits.count("val")}


def write_manifest(manifest, path):
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def load_manifest(path):
    """Read ``manifest.json`` (or the dataset directory holding it)."""
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    doc = json.loads(p.read_text())
    if doc.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{p} is not a dataset manifest")
    return doc


def iter_sketches(manifest, split=None):
    for s in manifest["samples"]:
        for view, entry in s["views"].items():
            if split is None or entry["split"] == split:
                yield s, view, entry
