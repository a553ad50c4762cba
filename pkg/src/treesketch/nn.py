"""Nearest-neighbour sketch retrieval: a stand-in predictor for the regression network."""
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import params_from_json, params_to_json
from .sketch import resize_for_input

FEATURE_SIDE = 16
INDEX_FORMAT = "treesketch.sketch-index"


class SketchIndexError(ValueError):
    pass


def featurize(sketch, side=FEATURE_SIDE):
    """Area-downsampled pixels, flattened row-major."""
    return resize_for_input(sketch, side).data.reshape(-1)


@dataclass(frozen=True, eq=False)
class SketchIndex:
    features: np.ndarray
    params: tuple
    feature_side: int = FEATURE_SIDE
    keys: tuple = ()

    def __post_init__(self):
        f = np.ascontiguousarray(self.features, dtype=np.float64).reshape(-1, self.feature_side ** 2)
        if len(f) != len(self.params):
            raise SketchIndexError("features and parameter entries differ in count")
        object.__setattr__(self, "features", f)
        object.__setattr__(self, "params", tuple(self.params))
        object.__setattr__(self, "keys", tuple(self.keys) if self.keys else tuple(str(i) for i in range(len(f))))

    def __len__(self):
        return len(self.params)

    @classmethod
    def build(cls, items, side=FEATURE_SIDE):
        """``items``: iterable of ``(sketch, params)`` or ``(sketch, params, key)``."""
        feats, params, keys = [], [], []
        for k, item in enumerate(items):
            feats.append(featurize(item[0], side))
            params.append(item[1])
            keys.append(item[2] if len(item) > 2 else str(k))
        if not feats:
            return cls(np.zeros((0, side * side)), (), side, ())
        return cls(np.stack(feats), params, side, keys)

    def distances(self, sketch):
        q = featurize(sketch, self.feature_side)
        d = self.features - q
        return np.sqrt(np.einsum("ij,ij->i", d, d))

    def nearest(self, sketch):
        """Index of the closest entry; the first one wins ties."""
        if not len(self):
            raise SketchIndexError("empty sketch index")
        return int(np.argmin(self.distances(sketch)))

    def predict(self, sketch):
        return self.params[self.nearest(sketch)]

    __call__ = predict

    def save(self, path):
        meta = {"format": INDEX_FORMAT, "version": 1, "feature_side": self.feature_side,
                "keys": list(self.keys), "params": [json.loads(params_to_json(p)) for p in self.params]}
        with open(path, "wb") as fh:
            np.savez(fh, features=self.features, meta=np.array(json.dumps(meta)))

    @classmethod
    def load(cls, path):
        with np.load(Path(path), allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format") != INDEX_FORMAT:
                raise SketchIndexError("not a sketch index")
            params = [params_from_json(json.dumps(p)) for p in meta["params"]]
            return cls(z["features"], params, int(meta["feature_side"]), meta["keys"])


def predict(sketch, index):
    return index.predict(sketch)


def index_from_manifest(manifest, root, split=None, side=FEATURE_SIDE):
    """Index every sketch in a generated dataset (optionally one split only)."""
    from .params import load_params
    from .raster import load_png
    root = Path(root)
    items = []
    for s in manifest["samples"]:
        p = load_params(root / s["params"])
        for view, entry in s["views"].items():
            if split is None or entry["split"] == split:
                items.append((load_png(root / entry["sketch"]), p, f"{s['species']}/{s['tree']}/{view}"))
    return SketchIndex.build(items, side)


__all__ = ["FEATURE_SIDE", "SketchIndex", "SketchIndexError", "featurize", "predict", "index_from_manifest"]
