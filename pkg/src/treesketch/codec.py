"""
Parameter dictionary <-> regression target.

A dictionary becomes a 4 x n_p float matrix (one row per branch level, scalars
repeated down the column), which is then split into the six magnitude-group
sub-matrices. Only the unbounded and angle groups are Max-Abs scaled by
default.
"""
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .params import (GROUP_ANGLE, GROUP_POSITIVE, GROUP_REAL, GROUPS, N_LEVELS, REGISTRY,
                     ParamError, TreeParams, round_half_away, validate)

NORMALIZED_GROUPS = (GROUP_REAL, GROUP_ANGLE)
BUNDLE_FORMAT = "treesketch.target-bundle"
RECORD_FORMAT = "treesketch.normalization"


class CodecError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class TargetMatrix:
    data: np.ndarray
    column_keys: tuple

    def __post_init__(self):
        a = np.asarray(self.data, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != N_LEVELS or a.shape[1] != len(self.column_keys):
            raise CodecError(f"target matrix must be {N_LEVELS} x {len(self.column_keys)}, got {a.shape}")
        object.__setattr__(self, "data", a)
        object.__setattr__(self, "column_keys", tuple(self.column_keys))

    def column(self, name):
        return self.data[:, self.column_keys.index(name)]

    def __eq__(self, other):
        return (isinstance(other, TargetMatrix) and self.column_keys == other.column_keys
                and np.array_equal(self.data, other.data))

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TargetBundle:
    """Six sub-matrices keyed by magnitude group, with their column names."""

    groups: dict
    group_keys: dict

    def __post_init__(self):
        groups = {}
        for g in GROUPS:
            a = np.asarray(self.groups[g], dtype=np.float64).reshape(N_LEVELS, -1)
            if a.shape[1] != len(self.group_keys[g]):
                raise CodecError(f"group {g} has {a.shape[1]} columns for {len(self.group_keys[g])} keys")
            groups[g] = a
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "group_keys", {g: tuple(self.group_keys[g]) for g in GROUPS})

    def __getitem__(self, group):
        return self.groups[group]

    def shapes(self):
        return {g: self.groups[g].shape for g in GROUPS}

    def map(self, fn):
        return TargetBundle({g: fn(g, self.groups[g]) for g in GROUPS}, self.group_keys)

    def __eq__(self, other):
        return (isinstance(other, TargetBundle) and self.group_keys == other.group_keys
                and all(np.array_equal(self.groups[g], other.groups[g]) for g in GROUPS))

    __hash__ = None


# -- encode / split -------------------------------------------------------------

def _encode_element(spec, v):
    if spec.kind == "bool":
        return 1.0 if v else 0.0
    if spec.kind == "sign":
        return 0.0 if v < 0 else 1.0
    if spec.kind == "enum":
        if v not in spec.labels:
            raise CodecError(f"unencodable label {v!r} for {spec.name}")
        return float(spec.labels.index(v))
    return float(v)


def encode(params, registry=REGISTRY):
    """TreeParams -> 4 x n_p TargetMatrix (registry column order)."""
    missing = [s.name for s in registry if s.name not in params]
    if missing:
        raise CodecError(f"missing parameter(s): {', '.join(missing)}")
    data = np.empty((N_LEVELS, registry.total_count))
    for j, spec in enumerate(registry):
        value = params[spec.name]
        if spec.vector:
            if len(value) != N_LEVELS:
                raise CodecError(f"{spec.name}: expected {N_LEVELS} per-level values")
            data[:, j] = [_encode_element(spec, v) for v in value]
        else:
            data[:, j] = _encode_element(spec, value)
    return TargetMatrix(data, registry.names)


def split_groups(matrix, registry=REGISTRY):
    cols = {name: j for j, name in enumerate(matrix.column_keys)}
    groups, keys = {}, {}
    for g in GROUPS:
        members = registry.group_members(g)
        keys[g] = members
        groups[g] = matrix.data[:, [cols[m] for m in members]] if members else np.zeros((N_LEVELS, 0))
    return TargetBundle(groups, keys)


def merge(bundle, registry=REGISTRY):
    """Inverse of :func:`split_groups`."""
    data = np.empty((N_LEVELS, registry.total_count))
    for g in GROUPS:
        for k, name in enumerate(bundle.group_keys[g]):
            data[:, registry.index(name)] = bundle.groups[g][:, k]
    return TargetMatrix(data, registry.names)


# -- normalization ----------------------------------------------------------------

@dataclass(frozen=True)
class NormalizationRecord:
    """Per-column max-abs values for the scaled groups."""

    maxima: dict
    groups: tuple = NORMALIZED_GROUPS

    def __post_init__(self):
        for name, m in self.maxima.items():
            if not (math.isfinite(m) and m > 0):
                raise CodecError(f"unnormalizable column {name!r}: max-abs {m!r}")

    @classmethod
    def fit(cls, bundles, normalize_positive=False, registry=REGISTRY):
        """Column-wise max-abs over ``bundles`` (e.g. a training split).

        Columns that are zero everywhere get a max of 1.0 so they still pass
        through unchanged.
        """
        groups = NORMALIZED_GROUPS + ((GROUP_POSITIVE,) if normalize_positive else ())
        maxima = {}
        bundles = list(bundles)
        if not bundles:
            raise CodecError("cannot fit a normalization record on no data")
        for g in groups:
            stacked = np.concatenate([b.groups[g] for b in bundles], axis=0)
            peaks = np.abs(stacked).max(axis=0) if stacked.size else []
            for name, m in zip(bundles[0].group_keys[g], peaks):
                maxima[name] = float(m) if m > 0 else 1.0
        return cls(maxima, groups)

    @classmethod
    def fit_params(cls, dictionaries, normalize_positive=False, registry=REGISTRY):
        return cls.fit((split_groups(encode(p, registry), registry) for p in dictionaries),
                       normalize_positive, registry)

    def scale_for(self, group, keys):
        try:
            s = np.array([self.maxima[k] for k in keys], dtype=np.float64)
        except KeyError as e:
            raise CodecError(f"normalization record lacks column {e.args[0]!r}") from None
        if np.any(s <= 0):
            raise CodecError("unnormalizable column")
        return s

    def to_json(self):
        doc = {"format": RECORD_FORMAT, "version": 1, "groups": list(self.groups),
               "maxima": {k: self.maxima[k] for k in sorted(self.maxima, key=_registry_order)}}
        return json.dumps(doc, indent=1, allow_nan=False) + "\n"

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        if doc.get("format") != RECORD_FORMAT:
            raise CodecError("not a normalization record")
        return cls({k: float(v) for k, v in doc["maxima"].items()}, tuple(doc["groups"]))

    def save(self, path):
        Path(path).write_text(self.to_json())

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


def _registry_order(name):
    return REGISTRY.index(name) if name in REGISTRY else 10**6


def normalize(bundle, record):
    def f(g, a):
        if g not in record.groups:
            return a.copy()
        return a / record.scale_for(g, bundle.group_keys[g])
    return bundle.map(f)


def denormalize(bundle, record):
    def f(g, a):
        if g not in record.groups:
            return a.copy()
        return a * record.scale_for(g, bundle.group_keys[g])
    return bundle.map(f)


# -- decode -----------------------------------------------------------------------

def _snap_int(x, lo, hi):
    v = round_half_away(x)
    return int(min(max(v, lo), hi))


def _decode_element(spec, x):
    if not math.isfinite(x):
        raise CodecError(f"{spec.name}: non-finite value {x!r} cannot be snapped")
    if spec.kind == "bool":
        return bool(_snap_int(x, 0, 1))
    if spec.kind == "sign":
        return 1 if _snap_int(x, 0, 1) else -1
    if spec.kind == "enum":
        return spec.labels[_snap_int(x, 0, len(spec.labels) - 1)]
    if spec.kind == "int":
        lo = -math.inf if spec.lo is None else spec.lo
        hi = math.inf if spec.hi is None else spec.hi
        return _snap_int(x, lo, hi)
    return float(min(max(x, spec.lo), spec.hi))


def decode_matrix(matrix, registry=REGISTRY):
    values = {}
    cols = {name: j for j, name in enumerate(matrix.column_keys)}
    for spec in registry:
        col = matrix.data[:, cols[spec.name]]
        if spec.vector:
            values[spec.name] = tuple(_decode_element(spec, float(x)) for x in col)
        else:
            values[spec.name] = _decode_element(spec, float(col[0]))
    params = TreeParams(values, registry=registry)
    problems = validate(params, registry)
    if problems:
        raise CodecError("decoded dictionary is invalid: " + "; ".join(map(str, problems)))
    return params


def decode(bundle, record=None, registry=REGISTRY):
    """Sub-matrices -> TreeParams.

    Pass ``record`` when ``bundle`` is still normalized. Scalars are read from
    row 0; discrete columns are rounded half away from zero and clamped.
    """
    if record is not None:
        bundle = denormalize(bundle, record)
    return decode_matrix(merge(bundle, registry), registry)


def to_bundle(params, record=None, registry=REGISTRY):
    """encode + split (+ normalize when ``record`` is given)."""
    b = split_groups(encode(params, registry), registry)
    return normalize(b, record) if record is not None else b


# -- bundle files -------------------------------------------------------------------

def bundle_to_json(bundle):
    doc = {"format": BUNDLE_FORMAT, "version": 1, "groups": {
        g: {"keys": list(bundle.group_keys[g]), "rows": bundle.groups[g].tolist()} for g in GROUPS}}
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def bundle_from_json(text):
    doc = json.loads(text)
    if doc.get("format") != BUNDLE_FORMAT:
        raise CodecError("not a target bundle")
    gs = doc["groups"]
    return TargetBundle({g: np.array(gs[g]["rows"], dtype=np.float64).reshape(N_LEVELS, -1) for g in GROUPS},
                        {g: tuple(gs[g]["keys"]) for g in GROUPS})


def save_bundle(bundle, path):
    Path(path).write_text(bundle_to_json(bundle))


def load_bundle(path):
    return bundle_from_json(Path(path).read_text())


__all__ = [
    "CodecError", "TargetMatrix", "TargetBundle", "NormalizationRecord", "NORMALIZED_GROUPS",
    "encode", "split_groups", "merge", "normalize", "denormalize", "decode", "decode_matrix",
    "to_bundle", "bundle_to_json", "bundle_from_json", "save_bundle", "load_bundle", "ParamError",
]
