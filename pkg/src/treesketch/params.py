"""
Weber-Penn parameter vocabulary.

The registry lists every parameter the generator understands in a fixed
order (geometry, branch radius, branch splitting, branch growth, leaves).
That order is the column order of the target matrix, so changing it is a
format break: bump ``REGISTRY_VERSION`` when you do.
"""
import json
import math
import zlib
from collections.abc import Mapping
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

REGISTRY_VERSION = 1

INF = math.inf

# magnitude groups, in the order of the network output branches
GROUP_REAL = "[-inf,inf]"
GROUP_ANGLE = "[-360,360]"
GROUP_UNIT = "[0,1]"
GROUP_POSITIVE = "[0,inf]"
GROUP_BOUNDED = "[min,max]"
GROUP_SIGNED_UNIT = "[-1,1]"
GROUPS = (GROUP_REAL, GROUP_ANGLE, GROUP_UNIT, GROUP_POSITIVE, GROUP_BOUNDED, GROUP_SIGNED_UNIT)

KINDS = ("float", "int", "bool", "enum", "sign")

SPECIES = ("maple", "pine", "bonsai", "palm", "cherry")

SHAPES = (
    "conical",
    "spherical",
    "hemispherical",
    "cylindrical",
    "tapered_cylindrical",
    "flame",
    "inverse_conical",
    "tend_flame",
    "inverse_tapered_cylindrical",
    "custom",
)
LEAF_SHAPES = ("rectangular", "hexagonal", "dupliface", "duplivert")
HANDLE_TYPES = ("auto", "vector")
BRANCH_MODES = ("original", "rotate", "random", "distance")

N_LEVELS = 4


class ParamError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    label: str
    kind: str
    group: str
    lo: float
    hi: float
    vector: bool = False
    labels: tuple = ()
    aliases: tuple = ()

    @property
    def arity(self):
        return N_LEVELS if self.vector else 1

    @property
    def range(self):
        return (self.lo, self.hi)

    @property
    def discrete(self):
        return self.kind != "float"


def _p(name, label, kind, group, lo=None, hi=None, vector=False, labels=(), aliases=()):
    if kind == "enum":
        lo, hi = 0, len(labels) - 1
    elif kind == "bool":
        lo, hi = 0, 1
    elif kind == "sign":
        lo, hi = -1, 1
    return ParamSpec(name, label, kind, group, lo, hi, vector, tuple(labels), tuple(aliases))


_R, _A, _U, _P, _B, _S = GROUPS

_ENTRIES = (
    # geometry
    _p("bevelRes", "Bevel Resolution", "int", _B, 0, 32),
    _p("handleType", "Handle Type", "enum", _B, labels=HANDLE_TYPES),
    _p("shape", "Shape", "enum", _B, labels=SHAPES),
    _p("customShape", "Custom Shape", "float", _P, 0.01, INF, vector=True),
    _p("shapeS", "Secondary Splits", "enum", _B, labels=SHAPES),
    _p("branchDist", "Branch Distribution", "float", _P, 0.0, INF),
    _p("nrings", "Branch Rings", "int", _P, 0, INF, aliases=("Number of Branch Whorls",)),
    _p("seed", "Random Seed", "int", _P, 0, 2**31 - 1),
    _p("scale", "Scale", "float", _P, 0.01, INF),
    _p("scaleV", "Scale Variation", "float", _P, 0.0, INF),
    # branch radius
    _p("ratio", "Ratio", "float", _P, 1e-4, INF),
    _p("scale0", "Radius Scale", "float", _P, 1e-3, INF),
    _p("scaleV0", "Radius Scale Variation", "float", _U, 0.0, 1.0),
    _p("ratioPower", "Branch Radius Ratio", "float", _P, 0.0, INF),
    _p("minRadius", "Minimum Radius", "float", _P, 0.0, INF),
    _p("closeTip", "Close Tip", "bool", _U),
    _p("rootFlare", "Root Flare", "float", _P, 0.0, INF),
    _p("autoTaper", "Auto Taper", "bool", _U),
    _p("taper", "Taper", "float", _U, 0.0, 1.0, vector=True),
    _p("radiusTweak", "Tweak Radius", "float", _P, 0.0, INF, vector=True),
    # branch splitting
    _p("levels", "Levels", "int", _B, 1, 4),
    _p("baseSplits", "Base Splits", "int", _P, 0, INF, aliases=("Tree Forks Number",)),
    _p("baseSize", "Trunk Height", "float", _U, 0.0, 1.0),
    _p("baseSize_s", "Secondary Base Size", "float", _U, 0.0, 1.0),
    _p("splitHeight", "Split Height", "float", _U, 0.0, 1.0),
    _p("splitBias", "Split Bias", "float", _R, -INF, INF),
    _p("branches", "Branches", "int", _P, 0, INF, vector=True),
    _p("segSplits", "Segment Splits", "float", _B, 0.0, 3.0, vector=True),
    _p("splitAngle", "Split Angle", "float", _A, -360.0, 360.0, vector=True, aliases=("Sibling Angle",)),
    _p("splitAngleV", "Split Variation", "float", _A, -360.0, 360.0, vector=True,
       aliases=("Sibling Angle Variance",)),
    _p("rotate", "Rotate Angle", "float", _A, -360.0, 360.0, vector=True, aliases=("Branch Roll Angle",)),
    _p("rotateV", "Rotate Variation", "float", _A, -360.0, 360.0, vector=True,
       aliases=("Branch Roll Angle Variance",)),
    _p("branchRotate", "Branch Rotate", "float", _A, -360.0, 360.0),
    _p("rotationLast", "Rotation Last Angle", "float", _A, -360.0, 360.0, aliases=("Parent Branch Roll Angle",)),
    _p("attractOut", "Outward Attraction", "float", _U, 0.0, 1.0, vector=True),
    _p("rMode", "Branching Mode", "enum", _B, labels=BRANCH_MODES),
    _p("curveRes", "Curve Resolution", "int", _B, 1, 16, vector=True),
    _p("sign", "Sign", "sign", _S),
    # branch growth
    _p("taperCrown", "Taper Crown", "float", _U, 0.0, 1.0),
    _p("length", "Length", "float", _P, 0.0, INF, vector=True),
    _p("lengthV", "Length Variation", "float", _U, 0.0, 1.0, vector=True),
    _p("downAngle", "Down Angle", "float", _A, -360.0, 360.0, vector=True),
    _p("downAngleV", "Down Angle Variation", "float", _A, -360.0, 360.0, vector=True,
       aliases=("Parent Branch Angle Variance",)),
    _p("curve", "Curvature", "float", _A, -360.0, 360.0, vector=True,
       aliases=("First Half Internodes Branching Angle",)),
    _p("curveV", "Curvature Variation", "float", _A, -360.0, 360.0, vector=True,
       aliases=("Internode Branching Angle Variance",)),
    _p("curveBack", "Back Curvature", "float", _A, -360.0, 360.0, vector=True,
       aliases=("Second Half Internodes Branching Angle",)),
    _p("attractUp", "Vertical Attraction", "float", _R, -INF, INF, vector=True),
    _p("useOldDownAngle", "Use Old Down Angle Variation", "bool", _U),
    _p("useParentAngle", "Use Parent Angle", "bool", _U),
    # leaves
    _p("leafShape", "Leaf Shape", "enum", _B, labels=LEAF_SHAPES),
    _p("leaves", "Leaves", "int", _P, 0, INF),
    _p("leafDist", "Leaf Distribution", "enum", _B, labels=SHAPES),
    _p("leafDownAngle", "Leaf Down Angle", "float", _A, -360.0, 360.0),
    _p("leafDownAngleV", "Leaf Down Angle Variation", "float", _A, -360.0, 360.0),
    _p("leafRotate", "Leaf Rotation", "float", _A, -360.0, 360.0, aliases=("Leaf Roll Angle",)),
    _p("leafRotateV", "Leaf Rotation Variation", "float", _A, -360.0, 360.0, aliases=("Leaf Angle Variance",)),
    _p("leafScale", "Leaf Scale", "float", _P, 0.0, INF, aliases=("Leaf Scaling Factor",)),
    _p("leafScaleV", "Leaf Scale Variation", "float", _U, 0.0, 1.0, aliases=("Leaf Scaling Factor Variance",)),
    _p("leafScaleX", "Leaf Scale X", "float", _U, 0.0, 1.0),
    _p("leafScaleT", "Leaf Scale Taper", "float", _S, -1.0, 1.0),
    _p("horzLeaves", "Horizontal Leaves", "bool", _U),
    _p("leafangle", "Leaf Angle", "float", _A, -360.0, 360.0),
)


class ParamRegistry:
    """Ordered, immutable collection of :class:`ParamSpec`."""

    def __init__(self, entries):
        self.entries = tuple(entries)
        self._by_key = {}
        for spec in self.entries:
            for key in (spec.name, spec.label) + spec.aliases:
                if key in self._by_key and self._by_key[key] is not spec:
                    raise ParamError(f"duplicate registry key {key!r}")
                self._by_key[key] = spec

    @property
    def total_count(self):
        return len(self.entries)

    @property
    def names(self):
        return tuple(s.name for s in self.entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __contains__(self, key):
        return key in self._by_key

    def __getitem__(self, key):
        try:
            return self._by_key[key]
        except KeyError:
            raise KeyError(f"unregistered parameter {key!r}") from None

    def index(self, key):
        return self.names.index(self[key].name)

    def group_members(self, group):
        return tuple(s.name for s in self.entries if s.group == group)

    def group_sizes(self):
        return {g: len(self.group_members(g)) for g in GROUPS}


REGISTRY = ParamRegistry(_ENTRIES)


# -- values -------------------------------------------------------------------

def _freeze(value):
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


class TreeParams(Mapping):
    """Immutable parameter dictionary keyed by canonical registry names.

    Display names and aliases are accepted on construction and lookup.
    Per-level vectors are stored as 4-tuples.
    """

    def __init__(self, values=(), registry=REGISTRY, **kw):
        data = {}
        for key, value in dict(values, **kw).items():
            name = registry[key].name if key in registry else key
            data[name] = _freeze(value)
        self._data = data
        self._registry = registry

    def __getitem__(self, key):
        if key not in self._data and key in self._registry:
            key = self._registry[key].name
        return self._data[key]

    def __iter__(self):
        return iter(self._data)

    def __len__(self):
        return len(self._data)

    def __eq__(self, other):
        if isinstance(other, TreeParams):
            return self._data == other._data
        if isinstance(other, Mapping):
            return self._data == dict(other)
        return NotImplemented

    def __hash__(self):
        return hash(tuple(sorted(self._data.items(), key=lambda kv: kv[0])))

    def __repr__(self):
        return f"TreeParams({self._data!r})"

    def replace(self, **changes):
        data = dict(self._data)
        for key, value in changes.items():
            data[self._registry[key].name if key in self._registry else key] = value
        return TreeParams(data, registry=self._registry)

    def without(self, *keys):
        drop = {self._registry[k].name if k in self._registry else k for k in keys}
        return TreeParams({k: v for k, v in self._data.items() if k not in drop}, registry=self._registry)

    def as_dict(self):
        return {k: list(v) if isinstance(v, tuple) else v for k, v in self._data.items()}

    def level(self, key, level):
        value = self[key]
        return value[level] if isinstance(value, tuple) else value


# -- validation ---------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    name: str
    rule: str
    value: object

    def __str__(self):
        return f"{self.name}: {self.rule} (got {self.value!r})"


def _scalar_problem(spec, v):
    """Return ``(rule, value)`` for a bad scalar element, or ``None``."""
    if spec.kind == "bool":
        if not isinstance(v, (bool, np.bool_)):
            return "expected bool"
        return None
    if spec.kind == "enum":
        if v not in spec.labels:
            return "unknown label"
        return None
    if isinstance(v, (bool, np.bool_)) or not isinstance(v, (int, float, np.integer, np.floating)):
        return "expected number"
    if not math.isfinite(v):
        return "non-finite value"
    if spec.kind == "sign":
        return None if v in (-1, 1) else "sign must be -1 or +1"
    if spec.kind == "int" and float(v) != int(v):
        return "expected integer"
    if not spec.lo <= v <= spec.hi:
        return f"out of range [{spec.lo}, {spec.hi}]"
    return None


def validate(params, registry=REGISTRY):
    """List every rule broken by ``params``; an empty list means valid."""
    out = []
    seen = set()
    for key, value in params.items():
        if key not in registry:
            out.append(Violation(key, "unregistered parameter", value))
            continue
        spec = registry[key]
        seen.add(spec.name)
        if spec.vector:
            if not isinstance(value, (list, tuple, np.ndarray)) or len(value) != N_LEVELS:
                out.append(Violation(spec.name, f"arity: expected {N_LEVELS} per-level values", value))
                continue
            elements = list(value)
        else:
            if isinstance(value, (list, tuple, np.ndarray)):
                out.append(Violation(spec.name, "arity: expected a scalar", value))
                continue
            elements = [value]
        for v in elements:
            rule = _scalar_problem(spec, v)
            if rule:
                out.append(Violation(spec.name, rule, value))
                break
    for spec in registry:
        if spec.name not in seen:
            out.append(Violation(spec.name, "missing parameter", None))
    return out


# -- label encoding -----------------------------------------------------------

def encode_enum(name, label, registry=REGISTRY):
    spec = registry[name]
    if spec.kind != "enum" or label not in spec.labels:
        raise ParamError(f"unencodable label {label!r} for {spec.name}")
    return float(spec.labels.index(label))


def decode_enum(name, code, registry=REGISTRY):
    spec = registry[name]
    if spec.kind != "enum":
        raise ParamError(f"{spec.name} is not an enum parameter")
    idx = round_half_away(code)
    if idx != code or not 0 <= idx < len(spec.labels):
        raise ParamError(f"unencodable code {code!r} for {spec.name}")
    return spec.labels[int(idx)]


def round_half_away(x):
    """Round to nearest integer, ties away from zero (``round`` uses banker's)."""
    return math.copysign(math.floor(abs(x) + 0.5), x)


# -- serialization ------------------------------------------------------------

def params_to_json(params, registry=REGISTRY):
    """Canonical text form: one key per registry entry, registry order."""
    out = {}
    for spec in registry:
        value = params[spec.name]
        out[spec.name] = list(value) if spec.vector else value
    return json.dumps(out, indent=1, allow_nan=False) + "\n"


def params_from_json(text, registry=REGISTRY):
    return TreeParams(json.loads(text), registry=registry)


def load_params(path, registry=REGISTRY):
    return params_from_json(Path(path).read_text(), registry=registry)


def save_params(params, path, registry=REGISTRY):
    Path(path).write_text(params_to_json(params, registry))


# -- species profiles ---------------------------------------------------------

DEFAULT_EPS_FRACTION = 0.05
DEFAULT_EPS_FLOOR = 1e-3


def default_epsilon(value):
    if isinstance(value, (tuple, list)):
        return tuple(default_epsilon(v) for v in value)
    if isinstance(value, str):
        return 0.0
    return max(DEFAULT_EPS_FRACTION * abs(float(value)), DEFAULT_EPS_FLOOR)


@dataclass(frozen=True)
class Characteristic:
    name: str
    value: object
    epsilon: object


@dataclass(frozen=True)
class SpeciesProfile:
    species: str
    fixed: TreeParams
    unfixed_ranges: dict
    characteristic: tuple
    texture: dict = field(default_factory=dict)
    version: int = 1

    def check(self, registry=REGISTRY):
        """Raise :class:`ParamError` unless the profile is internally consistent."""
        if self.species not in SPECIES:
            raise ParamError(f"unknown species {self.species!r}")
        keys = set(self.fixed) | set(self.unfixed_ranges)
        overlap = set(self.fixed) & set(self.unfixed_ranges)
        if overlap:
            raise ParamError(f"{self.species}: both fixed and unfixed: {sorted(overlap)}")
        missing = set(registry.names) - keys
        extra = keys - set(registry.names)
        if missing or extra:
            raise ParamError(f"{self.species}: unclassified {sorted(missing)}, unknown {sorted(extra)}")
        for name, (lo, hi) in self.unfixed_ranges.items():
            spec = registry[name]
            if spec.kind == "sign":
                continue
            if not (spec.lo <= lo <= hi <= spec.hi) or not math.isfinite(hi):
                raise ParamError(f"{self.species}: unfixed range for {name} must be finite and inside "
                                 f"[{spec.lo}, {spec.hi}]")
        if not self.characteristic:
            raise ParamError(f"{self.species}: no characteristic parameters")
        for cp in self.characteristic:
            if cp.name not in self.fixed:
                raise ParamError(f"{self.species}: characteristic {cp.name} is not fixed")
        for v in validate(self.fixed, registry):
            if v.rule != "missing parameter":
                raise ParamError(f"{self.species}: {v}")
        return self


def profile_from_dict(doc, registry=REGISTRY):
    fixed = TreeParams(doc["fixed"], registry=registry)
    unfixed = {registry[k].name: tuple(v) for k, v in doc.get("unfixed", {}).items()}
    cps = []
    for entry in doc["characteristic"]:
        if isinstance(entry, str):
            entry = {"name": entry}
        name = registry[entry["name"]].name
        value = fixed[name]
        eps = entry.get("epsilon")
        if eps is None:
            eps = default_epsilon(value)
        cps.append(Characteristic(name, value, _freeze(eps)))
    return SpeciesProfile(
        species=doc["species"],
        fixed=fixed,
        unfixed_ranges=unfixed,
        characteristic=tuple(cps),
        texture=dict(doc.get("texture", {})),
        version=int(doc.get("version", 1)),
    ).check(registry)


def load_profile(path, registry=REGISTRY):
    return profile_from_dict(json.loads(Path(path).read_text()), registry)


def builtin_profiles(registry=REGISTRY):
    """The five shipped species profiles, in species enum order."""
    pkg = resources.files("treesketch") / "data" / "profiles"
    return [profile_from_dict(json.loads((pkg / f"{s}.json").read_text()), registry) for s in SPECIES]


def builtin_profile(species, registry=REGISTRY):
    for p in builtin_profiles(registry):
        if p.species == species:
            return p
    raise ParamError(f"unknown species {species!r}")


def _profile_rng(profile, seed):
    return np.random.default_rng([int(seed) & (2**64 - 1), zlib.crc32(profile.species.encode())])


def randomize(profile, seed, registry=REGISTRY):
    """Draw one dictionary: fixed values copied, unfixed ones uniform in range."""
    rng = _profile_rng(profile, seed)
    values = {}
    for spec in registry:
        if spec.name not in profile.unfixed_ranges:
            values[spec.name] = profile.fixed[spec.name]
            continue
        lo, hi = profile.unfixed_ranges[spec.name]
        n = spec.arity
        if spec.kind == "sign":
            draw = [int(v) for v in rng.choice(np.array([-1, 1]), size=n)]
        elif spec.kind == "int":
            draw = [int(v) for v in rng.integers(int(lo), int(hi) + 1, size=n)]
        elif spec.kind == "float":
            draw = [float(v) for v in rng.uniform(lo, hi, size=n)]
        else:
            raise ParamError(f"cannot randomize {spec.kind} parameter {spec.name}")
        values[spec.name] = tuple(draw) if spec.vector else draw[0]
    return TreeParams(values, registry=registry)
