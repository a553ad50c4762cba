import json
import math
from importlib import resources

import pytest
from hypothesis import given, settings, strategies as st

from treesketch.params import (GROUPS, REGISTRY, SPECIES, ParamError, TreeParams, builtin_profile,
                               decode_enum, default_epsilon, encode_enum, load_params, params_from_json,
                               params_to_json, profile_from_dict, randomize, round_half_away,
                               save_params, validate)


def test_registry_has_62_entries_in_six_groups():
    assert REGISTRY.total_count == 62
    sizes = REGISTRY.group_sizes()
    assert set(sizes) == set(GROUPS)
    assert sum(sizes.values()) == 62
    assert sizes == {"[-inf,inf]": 2, "[-360,360]": 16, "[0,1]": 15, "[0,inf]": 17, "[min,max]": 10, "[-1,1]": 2}


def test_registry_names_unique_and_lookup_by_label_and_alias():
    assert len(set(REGISTRY.names)) == 62
    assert REGISTRY["Segment Splits"].name == "segSplits"
    assert REGISTRY["Tree Forks Number"].name == "baseSplits"
    assert REGISTRY["Number of Branch Whorls"].name == "nrings"
    with pytest.raises(KeyError, match="unregistered"):
        REGISTRY["nope"]


def test_vector_params_have_arity_four():
    assert REGISTRY["branches"].arity == 4
    assert REGISTRY["scale"].arity == 1


def test_builtin_profiles_validate(profiles):
    assert [p.species for p in profiles] == list(SPECIES)
    for p in profiles:
        assert validate(randomize(p, 0)) == []


@pytest.mark.parametrize("species", SPECIES)
def test_randomize_keeps_fixed_and_respects_ranges(species):
    prof = builtin_profile(species)
    for seed in range(10):
        d = randomize(prof, seed)
        for k, v in prof.fixed.items():
            if k not in prof.unfixed_ranges:
                assert d[k] == v
        for k, (lo, hi) in prof.unfixed_ranges.items():
            vals = d[k] if isinstance(d[k], tuple) else (d[k],)
            if REGISTRY[k].kind == "sign":
                assert set(vals) <= {-1, 1}
            else:
                assert all(lo <= x <= hi for x in vals)


def test_randomize_deterministic_and_seed_sensitive():
    prof = builtin_profile("maple")
    assert randomize(prof, 3) == randomize(prof, 3)
    assert randomize(prof, 3) != randomize(prof, 4)


def test_validate_reports_each_rule(palm_params):
    assert validate(palm_params) == []
    cases = {
        "missing parameter": palm_params.without("ratio"),
        "out of range": palm_params.replace(leafScaleX=1.5),
        "expected bool": palm_params.replace(closeTip=1),
        "unknown label": palm_params.replace(shape="blob"),
        "arity": palm_params.replace(branches=(1, 2)),
        "sign must be": palm_params.replace(sign=0),
        "non-finite": palm_params.replace(ratio=math.nan),
        "expected integer": palm_params.replace(levels=2.5),
    }
    for rule, p in cases.items():
        rules = [v.rule for v in validate(p)]
        assert any(r.startswith(rule) for r in rules), (rule, rules)
    extra = TreeParams({**palm_params.as_dict(), "bogus": 1})
    assert [v.rule for v in validate(extra)] == ["unregistered parameter"]


def test_enum_codes_roundtrip_and_reject():
    for i, label in enumerate(REGISTRY["leafShape"].labels):
        assert encode_enum("leafShape", label) == float(i)
        assert decode_enum("leafShape", float(i)) == label
    assert decode_enum("leafShape", 2.0) == "dupliface"
    with pytest.raises(ParamError):
        encode_enum("leafShape", "round")
    with pytest.raises(ParamError):
        decode_enum("leafShape", 7.0)


@pytest.mark.parametrize("x,expected", [(0.5, 1.0), (-0.5, -1.0), (1.5, 2.0), (2.5, 3.0), (2.49, 2.0), (-2.5, -3.0)])
def test_round_half_away(x, expected):
    assert round_half_away(x) == expected


def test_json_roundtrip(tmp_path, palm_params):
    text = params_to_json(palm_params)
    assert params_from_json(text) == palm_params
    assert list(json.loads(text)) == list(REGISTRY.names)
    save_params(palm_params, tmp_path / "p.json")
    assert load_params(tmp_path / "p.json") == palm_params
    assert (tmp_path / "p.json").read_text() == text


def test_display_names_normalize_to_canonical(palm_params):
    p = TreeParams({"Segment Splits": (0, 1, 0, 0)})
    assert list(p) == ["segSplits"]
    assert p["Segment Splits"] == p["segSplits"] == (0, 1, 0, 0)


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_default_epsilon_floor(v):
    e = default_epsilon(v)
    assert e >= 1e-3 and e >= 0.05 * abs(v) - 1e-12


def test_profile_rejects_fixed_unfixed_overlap_and_empty_cp_list():
    doc = json.loads((resources.files("treesketch") / "data" / "profiles" / "pine.json").read_text())
    bad = json.loads(json.dumps(doc))
    bad["unfixed"]["ratio"] = [0.0, 1.0]
    with pytest.raises(ParamError):
        profile_from_dict(bad)
    bad = json.loads(json.dumps(doc))
    bad["characteristic"] = []
    with pytest.raises(ParamError):
        profile_from_dict(bad)


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(SPECIES), st.integers(0, 2**32 - 1))
def test_randomized_dictionaries_always_valid(species, seed):
    assert validate(randomize(builtin_profile(species), seed)) == []
