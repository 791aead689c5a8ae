import json

import pytest

from strata_bounds.cli import bundled_path
from strata_bounds.model import ResponseType
from strata_bounds.modelfile import ModelFileError, load_model, model_from_dict, parse_param_flag

BIN = {"y": [0, 1], "d": [0, 1], "z": [0, 1]}


def test_bundled_model_loads():
    model, param, doc = load_model(bundled_path("example_model.json"))
    assert len(model.treatment_types()) == 4
    assert param.name == "ate_contrast"
    assert {r.treatments for r in param.conditioning} == {(0, 1, 2)}
    assert doc["restriction"]["catalog"] == "cheng_small_mono1"


def test_json_error_has_line_and_column(tmp_path):
    f = tmp_path / "m.json"
    f.write_text('{\n  "support": {"y": [0, 1],\n  }\n}')
    with pytest.raises(ModelFileError, match=r"m\.json:3:3:"):
        load_model(f)
    f.write_text("[1, 2]")
    with pytest.raises(ModelFileError, match="top level"):
        load_model(f)
    with pytest.raises(ModelFileError, match="cannot read"):
        load_model(tmp_path / "missing.json")


@pytest.mark.parametrize("doc, msg", [
    ({}, "support"),
    ({"support": {"y": [0], "d": [0, 1], "z": [0, 1]}}, "support"),
    ({"support": BIN, "restriction": {"catalog": "nope"}}, "unknown"),
    ({"support": BIN, "restriction": {"whatever": 1}}, "need one of"),
    ({"support": BIN, "restriction": {"explicit": [[[0, 1], [0, 7]]]}}, "explicit"),
    ({"support": BIN, "parameter": {"d1": 1}}, "missing field"),
])
def test_invalid_documents(doc, msg):
    with pytest.raises(ModelFileError, match=msg):
        model_from_dict(doc)


def test_restriction_forms_and_relaxations():
    m, _ = model_from_dict({"support": BIN, "restriction": {"treatment_types": ["00", "01", "11"]}})
    assert len(m.admissible) == 12
    m, _ = model_from_dict({"support": BIN, "restriction": {"explicit": [[[0, 1], [0, 1]], "11,11"]}})
    assert set(m.admissible) == {ResponseType((0, 1), (0, 1)), ResponseType((1, 1), (1, 1))}
    m, _ = model_from_dict({
        "support": BIN,
        "restriction": {"treatment_types": ["00", "01", "11"]},
        "relaxations": [{"treatment_types": ["10"], "eps": 0.05}],
    })
    assert len(m.admissible) == 16 and m.relaxations[0].eps == 0.05
    m2, _ = model_from_dict({"support": BIN, "restriction": {"catalog": "no_defier_generalized", "relax_eps": 0.05}})
    assert set(m2.admissible) == set(m.admissible)


def test_parameter_forms():
    doc = {"support": BIN, "restriction": {"catalog": "no_defier_generalized"},
           "parameter": {"name": "ate_contrast", "d1": 1, "d2": 0, "conditioning": ["01"]}}
    _, late = model_from_dict(doc)
    doc["parameter"]["conditioning"] = {"types": ["01,01", "10,01"]}
    _, sub = model_from_dict(doc)
    assert len(late.conditioning) == 4 and len(sub.conditioning) == 2
    doc["parameter"] = {"custom_g": {"01,01": 1.0}, "default": 0.0, "conditioning": None, "name": "share"}
    _, cg = model_from_dict(doc)
    assert cg.name == "share" and cg.g(ResponseType((0, 1), (0, 1))) == 1.0
    assert cg.g(ResponseType((0, 0), (0, 1))) == 0.0
    doc["parameter"]["conditioning"] = 3
    with pytest.raises(ModelFileError, match="conditioning"):
        model_from_dict(doc)


def test_round_trip_through_file(tmp_path):
    doc = {"support": BIN, "restriction": {"catalog": "mtr"}, "parameter": {"name": "prob_benefit", "d1": 1, "d2": 0}}
    f = tmp_path / "m.json"
    f.write_text(json.dumps(doc))
    model, param, back = load_model(f)
    assert back == doc and param.name == "prob_benefit"
    assert all(r.outcomes[0] <= r.outcomes[1] for r in model.admissible)


def test_parse_param_flag():
    model, _, _ = load_model(bundled_path("example_model.json"))
    p = parse_param_flag(model, "ate_contrast:1,0", "012")
    assert {r.treatments for r in p.conditioning} == {(0, 1, 2)}
    p = parse_param_flag(model, "stratum_mass", "010+012")
    assert len(p.conditioning) == len(model.admissible)
    with pytest.raises(ModelFileError, match="name:d1,d2"):
        parse_param_flag(model, "ate_contrast:1")
    with pytest.raises(ModelFileError):
        parse_param_flag(model, "ate_contrast:1,0", "999")
