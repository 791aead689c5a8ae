"""JSON model files.

::

    {
      "support": {"y": [0, 1], "d": [0, 1, 2], "z": [0, 1, 2]},
      "restriction": {"catalog": "cheng_small_mono1", "options": {}},
      "relaxations": [{"treatment_types": ["100"], "direction": "at_most", "eps": 0.05}],
      "parameter": {"name": "ate_contrast", "d1": 1, "d2": 0,
                    "conditioning": {"treatment_types": ["012"]}}
    }

``restriction`` may instead be ``{"explicit": [[outcomes, treatments], ...]}``
or ``{"treatment_types": ["000", "010", ...]}``; a catalog entry also accepts
``"relax_eps"``.  ``parameter`` may use ``"custom_g"`` (a table keyed by
response-type labels such as ``"010,012"``) with an optional ``"default"``.
Conditioning sets are ``null`` (everything admissible), a list of treatment
types, or an object with ``"treatment_types"`` or ``"types"``.
"""

from __future__ import annotations

import json
from pathlib import Path

from .model import (
    ModelError,
    ParameterSpec,
    ResponseType,
    StrataModel,
    Support,
    catalog,
    custom_parameter,
    enumerate_response_types,
    explicit_model,
    relax,
    standard_parameters,
    treatment_model,
)


class ModelFileError(ValueError):
    """Model file could not be parsed or describes an invalid model."""


def _types(support: Support, spec, where: str) -> list[ResponseType]:
    if isinstance(spec, dict) and "treatment_types" in spec:
        from .model import _treatment_codes

        wanted = {_treatment_codes(support, t) for t in spec["treatment_types"]}
        return [r for r in enumerate_response_types(support) if r.treatments in wanted]
    items = spec["types"] if isinstance(spec, dict) else spec
    out = []
    for item in items:
        if isinstance(item, str) and "," in item:
            o, t = item.split(",")
            item = (list(o), list(t))
        try:
            outcomes, treatments = item
            out.append(ResponseType(tuple(support.y_code(v) for v in outcomes),
                                    tuple(support.d_code(v) for v in treatments)))
        except (TypeError, ValueError) as exc:
            raise ModelFileError(f"{where}: cannot read response type {item!r} ({exc})") from None
    return out


def _conditioning(model: StrataModel, spec):
    if spec is None:
        return None
    if isinstance(spec, list):
        return spec if all(isinstance(t, (str, list)) and not (isinstance(t, str) and "," in t)
                           for t in spec) else _types(model.support, spec, "parameter.conditioning")
    if isinstance(spec, dict) and "treatment_types" in spec:
        return list(spec["treatment_types"])
    if isinstance(spec, dict) and "types" in spec:
        return _types(model.support, spec, "parameter.conditioning")
    raise ModelFileError(f"parameter.conditioning: unsupported value {spec!r}")


def model_from_dict(doc: dict) -> tuple[StrataModel, ParameterSpec | None]:
    try:
        sup = doc["support"]
        support = Support(tuple(sup["y"]), tuple(sup["d"]), tuple(sup["z"]))
    except (KeyError, TypeError) as exc:
        raise ModelFileError(f"support: expected {{'y': [...], 'd': [...], 'z': [...]}} ({exc})") from None
    except ModelError as exc:
        raise ModelFileError(f"support: {exc}") from None
    rest = doc.get("restriction", {"catalog": "unrestricted"})
    try:
        if "catalog" in rest:
            model = catalog(rest["catalog"], support, rest.get("relax_eps"), **rest.get("options", {}))
        elif "explicit" in rest:
            model = explicit_model(support, _types(support, rest["explicit"], "restriction.explicit"))
        elif "treatment_types" in rest:
            model = treatment_model(support, rest["treatment_types"])
        else:
            raise ModelFileError("restriction: need one of 'catalog', 'explicit', 'treatment_types'")
        for i, rel in enumerate(doc.get("relaxations", [])):
            types = _types(support, rel, f"relaxations[{i}]")
            model = relax(model, types, float(rel["eps"]), rel.get("direction", "at_most"))
    except ModelError as exc:
        raise ModelFileError(f"restriction: {exc}") from None
    param = None
    if doc.get("parameter") is not None:
        param = parameter_from_dict(model, doc["parameter"])
    return model, param


def parameter_from_dict(model: StrataModel, spec: dict) -> ParameterSpec:
    try:
        cond = _conditioning(model, spec.get("conditioning"))
        if "custom_g" in spec:
            return custom_parameter(model, spec["custom_g"], cond, spec.get("default"),
                                    name=spec.get("name", "custom"))
        return standard_parameters(spec["name"], model, spec.get("d1"), spec.get("d2"), cond)
    except KeyError as exc:
        raise ModelFileError(f"parameter: missing field {exc}") from None
    except ModelError as exc:
        raise ModelFileError(f"parameter: {exc}") from None


def load_model(path) -> tuple[StrataModel, ParameterSpec | None, dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ModelFileError(f"cannot read {path}: {exc}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: top level must be an object")
    model, param = model_from_dict(doc)
    return model, param, doc


def parse_param_flag(model: StrataModel, flag: str, stratum: str | None = None) -> ParameterSpec:
    """``name`` or ``name:d1,d2`` plus an optional stratum such as ``012`` or ``010+012``."""
    name, _, args = flag.partition(":")
    d1 = d2 = None
    if args:
        parts = args.split(",")
        if len(parts) != 2:
            raise ModelFileError(f"--param {flag!r}: expected name:d1,d2")
        d1, d2 = parts
    cond = None if not stratum else stratum.split("+")
    try:
        return standard_parameters(name, model, d1, d2, cond)
    except ModelError as exc:
        raise ModelFileError(f"--param {flag!r}: {exc}") from None
