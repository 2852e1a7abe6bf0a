"""Reading and writing ``.qm.json`` model documents.

Parsing checks syntax, field names and id uniqueness only; structural rules
are left to :func:`qmeval.model.validate_model`.
"""

from __future__ import annotations

import json
from typing import Any

from .model import (
    DEFAULT_GRADING_KEY,
    Entity,
    Factor,
    GradingKey,
    Impact,
    Measure,
    NormalizationSpec,
    QualityAspect,
    QualityModel,
)


class ModelParseError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)


class DuplicateIdError(ModelParseError):
    pass


class UnknownFieldError(ModelParseError):
    pass


_TOP = {"entities", "measures", "factors", "impacts", "aspects", "root", "gradingKey", "measureGradingKey"}


def parse_model(document: str) -> QualityModel:
    if not document.strip():
        raise ModelParseError("empty document", 1, 1)
    if document.startswith("\ufeff"):
        raise ModelParseError("byte-order mark not allowed", 1, 1)
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as exc:
        raise ModelParseError(exc.msg, exc.lineno, exc.colno) from None
    if not isinstance(raw, dict):
        raise ModelParseError("top level must be an object")
    _no_extra(raw, _TOP, "document")
    for name in ("aspects", "root"):
        if name not in raw:
            raise ModelParseError(f"document: missing field {name!r}")

    entities = tuple(_entity(e) for e in _array(raw, "entities"))
    measures = tuple(_measure(m) for m in _array(raw, "measures"))
    factors = tuple(_factor(f) for f in _array(raw, "factors"))
    impacts = tuple(_impact(i) for i in _array(raw, "impacts"))
    aspects = tuple(_aspect(a) for a in _array(raw, "aspects"))

    seen: set[str] = set()
    for item in (*entities, *measures, *factors, *impacts, *aspects):
        if item.id in seen:
            raise DuplicateIdError(f"duplicate id {item.id!r}")
        seen.add(item.id)

    root = raw["root"]
    if isinstance(root, dict):
        _no_extra(root, {"id"}, "root")
        root = root.get("id")
    if not isinstance(root, str):
        raise ModelParseError("root: expected an aspect id")

    key = _grading_key(raw["gradingKey"], "gradingKey") if "gradingKey" in raw else DEFAULT_GRADING_KEY
    measure_key = (
        _grading_key(raw["measureGradingKey"], "measureGradingKey")
        if raw.get("measureGradingKey") is not None
        else None
    )
    return QualityModel(
        entities=entities,
        measures=measures,
        factors=factors,
        impacts=impacts,
        aspects=aspects,
        root=root,
        grading_key=key,
        measure_grading_key=measure_key,
    )


def _no_extra(obj, allowed, where):
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise UnknownFieldError(f"{where}: unknown field {extra[0]!r}")


def _array(raw, name):
    value = raw.get(name, [])
    if not isinstance(value, list):
        raise ModelParseError(f"{name}: expected an array")
    for item in value:
        if not isinstance(item, dict):
            raise ModelParseError(f"{name}: entries must be objects")
    return value


def _req(obj, name, where, kind=str):
    if name not in obj:
        raise ModelParseError(f"{where}: missing field {name!r}")
    return _typed(obj[name], name, where, kind)


def _opt(obj, name, where, kind=str, default=None):
    if obj.get(name) is None:
        return default
    return _typed(obj[name], name, where, kind)


def _typed(value, name, where, kind):
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ModelParseError(f"{where}.{name}: expected a number")
        return float(value)
    if kind is list:
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ModelParseError(f"{where}.{name}: expected an array of ids")
        return tuple(value)
    if not isinstance(value, kind):
        raise ModelParseError(f"{where}.{name}: expected {kind.__name__}")
    return value


def _where(obj, kind):
    return f"{kind} {obj.get('id', '?')!r}"


def _entity(obj):
    w = _where(obj, "entity")
    _no_extra(obj, {"id", "name", "kind"}, w)
    return Entity(id=_req(obj, "id", w), name=_opt(obj, "name", w, default=""), kind=_opt(obj, "kind", w, default=""))


def _measure(obj):
    w = _where(obj, "measure")
    _no_extra(obj, {"id", "name", "kind", "expression", "scale", "unit"}, w)
    return Measure(
        id=_req(obj, "id", w),
        name=_opt(obj, "name", w, default=""),
        kind=_opt(obj, "kind", w, default="base"),
        expression=_opt(obj, "expression", w),
        scale=_opt(obj, "scale", w, default="ratio"),
        unit=_opt(obj, "unit", w),
    )


def _factor(obj):
    w = _where(obj, "factor")
    _no_extra(obj, {"id", "entity", "property", "measures", "kind"}, w)
    return Factor(
        id=_req(obj, "id", w),
        entity=_req(obj, "entity", w),
        property=_opt(obj, "property", w, default=""),
        measures=_req(obj, "measures", w, list),
        kind=_req(obj, "kind", w),
    )


def _weights(value, where):
    if not isinstance(value, dict):
        raise ModelParseError(f"{where}: expected an object of weights")
    return {k: _typed(v, k, where, float) for k, v in value.items()}


def _spec(value, where):
    if not isinstance(value, dict):
        raise ModelParseError(f"{where}: expected a normalization object")
    _no_extra(value, {"direction", "threshold"}, where)
    return NormalizationSpec(
        direction=_req(value, "direction", where),
        threshold=_req(value, "threshold", where, float),
    )


def _impact(obj):
    w = _where(obj, "impact")
    _no_extra(obj, {"id", "factor", "aspect", "direction", "justification", "measureWeights", "normalization"}, w)
    norm = obj.get("normalization", {})
    if not isinstance(norm, dict):
        raise ModelParseError(f"{w}.normalization: expected an object keyed by factor or measure id")
    mw = obj.get("measureWeights")
    return Impact(
        id=_req(obj, "id", w),
        factor=_req(obj, "factor", w),
        aspect=_req(obj, "aspect", w),
        direction=_req(obj, "direction", w),
        justification=_opt(obj, "justification", w, default=""),
        measure_weights=None if mw is None else _weights(mw, f"{w}.measureWeights"),
        normalization={k: _spec(v, f"{w}.normalization.{k}") for k, v in norm.items()},
    )


def _aspect(obj):
    w = _where(obj, "aspect")
    _no_extra(obj, {"id", "name", "children", "impacts", "childWeights", "gradingKey"}, w)
    key = obj.get("gradingKey")
    return QualityAspect(
        id=_req(obj, "id", w),
        name=_opt(obj, "name", w, default=""),
        children=_opt(obj, "children", w, list, ()),
        impacts=_opt(obj, "impacts", w, list, ()),
        child_weights=_weights(obj.get("childWeights", {}), f"{w}.childWeights"),
        grading_key=None if key is None else _grading_key(key, f"{w}.gradingKey"),
    )


def _grading_key(value, where):
    if not isinstance(value, dict):
        raise ModelParseError(f"{where}: expected an object")
    _no_extra(value, {"boundaries"}, where)
    rows = value.get("boundaries")
    if not isinstance(rows, list):
        raise ModelParseError(f"{where}.boundaries: expected an array")
    out = []
    for row in rows:
        if not isinstance(row, dict):
            raise ModelParseError(f"{where}.boundaries: entries must be objects")
        _no_extra(row, {"lowerBound", "grade"}, where)
        grade = row.get("grade")
        if isinstance(grade, bool) or not isinstance(grade, int):
            raise ModelParseError(f"{where}: grade must be an integer")
        out.append((_req(row, "lowerBound", where, float), grade))
    return GradingKey(boundaries=tuple(out))


# ---------------------------------------------------------------------------


def model_to_dict(model: QualityModel) -> dict[str, Any]:
    def measure(m):
        d: dict[str, Any] = {"id": m.id, "name": m.name, "kind": m.kind, "scale": m.scale}
        if m.expression is not None:
            d["expression"] = m.expression
        if m.unit is not None:
            d["unit"] = m.unit
        return d

    def impact(i):
        d: dict[str, Any] = {
            "id": i.id,
            "factor": i.factor,
            "aspect": i.aspect,
            "direction": i.direction,
            "justification": i.justification,
        }
        if i.measure_weights is not None:
            d["measureWeights"] = dict(i.measure_weights)
        d["normalization"] = {
            k: {"direction": s.direction, "threshold": s.threshold} for k, s in i.normalization.items()
        }
        return d

    def aspect(a):
        d: dict[str, Any] = {
            "id": a.id,
            "name": a.name,
            "children": list(a.children),
            "impacts": list(a.impacts),
            "childWeights": dict(a.child_weights),
        }
        if a.grading_key is not None:
            d["gradingKey"] = grading_key_to_dict(a.grading_key)
        return d

    doc: dict[str, Any] = {
        "entities": [{"id": e.id, "name": e.name, "kind": e.kind} for e in model.entities],
        "measures": [measure(m) for m in model.measures],
        "factors": [
            {"id": f.id, "entity": f.entity, "property": f.property, "measures": list(f.measures), "kind": f.kind}
            for f in model.factors
        ],
        "impacts": [impact(i) for i in model.impacts],
        "aspects": [aspect(a) for a in model.aspects],
        "root": model.root,
        "gradingKey": grading_key_to_dict(model.grading_key),
    }
    if model.measure_grading_key is not None:
        doc["measureGradingKey"] = grading_key_to_dict(model.measure_grading_key)
    return doc


def grading_key_to_dict(key: GradingKey) -> dict[str, Any]:
    return {"boundaries": [{"lowerBound": b, "grade": g} for b, g in key.boundaries]}


def serialize_model(model: QualityModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, ensure_ascii=False) + "\n"


def load_model(path) -> QualityModel:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())
