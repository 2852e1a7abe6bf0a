import json
from dataclasses import replace

import pytest
from hypothesis import HealthCheck, given, settings

from builders import flat_model, quality_models, reference_model
from qmeval.model import Entity, QualityAspect, QualityModel, validate_model
from qmeval.modelfile import DuplicateIdError, ModelParseError, UnknownFieldError, parse_model, serialize_model


def test_reference_model_shape():
    m = reference_model()
    non_root = [a for a in m.aspects if a.id != m.root]
    assert {a.id for a in non_root} == {"QA1", "QA2"}
    assert len(m.impacts) == 4
    assert len(m.factors) == 3
    assert {x.id for x in m.measures if x.kind == "base"} == {"M1", "M2", "M3", "M4", "M5"}
    assert m.impact("I1.1").measure_weights == {"M1": 0.5, "M2": 0.5}
    assert m.aspect("Q").child_weights == {"QA1": 0.6, "QA2": 0.4}


def test_empty_document_is_syntax_error():
    with pytest.raises(ModelParseError) as err:
        parse_model("")
    assert err.value.line == 1


def test_syntax_error_carries_line_and_column():
    with pytest.raises(ModelParseError) as err:
        parse_model('{\n  "aspects": [,]\n}')
    assert (err.value.line, err.value.column) == (2, 15)


def test_duplicate_measure_id():
    doc = json.loads(serialize_model(reference_model()))
    doc["measures"].append({"id": "M1", "name": "again"})
    with pytest.raises(DuplicateIdError, match="M1"):
        parse_model(json.dumps(doc))


def test_unknown_field():
    doc = json.loads(serialize_model(reference_model()))
    doc["factors"][0]["weight"] = 0.3
    with pytest.raises(UnknownFieldError, match="weight"):
        parse_model(json.dumps(doc))


def test_bom_rejected():
    with pytest.raises(ModelParseError, match="byte-order"):
        parse_model("﻿" + serialize_model(reference_model()))


def test_parse_does_not_validate():
    doc = json.loads(serialize_model(reference_model()))
    doc["aspects"][0]["childWeights"] = {"QA1": 0.5, "QA2": 0.6}
    model = parse_model(json.dumps(doc))
    assert validate_model(model)


def test_reference_round_trip():
    m = reference_model()
    assert parse_model(serialize_model(m)) == m


def test_minimal_model_round_trip():
    m = QualityModel(
        entities=(Entity("P", "product", "product"),),
        measures=(),
        factors=(),
        impacts=(),
        aspects=(QualityAspect("Q", "quality"),),
        root="Q",
    )
    assert parse_model(serialize_model(m)) == m


def test_expression_text_preserved():
    m = reference_model()
    measures = tuple(replace(x, expression="M3/M4") if x.id == "D_DOC" else x for x in m.measures)
    m = replace(m, measures=measures)
    again = parse_model(serialize_model(m))
    assert again.measure("D_DOC").expression.replace(" ", "") == "M3/M4"


def test_flat_model_round_trip_with_measure_key():
    from qmeval.model import DEFAULT_GRADING_KEY

    m = flat_model({"F": [("X", "negative", 3.0)]}, measure_key=DEFAULT_GRADING_KEY)
    assert parse_model(serialize_model(m)) == m


@settings(max_examples=200, suppress_health_check=[HealthCheck.too_slow], deadline=None)
@given(quality_models())
def test_random_valid_models_round_trip(model):
    assert validate_model(model) == []
    assert parse_model(serialize_model(model)) == model
