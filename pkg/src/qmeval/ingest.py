"""Measurement data: dataset loading, lint-findings conversion, completeness checks."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping

from .expr import parse_expression, referenced_measures
from .model import QualityModel


class DatasetError(ValueError):
    pass


class DuplicateMeasureError(DatasetError):
    pass


class NonNumericValueError(DatasetError):
    pass


@dataclass(frozen=True)
class MeasurementDataset:
    subject: str
    values: Mapping[str, float]
    provenance: Mapping[str, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"subject": self.subject, "values": dict(sorted(self.values.items()))}
        if self.provenance:
            out["provenance"] = dict(sorted(self.provenance.items()))
        return out


@dataclass(frozen=True)
class FindingsReport:
    subject: str
    lines_of_code: int
    counts: Mapping[str, int]


def _number(raw, measure_id):
    if isinstance(raw, bool):
        raise NonNumericValueError(f"value for {measure_id!r} is not numeric: {raw!r}")
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise NonNumericValueError(f"value for {measure_id!r} is not numeric: {raw!r}") from None
    if not math.isfinite(value):
        raise NonNumericValueError(f"value for {measure_id!r} is not finite: {raw!r}")
    return value


def load_dataset(document: str, subject: str = "") -> MeasurementDataset:
    """Parse a dataset from CSV (``measure,value`` header) or JSON text.

    The format is sniffed from the first non-blank character. ``subject`` is
    used for CSV input, which has no subject of its own.
    """
    text = document.lstrip("\ufeff")
    if text.lstrip().startswith("{"):
        return _load_json(text)
    return _load_csv(text, subject)


def _reject_duplicates(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise DuplicateMeasureError(f"duplicate measure {key!r}")
        seen.add(key)
    return dict(pairs)


def _load_json(text):
    try:
        raw = json.loads(text, object_pairs_hook=_reject_duplicates)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise DatasetError("dataset must be a JSON object")
    values_raw = raw.get("values", {})
    if not isinstance(values_raw, dict):
        raise DatasetError("'values' must be an object")
    values = {k: _number(v, k) for k, v in values_raw.items()}
    provenance = raw.get("provenance") or {}
    return MeasurementDataset(
        subject=str(raw.get("subject", "")),
        values=values,
        provenance={k: str(v) for k, v in provenance.items()},
    )


def _load_csv(text, subject):
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise DatasetError("empty dataset: expected header 'measure,value'")
    header = [cell.strip() for cell in rows[0]]
    if header != ["measure", "value"]:
        raise DatasetError(f"bad header {','.join(header)!r}: expected 'measure,value'")
    values: dict[str, float] = {}
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != 2:
            raise DatasetError(f"line {lineno}: expected 2 columns, got {len(row)}")
        measure_id, raw = row[0].strip(), row[1].strip()
        if measure_id in values:
            raise DuplicateMeasureError(f"line {lineno}: duplicate measure {measure_id!r}")
        values[measure_id] = _number(raw, measure_id)
    return MeasurementDataset(subject=subject, values=values)


def load_findings(document: str) -> FindingsReport:
    raw = json.loads(document)
    loc = raw.get("linesOfCode")
    if isinstance(loc, bool) or not isinstance(loc, int) or loc <= 0:
        raise DatasetError("linesOfCode must be a positive integer")
    counts = raw.get("counts", {})
    for rule, n in counts.items():
        if isinstance(n, bool) or not isinstance(n, int) or n < 0:
            raise DatasetError(f"count for rule {rule!r} must be a non-negative integer")
    return FindingsReport(subject=str(raw.get("subject", "")), lines_of_code=loc, counts=dict(counts))


def findings_to_measures(
    report: FindingsReport, mapping: Mapping[str, str]
) -> tuple[MeasurementDataset, list[str]]:
    """Convert rule-violation counts into violations per kLOC.

    Rules mapped onto the same measure are summed. A mapped rule that does not
    occur in the report counts as zero violations. Returns the dataset and a
    list of warnings for rules without a mapping.
    """
    if report.lines_of_code <= 0:
        raise DatasetError("linesOfCode must be positive")
    kloc = report.lines_of_code / 1000
    totals: dict[str, int] = {}
    sources: dict[str, list[str]] = {}
    for rule, measure_id in sorted(mapping.items()):
        totals[measure_id] = totals.get(measure_id, 0) + report.counts.get(rule, 0)
        sources.setdefault(measure_id, []).append(rule)
    warnings = [
        f"rule {rule!r} has no measure mapping; ignored"
        for rule in sorted(report.counts)
        if rule not in mapping
    ]
    values = {m: n / kloc for m, n in totals.items()}
    provenance = {
        m: f"{'+'.join(rules)} per kLOC ({report.lines_of_code} LOC)" for m, rules in sources.items()
    }
    return MeasurementDataset(report.subject, values, provenance), warnings


def required_base_measures(model: QualityModel) -> set[str]:
    """Base measures reachable from the root via aspects, impacts, factors and expressions."""
    measures = {m.id: m for m in model.measures}
    aspects = {a.id: a for a in model.aspects}
    impacts = {i.id: i for i in model.impacts}
    factors = {f.id: f for f in model.factors}

    pending_measures: list[str] = []
    stack = [model.root]
    visited: set[str] = set()
    while stack:
        aid = stack.pop()
        if aid in visited or aid not in aspects:
            continue
        visited.add(aid)
        stack.extend(aspects[aid].children)
        for iid in aspects[aid].impacts:
            impact = impacts.get(iid)
            if impact is not None and impact.factor in factors:
                pending_measures.extend(factors[impact.factor].measures)

    required: set[str] = set()
    seen: set[str] = set()
    while pending_measures:
        mid = pending_measures.pop()
        if mid in seen:
            continue
        seen.add(mid)
        m = measures.get(mid)
        if m is not None and m.kind == "derived" and m.expression:
            pending_measures.extend(referenced_measures(parse_expression(m.expression)))
        else:
            required.add(mid)
    return required


def check_completeness(model: QualityModel, data: MeasurementDataset) -> list[str]:
    return sorted(required_base_measures(model) - set(data.values))
