"""Quality evaluation: factor measurement, impact normalization, weighted
aggregation up the aspect tree, and grading.

Three variants are supported:

``direct``
    Impacts are normalized onto [0, 1], aspects aggregate their children with
    the additive value function, and aspects are graded at the end.
``grade-early``
    Every measure is graded as soon as it is normalized; grades are then
    averaged (rounded half-up) up the tree. Cheap to explain, lossy.
``fulfillment``
    Each factor can attain at most 1, split evenly over its measures; an
    aspect's fulfillment is attained over reachable maximum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .expr import ExpressionError, eval_expression, parse_expression
from .ingest import MeasurementDataset
from .model import WEIGHT_TOLERANCE, Factor, GradingKey, Impact, NormalizationSpec, QualityModel

VARIANTS = ("direct", "grade-early", "fulfillment")


class EvaluationError(ValueError):
    pass


@dataclass
class EvaluationResult:
    subject: str
    variant: str
    node_values: dict[str, float] = field(default_factory=dict)
    factor_values: dict[str, float] = field(default_factory=dict)
    grades: dict[str, int] = field(default_factory=dict)
    trace: list[dict[str, Any]] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject": self.subject,
            "variant": self.variant,
            "nodeValues": dict(sorted(self.node_values.items())),
            "factorValues": dict(sorted(self.factor_values.items())),
            "grades": dict(sorted(self.grades.items())),
            "trace": sorted(self.trace, key=lambda r: r["node"]),
        }


# ---------------------------------------------------------------------------
# primitives


def normalize(x: float, spec: NormalizationSpec) -> float:
    """Linear ramp up to the acceptance threshold, constant beyond it."""
    if x < 0:
        raise EvaluationError(f"cannot normalize negative value {x}")
    if spec.threshold <= 0:
        raise EvaluationError(f"threshold must be positive, got {spec.threshold}")
    ratio = x / spec.threshold
    if spec.direction == "positive":
        value = min(1.0, ratio)
    elif spec.direction == "negative":
        value = max(0.0, 1.0 - ratio)
    else:
        raise EvaluationError(f"unknown direction {spec.direction!r}")
    return min(1.0, max(0.0, value))


def aggregate(weights: Sequence[float], values: Sequence[float]) -> float:
    """Additive value function: sum of weight times value."""
    if len(weights) != len(values):
        raise EvaluationError(f"{len(weights)} weights for {len(values)} values")
    if abs(math.fsum(weights) - 1.0) > WEIGHT_TOLERANCE:
        raise EvaluationError(f"weights must sum to 1 (got {math.fsum(weights):.12g})")
    for v in values:
        if not 0.0 <= v <= 1.0:
            raise EvaluationError(f"value {v} outside [0, 1]")
    total = math.fsum(w * g for w, g in zip(weights, values))
    # weights may miss 1 by the tolerance; keep the result on the scale
    return min(1.0, max(0.0, total))


def grade(value: float, key: GradingKey) -> int:
    if not 0.0 <= value <= 1.0:
        raise EvaluationError(f"cannot grade {value}: outside [0, 1]")
    for lower, g in key.boundaries:
        if value >= lower:
            return g
    raise EvaluationError(f"grading key has no boundary below {value}")


def average_grades(grades: Sequence[int], weights: Sequence[float] | None = None) -> int:
    """Weighted mean of grades rounded half-up (4.5 becomes 5, the worse grade)."""
    if not grades:
        raise EvaluationError("no grades to average")
    if weights is None:
        weights = [1.0 / len(grades)] * len(grades)
    mean = math.fsum(w * g for w, g in zip(weights, grades)) / math.fsum(weights)
    # the epsilon absorbs float error in weights like 1/3 so 4.5 stays 4.5
    return int(math.floor(mean + 0.5 + 1e-9))


# ---------------------------------------------------------------------------
# steps


class _Values(Mapping[str, float]):
    """Base measure values with derived measures computed lazily on access."""

    def __init__(self, model: QualityModel, data: MeasurementDataset):
        self._base = data.values
        self._derived = {m.id: m for m in model.measures if m.kind == "derived"}
        self._cache: dict[str, float] = {}
        self._active: set[str] = set()

    def __getitem__(self, key):
        if key in self._derived:
            if key not in self._cache:
                if key in self._active:
                    raise EvaluationError(f"cycle in derived measure {key!r}")
                self._active.add(key)
                try:
                    ast = parse_expression(self._derived[key].expression or "")
                    self._cache[key] = eval_expression(ast, self)
                finally:
                    self._active.discard(key)
            return self._cache[key]
        return self._base[key]

    def __iter__(self):
        yield from self._base
        yield from (k for k in self._derived if k not in self._base)

    def __len__(self):
        return len(set(self._base) | set(self._derived))


def measure_values(model: QualityModel, data: MeasurementDataset) -> Mapping[str, float]:
    return _Values(model, data)


def measure_factor(
    factor: Factor,
    values: Mapping[str, float] | MeasurementDataset,
    model: QualityModel | None = None,
) -> float | None:
    """Raw factor value; ``None`` for abstract factors, which stay unmeasured.

    Derived measures are computed on the fly when ``values`` is a dataset and
    the model defining them is passed.
    """
    if factor.kind == "abstract":
        return None
    (measure_id,) = factor.measures
    if isinstance(values, MeasurementDataset):
        values = measure_values(model, values) if model is not None else values.values
    try:
        return float(values[measure_id])
    except KeyError:
        raise EvaluationError(f"no value for measure {measure_id!r}") from None


def factor_spec(impact: Impact, factor: Factor) -> NormalizationSpec:
    spec = impact.normalization.get(factor.id)
    if spec is None and len(factor.measures) == 1:
        spec = impact.normalization.get(factor.measures[0])
    if spec is None:
        raise EvaluationError(f"{impact.id}: no normalization for factor {factor.id!r}")
    return spec


def evaluate_impact(
    impact: Impact, factor_value: float | None, values: Mapping[str, float], factor: Factor | None = None
) -> float:
    """Normalized impact value; falls back to weighted measures when the factor is unmeasured."""
    if isinstance(values, MeasurementDataset):
        values = values.values
    if factor_value is not None:
        if factor is not None:
            spec = factor_spec(impact, factor)
        else:
            spec = impact.normalization.get(impact.factor)
            if spec is None:
                raise EvaluationError(f"{impact.id}: no normalization for factor {impact.factor!r}")
        return normalize(factor_value, spec)
    if not impact.measure_weights:
        raise EvaluationError(f"{impact.id}: factor unmeasured and no measureWeights given")
    weights, normalized = [], []
    for measure_id, w in impact.measure_weights.items():
        spec = impact.normalization.get(measure_id)
        if spec is None:
            raise EvaluationError(f"{impact.id}: no normalization for measure {measure_id!r}")
        weights.append(w)
        normalized.append(normalize(values[measure_id], spec))
    return aggregate(weights, normalized)


def evaluate(model: QualityModel, data: MeasurementDataset, variant: str = "direct") -> EvaluationResult:
    """Evaluate one product. Assumes a valid model and complete data."""
    if variant not in VARIANTS:
        raise EvaluationError(f"unknown variant {variant!r}; expected one of {', '.join(VARIANTS)}")
    run = _Run(model, data, variant)
    try:
        run.aspect(model.root)
    except (ExpressionError, KeyError) as exc:
        raise EvaluationError(str(exc)) from exc
    return run.result


class _Run:
    def __init__(self, model, data, variant):
        self.model = model
        self.variant = variant
        self.values = measure_values(model, data)
        self.factors = {f.id: f for f in model.factors}
        self.impacts = {i.id: i for i in model.impacts}
        self.aspects = {a.id: a for a in model.aspects}
        self.measure_key = model.measure_grading_key or model.grading_key
        self.measured: dict[str, float | None] = {}
        self.result = EvaluationResult(subject=data.subject, variant=variant)

    def record(self, node, kind, formula, value=None, **extra):
        rec = {"node": node, "kind": kind, "formula": formula}
        if value is not None:
            rec["value"] = value
        rec.update(extra)
        self.result.trace.append(rec)

    def factor(self, factor_id):
        f = self.factors[factor_id]
        if factor_id in self.measured:
            return f, self.measured[factor_id]
        value = self.measured[factor_id] = measure_factor(f, self.values)
        if value is None:
            self.record(factor_id, "factor", "unmeasured (abstract factor)", measures=list(f.measures))
        else:
            formula = (
                f"value of {f.measures[0]}"
                if f.kind == "single-measure"
                else f"{f.measures[0]} = {self.model.measure(f.measures[0]).expression}"
            )
            self.result.factor_values[factor_id] = value
            self.record(factor_id, "factor", formula, value)
        return f, value

    # -- impacts --------------------------------------------------------

    def impact(self, impact_id):
        """Returns the impact's contribution in the variant's currency:
        a value in [0, 1] (direct, fulfillment) or a grade (grade-early)."""
        imp = self.impacts[impact_id]
        f, fvalue = self.factor(imp.factor)
        if self.variant == "direct":
            return self._impact_direct(imp, f, fvalue)
        if self.variant == "fulfillment":
            return self._impact_fulfillment(imp, f, fvalue)
        return self._impact_grade_early(imp, f, fvalue)

    def _measure_inputs(self, imp, f):
        rows = []
        for mid in f.measures:
            spec = imp.normalization.get(mid)
            if spec is None:
                raise EvaluationError(f"{imp.id}: no normalization for measure {mid!r}")
            x = self.values[mid]
            rows.append((mid, x, spec, normalize(x, spec)))
        return rows

    def _impact_direct(self, imp, f, fvalue):
        if fvalue is not None:
            spec = factor_spec(imp, f)
            value = normalize(fvalue, spec)
            self.record(
                imp.id,
                "impact",
                _ramp_formula(spec),
                value,
                inputs={f.id: fvalue},
                threshold=spec.threshold,
            )
        else:
            value = evaluate_impact(imp, None, self.values)
            normalized = {mid: normalize(self.values[mid], imp.normalization[mid]) for mid in imp.measure_weights}
            self.record(
                imp.id,
                "impact",
                "sum(w_j * normalize(m_j, T_j))",
                value,
                inputs={mid: self.values[mid] for mid in imp.measure_weights},
                normalized=normalized,
                weights=dict(imp.measure_weights),
            )
        self.result.node_values[imp.id] = value
        return value

    def _impact_fulfillment(self, imp, f, fvalue):
        if fvalue is not None:
            spec = factor_spec(imp, f)
            contributions = {f.id: normalize(fvalue, spec)}
        else:
            rows = self._measure_inputs(imp, f)
            share = 1.0 / len(rows)
            contributions = {mid: share * n for mid, _, _, n in rows}
        attained = min(1.0, math.fsum(contributions.values()))
        self.record(
            imp.id,
            "impact",
            "attained = sum((1/k) * normalize(m_j, T_j)), maximum 1",
            attained,
            contributions=contributions,
            maximum=1.0,
        )
        self.result.node_values[imp.id] = attained
        return attained

    def _impact_grade_early(self, imp, f, fvalue):
        if fvalue is not None:
            spec = factor_spec(imp, f)
            n = normalize(fvalue, spec)
            measure_grades = {f.id: grade(n, self.measure_key)}
            g = measure_grades[f.id]
            weights = None
        else:
            rows = self._measure_inputs(imp, f)
            measure_grades = {mid: grade(n, self.measure_key) for mid, _, _, n in rows}
            weights = (
                [imp.measure_weights[mid] for mid in measure_grades] if imp.measure_weights else None
            )
            g = average_grades(list(measure_grades.values()), weights)
        self.record(
            imp.id,
            "impact",
            "round_half_up(mean(grade(normalize(m_j, T_j))))",
            grade=g,
            measureGrades=measure_grades,
        )
        self.result.grades[imp.id] = g
        return g

    # -- aspects --------------------------------------------------------

    def aspect(self, aspect_id):
        a = self.aspects[aspect_id]
        members = list(a.children) + list(a.impacts)
        weights = [a.child_weights[m] for m in members]
        inputs = {}
        for m in members:
            inputs[m] = self.aspect(m) if m in self.aspects else self.impact(m)
        key = self.model.key_for(aspect_id)

        if self.variant == "grade-early":
            g = average_grades([inputs[m] for m in members], weights)
            self.record(
                aspect_id,
                "aspect",
                "round_half_up(sum(w_j * grade_j))",
                grade=g,
                inputs=inputs,
                weights=dict(zip(members, weights)),
            )
            self.result.grades[aspect_id] = g
            return g

        if self.variant == "fulfillment":
            k = len(members)
            maxima = {m: k * w for m, w in zip(members, weights)}
            attained = {m: maxima[m] * inputs[m] for m in members}
            total_max = math.fsum(maxima.values())
            value = min(1.0, max(0.0, math.fsum(attained.values()) / total_max)) if total_max else 0.0
            formula = "sum(attained_j) / sum(maximum_j)"
            extra = {"attained": attained, "maxima": maxima}
        else:
            value = aggregate(weights, [inputs[m] for m in members])
            formula = "sum(w_j * g_j)"
            extra = {"inputs": inputs, "weights": dict(zip(members, weights))}
        g = grade(value, key)
        self.record(aspect_id, "aspect", formula, value, grade=g, **extra)
        self.result.node_values[aspect_id] = value
        self.result.grades[aspect_id] = g
        return value


def _ramp_formula(spec):
    if spec.direction == "positive":
        return "min(1, x / T)"
    return "max(0, 1 - x / T)"


def boundary_distance(value: float, key: GradingKey) -> float:
    """Distance from a value to the nearest interior grade boundary."""
    bounds = [b for b, _ in key.boundaries if 0.0 < b <= 1.0]
    if not bounds:
        return math.inf
    return min(abs(value - b) for b in bounds)
