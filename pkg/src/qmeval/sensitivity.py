"""One-at-a-time sensitivity of grades to weights and thresholds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Sequence

from .evaluate import EvaluationResult, boundary_distance, evaluate
from .ingest import MeasurementDataset
from .model import NormalizationSpec, QualityModel

DEFAULT_WEIGHT_DELTAS = (-0.20, -0.10, -0.05, -0.01, 0.01, 0.05, 0.10, 0.20)
DEFAULT_THRESHOLD_DELTAS = (-0.25, -0.10, -0.05, 0.05, 0.10, 0.25)

STABLE = "stable"


class PerturbationError(ValueError):
    pass


@dataclass(frozen=True)
class SensitivityPlan:
    weight_deltas: Sequence[float] = DEFAULT_WEIGHT_DELTAS
    threshold_rel_deltas: Sequence[float] = DEFAULT_THRESHOLD_DELTAS
    targets: str | Sequence[str] = "all"


@dataclass
class Perturbation:
    target: str
    kind: str
    delta: float
    resulting_grades: dict[str, int]
    resulting_values: dict[str, float]
    changed: list[str]

    def to_dict(self) -> dict[str, Any]:
        return {
            "target": self.target,
            "kind": self.kind,
            "delta": self.delta,
            "resultingGrades": dict(sorted(self.resulting_grades.items())),
            "resultingValues": dict(sorted(self.resulting_values.items())),
            "changed": self.changed,
        }


@dataclass
class SensitivityReport:
    subject: str
    baseline: EvaluationResult
    perturbations: list[Perturbation] = field(default_factory=list)
    stability_margin: dict[str, dict[str, float | str]] = field(default_factory=dict)
    boundary_proximity: dict[str, float] = field(default_factory=dict)
    skipped: list[dict[str, Any]] = field(default_factory=list)

    def flips(self) -> list[Perturbation]:
        return [p for p in self.perturbations if p.changed]

    def to_dict(self) -> dict[str, Any]:
        return {
            "subject": self.subject,
            "baseline": self.baseline.to_dict(),
            "perturbations": [p.to_dict() for p in self.perturbations],
            "stabilityMargin": {k: dict(sorted(v.items())) for k, v in sorted(self.stability_margin.items())},
            "boundaryProximity": dict(sorted(self.boundary_proximity.items())),
            "skipped": self.skipped,
        }


def perturb_weight(model: QualityModel, node_id: str, child_id: str, delta: float) -> QualityModel:
    """Shift one weight by ``delta`` and rescale its siblings to keep the sum at 1.

    Siblings keep their ratios; if all of them are zero, ``-delta`` is spread
    evenly instead.
    """
    if delta == 0:
        return model
    weights, setter = _weight_slot(model, node_id)
    if child_id not in weights:
        raise PerturbationError(f"{node_id} has no weighted child {child_id!r}")
    old = weights[child_id]
    new = old + delta
    if not (0.0 <= new <= 1.0):
        raise PerturbationError(f"weight of {child_id!r} at {node_id} would become {new:g}")
    siblings = [k for k in weights if k != child_id]
    if not siblings:
        raise PerturbationError(f"{child_id!r} is the only child of {node_id}")
    rest = 1.0 - old
    out = dict(weights)
    out[child_id] = new
    if rest > 0 and any(weights[k] > 0 for k in siblings):
        scale = (1.0 - new) / rest
        for k in siblings:
            out[k] = weights[k] * scale
    else:
        for k in siblings:
            out[k] = weights[k] - delta / len(siblings)
    for k in siblings:
        if out[k] < 0:
            # float residue only; a real negative would have been caught above
            out[k] = 0.0
    return setter(out)


def _weight_slot(model, node_id):
    for a in model.aspects:
        if a.id == node_id:

            def set_aspect(weights, a=a):
                aspects = tuple(replace(a, child_weights=weights) if x.id == a.id else x for x in model.aspects)
                return replace(model, aspects=aspects)

            return dict(a.child_weights), set_aspect
    for i in model.impacts:
        if i.id == node_id and i.measure_weights:

            def set_impact(weights, i=i):
                impacts = tuple(replace(i, measure_weights=weights) if x.id == i.id else x for x in model.impacts)
                return replace(model, impacts=impacts)

            return dict(i.measure_weights), set_impact
    raise PerturbationError(f"{node_id!r} carries no weights")


def perturb_threshold(model: QualityModel, impact_id: str, target_id: str, rel: float) -> QualityModel:
    """Scale one acceptance threshold by ``1 + rel``."""
    if rel <= -1:
        raise PerturbationError(f"relative change {rel:g} would make the threshold non-positive")
    impacts = []
    found = False
    for i in model.impacts:
        if i.id == impact_id and target_id in i.normalization:
            spec = i.normalization[target_id]
            norm = dict(i.normalization)
            norm[target_id] = NormalizationSpec(spec.direction, spec.threshold * (1 + rel))
            i = replace(i, normalization=norm)
            found = True
        impacts.append(i)
    if not found:
        raise PerturbationError(f"no threshold {impact_id}/{target_id}")
    return replace(model, impacts=tuple(impacts))


def weight_targets(model: QualityModel) -> list[str]:
    out = [f"weight:{a.id}/{c}" for a in model.aspects for c in a.child_weights]
    out += [f"weight:{i.id}/{m}" for i in model.impacts if i.measure_weights for m in i.measure_weights]
    return sorted(out)


def threshold_targets(model: QualityModel) -> list[str]:
    return sorted(f"threshold:{i.id}/{t}" for i in model.impacts for t in i.normalization)


def _split(target):
    kind, _, rest = target.partition(":")
    node, _, child = rest.partition("/")
    if kind not in ("weight", "threshold") or not node or not child:
        raise PerturbationError(f"bad target {target!r}; expected weight:NODE/CHILD or threshold:IMPACT/ID")
    return kind, node, child


def sweep(
    model: QualityModel,
    data: MeasurementDataset,
    variant: str = "direct",
    plan: SensitivityPlan | None = None,
) -> SensitivityReport:
    plan = plan or SensitivityPlan()
    baseline = evaluate(model, data, variant)
    report = SensitivityReport(subject=data.subject, baseline=baseline)

    if plan.targets == "all":
        targets = weight_targets(model) + threshold_targets(model)
    else:
        targets = sorted(plan.targets)

    for target in targets:
        kind, node, child = _split(target)
        deltas = plan.weight_deltas if kind == "weight" else plan.threshold_rel_deltas
        for delta in sorted(set(deltas)):
            try:
                if kind == "weight":
                    perturbed = perturb_weight(model, node, child, delta)
                else:
                    perturbed = perturb_threshold(model, node, child, delta) if delta else model
            except PerturbationError as exc:
                report.skipped.append({"target": target, "delta": delta, "reason": str(exc)})
                continue
            result = evaluate(perturbed, data, variant)
            changed = sorted(n for n, g in result.grades.items() if baseline.grades.get(n) != g)
            report.perturbations.append(
                Perturbation(target, kind, delta, dict(result.grades), dict(result.node_values), changed)
            )

    for node in baseline.grades:
        margins: dict[str, float | str] = {}
        for kind in ("weight", "threshold"):
            hits = [abs(p.delta) for p in report.perturbations if p.kind == kind and node in p.changed]
            margins[kind] = min(hits) if hits else STABLE
        report.stability_margin[node] = margins
        if node in baseline.node_values:
            dist = boundary_distance(baseline.node_values[node], model.key_for(node) if _is_aspect(model, node) else model.grading_key)
            if math.isfinite(dist):
                report.boundary_proximity[node] = dist
    return report


def _is_aspect(model, node_id):
    return any(a.id == node_id for a in model.aspects)
