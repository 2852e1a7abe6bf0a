"""Quality meta-model types and structural validation.

A model has a definition level (aspects, impacts, factors, measures, grading
keys) that is evaluated against application-level measurement data. All types
are frozen; operations that change a model return a new one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

WEIGHT_TOLERANCE = 1e-9

DIRECTIONS = ("positive", "negative")
MEASURE_KINDS = ("base", "derived")
SCALES = ("ratio", "ordinal", "nominal", "interval")
FACTOR_KINDS = ("single-measure", "derived-measure", "abstract")


@dataclass(frozen=True)
class Entity:
    id: str
    name: str
    kind: str = ""


@dataclass(frozen=True)
class Measure:
    id: str
    name: str
    kind: str = "base"
    expression: str | None = None
    scale: str = "ratio"
    unit: str | None = None


@dataclass(frozen=True)
class Factor:
    id: str
    entity: str
    property: str
    measures: tuple[str, ...]
    kind: str


@dataclass(frozen=True)
class NormalizationSpec:
    direction: str
    threshold: float


@dataclass(frozen=True)
class Impact:
    """Directed influence of a factor on a quality aspect.

    ``normalization`` is keyed by the id of whatever gets normalized: the
    factor itself when its value is computed, otherwise each of its measures.
    """

    id: str
    factor: str
    aspect: str
    direction: str
    justification: str = ""
    measure_weights: Mapping[str, float] | None = None
    normalization: Mapping[str, NormalizationSpec] = field(default_factory=dict)


@dataclass(frozen=True)
class GradingKey:
    """Step function from [0, 1] onto grades 1 (best) to 6 (worst).

    ``boundaries`` is a tuple of ``(lower_bound, grade)`` pairs sorted by
    descending lower bound.
    """

    boundaries: tuple[tuple[float, int], ...]


DEFAULT_GRADING_KEY = GradingKey(
    boundaries=((0.92, 1), (0.81, 2), (0.67, 3), (0.50, 4), (0.30, 5), (0.0, 6))
)


@dataclass(frozen=True)
class QualityAspect:
    id: str
    name: str
    children: tuple[str, ...] = ()
    impacts: tuple[str, ...] = ()
    child_weights: Mapping[str, float] = field(default_factory=dict)
    grading_key: GradingKey | None = None


@dataclass(frozen=True)
class QualityModel:
    entities: tuple[Entity, ...]
    measures: tuple[Measure, ...]
    factors: tuple[Factor, ...]
    impacts: tuple[Impact, ...]
    aspects: tuple[QualityAspect, ...]
    root: str
    grading_key: GradingKey = DEFAULT_GRADING_KEY
    measure_grading_key: GradingKey | None = None

    def measure(self, measure_id: str) -> Measure:
        return _lookup(self.measures, measure_id, "measure")

    def factor(self, factor_id: str) -> Factor:
        return _lookup(self.factors, factor_id, "factor")

    def impact(self, impact_id: str) -> Impact:
        return _lookup(self.impacts, impact_id, "impact")

    def aspect(self, aspect_id: str) -> QualityAspect:
        return _lookup(self.aspects, aspect_id, "aspect")

    def key_for(self, aspect_id: str) -> GradingKey:
        return self.aspect(aspect_id).grading_key or self.grading_key

    def node_kind(self, node_id: str) -> str | None:
        for kind, items in (
            ("entity", self.entities),
            ("measure", self.measures),
            ("factor", self.factors),
            ("impact", self.impacts),
            ("aspect", self.aspects),
        ):
            if any(item.id == node_id for item in items):
                return kind
        return None


def _lookup(items, item_id, what):
    for item in items:
        if item.id == item_id:
            return item
    raise KeyError(f"unknown {what} {item_id!r}")


# ---------------------------------------------------------------------------
# Applicability of evaluation activities per element kind

_APPLICABLE = {
    "measure": frozenset(),
    "factor": frozenset({"aggregation"}),
    "impact": frozenset({"weighting", "aggregation", "evaluation"}),
    "aspect": frozenset({"weighting", "aggregation", "evaluation"}),
}


def applicable_activities(node_kind: str) -> frozenset[str]:
    """Activities (weighting, aggregation, evaluation) allowed on a node kind.

    Factor aggregation means only computing a derived measure from base
    measures.
    """
    try:
        return _APPLICABLE[node_kind]
    except KeyError:
        raise ValueError(f"unknown node kind {node_kind!r}") from None


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    rule: str
    node: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.node}: {self.message}"


def validate_model(model: QualityModel) -> list[Violation]:
    """Check every structural invariant; returns an empty list for a valid model."""
    # local import: expr depends on nothing here, but keeps module import light
    from .expr import ExpressionError, parse_expression, referenced_measures

    out: list[Violation] = []

    def bad(rule, node, message):
        out.append(Violation(rule, node, message))

    # ids are global so weight maps can refer to any element unambiguously
    seen: dict[str, str] = {}
    for kind, items in (
        ("entity", model.entities),
        ("measure", model.measures),
        ("factor", model.factors),
        ("impact", model.impacts),
        ("aspect", model.aspects),
    ):
        for item in items:
            if item.id in seen:
                bad("duplicate-id", item.id, f"id already used by a {seen[item.id]}")
            else:
                seen[item.id] = kind

    entities = {e.id for e in model.entities}
    measures = {m.id: m for m in model.measures}
    factors = {f.id: f for f in model.factors}
    impacts = {i.id: i for i in model.impacts}
    aspects = {a.id: a for a in model.aspects}

    # measures and the derived-measure reference graph
    deps: dict[str, set[str]] = {}
    for m in model.measures:
        if m.kind not in MEASURE_KINDS:
            bad("measure-kind", m.id, f"unknown measure kind {m.kind!r}")
        if m.scale not in SCALES:
            bad("measure-scale", m.id, f"unknown scale {m.scale!r}")
        if m.kind == "derived":
            if not m.expression:
                bad("measure-expression", m.id, "derived measure needs an expression")
                continue
            try:
                refs = referenced_measures(parse_expression(m.expression))
            except ExpressionError as exc:
                bad("measure-expression", m.id, f"bad expression: {exc}")
                continue
            for ref in sorted(refs - measures.keys()):
                bad("dangling-ref", m.id, f"expression references unknown measure {ref!r}")
            deps[m.id] = refs & measures.keys()
        elif m.expression is not None:
            bad("measure-expression", m.id, "base measure must not carry an expression")
    for cycle_node in _cycle_members(deps):
        bad("measure-cycle", cycle_node, "cycle in derived measures")

    for f in model.factors:
        if f.entity not in entities:
            bad("dangling-ref", f.id, f"unknown entity {f.entity!r}")
        for mid in f.measures:
            if mid not in measures:
                bad("dangling-ref", f.id, f"unknown measure {mid!r}")
        if f.kind not in FACTOR_KINDS:
            bad("factor-kind", f.id, f"unknown factor kind {f.kind!r}")
        elif f.kind == "single-measure" and len(f.measures) != 1:
            bad("factor-kind", f.id, "single-measure factor needs exactly one measure")
        elif f.kind == "derived-measure":
            if len(f.measures) != 1:
                bad("factor-kind", f.id, "derived-measure factor needs exactly one measure")
            elif f.measures[0] in measures and measures[f.measures[0]].kind != "derived":
                bad("factor-kind", f.id, f"measure {f.measures[0]!r} is not derived")
        elif f.kind == "abstract" and len(f.measures) < 2:
            bad("factor-kind", f.id, "abstract factor needs at least two measures")

    for i in model.impacts:
        if i.direction not in DIRECTIONS:
            bad("impact-direction", i.id, f"unknown direction {i.direction!r}")
        if i.aspect not in aspects:
            bad("dangling-ref", i.id, f"unknown aspect {i.aspect!r}")
        elif i.id not in aspects[i.aspect].impacts:
            bad("impact-aspect", i.id, f"aspect {i.aspect!r} does not list this impact")
        factor = factors.get(i.factor)
        if factor is None:
            bad("dangling-ref", i.id, f"unknown factor {i.factor!r}")
        for target, spec in i.normalization.items():
            if spec.direction not in DIRECTIONS:
                bad("normalization", i.id, f"unknown direction {spec.direction!r} for {target!r}")
            if not (math.isfinite(spec.threshold) and spec.threshold > 0):
                bad("normalization", i.id, f"threshold for {target!r} must be > 0")
        if factor is not None:
            _check_impact_inputs(i, factor, bad)

    # aspect tree
    parents: dict[str, list[str]] = {}
    for a in model.aspects:
        for child in a.children:
            if child not in aspects:
                bad("dangling-ref", a.id, f"unknown child aspect {child!r}")
            else:
                parents.setdefault(child, []).append(a.id)
        for iid in a.impacts:
            if iid not in impacts:
                bad("dangling-ref", a.id, f"unknown impact {iid!r}")
            elif impacts[iid].aspect != a.id:
                bad("impact-aspect", a.id, f"impact {iid!r} targets {impacts[iid].aspect!r}")
        if not a.children and not a.impacts:
            bad("aspect-empty", a.id, "aspect has neither sub-aspects nor impacts")
        _check_child_weights(a, seen, bad)
        if a.grading_key is not None:
            for msg in grading_key_problems(a.grading_key):
                bad("grading-key", a.id, msg)

    if model.root not in aspects:
        bad("aspect-tree", model.root, "root is not a defined aspect")
    elif model.root in parents:
        bad("aspect-tree", model.root, "root aspect has a parent")
    for aid, ps in parents.items():
        if len(ps) > 1:
            bad("aspect-tree", aid, f"aspect has several parents: {', '.join(ps)}")
    for aid in aspects:
        if aid != model.root and aid not in parents:
            bad("aspect-tree", aid, "aspect is a second root (no parent)")
    child_graph = {a.id: {c for c in a.children if c in aspects} for a in model.aspects}
    for aid in _cycle_members(child_graph):
        bad("aspect-tree", aid, "cycle in aspect hierarchy")

    for msg in grading_key_problems(model.grading_key):
        bad("grading-key", "gradingKey", msg)
    if model.measure_grading_key is not None:
        for msg in grading_key_problems(model.measure_grading_key):
            bad("grading-key", "measureGradingKey", msg)
    return out


def _check_impact_inputs(impact, factor, bad):
    if factor.kind == "abstract":
        weights = impact.measure_weights
        if weights is None:
            bad("measure-weights", impact.id, "abstract factor needs measureWeights on the impact")
            return
        if set(weights) != set(factor.measures):
            bad(
                "measure-weights",
                impact.id,
                f"measureWeights must cover exactly the measures of {factor.id!r}",
            )
        _check_weight_vector(impact.id, weights, bad)
        for mid in factor.measures:
            if mid not in impact.normalization:
                bad("normalization", impact.id, f"no normalization for measure {mid!r}")
    else:
        if impact.measure_weights is not None:
            bad("measure-weights", impact.id, "measureWeights only apply to abstract factors")
        if factor.id not in impact.normalization and not (
            factor.measures and factor.measures[0] in impact.normalization
        ):
            bad("normalization", impact.id, f"no normalization for factor {factor.id!r}")


def _check_child_weights(aspect, kinds, bad):
    expected = set(aspect.children) | set(aspect.impacts)
    for key in aspect.child_weights:
        kind = kinds.get(key)
        if kind in ("factor", "measure", "entity"):
            bad(
                "applicability",
                aspect.id,
                f"applicability: weighting not allowed on {kind.capitalize()} {key!r}",
            )
        elif key not in expected:
            bad("weights-cover", aspect.id, f"weight for {key!r}, which is not a child")
    for key in sorted(expected - set(aspect.child_weights)):
        bad("weights-cover", aspect.id, f"no weight for child {key!r}")
    _check_weight_vector(aspect.id, aspect.child_weights, bad)


def _check_weight_vector(node, weights, bad):
    if not weights:
        return
    for key, w in weights.items():
        if not (0.0 <= w <= 1.0):
            bad("weights-range", node, f"weight of {key!r} is {w}, outside [0, 1]")
    total = math.fsum(weights.values())
    if abs(total - 1.0) > WEIGHT_TOLERANCE:
        bad("weights-sum", node, f"weights must sum to 1 (got {total:.12g})")


def grading_key_problems(key: GradingKey) -> list[str]:
    problems = []
    grades = [g for _, g in key.boundaries]
    bounds = [b for b, _ in key.boundaries]
    if sorted(grades) != [1, 2, 3, 4, 5, 6]:
        problems.append("grades must cover 1..6 exactly once")
    elif grades != [1, 2, 3, 4, 5, 6]:
        problems.append("grades must run 1..6 in order of descending lower bound")
    if any(not (0.0 <= b <= 1.0) for b in bounds):
        problems.append("lower bounds must lie in [0, 1]")
    if any(b1 <= b2 for b1, b2 in zip(bounds, bounds[1:])):
        problems.append("lower bounds must be strictly decreasing")
    if bounds and bounds[-1] != 0.0:
        problems.append("the worst grade must have lower bound 0")
    return problems


def _cycle_members(graph: Mapping[str, set[str]]) -> list[str]:
    """Nodes lying on a cycle, sorted. Iterative DFS colouring."""
    white, grey, black = 0, 1, 2
    colour = {n: white for n in graph}
    on_cycle: set[str] = set()
    for start in sorted(graph):
        if colour[start] != white:
            continue
        stack = [(start, iter(sorted(graph.get(start, ()))))]
        path = [start]
        colour[start] = grey
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                colour[node] = black
                stack.pop()
                path.pop()
            elif colour.get(nxt, black) == grey:
                on_cycle.update(path[path.index(nxt):])
            elif colour.get(nxt) == white:
                colour[nxt] = grey
                stack.append((nxt, iter(sorted(graph.get(nxt, ())))))
                path.append(nxt)
    return sorted(on_cycle)
