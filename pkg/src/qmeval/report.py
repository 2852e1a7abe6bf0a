"""JSON and markdown rendering of evaluation and sensitivity results."""

from __future__ import annotations

import json
import os
from typing import Any, Sequence

from .evaluate import EvaluationResult
from .sensitivity import SensitivityReport

_GRADE_COLOURS = {1: "32", 2: "32", 3: "33", 4: "33", 5: "31", 6: "31"}


def to_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def use_colour(stream) -> bool:
    if os.environ.get("QMEVAL_NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _num(x: float) -> str:
    return f"{x:.4g}"


def _grade(g: int | None, colour: bool) -> str:
    if g is None:
        return "-"
    if colour:
        return f"\x1b[{_GRADE_COLOURS.get(g, '0')}m{g}\x1b[0m"
    return str(g)


def _table(header: Sequence[str], rows: Sequence[Sequence[str]]) -> list[str]:
    out = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    out += ["| " + " | ".join(r) + " |" for r in rows]
    return out


def evaluation_markdown(result: EvaluationResult, model=None, colour: bool = False) -> str:
    lines = [f"# Quality evaluation: {result.subject or '(unnamed)'}", "", f"Variant: `{result.variant}`", ""]

    aspect_ids = [r["node"] for r in result.trace if r["kind"] == "aspect"]
    names = {a.id: a.name for a in model.aspects} if model is not None else {}
    lines += ["## Aspect grades", ""]
    rows = []
    for aid in sorted(aspect_ids):
        value = result.node_values.get(aid)
        rows.append([aid, names.get(aid, ""), "-" if value is None else _num(value), _grade(result.grades.get(aid), colour)])
    lines += _table(["Aspect", "Name", "Value", "Grade"], rows) + [""]

    impact_ids = sorted(r["node"] for r in result.trace if r["kind"] == "impact")
    if impact_ids:
        lines += ["## Impacts", ""]
        rows = []
        for iid in impact_ids:
            value = result.node_values.get(iid)
            rows.append([iid, "-" if value is None else _num(value), _grade(result.grades.get(iid), colour)])
        lines += _table(["Impact", "Value", "Grade"], rows) + [""]

    factor_ids = sorted(r["node"] for r in result.trace if r["kind"] == "factor")
    lines += ["## Factor values", ""]
    rows = [[fid, _num(result.factor_values[fid]) if fid in result.factor_values else "unmeasured"] for fid in factor_ids]
    lines += _table(["Factor", "Value"], rows) + [""]

    lines += ["## Trace", ""]
    for rec in sorted(result.trace, key=lambda r: r["node"]):
        value = rec.get("value")
        shown = "" if value is None else f" = {_num(value)}"
        lines.append(f"- `{rec['node']}` ({rec['kind']}): {rec['formula']}{shown}")
    return "\n".join(lines) + "\n"


def sensitivity_markdown(report: SensitivityReport, colour: bool = False) -> str:
    base = report.baseline
    lines = [
        f"# Sensitivity analysis: {report.subject or '(unnamed)'}",
        "",
        f"Variant: `{base.variant}`",
        "",
        "## Baseline grades",
        "",
    ]
    lines += _table(
        ["Node", "Value", "Grade"],
        [
            [n, _num(base.node_values[n]) if n in base.node_values else "-", _grade(g, colour)]
            for n, g in sorted(base.grades.items())
        ],
    )
    lines += ["", "## Perturbations", ""]
    rows = []
    for p in report.perturbations:
        flips = ", ".join(f"{n}: {base.grades[n]}→{p.resulting_grades[n]}" for n in p.changed) or "none"
        rows.append([p.target, f"{p.delta:+g}", flips])
    lines += _table(["Target", "Delta", "Grade changes"], rows)
    lines += ["", f"{len(report.flips())} of {len(report.perturbations)} perturbations changed a grade.", ""]

    lines += ["## Stability margins", ""]
    rows = []
    for node, m in sorted(report.stability_margin.items()):
        rows.append([node, _margin(m["weight"]), _margin(m["threshold"]), _num(report.boundary_proximity[node]) if node in report.boundary_proximity else "-"])
    lines += _table(["Node", "Weight margin", "Threshold margin", "Distance to boundary"], rows)
    if report.skipped:
        lines += ["", "## Skipped", ""]
        lines += [f"- `{s['target']}` {s['delta']:+g}: {s['reason']}" for s in report.skipped]
    return "\n".join(lines) + "\n"


def _margin(m) -> str:
    return m if isinstance(m, str) else _num(m)
