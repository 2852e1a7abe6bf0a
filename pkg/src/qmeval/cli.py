"""Command-line front end.

Exit codes: 0 ok, 1 parse error, 2 validation error, 3 incomplete data,
4 evaluation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import report as render
from .evaluate import VARIANTS, EvaluationError, evaluate
from .expr import ExpressionError
from .ingest import DatasetError, MeasurementDataset, check_completeness, findings_to_measures, load_dataset, load_findings
from .model import QualityModel, validate_model
from .modelfile import ModelParseError, parse_model, serialize_model
from .sensitivity import DEFAULT_THRESHOLD_DELTAS, DEFAULT_WEIGHT_DELTAS, SensitivityPlan, sweep
from .weights import (
    CR_WARNING_LEVEL,
    ConvergenceError,
    MatrixError,
    WeightMismatchError,
    consistency_ratio,
    derive_weights,
    load_comparisons,
    rebalance,
)

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_INCOMPLETE, EXIT_EVAL = 0, 1, 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        self.code = code
        super().__init__(message)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc.strerror or exc}") from None


def _load_model(path: str) -> QualityModel:
    try:
        return parse_model(_read(path))
    except ModelParseError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None


def _load_valid_model(path: str) -> QualityModel:
    model = _load_model(path)
    violations = validate_model(model)
    if violations:
        raise CliError(EXIT_INVALID, "\n".join(str(v) for v in violations))
    return model


def _load_data(path: str) -> MeasurementDataset:
    try:
        return load_dataset(_read(path), subject=Path(path).name.split(".")[0])
    except DatasetError as exc:
        raise CliError(EXIT_PARSE, f"{path}: {exc}") from None


def _complete(model: QualityModel, data: MeasurementDataset, path: str) -> None:
    missing = check_completeness(model, data)
    if missing:
        raise CliError(EXIT_INCOMPLETE, f"{path}: missing measures: {', '.join(missing)}")


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


# ---------------------------------------------------------------------------


def cmd_validate(args) -> int:
    model = _load_model(args.model)
    violations = validate_model(model)
    if violations:
        for v in violations:
            print(v)
        return EXIT_INVALID
    print(f"{args.model}: ok")
    return EXIT_OK


def cmd_weigh(args) -> int:
    model = _load_model(args.model)
    matrices = []
    for path in args.comparisons:
        try:
            matrices += load_comparisons(_read(path))
        except json.JSONDecodeError as exc:
            raise CliError(EXIT_PARSE, f"{path}: {exc}") from None
        except MatrixError as exc:
            raise CliError(EXIT_INVALID, f"{path}: {exc}") from None
    vectors = []
    for matrix in matrices:
        try:
            vec, lam = derive_weights(matrix)
            cr = consistency_ratio(lam, len(matrix.items))
        except (MatrixError, ConvergenceError, ValueError) as exc:
            raise CliError(EXIT_INVALID, str(exc)) from None
        if cr > CR_WARNING_LEVEL:
            print(f"consistency warning: node {matrix.node_id}, CR={cr:.3f}", file=sys.stderr)
        vectors.append(vec)
    try:
        weighted = rebalance(model, vectors)
    except WeightMismatchError as exc:
        raise CliError(EXIT_INVALID, str(exc)) from None
    for v in validate_model(weighted):
        print(f"warning: {v}", file=sys.stderr)
    _emit(serialize_model(weighted), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = _load_valid_model(args.model)
    results = []
    for path in args.data:
        data = _load_data(path)
        _complete(model, data, path)
        try:
            results.append(evaluate(model, data, args.variant))
        except (EvaluationError, ExpressionError) as exc:
            raise CliError(EXIT_EVAL, f"{path}: {exc}") from None
    if args.format == "json":
        payload = [r.to_dict() for r in results]
        text = render.to_json(payload[0] if len(payload) == 1 else payload)
    else:
        colour = not args.out and render.use_colour(sys.stdout)
        text = "\n".join(render.evaluation_markdown(r, model, colour) for r in results)
    _emit(text, args.out)
    return EXIT_OK


def cmd_sensitivity(args) -> int:
    model = _load_valid_model(args.model)
    explicit = args.weight_deltas is not None or args.threshold_deltas is not None
    # an explicit grid replaces the whole default plan
    plan = SensitivityPlan(
        weight_deltas=args.weight_deltas if args.weight_deltas is not None else ([] if explicit else DEFAULT_WEIGHT_DELTAS),
        threshold_rel_deltas=(
            args.threshold_deltas if args.threshold_deltas is not None else ([] if explicit else DEFAULT_THRESHOLD_DELTAS)
        ),
        targets=args.targets.split(",") if args.targets else "all",
    )
    reports = []
    for path in args.data:
        data = _load_data(path)
        _complete(model, data, path)
        try:
            reports.append(sweep(model, data, args.variant, plan))
        except (EvaluationError, ExpressionError, ValueError) as exc:
            raise CliError(EXIT_EVAL, f"{path}: {exc}") from None
    if args.format == "json":
        payload = [r.to_dict() for r in reports]
        text = render.to_json(payload[0] if len(payload) == 1 else payload)
    else:
        colour = not args.out and render.use_colour(sys.stdout)
        text = "\n".join(render.sensitivity_markdown(r, colour) for r in reports)
    _emit(text, args.out)
    return EXIT_OK


def cmd_findings_convert(args) -> int:
    try:
        report = load_findings(_read(args.findings))
        mapping = json.loads(_read(args.mapping))
    except (json.JSONDecodeError, DatasetError) as exc:
        raise CliError(EXIT_PARSE, str(exc)) from None
    if not isinstance(mapping, dict):
        raise CliError(EXIT_PARSE, f"{args.mapping}: mapping must be an object of ruleId: measureId")
    data, warnings = findings_to_measures(report, mapping)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    _emit(render.to_json(data.to_dict()), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qmeval", description="Model-based software quality evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a quality model for structural problems")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("weigh", help="derive weights from pairwise comparisons")
    p.add_argument("--model", required=True)
    p.add_argument("--comparisons", required=True, action="append")
    p.add_argument("--out")
    p.set_defaults(func=cmd_weigh)

    def common(p):
        p.add_argument("--model", required=True)
        p.add_argument("--data", required=True, action="append", help="dataset (CSV or JSON); repeatable")
        p.add_argument("--variant", choices=VARIANTS, default="direct")
        p.add_argument("--format", choices=("json", "markdown"), default="json")
        p.add_argument("--out")

    p = sub.add_parser("evaluate", help="evaluate products against a model")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sensitivity", help="one-at-a-time sensitivity sweep")
    common(p)
    p.add_argument("--weight-deltas", type=_floats, help="absolute weight shifts, comma-separated")
    p.add_argument("--threshold-deltas", type=_floats, help="relative threshold changes, comma-separated")
    p.add_argument("--targets", help="comma-separated weight:NODE/CHILD or threshold:IMPACT/ID")
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("findings-convert", help="turn rule-violation counts into per-kLOC measures")
    p.add_argument("--findings", "--data", dest="findings", required=True, help="findings JSON")
    p.add_argument("--mapping", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_findings_convert)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
