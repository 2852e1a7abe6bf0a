import pytest
from hypothesis import given, settings, strategies as st

from builders import dataset, flat_model, reference_data, reference_model
from qmeval.evaluate import evaluate
from qmeval.model import validate_model
from qmeval.sensitivity import (
    STABLE,
    PerturbationError,
    SensitivityPlan,
    perturb_threshold,
    perturb_weight,
    sweep,
    threshold_targets,
    weight_targets,
)


def test_perturb_two_children():
    out = perturb_weight(reference_model(), "Q", "QA1", 0.1)
    assert out.aspect("Q").child_weights == pytest.approx({"QA1": 0.7, "QA2": 0.3}, abs=1e-12)
    assert validate_model(out) == []


def test_perturb_three_children_keeps_sibling_ratio():
    model = flat_model(
        {f: [(f"X{f}", "negative", 1.0)] for f in ("F1", "F2", "F3")},
        aspect_weights={"I_F1": 0.5, "I_F2": 0.3, "I_F3": 0.2},
    )
    out = perturb_weight(model, "A", "I_F1", 0.1).aspect("A").child_weights
    assert out == pytest.approx({"I_F1": 0.6, "I_F2": 0.24, "I_F3": 0.16}, abs=1e-12)


def test_zero_siblings_split_evenly():
    model = flat_model(
        {f: [(f"X{f}", "negative", 1.0)] for f in ("F1", "F2", "F3")},
        aspect_weights={"I_F1": 1.0, "I_F2": 0.0, "I_F3": 0.0},
    )
    out = perturb_weight(model, "A", "I_F1", -0.2).aspect("A").child_weights
    assert out == pytest.approx({"I_F1": 0.8, "I_F2": 0.1, "I_F3": 0.1}, abs=1e-12)


def test_zero_delta_is_identity():
    model = reference_model()
    assert perturb_weight(model, "Q", "QA2", 0.0) is model


@pytest.mark.parametrize("node, child, delta", [("Q", "QA2", 0.7), ("Q", "QA1", -0.61), ("Q", "nope", 0.1), ("F1", "M1", 0.1)])
def test_infeasible_perturbations(node, child, delta):
    with pytest.raises(PerturbationError):
        perturb_weight(reference_model(), node, child, delta)


def test_impact_measure_weights_can_be_perturbed():
    out = perturb_weight(reference_model(), "I1.1", "M1", 0.2)
    assert out.impact("I1.1").measure_weights == pytest.approx({"M1": 0.7, "M2": 0.3}, abs=1e-12)


def test_perturb_threshold():
    out = perturb_threshold(reference_model(), "I3", "F3", 0.1)
    assert out.impact("I3").normalization["F3"].threshold == pytest.approx(0.11)
    with pytest.raises(PerturbationError):
        perturb_threshold(reference_model(), "I3", "F3", -1.0)
    with pytest.raises(PerturbationError):
        perturb_threshold(reference_model(), "I3", "F9", 0.1)


def test_targets():
    model = reference_model()
    assert weight_targets(model) == [
        "weight:I1.1/M1",
        "weight:I1.1/M2",
        "weight:I1.2/M1",
        "weight:I1.2/M2",
        "weight:Q/QA1",
        "weight:Q/QA2",
        "weight:QA1/I1.1",
        "weight:QA1/I2",
        "weight:QA2/I1.2",
        "weight:QA2/I3",
    ]
    assert "threshold:I3/F3" in threshold_targets(model)
    assert "threshold:I1.1/M1" in threshold_targets(model)


def test_zero_delta_sweep_has_no_flips():
    report = sweep(reference_model(), reference_data(), "direct", SensitivityPlan([0.0], [0.0]))
    assert report.perturbations
    assert report.flips() == []
    assert all(m == {"weight": STABLE, "threshold": STABLE} for m in report.stability_margin.values())


def test_every_entry_matches_a_fresh_evaluation():
    model, data = reference_model(), reference_data()
    report = sweep(model, data)
    assert report.perturbations
    for p in report.perturbations:
        _, rest = p.target.split(":")
        node, child = rest.split("/")
        changed = perturb_weight(model, node, child, p.delta) if p.kind == "weight" else perturb_threshold(model, node, child, p.delta)
        fresh = evaluate(changed, data)
        assert fresh.grades == p.resulting_grades
        assert fresh.node_values == p.resulting_values


def test_symmetric_children_move_nothing():
    # QA1's two children both score 0.5, so shifting weight between them is a no-op
    report = sweep(reference_model(), reference_data(), plan=SensitivityPlan(targets=["weight:QA1/I2"], threshold_rel_deltas=()))
    for p in report.perturbations:
        assert p.resulting_values["QA1"] == pytest.approx(0.5, abs=1e-12)
        assert p.changed == []


def test_baseline_and_proximity():
    report = sweep(reference_model(), reference_data())
    assert report.baseline.grades == {"QA1": 4, "QA2": 3, "Q": 4}
    assert report.boundary_proximity["Q"] == pytest.approx(0.08, abs=1e-12)
    assert report.boundary_proximity["QA2"] == pytest.approx(0.03, abs=1e-12)


def test_crossing_of_the_root_boundary():
    # Q = 0.58 + 0.2 * delta reaches 0.67 at delta = 0.45
    grid = [i / 100 for i in range(-60, 61)]
    report = sweep(reference_model(), reference_data(), plan=SensitivityPlan(grid, (), ["weight:Q/QA2"]))
    flips = [p.delta for p in report.perturbations if "Q" in p.changed and p.delta > 0]
    # at exactly 0.45 rounding can leave Q just under the boundary
    assert abs(min(flips) - 0.45) <= 0.01 + 1e-12
    # below -0.4 QA2's weight would go negative; at -0.4 Q is QA1 alone (0.5, still grade 4)
    assert all(p.delta >= -0.4 for p in report.perturbations)
    assert report.stability_margin["Q"]["weight"] == min(flips)


def test_default_sweep_is_stable_at_root():
    report = sweep(reference_model(), reference_data())
    assert report.stability_margin["Q"]["weight"] == STABLE


@settings(max_examples=30, deadline=None)
@given(st.lists(st.sampled_from([i / 20 for i in range(-12, 13)]), min_size=1, max_size=6), st.sampled_from([0.01, 0.025]))
def test_refining_the_grid_never_widens_the_margin(coarse, step):
    fine = sorted(set(coarse) | {round(i * step, 6) for i in range(int(-0.6 / step), int(0.6 / step) + 1)})
    model, data = reference_model(), reference_data()
    a = sweep(model, data, plan=SensitivityPlan(coarse, (), ["weight:Q/QA2"]))
    b = sweep(model, data, plan=SensitivityPlan(fine, (), ["weight:Q/QA2"]))
    ma, mb = a.stability_margin["Q"]["weight"], b.stability_margin["Q"]["weight"]
    if ma != STABLE:
        assert mb != STABLE and mb <= ma


def test_infeasible_deltas_are_skipped():
    report = sweep(reference_model(), reference_data(), plan=SensitivityPlan([0.7], (), ["weight:Q/QA2"]))
    assert report.perturbations == []
    assert report.skipped and report.skipped[0]["target"] == "weight:Q/QA2"


def test_bad_target():
    with pytest.raises(PerturbationError):
        sweep(reference_model(), reference_data(), plan=SensitivityPlan(targets=["Q/QA2"]))


def test_flat_model_threshold_flip():
    model = flat_model({"F": [("X", "negative", 10.0)]})
    report = sweep(model, dataset(X=5), plan=SensitivityPlan((), (-0.5, 0.5)))
    # 5/5 -> 0 (grade 6); 1 - 5/15 = 0.667 (grade 4); baseline 0.5 is grade 4
    by_delta = {p.delta: p for p in report.perturbations}
    assert by_delta[-0.5].resulting_grades["A"] == 6
    assert by_delta[0.5].changed == []
