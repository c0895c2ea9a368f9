import math

import numpy as np
import pytest

from homlab.criteria import (
    COUNTEREXAMPLE,
    INDICATOR_CRITERIA,
    INDICATOR_TAGS,
    METHOD_CRITERIA,
    METHOD_TAGS,
    NOT_APPLICABLE,
    NOT_AUTOMATED,
    SATISFIED,
    VIOLATION_TOL,
    MarginalPerturbation,
    apply_perturbation,
    check_indicator,
    check_method,
    replay_witness,
)
from homlab.errors import ShapeError
from homlab.tables import ContingencyTable, TableWithSingles


def table(counts):
    return ContingencyTable(np.array(counts, dtype=float))


BASE = table([[40, 10], [20, 30]])


# ---------------------------------------------------------------------------
# perturbations
# ---------------------------------------------------------------------------

def test_perturbation_validation():
    with pytest.raises(ValueError):
        MarginalPerturbation("shift")
    with pytest.raises(ValueError):
        MarginalPerturbation("scale", 0.0)
    with pytest.raises(ValueError):
        MarginalPerturbation("type2-row", 1.5)
    with pytest.raises(ValueError):
        MarginalPerturbation("vs-singles", singles_delta=(1, 2, 3))
    with pytest.raises(ValueError):
        MarginalPerturbation("is-singles", singles_delta=(1, -2, 3, 4))


def test_apply_scale():
    out = apply_perturbation(BASE, MarginalPerturbation("scale", 2.0))
    assert out.counts.tolist() == [[80, 20], [40, 60]]


def test_apply_type1_row():
    out = apply_perturbation(BASE, MarginalPerturbation("type1-row", 2.0))
    assert out.counts.tolist() == [[40, 10], [40, 60]]


def test_apply_type2_row():
    out = apply_perturbation(BASE, MarginalPerturbation("type2-row", 0.5))
    assert out.counts.tolist() == [[20, 5], [40, 35]]


def test_apply_type_needs_2x2():
    with pytest.raises(ShapeError):
        apply_perturbation(
            table([[1, 2, 3], [4, 5, 6]]), MarginalPerturbation("type1-row", 2.0)
        )


def test_apply_singles_kinds():
    tws = TableWithSingles(BASE, [1, 2], [3, 4])
    for kind in ("vs-singles", "is-singles"):
        out = apply_perturbation(
            tws, MarginalPerturbation(kind, singles_delta=(1, 2, 3, 4))
        )
        assert out.single_men.tolist() == [2, 4]
        assert out.single_women.tolist() == [6, 8]
        assert np.array_equal(out.couples.counts, BASE.counts)
    with pytest.raises(ShapeError):
        apply_perturbation(BASE, MarginalPerturbation("vs-singles", singles_delta=(1, 1, 1, 1)))


# ---------------------------------------------------------------------------
# indicator checks
# ---------------------------------------------------------------------------

def test_ac1_is_metadata():
    cardinal = check_indicator("AC1", "or")
    assert cardinal.verdict == SATISFIED and cardinal.sample_size == 0
    ordinal = check_indicator("AC1", "ll")
    assert ordinal.verdict == COUNTEREXAMPLE
    assert ordinal.witness == {"kind": "metadata", "cardinal": False}


def test_na_cells():
    assert check_indicator("AC4", "msm").verdict == NOT_APPLICABLE
    assert check_indicator("AC8.3", "or").verdict == NOT_APPLICABLE
    assert check_indicator("AC9", "msp").verdict == NOT_APPLICABLE
    assert check_indicator("AC8.2", "ll").verdict == NOT_AUTOMATED


def test_unknown_pairs_rejected():
    with pytest.raises(ValueError):
        check_indicator("AC13", "or")
    with pytest.raises(ValueError):
        check_indicator("AC2", "gini")
    with pytest.raises(ValueError):
        check_method("AC4", "ipf")
    with pytest.raises(ValueError):
        check_method("AC2", "gs")


@pytest.mark.parametrize("criterion,expected_y", [
    ("AC5.1", {"or"}),
    ("AC5.2", {"msp"}),
])
def test_marginal_immunity_rows(criterion, expected_y):
    for tag in INDICATOR_TAGS:
        report = check_indicator(criterion, tag, sample_count=80, seed=0)
        if tag == "msm" and report.verdict == NOT_APPLICABLE:
            continue
        expected = SATISFIED if tag in expected_y else COUNTEREXAMPLE
        assert report.verdict == expected, (criterion, tag, report.verdict)


def test_gender_symmetry_row():
    for tag in INDICATOR_TAGS:
        report = check_indicator("AC3", tag, sample_count=80, seed=0)
        expected = COUNTEREXAMPLE if tag == "reg" else SATISFIED
        assert report.verdict == expected, (tag, report.verdict)


def test_scale_row_flags_only_the_determinant():
    for tag in INDICATOR_TAGS:
        report = check_indicator("AC2", tag, sample_count=80, seed=0)
        expected = COUNTEREXAMPLE if tag == "det" else SATISFIED
        assert report.verdict == expected, (tag, report.verdict)


def test_category_symmetry_flags_the_sorting_parameter():
    report = check_indicator("AC4", "msp", sample_count=80, seed=0)
    assert report.verdict == COUNTEREXAMPLE
    assert replay_witness(report) > VIOLATION_TOL


def test_strong_matching_criterion_flags_the_determinant():
    report = check_indicator("AC7", "det", sample_count=120, seed=0)
    assert report.verdict == COUNTEREXAMPLE
    better = np.array(report.witness["better"]["counts"])
    assert better.shape == (3, 3)
    assert replay_witness(report) > VIOLATION_TOL


def test_weak_matching_criterion_passes_the_determinant():
    assert check_indicator("AC6", "det", sample_count=80, seed=0).verdict == SATISFIED


def test_counterexample_witnesses_replay():
    flagged = 0
    for criterion in ("AC2", "AC3", "AC4", "AC5.1", "AC5.2", "AC5.3", "AC7", "AC8.1"):
        for tag in INDICATOR_TAGS:
            report = check_indicator(criterion, tag, sample_count=60, seed=0)
            if report.verdict == COUNTEREXAMPLE:
                flagged += 1
                assert replay_witness(report) > VIOLATION_TOL, (criterion, tag)
                assert report.witness["violation"] == pytest.approx(
                    replay_witness(report), rel=1e-9, abs=1e-12
                ) or math.isinf(replay_witness(report))
    assert flagged >= 15


def test_reports_are_deterministic():
    a = check_indicator("AC5.1", "msp", sample_count=50, seed=7)
    b = check_indicator("AC5.1", "msp", sample_count=50, seed=7)
    assert a == b
    c = check_indicator("AC5.1", "msp", sample_count=50, seed=8)
    assert c.witness != a.witness or c.sample_size != a.sample_size or c == a


# ---------------------------------------------------------------------------
# method checks
# ---------------------------------------------------------------------------

def test_method_scale_and_symmetry_rows():
    for criterion in ("AC2", "AC3", "AC5"):
        for tag in METHOD_TAGS:
            report = check_method(criterion, tag, sample_count=40, seed=0)
            assert report.verdict == SATISFIED, (criterion, tag, report.verdict)


def test_method_monotonicity_row():
    for tag in METHOD_TAGS:
        report = check_method("AC8.1", tag, sample_count=40, seed=0)
        assert report.verdict == SATISFIED, (tag, report.verdict)


def test_merge_commutation_row():
    assert check_method("AC10", "nm", sample_count=40, seed=0).verdict == SATISFIED
    assert check_method("AC10", "mdba").verdict == NOT_APPLICABLE
    for tag in ("ipf", "meda", "csa"):
        report = check_method("AC10", tag, sample_count=40, seed=0)
        assert report.verdict == COUNTEREXAMPLE, (tag, report.verdict)
        assert replay_witness(report) > VIOLATION_TOL


def test_impossible_counterfactual_row():
    signals = {}
    for tag in METHOD_TAGS:
        report = check_method("AC12", tag, seed=0)
        signals[tag] = report.verdict
        assert report.witness["kind"] == "sic"
    assert signals["nm"] == SATISFIED
    assert signals["mdba"] == SATISFIED
    assert signals["meda"] == SATISFIED
    assert signals["ipf"] == COUNTEREXAMPLE
    assert signals["csa"] == COUNTEREXAMPLE


def test_strong_category_robustness_not_automated():
    for tag in METHOD_TAGS:
        assert check_method("AC11", tag).verdict == NOT_AUTOMATED


def test_catalog_is_covered():
    assert set(INDICATOR_CRITERIA) >= {
        "AC1", "AC2", "AC3", "AC4", "AC5.1", "AC5.2", "AC5.3",
        "AC6", "AC7", "AC8.1", "AC8.2", "AC8.3", "AC9",
    }
    assert set(METHOD_CRITERIA) == {
        "AC2", "AC3", "AC5", "AC8.1", "AC10", "AC11", "AC12"
    }
    assert len(INDICATOR_TAGS) == 10
    assert len(METHOD_TAGS) == 5
