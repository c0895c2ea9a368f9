import math

import numpy as np
import pytest

from homlab.errors import GllUndefinedError, ShapeError, UndefinedIndicatorError
from homlab.indicators import (
    CONTINUOUS,
    PAPER_INTEGER,
    aggregate_2x2,
    aggregate_msp,
    correlation,
    covariance,
    det_family,
    determinant,
    gll,
    ll_simplified,
    odds_ratio,
    regression,
    surplus_matrix,
    v_value,
)
from homlab.tables import ContingencyTable, Marginals, TableWithSingles, random_match


def table(counts):
    return ContingencyTable(np.array(counts, dtype=float))


BASE = table([[40, 10], [20, 30]])
INDEP = table([[24, 16], [36, 24]])
DIAG = table([[50, 0], [0, 50]])


def random_positive_2x2(rng, high=51):
    return table(rng.integers(1, high, size=(2, 2)))


# ---------------------------------------------------------------------------
# definitions on worked examples
# ---------------------------------------------------------------------------

def test_odds_ratio_values():
    assert odds_ratio(BASE) == pytest.approx(6.0)
    assert odds_ratio(INDEP) == pytest.approx(1.0)
    assert odds_ratio(DIAG) == math.inf


def test_odds_ratio_zero_and_undefined_cases():
    assert odds_ratio(table([[0, 5], [5, 0]])) == 0.0
    with pytest.raises(UndefinedIndicatorError):
        odds_ratio(table([[0, 5], [0, 5]]))


def test_det_family_values():
    assert det_family("determinant", BASE) == 1000
    assert det_family("correlation", BASE) == pytest.approx(0.40825, abs=1e-5)
    assert det_family("covariance", INDEP) == 0
    pair = det_family("regression", BASE)
    assert pair.beta_wm == pytest.approx(1000 / (50 * 50))
    assert pair.beta_mw == pytest.approx(1000 / (60 * 40))


def test_det_family_rejects_unknown_kind():
    with pytest.raises(ValueError):
        det_family("slope", BASE)


def test_indicators_require_2x2():
    wide = table([[1, 2, 3], [4, 5, 6]])
    for fn in (odds_ratio, determinant, covariance, correlation, regression,
               aggregate_msp, v_value, ll_simplified):
        with pytest.raises(ShapeError):
            fn(wide)


def test_aggregate_msp_values():
    parts = aggregate_msp(BASE)
    assert parts.msp_l == pytest.approx(1.3333, abs=1e-4)
    assert parts.msp_h == pytest.approx(1.5, abs=1e-9)
    assert parts.aggregate == pytest.approx(1.40476, abs=1e-4)
    assert aggregate_msp(INDEP).aggregate == pytest.approx(1.0)
    perfect = aggregate_msp(DIAG)
    assert (perfect.msp_l, perfect.msp_h, perfect.aggregate) == (2, 2, 2)


def test_msp_undefined_on_empty_diagonal():
    with pytest.raises(UndefinedIndicatorError):
        aggregate_msp(table([[0, 5], [5, 0]]))


def test_v_value_branches():
    assert v_value(BASE) == pytest.approx(0.5)       # c > b branch
    assert v_value(INDEP) == 0
    assert v_value(table([[30, 20], [20, 30]])) == pytest.approx(0.2)  # tie b = c


def test_ll_simplified_values():
    dec = ll_simplified(BASE)
    assert dec.r == pytest.approx(20.0)
    assert dec.int_r == 20
    assert dec.value == pytest.approx(0.5)
    assert not dec.negative_sorting

    perfect = ll_simplified(DIAG)
    assert perfect.r == pytest.approx(25.0)
    assert perfect.value == pytest.approx(1.0)

    indep = ll_simplified(table([[24, 16], [36, 24]]))
    assert indep.r == 24.0
    assert indep.value == 0.0


def test_ll_negative_sorting_flagged_and_signed():
    dec = ll_simplified(table([[10, 30], [30, 30]]))
    assert dec.negative_sorting
    assert dec.value == pytest.approx(-0.25)


def test_ll_rejects_unknown_rounding():
    with pytest.raises(ValueError):
        ll_simplified(BASE, "round-half-up")


def test_gll_examples():
    assert gll(BASE).tolist() == [[0.5]]
    steps = table([[10, 0], [5, 5], [0, 10]])
    assert gll(steps).tolist() == [[1.0], [1.0]]
    rand = random_match(Marginals([10, 10, 10], [15, 15]))
    assert np.allclose(gll(rand), 0.0)


def test_gll_reports_each_undefined_split():
    # zero low tail at the first column split leaves that entry undefined
    t = table([[0, 4, 1], [0, 3, 2], [0, 2, 3]])
    with pytest.raises(GllUndefinedError) as err:
        gll(t)
    bad = {(j, k) for j, k, _ in err.value.entries}
    assert bad == {(1, 1), (2, 1)}
    partial = err.value.partial
    assert np.isnan(partial[0, 0]) and np.isnan(partial[1, 0])
    assert np.isfinite(partial[:, 1]).all()


def test_aggregate_2x2_matches_manual_blocks():
    t = table([[1, 2, 3], [4, 5, 6], [7, 8, 9]])
    agg = aggregate_2x2(t, 2, 1)
    assert agg.counts.tolist() == [[5, 16], [7, 17]]
    with pytest.raises(ShapeError):
        aggregate_2x2(t, 3, 1)


def test_surplus_matrix_values():
    tws = TableWithSingles(table([[4, 2], [2, 8]]), [1, 2], [1, 2])
    values = surplus_matrix(tws).values
    assert values[0, 0] == pytest.approx(4.0)
    assert values[0, 1] == pytest.approx(1.41421, abs=1e-5)
    assert values[1, 0] == pytest.approx(1.41421, abs=1e-5)
    assert values[1, 1] == pytest.approx(4.0)

    unit = TableWithSingles(BASE, [1, 1], [1, 1])
    assert np.array_equal(surplus_matrix(unit).values, BASE.counts)

    with pytest.raises(UndefinedIndicatorError):
        surplus_matrix(TableWithSingles(BASE, [0, 1], [1, 1]))


# ---------------------------------------------------------------------------
# equivalence of the ratio measures when the random benchmark is integral
# ---------------------------------------------------------------------------

def integer_benchmark_tables(rng, count, require_nonnegative=True):
    """2x2 integer tables whose random high-high benchmark is an integer."""
    out = []
    while len(out) < count:
        total = int(rng.choice([20, 40, 50, 80, 100, 200]))
        row_h = int(rng.integers(1, total))
        col_h = int(rng.integers(1, total))
        if (row_h * col_h) % total:
            continue
        r = row_h * col_h // total
        lo = r if require_nonnegative else max(0, row_h + col_h - total)
        hi = min(row_h, col_h)
        if hi <= lo:
            continue
        d = int(rng.integers(lo, hi + 1))
        a = total - row_h - col_h + d
        b = col_h - d
        c = row_h - d
        if min(a, b, c) < 0 or a + d == 0:
            continue
        out.append(table([[a, b], [c, d]]))
    return out


def test_ratio_measures_coincide_on_integer_benchmark():
    rng = np.random.default_rng(42)
    for t in integer_benchmark_tables(rng, 300):
        dec = ll_simplified(t)
        assert dec.int_r == dec.r
        assert abs(dec.value - v_value(t)) <= 1e-12


# ---------------------------------------------------------------------------
# scale, gender and category symmetry properties
# ---------------------------------------------------------------------------

def test_scale_behavior():
    rng = np.random.default_rng(1)
    for _ in range(100):
        t = random_positive_2x2(rng)
        r = float(rng.uniform(0.1, 7.0))
        scaled = t.scaled(r)
        assert odds_ratio(scaled) == pytest.approx(odds_ratio(t), rel=1e-9)
        assert determinant(scaled) == pytest.approx(r * r * determinant(t), rel=1e-9)
        assert covariance(scaled) == pytest.approx(covariance(t), rel=1e-9, abs=1e-12)
        assert correlation(scaled) == pytest.approx(correlation(t), rel=1e-9, abs=1e-12)
        pair, spair = regression(t), regression(scaled)
        assert spair.beta_wm == pytest.approx(pair.beta_wm, rel=1e-9, abs=1e-12)
        assert spair.beta_mw == pytest.approx(pair.beta_mw, rel=1e-9, abs=1e-12)
        assert aggregate_msp(scaled).aggregate == pytest.approx(
            aggregate_msp(t).aggregate, rel=1e-9
        )
        assert v_value(scaled) == pytest.approx(v_value(t), rel=1e-9, abs=1e-12)
        assert ll_simplified(scaled, CONTINUOUS).value == pytest.approx(
            ll_simplified(t, CONTINUOUS).value, rel=1e-9, abs=1e-12
        )


def test_floor_mode_is_scale_invariant_only_up_to_the_floor():
    # the floored benchmark is an integer-count device: rescaling by an
    # arbitrary real moves the floor and the value with it
    t = table([[40, 10], [20, 30]])
    exact = ll_simplified(t, PAPER_INTEGER).value
    skewed = ll_simplified(t.scaled(1.013), PAPER_INTEGER).value
    assert abs(exact - skewed) > 1e-3
    assert ll_simplified(t.scaled(1.013), CONTINUOUS).value == pytest.approx(
        ll_simplified(t, CONTINUOUS).value
    )


def test_gender_symmetry():
    rng = np.random.default_rng(2)
    for _ in range(100):
        t = random_positive_2x2(rng)
        tt = t.transposed()
        assert odds_ratio(tt) == pytest.approx(odds_ratio(t), rel=1e-12)
        assert determinant(tt) == pytest.approx(determinant(t), rel=1e-12)
        assert covariance(tt) == pytest.approx(covariance(t), rel=1e-12)
        assert correlation(tt) == pytest.approx(correlation(t), rel=1e-12)
        assert aggregate_msp(tt).aggregate == pytest.approx(
            aggregate_msp(t).aggregate, rel=1e-12
        )
        assert v_value(tt) == pytest.approx(v_value(t), rel=1e-12)
        assert ll_simplified(tt).value == pytest.approx(
            ll_simplified(t).value, rel=1e-12
        )
        assert regression(tt).beta_wm == pytest.approx(
            regression(t).beta_mw, rel=1e-12
        )


def test_category_symmetry():
    rng = np.random.default_rng(4)
    for _ in range(100):
        t = random_positive_2x2(rng)
        (a, b), (c, d) = t.counts
        rotated = table([[d, c], [b, a]])
        assert odds_ratio(rotated) == pytest.approx(odds_ratio(t), rel=1e-12)
        assert determinant(rotated) == pytest.approx(determinant(t), rel=1e-12)
        assert covariance(rotated) == pytest.approx(covariance(t), rel=1e-12)
        assert correlation(rotated) == pytest.approx(correlation(t), rel=1e-12)
        assert v_value(rotated) == pytest.approx(v_value(t), rel=1e-12)
        assert ll_simplified(rotated).value == pytest.approx(
            ll_simplified(t).value, rel=1e-12
        )


def test_category_symmetry_fails_for_local_sorting_parameter():
    # the low/high swap exchanges the two local sorting parameters, so the
    # low-type parameter itself is not category symmetric
    t = table([[40, 10], [20, 31]])
    (a, b), (c, d) = t.counts
    rotated = table([[d, c], [b, a]])
    assert aggregate_msp(rotated).msp_l == pytest.approx(aggregate_msp(t).msp_h)
    assert abs(aggregate_msp(rotated).msp_l - aggregate_msp(t).msp_l) > 1e-3


def test_det_family_signs_agree():
    rng = np.random.default_rng(6)
    for _ in range(100):
        t = random_positive_2x2(rng)
        sign = np.sign(determinant(t))
        assert np.sign(covariance(t)) == sign
        assert np.sign(correlation(t)) == sign
        pair = regression(t)
        assert np.sign(pair.beta_wm) == sign
        assert np.sign(pair.beta_mw) == sign


def test_diagonal_addition_monotonicity():
    rng = np.random.default_rng(9)
    for _ in range(200):
        t = random_positive_2x2(rng)
        bump = t.with_counts(t.counts + np.diag(rng.integers(1, 51, size=2)))
        assert odds_ratio(bump) >= odds_ratio(t) - 1e-9
        assert determinant(bump) >= determinant(t) - 1e-9
        assert correlation(bump) >= correlation(t) - 1e-9
        assert regression(bump).beta_wm >= regression(t).beta_wm - 1e-9
        assert regression(bump).beta_mw >= regression(t).beta_mw - 1e-9
        assert aggregate_msp(bump).aggregate >= aggregate_msp(t).aggregate - 1e-9
        assert v_value(bump) >= v_value(t) - 1e-9
        assert ll_simplified(bump).value >= ll_simplified(t).value - 1e-9


def test_covariance_diagonal_addition_can_decrease():
    # a strongly assorted population diluted by one-sided same-type couples:
    # the covariance normalization by the squared total overwhelms the
    # determinant gain, a documented failure of the monotonicity postulate
    t = table([[45, 5], [5, 45]])
    bumped = table([[95, 5], [5, 46]])
    assert covariance(bumped) < covariance(t) - 1e-3
