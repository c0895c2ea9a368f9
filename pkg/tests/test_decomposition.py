import numpy as np
import pytest

from homlab.decomposition import (
    SEQUENTIAL,
    WITH_INTERACTION,
    cumulative_series,
    decompose,
)
from homlab.errors import InsufficientDataError, ShapeError
from homlab.tables import ContingencyTable, TableWithSingles, homogamy_share, marginals


def table(counts):
    return ContingencyTable(np.array(counts, dtype=float), ("L", "H"), ("L", "H"))


EARLY = table([[40, 10], [20, 30]])
LATE = table([[20, 20], [10, 50]])


def random_pair(rng):
    return (
        table(rng.integers(1, 51, size=(2, 2))),
        table(rng.integers(1, 51, size=(2, 2))),
    )


def test_no_change_means_no_effects():
    for scheme in (SEQUENTIAL, WITH_INTERACTION):
        result = decompose(EARLY, EARLY, "nm", scheme)
        assert result.nonstructural_effect == pytest.approx(0.0, abs=1e-12)
        assert result.structural_effect == pytest.approx(0.0, abs=1e-12)
        if scheme == WITH_INTERACTION:
            assert result.interaction_effect == pytest.approx(0.0, abs=1e-12)


def test_pure_structural_change_under_raking():
    # a later table built by raking the early one carries the same odds
    # ratio, so the raking-based decomposition sees no sorting change
    from homlab.counterfactual import ipf_fit

    late = ipf_fit(EARLY, marginals(table([[30, 20], [25, 25]])), tol=1e-13).table
    result = decompose(EARLY, late, "ipf", SEQUENTIAL, tol=1e-13)
    assert result.nonstructural_effect == pytest.approx(0.0, abs=1e-9)
    assert result.structural_effect == pytest.approx(
        homogamy_share(late) - homogamy_share(EARLY), abs=1e-9
    )


def test_nm_example_pair():
    # both generations have share 0.70; the sorting-only counterfactual
    # lands at 61/90 so the two effects offset exactly
    result = decompose(EARLY, LATE, "nm", SEQUENTIAL)
    assert result.share_early == pytest.approx(0.70)
    assert result.share_late == pytest.approx(0.70)
    assert result.share_counterfactual == pytest.approx(61 / 90, abs=1e-12)
    assert result.nonstructural_effect == pytest.approx(61 / 90 - 0.70, abs=1e-12)
    assert result.structural_effect == pytest.approx(0.70 - 61 / 90, abs=1e-12)


def test_labels_must_match():
    other = ContingencyTable(LATE.counts, ("lo", "hi"), ("lo", "hi"))
    with pytest.raises(ShapeError):
        decompose(EARLY, other, "nm")


@pytest.mark.parametrize("method", ["ipf", "mdba", "meda", "nm"])
@pytest.mark.parametrize("scheme", [SEQUENTIAL, WITH_INTERACTION])
def test_additivity(method, scheme):
    from homlab.errors import InfeasibilityError

    rng = np.random.default_rng(13)
    done = 0
    while done < 40:
        early, late = random_pair(rng)
        try:
            result = decompose(early, late, method, scheme, tol=1e-12)
        except InfeasibilityError:
            continue
        delta = result.share_late - result.share_early
        parts = result.nonstructural_effect + result.structural_effect
        if scheme == WITH_INTERACTION:
            parts += result.interaction_effect
            assert result.interaction_effect is not None
        else:
            assert result.interaction_effect is None
        assert parts == pytest.approx(delta, abs=1e-12)
        done += 1


def test_csa_additivity_with_singles():
    from homlab.errors import InfeasibilityError

    rng = np.random.default_rng(19)
    done = 0
    while done < 10:
        early, late = random_pair(rng)
        tws_early = TableWithSingles(early, rng.integers(1, 31, 2), rng.integers(1, 31, 2))
        tws_late = TableWithSingles(late, rng.integers(1, 31, 2), rng.integers(1, 31, 2))
        try:
            result = decompose(tws_early, tws_late, "csa", WITH_INTERACTION)
        except InfeasibilityError:
            continue
        delta = result.share_late - result.share_early
        assert (
            result.nonstructural_effect
            + result.structural_effect
            + result.interaction_effect
        ) == pytest.approx(delta, abs=1e-12)
        done += 1


def test_swapping_generations_negates_sorting_plus_interaction():
    from homlab.errors import InfeasibilityError

    rng = np.random.default_rng(23)
    done = 0
    while done < 25:
        early, late = random_pair(rng)
        try:
            forward = decompose(early, late, "ipf", WITH_INTERACTION, tol=1e-13)
            backward = decompose(late, early, "ipf", WITH_INTERACTION, tol=1e-13)
        except InfeasibilityError:
            continue
        assert backward.nonstructural_effect == pytest.approx(
            -(forward.nonstructural_effect + forward.interaction_effect), abs=1e-9
        )
        done += 1


def test_method_choice_drives_the_sign_on_the_divergence_fixture():
    early = table([[54, 20], [27, 61]])
    late = table([[34, 65], [5, 50]])
    ipf = decompose(early, late, "ipf", SEQUENTIAL)
    nm = decompose(early, late, "nm", SEQUENTIAL)
    assert ipf.nonstructural_effect < -0.01
    assert nm.nonstructural_effect > 0.01


# ---------------------------------------------------------------------------
# cumulative series
# ---------------------------------------------------------------------------

WAVES = (1960, 1970, 1980, 1990)


def test_constant_panel_is_flat():
    tables = {year: EARLY for year in WAVES}
    series = cumulative_series(WAVES, tables, "nm")
    assert series.anchor_year == 1960
    assert series.anchor_value == pytest.approx(0.70)
    assert all(
        value == pytest.approx(0.70, abs=1e-12)
        for value in series.cumulative.values()
    )
    assert all(e == pytest.approx(0.0, abs=1e-12) for e in series.effects.values())


def test_two_wave_series_matches_decompose():
    tables = {1960: EARLY, 1970: LATE}
    series = cumulative_series((1960, 1970), tables, "nm")
    effect = decompose(EARLY, LATE, "nm").nonstructural_effect
    assert series.cumulative[1970] == pytest.approx(0.70 + effect, abs=1e-12)


def test_three_wave_cumulation():
    # effects cumulate: share path v, v + e1, v + e1 + e2
    t0 = table([[40, 10], [20, 30]])
    t1 = table([[36, 14], [24, 26]])
    t2 = table([[44, 6], [16, 34]])
    series = cumulative_series((1960, 1970, 1980), {1960: t0, 1970: t1, 1980: t2}, "nm")
    e1 = decompose(t0, t1, "nm").nonstructural_effect
    e2 = decompose(t1, t2, "nm").nonstructural_effect
    assert series.cumulative[1960] == pytest.approx(0.70)
    assert series.cumulative[1970] == pytest.approx(0.70 + e1, abs=1e-12)
    assert series.cumulative[1980] == pytest.approx(0.70 + e1 + e2, abs=1e-12)


def test_missing_wave_leaves_gaps():
    tables = {1960: EARLY, 1980: LATE, 1990: EARLY}
    series = cumulative_series((1960, 1970, 1980, 1990), tables, "nm")
    assert series.anchor_year == 1960
    assert series.effects["1960s"] is None
    assert series.effects["1970s"] is None
    assert series.effects["1980s"] is not None
    assert series.cumulative[1970] is None
    assert series.cumulative[1980] is None
    assert series.cumulative[1990] is None  # unanchored after the gap


def test_single_wave_is_insufficient():
    with pytest.raises(InsufficientDataError):
        cumulative_series(WAVES, {1960: EARLY}, "nm")
