import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnn_recommender.ability import load_default_params
from cnn_recommender.archgen import load_bundled_table, spec_macs, reference_specs
from cnn_recommender.errors import CurveError, InputError, MatchingError
from cnn_recommender.matcher import (
    CalibrationPair,
    ScoredCandidate,
    balance_models,
    estimate_forward_time,
    fit_matching,
    fit_performance_curve,
    load_calibration_pairs,
    load_matching,
    pool_adjacent_violators,
    predict_rate,
    recommend,
    recommend_from_scores,
    sample_curve,
    save_calibration_pairs,
    save_matching,
    score_candidates,
    suggest_small_anchor,
)

PAIRS = [(0.55, 6.5), (0.7, 6.1), (0.85, 5.7), (0.95, 5.4)]


@pytest.fixture(scope="module")
def published():
    return score_candidates(load_bundled_table(), load_default_params(), use_published=True)


def test_linear_matching_fit_and_clamp():
    m = fit_matching([(0.6, 6.0), (0.8, 5.0)])
    assert m.slope == pytest.approx(-5.0)
    assert m(0.7) == pytest.approx(5.5)
    # outside the calibrated range the end values hold
    assert m(0.3) == pytest.approx(6.0)
    assert m(0.99) == pytest.approx(5.0)


def test_linear_matching_rejects_rising_fit():
    with pytest.raises(MatchingError):
        fit_matching([(0.6, 5.0), (0.8, 6.0)])


def test_matching_needs_two_distinct_points():
    with pytest.raises(MatchingError):
        fit_matching([(0.6, 5.0)])
    with pytest.raises(MatchingError):
        fit_matching([(0.6, 5.0), (0.6, 6.0)], kind="isotonic-decreasing")


def test_isotonic_keeps_decreasing_pairs():
    m = fit_matching(PAIRS, kind="isotonic-decreasing")
    assert m.breakpoints == tuple(PAIRS)


def test_isotonic_pools_violators():
    m = fit_matching([(0.1, 5.0), (0.2, 6.0), (0.3, 4.0)], kind="isotonic-decreasing")
    assert [chi for _, chi in m.breakpoints] == pytest.approx([5.5, 5.5, 4.0])
    # duplicate C_all values collapse into their mean first
    m = fit_matching([(0.1, 6.0), (0.1, 5.0), (0.3, 4.0)], kind="isotonic-decreasing")
    assert m.breakpoints == ((0.1, 5.5), (0.3, 4.0))


def test_pool_adjacent_violators_is_nondecreasing():
    fitted = pool_adjacent_violators([3.0, 1.0, 2.0, 5.0, 4.0])
    assert list(fitted) == pytest.approx([2.0, 2.0, 2.0, 4.5, 4.5])


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(st.floats(0.01, 0.99), st.floats(1.0, 10.0)),
        min_size=2,
        max_size=12,
        unique_by=lambda p: p[0],
    )
)
def test_isotonic_matching_is_non_increasing(pairs):
    m = fit_matching(pairs, kind="isotonic-decreasing")
    grid = np.linspace(0.0, 1.0, 201)
    values = [m(c) for c in grid]
    assert all(b <= a + 1e-9 for a, b in zip(values, values[1:]))


@settings(max_examples=100, deadline=None)
@given(st.floats(6.12, 6.34, exclude_min=True))
def test_targets_between_model4_and_model5_choose_model5(published, target):
    chosen, undershoot = recommend_from_scores(target, published)
    assert chosen.name == "Model-5"
    assert not undershoot


def test_unreachable_target_returns_strongest(published):
    chosen, undershoot = recommend_from_scores(7.0, published)
    assert chosen.name == "Model-6"
    assert undershoot


def test_ties_prefer_fewer_macs():
    small, large = reference_specs()[0][1], reference_specs()[1][1]
    scored = [
        ScoredCandidate("large", large, 6.0, spec_macs(large)),
        ScoredCandidate("small", small, 6.0, spec_macs(small)),
    ]
    assert recommend_from_scores(5.9, scored)[0].name == "small"
    assert recommend_from_scores(9.9, scored)[0].name == "small"


def test_empty_candidates():
    with pytest.raises(InputError):
        recommend_from_scores(6.0, [])


def test_margin_is_monotone(published):
    m = fit_matching(PAIRS)
    chosen = [recommend(0.8, published, load_default_params(), m, margin=x).chosen.chi for x in np.linspace(0, 0.3, 31)]
    assert chosen == sorted(chosen)


def test_harder_task_never_gets_weaker_model(published):
    m = fit_matching(PAIRS)
    params = load_default_params()
    chosen = [recommend(c, published, params, m).chosen.chi for c in np.linspace(0.99, 0.5, 50)]
    assert chosen == sorted(chosen)


def test_recommendation_document(published):
    rec = recommend(0.7, published, load_default_params(), fit_matching(PAIRS), margin=0.0)
    assert rec.matched_chi == pytest.approx(6.1, abs=0.05)
    assert rec.chosen.chi >= rec.target_chi
    doc = rec.to_dict()
    assert doc["chosen"]["name"] == rec.chosen.name
    assert len(doc["candidates"]) == 6
    assert rec == recommend(0.7, published, load_default_params(), fit_matching(PAIRS), margin=0.0)


def test_computed_scores_are_used_for_plain_specs():
    params = load_default_params()
    rec = recommend(0.7, [spec for _, spec, _ in reference_specs()], params, fit_matching(PAIRS))
    assert rec.chosen.macs == spec_macs(rec.chosen.spec)


def test_prescored_and_plain_candidates_mix(published):
    model6 = next(c for c in published if c.name == "Model-6")
    plain = [spec for _, spec, _ in reference_specs()[:2]]
    rec = recommend(0.5, [plain[0], model6, plain[1]], load_default_params(), fit_matching([(0.5, 99.0), (0.9, 98.0)]))
    assert len(rec.table) == 3
    assert model6 in rec.table
    assert rec.chosen == model6
    assert rec.undershoot


def test_single_candidate_is_returned_flagged():
    spec = reference_specs()[0][1]
    rec = recommend(0.55, [spec], load_default_params(), fit_matching(PAIRS))
    assert rec.chosen.spec == spec
    assert rec.undershoot


def test_small_anchor_for_model5(published):
    model5 = next(c for c in published if c.name == "Model-5")
    assert suggest_small_anchor(model5, published).name == "Model-3"
    model1 = next(c for c in published if c.name == "Model-1")
    assert suggest_small_anchor(model1, published) is None


def test_curve_through_anchors():
    curve = fit_performance_curve((1.0, 0.9), (math.e, 0.95))
    assert curve.b == pytest.approx(0.05)
    assert curve.a == pytest.approx(0.9)
    assert fit_performance_curve((math.e, 0.95), (1.0, 0.9)) == curve


@settings(max_examples=50, deadline=None)
@given(
    st.floats(1e-4, 1.0),
    st.floats(1.5, 100.0),
    st.floats(0.0, 0.9),
    st.floats(0.01, 0.1),
    st.floats(0.01, 0.99),
)
def test_curve_interpolates(t1, ratio, r1, gain, where):
    t2 = t1 * ratio
    curve = fit_performance_curve((t1, r1), (t2, r1 + gain))
    assert abs(curve.raw(t1) - r1) < 1e-9
    assert abs(curve.raw(t2) - (r1 + gain)) < 1e-9
    t = t1 + where * (t2 - t1)
    assert r1 <= predict_rate(curve, t) <= r1 + gain


def test_curve_errors():
    with pytest.raises(CurveError):
        fit_performance_curve((1.0, 0.9), (1.0, 0.95))
    with pytest.raises(CurveError):
        fit_performance_curve((0.0, 0.9), (1.0, 0.95))
    with pytest.raises(CurveError):
        fit_performance_curve((1.0, 1.2), (2.0, 0.95))
    curve = fit_performance_curve((1.0, 0.9), (2.0, 0.95))
    with pytest.raises(CurveError):
        predict_rate(curve, 0.0)


def test_prediction_is_clipped():
    curve = fit_performance_curve((1.0, 0.9), (2.0, 0.99))
    assert predict_rate(curve, 1e6) == 1.0
    assert predict_rate(curve, 1e-30) == 0.0


def test_sample_curve_rows():
    curve = fit_performance_curve((0.01, 0.9), (0.1, 0.95))
    rows = sample_curve(curve, 50)
    assert len(rows) == 52
    anchors = [row for row in rows if row[2] == 1]
    assert anchors == [(0.01, 0.9, 1), (0.1, 0.95, 1)]
    for t, rate, flag in rows:
        if not flag:
            assert rate == predict_rate(curve, t)
    assert [row[0] for row in rows] == sorted(row[0] for row in rows)


def test_forward_time_estimate():
    model1, model5 = reference_specs()[0][1], reference_specs()[4][1]
    assert estimate_forward_time(model1, spec_macs(model1)) == 1.0
    assert estimate_forward_time(model1, 2e9) == pytest.approx(estimate_forward_time(model1, 1e9) / 2)
    assert estimate_forward_time(model5, 1e9) > estimate_forward_time(model1, 1e9)
    with pytest.raises(InputError):
        estimate_forward_time(model1, 0.0)


def test_balance_models(published):
    curve = fit_performance_curve((spec_macs(reference_specs()[2][1]) / 1e9, 0.90), (spec_macs(reference_specs()[4][1]) / 1e9, 0.95))
    table = balance_models(curve, published, 1e9, min_rate=0.92, max_time=0.2)
    assert [row.name for row in table.rows] == ["Model-1", "Model-2", "Model-3", "Model-4", "Model-5", "Model-6"]
    assert table.fastest_meeting_rate.name == "Model-4"
    assert table.best_within_time.name == "Model-3"


def test_calibration_and_matching_files(tmp_path):
    pairs = [CalibrationPair(task=f"t{i}", c_all=c, chi_optimal=chi) for i, (c, chi) in enumerate(PAIRS)]
    path = tmp_path / "pairs.jsonl"
    save_calibration_pairs(str(path), pairs)
    assert load_calibration_pairs(str(path)) == pairs
    m = fit_matching(pairs, kind="isotonic-decreasing")
    saved = tmp_path / "m.json"
    save_matching(str(saved), m)
    assert load_matching(str(saved)) == m
