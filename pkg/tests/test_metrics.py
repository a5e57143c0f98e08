import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from geosup.errors import EmptyEvaluationError, InvalidInputError
from geosup.metrics import EvaluationCrop, MetricReport, compute_errors, error_map, evaluate, interpolate_sparse


def naive_metrics(gt, pred):
    """Plain-Python accumulation, one pixel at a time."""
    n = len(gt)
    s = dict.fromkeys(["abs_rel", "sq_rel", "se", "sle", "log10", "a1", "a2", "a3"], 0.0)
    for g, p in zip(gt, pred):
        s["abs_rel"] += abs(p - g) / g
        s["sq_rel"] += (p - g) ** 2 / g
        s["se"] += (p - g) ** 2
        s["sle"] += (math.log(p) - math.log(g)) ** 2
        s["log10"] += abs(math.log10(p) - math.log10(g))
        r = max(g / p, p / g)
        s["a1"] += r < 1.25
        s["a2"] += r < 1.25**2
        s["a3"] += r < 1.25**3
    return {
        "abs_rel": s["abs_rel"] / n,
        "sq_rel": s["sq_rel"] / n,
        "rmse": math.sqrt(s["se"] / n),
        "rmse_log": math.sqrt(s["sle"] / n),
        "log10": s["log10"] / n,
        "a1": s["a1"] / n,
        "a2": s["a2"] / n,
        "a3": s["a3"] / n,
    }


def test_hand_case():
    r = compute_errors(np.array([1.0, 2.0, 4.0]), np.array([2.0, 2.0, 2.0]))
    assert r.abs_rel == pytest.approx(0.5)
    assert r.sq_rel == pytest.approx(2 / 3)
    assert r.rmse == pytest.approx(math.sqrt(5 / 3))
    assert r.rmse_log == pytest.approx(math.sqrt(2 * math.log(2) ** 2 / 3))
    assert r.log10 == pytest.approx(2 * math.log10(2) / 3)
    assert (r.a1, r.a2, r.a3) == pytest.approx((1 / 3, 1 / 3, 1 / 3))
    assert r.count == 3


def test_perfect_prediction(rng):
    gt = rng.uniform(1, 80, 100)
    r = compute_errors(gt, gt.copy())
    assert r.abs_rel == r.sq_rel == r.rmse == r.rmse_log == r.log10 == 0.0
    assert r.a1 == r.a2 == r.a3 == 1.0


def test_matches_naive_loop(rng):
    for _ in range(10):
        gt = rng.uniform(0.5, 80, 300)
        pred = gt * np.exp(rng.normal(scale=0.3, size=300))
        r = compute_errors(gt, pred).as_dict()
        for key, val in naive_metrics(gt, pred).items():
            assert r[key] == pytest.approx(val, rel=1e-10, abs=1e-15)


def test_threshold_is_strict():
    r = compute_errors(np.array([1.0]), np.array([1.25]))
    assert r.a1 == 0.0 and r.a2 == 1.0


def test_evaluate_filters_and_clamps():
    gt = np.array([[0.0, 10.0, 90.0], [np.nan, 5.0, 20.0]])
    pred = np.array([[1.0, 100.0, 50.0], [1.0, 0.0, 20.0]])
    r = evaluate(pred, gt, cap=80.0)
    # kept: 10 (pred clamped to 80), 5 (pred clamped to 1e-3), 20 (exact)
    assert r.count == 3
    expected = naive_metrics([10.0, 5.0, 20.0], [80.0, 1e-3, 20.0])
    assert r.abs_rel == pytest.approx(expected["abs_rel"])
    r2 = evaluate(pred, gt, cap=80.0, filter_gt_by_cap=False)
    assert r2.count == 4


def test_garg_crop_fractions():
    crop = EvaluationCrop.garg()
    m = crop.mask((375, 1242))
    rows = np.nonzero(m.any(axis=1))[0]
    cols = np.nonzero(m.any(axis=0))[0]
    assert (rows[0], rows[-1] + 1) == (int(0.40810811 * 375), int(0.99189189 * 375))
    assert (cols[0], cols[-1] + 1) == (int(0.03594771 * 1242), int(0.96405229 * 1242))
    assert EvaluationCrop.full().mask((3, 4)).all()


def test_crop_excludes_pixels():
    gt = np.full((10, 10), 5.0)
    pred = np.full((10, 10), 5.0)
    pred[0] = 50.0  # only the top row is wrong
    assert evaluate(pred, gt).abs_rel > 0
    assert evaluate(pred, gt, crop=EvaluationCrop(top=0.1)).abs_rel == 0.0


def test_cap_monotone_count(rng):
    gt = rng.uniform(1, 100, (20, 20))
    pred = gt * 1.1
    counts = [evaluate(pred, gt, cap=c).count for c in (10, 50, 80)]
    assert counts == sorted(counts) and counts[0] < counts[-1]


def test_errors():
    with pytest.raises(EmptyEvaluationError):
        evaluate(np.ones((3, 3)), np.zeros((3, 3)))
    with pytest.raises(InvalidInputError):
        evaluate(np.ones((3, 3)), np.ones((3, 4)))
    with pytest.raises(InvalidInputError):
        evaluate(np.ones((3, 3)), np.ones((3, 3)), cap=0.0)
    with pytest.raises(InvalidInputError):
        evaluate(np.zeros((3, 3)), np.ones((3, 3)), clamp_pred=False)
    with pytest.raises(EmptyEvaluationError):
        MetricReport.mean([])


def test_mean_is_unweighted():
    a = compute_errors(np.array([1.0]), np.array([2.0]))
    b = compute_errors(np.array([1.0, 1.0, 1.0]), np.array([1.0, 1.0, 1.0]))
    m = MetricReport.mean([a, b])
    assert m.abs_rel == pytest.approx(0.5) and m.count == 4


def test_error_map():
    gt = np.array([[2.0, 0.0], [4.0, np.nan]])
    em = error_map(np.array([[1.0, 1.0], [4.0, 1.0]]), gt)
    np.testing.assert_allclose(em, [[0.5, np.nan], [0.0, np.nan]])


class TestInterpolation:
    def test_reproduces_valid_and_linear(self):
        ys, xs = np.mgrid[0:12, 0:15].astype(float)
        plane = 2.0 + 0.3 * xs + 0.1 * ys
        sparse = np.zeros_like(plane)
        sparse[::3, ::2] = plane[::3, ::2]
        dense = interpolate_sparse(sparse)
        m = sparse > 0
        np.testing.assert_array_equal(dense[m], sparse[m])
        # a linear field is reproduced exactly inside the hull
        inside = (ys <= 9) & (xs <= 14)
        np.testing.assert_allclose(dense[inside], plane[inside], atol=1e-9)
        assert np.all(np.isfinite(dense))

    def test_too_few_or_collinear(self):
        gt = np.zeros((5, 5))
        gt[0, 0] = gt[1, 1] = 1.0
        with pytest.raises(InvalidInputError):
            interpolate_sparse(gt)
        gt[2, 2] = 1.0
        with pytest.raises(InvalidInputError):
            interpolate_sparse(gt)


@settings(max_examples=100, deadline=None)
@given(
    gt=arrays(np.float64, st.integers(1, 50), elements=st.floats(0.1, 100)),
    factor=st.floats(0.2, 5.0),
)
def test_property_ranges(gt, factor):
    r = compute_errors(gt, gt * factor)
    assert 0 <= r.a1 <= r.a2 <= r.a3 <= 1
    assert r.abs_rel == pytest.approx(abs(factor - 1), rel=1e-9, abs=1e-12)
    assert r.log10 == pytest.approx(abs(math.log10(factor)), rel=1e-9, abs=1e-12)
