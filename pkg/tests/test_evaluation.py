import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ccbench.errors import DataError, MixedGroundTruthError
from ccbench.evaluation import (
    ErrorStats,
    EvaluationRun,
    angular_error,
    compute_stats,
    evaluate,
    read_estimates_csv,
    tabulate_runs,
    write_estimates_csv,
)
from ccbench.groundtruth import GroundTruthTable

from conftest import perpendicular, rotate

# 40-digit mpmath arccos of 2.5 / (sqrt(3) * 1.5)
ANGLE_111_VS_11HALF = 15.79316904826396294613


def test_angular_error_examples():
    assert angular_error((1, 1, 1), (2, 2, 2)) == pytest.approx(0, abs=1e-9)
    assert angular_error((1, 0, 0), (0, 1, 0)) == pytest.approx(90, abs=1e-9)
    assert angular_error((1, 1, 1), (1, 1, 0.5)) == pytest.approx(ANGLE_111_VS_11HALF, abs=1e-9)


def test_angular_error_zero_vector():
    with pytest.raises(DataError):
        angular_error((0, 0, 0), (1, 1, 1))


vec = st.tuples(*[st.floats(0.01, 100)] * 3)


@given(vec, vec, st.floats(1e-3, 1e3))
def test_angular_error_symmetry_and_scale(a, b, k):
    assert angular_error(a, b) == pytest.approx(angular_error(b, a), abs=1e-12)
    assert angular_error(a, a) <= 1e-9
    assert angular_error(np.array(a) * k, b) == pytest.approx(angular_error(a, b), abs=1e-9)


@given(vec, vec, vec)
def test_angular_error_triangle(a, b, c):
    assert angular_error(a, c) <= angular_error(a, b) + angular_error(b, c) + 1e-9


def test_stats_hand_example():
    # Q1 = 1 + 0.75 = 1.75, Q2 = 2.5, Q3 = 3.25 -> trimean 2.5
    s = compute_stats([1, 2, 3, 4])
    assert s == ErrorStats(mean=2.5, median=2.5, trimean=2.5, best25_mean=1.0,
                           worst25_mean=4.0, max=4.0)


@pytest.mark.parametrize("values, v", [([5], 5.0), ([0, 0, 0, 0], 0.0)])
def test_stats_degenerate(values, v):
    assert set(compute_stats(values).as_dict().values()) == {v}


def test_stats_empty():
    with pytest.raises(DataError):
        compute_stats([])


@settings(max_examples=60)
@given(st.lists(st.floats(0, 180), min_size=1, max_size=40), st.randoms())
def test_stats_permutation_invariant_and_ordered(values, rnd):
    s = compute_stats(values)
    shuffled = list(values)
    rnd.shuffle(shuffled)
    assert compute_stats(shuffled) == s
    eps = 1e-9
    assert s.best25_mean <= s.median + eps <= s.worst25_mean + 2 * eps <= s.max + 3 * eps
    assert 0 <= s.best25_mean and s.max <= 180


def _gt(pairs):
    return GroundTruthTable.from_items((k, v, "cam") for k, v in pairs)


def test_evaluate_oracle_is_zero():
    gt = _gt([("a", (1, 2, 3)), ("b", (3, 1, 1))])
    run = evaluate(gt.illuminants(), gt, "oracle", "subtracted", "v1")
    assert all(v == pytest.approx(0, abs=1e-9) for v in run.per_image_error.values())


def test_evaluate_single_orthogonal():
    run = evaluate({"a": (1, 0, 0)}, _gt([("a", (0, 1, 0))]))
    assert all(v == pytest.approx(90) for v in run.stats.as_dict().values())


def test_evaluate_injected_errors():
    rng = np.random.default_rng(3)
    gt, est = [], {}
    for i, deg in enumerate(range(1, 11)):
        e = rng.uniform(0.2, 1, 3)
        gt.append((f"im{i}", e))
        rotated = rotate(e, perpendicular(e), deg)
        assert np.all(rotated > 0)
        est[f"im{i}"] = rotated
    run = evaluate(est, _gt(gt))
    assert run.stats.median == pytest.approx(5.5, abs=1e-9)
    for i, deg in enumerate(range(1, 11)):
        assert run.per_image_error[f"im{i}"] == pytest.approx(deg, abs=1e-9)


def test_evaluate_empty_intersection():
    with pytest.raises(DataError):
        evaluate({"x": (1, 1, 1)}, _gt([("y", (1, 1, 1))]))


def test_unsubtracted_run_carries_warning():
    with pytest.warns(UserWarning, match="black-level"):
        run = evaluate({"a": (1, 1, 1)}, _gt([("a", (1, 1, 2))]), pipeline="unsubtracted")
    assert run.to_dict()["methodology_warning"]
    with pytest.raises(DataError):
        evaluate({"a": (1, 1, 1)}, _gt([("a", (1, 1, 2))]), pipeline="maybe")


def test_run_self_consistency_through_json():
    rng = np.random.default_rng(0)
    gt = _gt([(f"i{k}", rng.uniform(0.1, 1, 3)) for k in range(25)])
    est = {k: rng.uniform(0.1, 1, 3) for k in gt.ids}
    run = evaluate(est, gt, "gray-world", "subtracted", "gt-v2")
    back = EvaluationRun.from_dict(json.loads(run.to_json()))
    assert compute_stats(back.per_image_error.values()) == back.stats == run.stats
    assert back.per_image_error == run.per_image_error


def test_tabulate_refuses_mixed_ground_truth():
    gt = _gt([("a", (1, 2, 3))])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r1 = evaluate({"a": (1, 1, 1)}, gt, ground_truth_id="sub")
        r2 = evaluate({"a": (1, 1, 1)}, gt, pipeline="unsubtracted", ground_truth_id="unsub")
    with pytest.raises(MixedGroundTruthError):
        tabulate_runs([r1, r2])
    rows = tabulate_runs([r1, r2], force_mixed=True)
    assert [r["pipeline"] for r in rows] == ["subtracted", "unsubtracted"]


def test_estimates_csv_roundtrip(tmp_path):
    est = {"a": (0.1, 0.2, 0.3), "b": (3, 2, 1)}
    write_estimates_csv(est, tmp_path / "e.csv")
    back = read_estimates_csv(tmp_path / "e.csv")
    assert list(back) == ["a", "b"]
    assert angular_error(back["b"], (3, 2, 1)) < 1e-12


# -- oracle mismatch --------------------------------------------------------------

# 40-digit mpmath angle between raw (2500,1500,1500) and subtracted (2000,1000,1000)
SINGLE_PATCH_BL500 = 5.051152528017927


def test_single_patch_pedestal_angle():
    from ccbench.groundtruth import PatchAnnotation, extract_ground_truth
    from ccbench.imaging import LinearImage, subtract_black

    data = np.full((8, 8, 3), 500.0)
    data[2:6, 2:6] = (2500, 1500, 1500)
    raw = LinearImage(data, 500.0, 65535.0, "hand", black_subtracted=False)
    ann = PatchAnnotation("hand", ([[2, 2], [6, 2], [6, 6], [2, 6]],), inset=0.0)
    got = angular_error(extract_ground_truth(raw, ann, allow_unsubtracted=True),
                        extract_ground_truth(subtract_black(raw), ann))
    assert got == pytest.approx(SINGLE_PATCH_BL500, abs=1e-9)


@pytest.fixture(scope="module")
def small_benchmark():
    from ccbench.synthetic import make_benchmark
    return make_benchmark(12, seed=3)


def test_oracle_right_run_is_exact(small_benchmark):
    from ccbench.evaluation import oracle_mismatch_experiment

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        wrong, right = oracle_mismatch_experiment(small_benchmark, 129)
    assert right.stats.max == 0
    assert wrong.pipeline == "unsubtracted" and wrong.stats.median > 0
    assert wrong.ground_truth_id == right.ground_truth_id == "synthetic:bl=129"


def test_oracle_wrong_run_grows(small_benchmark):
    from ccbench.evaluation import oracle_mismatch_experiment

    medians = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for bl in (64, 129, 256, 512):
            medians.append(oracle_mismatch_experiment(small_benchmark, bl)[0].stats.median)
    assert medians == sorted(medians) and medians[0] > 0


def test_oracle_zero_black_level(small_benchmark):
    from ccbench.evaluation import oracle_mismatch_experiment

    wrong, _ = oracle_mismatch_experiment(small_benchmark, 0)
    assert wrong.stats.max == pytest.approx(0, abs=1e-9)


def test_frozen_angles_match_mpmath():
    mp = pytest.importorskip("mpmath")
    mp.mp.dps = 40

    def angle(u, v):
        u, v = [mp.mpf(x) for x in u], [mp.mpf(x) for x in v]
        dot = sum(a * b for a, b in zip(u, v))
        norm = mp.sqrt(sum(a * a for a in u)) * mp.sqrt(sum(b * b for b in v))
        return float(mp.degrees(mp.acos(dot / norm)))

    assert angle((1, 1, 1), (1, 1, 0.5)) == pytest.approx(ANGLE_111_VS_11HALF, abs=1e-14)
    assert angle((2500, 1500, 1500), (2000, 1000, 1000)) == pytest.approx(SINGLE_PATCH_BL500,
                                                                          abs=1e-14)
