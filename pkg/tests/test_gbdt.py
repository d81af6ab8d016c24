"""Learner correctness: split search vs exhaustive oracle, boosting
contracts, determinism, and bundle serialization.
"""

import json

import numpy as np
import pandas as pd
import pytest

from trendmeter.config import GbdtParams
from trendmeter.errors import SchemaMismatchError
from trendmeter.features import (
    CategoricalDictionary,
    FeatureMatrix,
    FeatureSchema,
    FeatureSpec,
)
from trendmeter.gbdt import (
    BinMapper,
    find_best_split,
    load_bundle,
    predict,
    save_bundle,
    train,
)
from trendmeter.gbdt.boosting import assign_folds, predict_log
from trendmeter.gbdt.bundle_io import bundle_to_dict


def exhaustive_numeric_split(X, residuals, min_leaf):
    """Brute-force best split over all midpoint thresholds and missing
    directions; the independent oracle for the histogram path."""
    n = len(residuals)
    total = residuals.sum()
    parent = total**2 / n
    best = None
    for j in range(X.shape[1]):
        col = X[:, j]
        missing = np.isnan(col)
        uniq = np.unique(col[~missing])
        for k in range(len(uniq) - 1):
            threshold = (uniq[k] + uniq[k + 1]) / 2.0
            for miss_left in (True, False):
                go_left = np.where(missing, miss_left, col <= threshold)
                n_left = int(go_left.sum())
                if n_left < min_leaf or n - n_left < min_leaf:
                    continue
                gain = (
                    residuals[go_left].sum() ** 2 / n_left
                    + residuals[~go_left].sum() ** 2 / (n - n_left)
                    - parent
                )
                if best is None or gain > best[0] + 1e-12:
                    best = (gain, j, threshold, miss_left)
    return best


def _numeric_mapper(X, n_bins=256):
    kinds = ["numeric"] * X.shape[1]
    return BinMapper.fit(X, kinds, n_bins)


def _split(X, residuals, min_leaf=1, n_bins=256):
    mapper = _numeric_mapper(X, n_bins)
    binned = mapper.transform(X)
    rows = np.arange(len(X), dtype=np.intp)
    features = np.arange(X.shape[1])
    return find_best_split(binned, residuals, rows, mapper, features, min_leaf)


def test_step_target_splits_between_two_and_three():
    # gains frozen from the exhaustive oracle: (100/3, 100, 100/3) for
    # thresholds 1.5, 2.5, 3.5; the middle split wins
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    r = np.array([0.0, 0.0, 10.0, 10.0])
    oracle = exhaustive_numeric_split(X, r, 1)
    assert oracle[0] == pytest.approx(100.0)
    assert oracle[2] == pytest.approx(2.5)
    gains = []
    for k in range(3):
        thr = [1.5, 2.5, 3.5][k]
        go_left = X[:, 0] <= thr
        nl = go_left.sum()
        gains.append(
            r[go_left].sum() ** 2 / nl
            + r[~go_left].sum() ** 2 / (4 - nl)
            - r.sum() ** 2 / 4
        )
    np.testing.assert_allclose(gains, [100.0 / 3.0, 100.0, 100.0 / 3.0])

    candidate = _split(X, r)
    assert candidate.threshold == pytest.approx(2.5)
    assert candidate.gain == pytest.approx(100.0)


def test_constant_target_yields_no_split():
    X = np.array([[1.0], [2.0], [3.0], [4.0]])
    r = np.full(4, 5.0)
    assert _split(X, r) is None


def test_split_matches_exhaustive_search_on_seeded_instances():
    # lossless binning (n_bins >= distinct values) must equal the oracle
    for seed in range(60):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(8, 65))
        p = int(rng.integers(1, 4))
        X = rng.normal(0, 1, (n, p))
        if seed % 3 == 0:
            X[rng.random((n, p)) < 0.2] = np.nan
        r = rng.normal(0, 1, n)
        oracle = exhaustive_numeric_split(X, r, 2)
        got = _split(X, r, min_leaf=2)
        if oracle is None or oracle[0] <= 1e-6:
            continue
        assert got is not None
        assert got.gain == pytest.approx(oracle[0], rel=1e-9)


def test_tie_breaks_prefer_lowest_feature_then_threshold():
    X = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0], [4.0, 4.0]])
    r = np.array([0.0, 0.0, 10.0, 10.0])
    candidate = _split(X, r)
    assert candidate.feature == 0
    assert candidate.threshold == pytest.approx(2.5)


def test_categorical_prefix_split_matches_subset_enumeration():
    # Fisher: sorting categories by mean residual makes some prefix
    # optimal among all subsets, so the prefix scan must match brute
    # force over every 2^k partition
    from itertools import combinations

    for seed in range(30):
        rng = np.random.default_rng(seed + 100)
        k = int(rng.integers(3, 6))
        n = int(rng.integers(20, 50))
        codes = rng.integers(0, k, n).astype(float)
        r = rng.normal(0, 1, n) + 0.8 * codes
        X = codes.reshape(-1, 1)
        mapper = BinMapper.fit(X, ["categorical"], 256)
        binned = mapper.transform(X)
        got = find_best_split(
            binned, r, np.arange(n, dtype=np.intp), mapper, np.array([0]), 1
        )
        parent = r.sum() ** 2 / n
        best_gain = -np.inf
        cats = sorted(set(codes.astype(int).tolist()))
        for size in range(1, len(cats)):
            for subset in combinations(cats, size):
                go_left = np.isin(codes, subset)
                nl = int(go_left.sum())
                if nl == 0 or nl == n:
                    continue
                gain = (
                    r[go_left].sum() ** 2 / nl
                    + r[~go_left].sum() ** 2 / (n - nl)
                    - parent
                )
                best_gain = max(best_gain, gain)
        if best_gain <= 1e-6:
            continue
        assert got is not None
        assert got.categories is not None
        assert got.gain == pytest.approx(best_gain, rel=1e-9)


def _matrix_from_arrays(X, meter="m0"):
    schema = FeatureSchema(
        tuple(
            FeatureSpec(f"x{j}", "numeric", "weather")
            for j in range(X.shape[1])
        )
    )
    n = len(X)
    timestamps = pd.date_range("2016-01-01", periods=n, freq="h").to_numpy()
    return FeatureMatrix(
        schema=schema,
        columns={f"x{j}": X[:, j].copy() for j in range(X.shape[1])},
        meter_ids=np.full(n, meter, dtype=object),
        timestamps=timestamps,
        encoded=True,
    )


def _params(**kw):
    defaults = dict(
        n_trees=10, learning_rate=0.5, max_leaves=8, min_samples_leaf=1,
        feature_fraction=1.0, row_fraction=1.0, n_bins=255, seed=3, n_folds=2,
    )
    defaults.update(kw)
    return GbdtParams(**defaults)


def test_zero_trees_predicts_training_mean():
    rng = np.random.default_rng(0)
    X = rng.normal(0, 1, (40, 2))
    y = np.full(40, np.log(1 + 5.0))
    matrix = _matrix_from_arrays(X)
    bundle = train(matrix, y, _params(n_trees=0))
    assert bundle.base_scores == [pytest.approx(np.log(6.0))] * 2
    out = predict(bundle, matrix)
    np.testing.assert_allclose(out, 5.0, rtol=1e-12)


def test_single_split_fixture_reaches_zero_training_error():
    rng = np.random.default_rng(1)
    x = rng.normal(0, 2, 64)
    y = (x > 0).astype(float)
    matrix = _matrix_from_arrays(x.reshape(-1, 1))
    bundle = train(
        matrix, y, _params(n_trees=1, learning_rate=1.0, max_leaves=2)
    )
    fold_id = assign_folds(matrix.meter_ids, matrix.timestamps, 2)
    X_arr = matrix.to_array()
    for fold, (trees, base) in enumerate(
        zip(bundle.fold_ensembles, bundle.base_scores)
    ):
        rows = fold_id != fold
        (tree,) = trees
        split = tree.nodes[0]
        assert not split.is_leaf
        x_fold = x[rows]
        left_of_zero = max(x_fold[x_fold <= 0])
        right_of_zero = min(x_fold[x_fold > 0])
        assert left_of_zero <= split.threshold <= right_of_zero
        # base + leaf values give the exact {0, 1} targets
        fold_pred = base + tree.apply(X_arr[rows])
        np.testing.assert_allclose(fold_pred, y[rows], atol=1e-12)
        leaf_preds = sorted(
            base + n.value for n in tree.nodes if n.is_leaf
        )
        np.testing.assert_allclose(leaf_preds, [0.0, 1.0], atol=1e-12)


def test_training_deterministic_bit_identical():
    rng = np.random.default_rng(2)
    X = rng.normal(0, 1, (300, 4))
    y = X[:, 0] * 2 + np.sin(X[:, 1]) + rng.normal(0, 0.1, 300)
    matrix = _matrix_from_arrays(X)
    params = _params(n_trees=20, feature_fraction=0.7, row_fraction=0.8)
    one = bundle_to_dict(train(matrix, y, params))
    two = bundle_to_dict(train(matrix, y, params))
    one.pop("created_at")
    two.pop("created_at")
    assert json.dumps(one, sort_keys=True) == json.dumps(two, sort_keys=True)


def test_training_loss_non_increasing_with_full_sampling():
    rng = np.random.default_rng(3)
    X = rng.normal(0, 1, (400, 3))
    y = X[:, 0] - 0.5 * X[:, 1] ** 2 + rng.normal(0, 0.3, 400)
    matrix = _matrix_from_arrays(X)
    params = _params(
        n_trees=40, learning_rate=0.3, n_folds=2,
        feature_fraction=1.0, row_fraction=1.0, min_samples_leaf=5,
    )
    bundle = train(matrix, y, params)

    fold_id = assign_folds(matrix.meter_ids, matrix.timestamps, 2)
    X_arr = matrix.to_array()
    for fold, trees in enumerate(bundle.fold_ensembles):
        rows = fold_id != fold
        current = np.full(int(rows.sum()), bundle.base_scores[fold])
        losses = [np.sqrt(np.mean((y[rows] - current) ** 2))]
        for tree in trees:
            current = current + params.learning_rate * tree.apply(X_arr[rows])
            losses.append(np.sqrt(np.mean((y[rows] - current) ** 2)))
        diffs = np.diff(losses)
        assert np.all(diffs <= 1e-12)


def test_fold_blocks_are_contiguous_per_meter():
    ids = np.array(["a"] * 10 + ["b"] * 7, dtype=object)
    ts = pd.date_range("2016-01-01", periods=10, freq="h").to_numpy()
    ts = np.concatenate([ts, ts[:7]])
    folds = assign_folds(ids, ts, 3)
    a, b = folds[:10], folds[10:]
    assert list(a) == sorted(a)
    assert list(b) == sorted(b)
    assert set(a) == {0, 1, 2}
    assert set(b) == {0, 1, 2}


def test_two_folds_log_average():
    matrix = _matrix_from_arrays(np.zeros((4, 1)))
    bundle = train(matrix, np.zeros(4), _params(n_trees=0))
    bundle.base_scores = [1.0, 3.0]
    out = predict(bundle, matrix)
    np.testing.assert_allclose(out, np.expm1(2.0))


def test_all_missing_rows_route_to_leaves():
    rng = np.random.default_rng(4)
    X = rng.normal(0, 1, (200, 3))
    y = X[:, 0] + rng.normal(0, 0.1, 200)
    matrix = _matrix_from_arrays(X)
    bundle = train(matrix, y, _params(n_trees=5, min_samples_leaf=5))
    X_missing = np.full((7, 3), np.nan)
    out = predict(bundle, _matrix_from_arrays(X_missing))
    assert np.all(np.isfinite(out))
    assert np.all(out >= 0)


def test_constant_target_base_only_flagged():
    rng = np.random.default_rng(5)
    X = rng.normal(0, 1, (50, 2))
    y = np.full(50, 2.0)
    bundle = train(_matrix_from_arrays(X), y, _params())
    assert bundle.constant_target
    assert all(len(trees) == 0 for trees in bundle.fold_ensembles)


def test_bundle_roundtrip_exact(tmp_path):
    rng = np.random.default_rng(6)
    n = 300
    X = rng.normal(0, 1, (n, 2))
    codes = rng.integers(0, 4, n).astype(float)
    schema = FeatureSchema(
        (
            FeatureSpec("x0", "numeric", "weather"),
            FeatureSpec("x1", "numeric", "weather"),
            FeatureSpec("use", "categorical", "meta"),
        )
    )
    matrix = FeatureMatrix(
        schema=schema,
        columns={"x0": X[:, 0], "x1": X[:, 1], "use": codes},
        meter_ids=np.full(n, "m0", dtype=object),
        timestamps=pd.date_range("2016-01-01", periods=n, freq="h").to_numpy(),
        encoded=True,
    )
    y = X[:, 0] + 0.5 * codes + rng.normal(0, 0.1, n)
    dictionary = CategoricalDictionary({"use": {"a": 0, "b": 1, "c": 2, "d": 3}})
    bundle = train(matrix, y, _params(n_trees=8, min_samples_leaf=4), dictionary)

    path = tmp_path / "bundle.json"
    save_bundle(bundle, path)
    loaded = load_bundle(path)
    assert bundle_to_dict(loaded) == bundle_to_dict(bundle)
    np.testing.assert_array_equal(predict(loaded, matrix), predict(bundle, matrix))
    # save -> load -> save is byte-stable
    path2 = tmp_path / "bundle2.json"
    save_bundle(loaded, path2)
    assert path.read_text() == path2.read_text()


def test_schema_mismatch_rejected():
    rng = np.random.default_rng(7)
    X = rng.normal(0, 1, (40, 2))
    bundle = train(_matrix_from_arrays(X), X[:, 0], _params(n_trees=2))
    other = _matrix_from_arrays(rng.normal(0, 1, (10, 3)))
    with pytest.raises(SchemaMismatchError):
        predict(bundle, other)


def test_categorical_split_used_when_informative():
    rng = np.random.default_rng(8)
    n = 400
    codes = rng.integers(0, 5, n).astype(float)
    y = np.where(np.isin(codes, (1, 3)), 4.0, 1.0) + rng.normal(0, 0.05, n)
    schema = FeatureSchema((FeatureSpec("use", "categorical", "meta"),))
    matrix = FeatureMatrix(
        schema=schema,
        columns={"use": codes},
        meter_ids=np.full(n, "m0", dtype=object),
        timestamps=pd.date_range("2016-01-01", periods=n, freq="h").to_numpy(),
        encoded=True,
    )
    bundle = train(matrix, y, _params(n_trees=3, min_samples_leaf=5))
    split = bundle.fold_ensembles[0][0].nodes[0]
    assert split.categories is not None
    assert set(split.categories) in ({1, 3}, {0, 2, 4})
