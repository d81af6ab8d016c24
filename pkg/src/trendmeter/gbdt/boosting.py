"""Boosted ensembles over complementary temporal folds.

Rows partition into contiguous time blocks per meter; each fold's
ensemble boosts squared-error residuals on the other folds' rows.
Prediction averages the folds in log space and inverts with expm1.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from ..config import GbdtParams
from ..errors import DataError, SchemaMismatchError
from ..features import CategoricalDictionary, FeatureMatrix, FeatureSchema
from .binning import BinMapper
from .tree import Tree, grow_tree


@dataclass
class ModelBundle:
    params: GbdtParams
    schema: FeatureSchema
    dictionary: CategoricalDictionary
    fold_ensembles: list[list[Tree]]
    base_scores: list[float]
    data_hash: str
    seed: int
    created_at: str = ""
    constant_target: bool = False
    meta: dict = field(default_factory=dict)


def matrix_hash(X: np.ndarray, y: np.ndarray) -> str:
    digest = hashlib.sha256()
    digest.update(np.ascontiguousarray(X).tobytes())
    digest.update(np.ascontiguousarray(y).tobytes())
    return digest.hexdigest()


def assign_folds(
    meter_ids: np.ndarray, timestamps: np.ndarray, n_folds: int
) -> np.ndarray:
    """Contiguous time blocks per meter, balanced by row count.

    Rows are expected ordered by (meter_id, timestamp); the assignment
    is validated against that ordering rather than re-sorting.
    """
    fold_id = np.empty(len(meter_ids), dtype=np.int32)
    start = 0
    while start < len(meter_ids):
        end = start
        while end < len(meter_ids) and meter_ids[end] == meter_ids[start]:
            end += 1
        block = timestamps[start:end]
        if np.any(np.diff(block) < np.timedelta64(0, "ns")):
            raise DataError("rows must be ordered by meter then timestamp")
        count = end - start
        bounds = [start + (count * k) // n_folds for k in range(n_folds + 1)]
        for k in range(n_folds):
            fold_id[bounds[k]:bounds[k + 1]] = k
        start = end
    return fold_id


def _boost_fold(
    X: np.ndarray,
    y: np.ndarray,
    kinds,
    params: GbdtParams,
    fold: int,
) -> tuple[list[Tree], float]:
    base = float(y.mean())
    if params.n_trees == 0:
        return [], base

    mapper = BinMapper.fit(X, kinds, params.n_bins)
    binned = mapper.transform(X)
    n, p = X.shape
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=params.seed, spawn_key=(fold,))
    )
    n_features = max(1, math.ceil(params.feature_fraction * p))
    n_rows = max(1, math.ceil(params.row_fraction * n))

    current = np.full(n, base)
    trees: list[Tree] = []
    for _ in range(params.n_trees):
        features = np.sort(rng.choice(p, size=n_features, replace=False))
        if n_rows < n:
            rows = np.sort(rng.choice(n, size=n_rows, replace=False))
        else:
            rows = np.arange(n, dtype=np.intp)
        residuals = y - current
        tree = grow_tree(
            binned,
            residuals,
            rows.astype(np.intp),
            mapper,
            features,
            params.max_leaves,
            params.min_samples_leaf,
        )
        trees.append(tree)
        current += params.learning_rate * tree.apply_binned(binned, mapper)
    return trees, base


def train(
    matrix: FeatureMatrix,
    y: np.ndarray,
    params: GbdtParams,
    dictionary: CategoricalDictionary | None = None,
) -> ModelBundle:
    """Train the n_folds complementary ensembles.

    ``dictionary`` is the categorical dictionary the matrix was encoded
    with; it persists in the bundle so prediction encodes consistently.
    Deterministic for fixed (data, params, seed). A constant target is
    not an error: the bundle carries base scores only and is flagged.
    """
    params.validate()
    if not matrix.encoded:
        raise DataError("feature matrix must be encoded before training")
    if len(matrix) == 0:
        raise DataError("cannot train on an empty matrix")
    y = np.asarray(y, dtype=np.float64)
    if len(y) != len(matrix):
        raise DataError("target length does not match matrix rows")

    X = matrix.to_array()
    kinds = tuple(f.kind for f in matrix.schema.features)
    fold_id = assign_folds(matrix.meter_ids, matrix.timestamps, params.n_folds)

    constant = bool(np.all(y == y[0]))
    ensembles: list[list[Tree]] = []
    bases: list[float] = []
    for fold in range(params.n_folds):
        train_rows = fold_id != fold
        if not train_rows.any():
            raise DataError(f"fold {fold} has no training rows")
        if constant:
            ensembles.append([])
            bases.append(float(y[train_rows].mean()))
            continue
        trees, base = _boost_fold(
            X[train_rows], y[train_rows], kinds, params, fold
        )
        ensembles.append(trees)
        bases.append(base)

    return ModelBundle(
        params=params,
        schema=matrix.schema,
        dictionary=dictionary or CategoricalDictionary(),
        fold_ensembles=ensembles,
        base_scores=bases,
        data_hash=matrix_hash(X, y),
        seed=params.seed,
        created_at=dt.datetime.now(dt.timezone.utc).isoformat(),
        constant_target=constant,
    )


def predict_log(bundle: ModelBundle, X: np.ndarray) -> np.ndarray:
    """Fold-averaged prediction in log1p space."""
    total = np.zeros(len(X))
    for trees, base in zip(bundle.fold_ensembles, bundle.base_scores):
        fold_pred = np.full(len(X), base)
        for tree in trees:
            fold_pred += bundle.params.learning_rate * tree.apply(X)
        total += fold_pred
    return total / len(bundle.fold_ensembles)


def predict(bundle: ModelBundle, matrix: FeatureMatrix) -> np.ndarray:
    """Predict kWh: expm1 of the log-space fold average, floored at 0."""
    if matrix.schema != bundle.schema:
        raise SchemaMismatchError(
            "matrix schema does not match the trained bundle"
        )
    if not matrix.encoded:
        raise DataError("encode the matrix with the bundle dictionary first")
    raw = np.expm1(predict_log(bundle, matrix.to_array()))
    return np.clip(raw, 0.0, None)
