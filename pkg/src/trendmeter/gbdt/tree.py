"""Regression trees grown leaf-wise on binned features.

Split quality is the squared-error gain sum_L^2/n_L + sum_R^2/n_R -
sum^2/n over residual sums; ties break by lowest feature index, then
lowest threshold (shortest category prefix for categorical features),
then missing-direction left. Missing values take a learned direction at
every split, so routing is total.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from heapq import heappop, heappush

import numpy as np

from .binning import BinMapper

# Admissibility floor relative to the parent score; rejects float-noise
# "gains" on constant residuals without touching genuine splits.
_GAIN_EPS = 1e-10


@dataclass
class SplitCandidate:
    gain: float
    feature: int
    bin_index: int  # numeric: last bin going left; categorical: prefix length
    threshold: float | None  # numeric splits only
    categories: tuple[int, ...] | None  # categorical splits only
    missing_left: bool


@dataclass
class TreeNode:
    # leaf fields
    value: float = 0.0
    is_leaf: bool = True
    n_samples: int = 0
    # split fields
    feature: int = -1
    threshold: float | None = None
    categories: tuple[int, ...] | None = None
    missing_left: bool = True
    left: int = -1
    right: int = -1
    bin_index: int = -1  # training-time routing on binned columns


@dataclass
class Tree:
    nodes: list[TreeNode] = field(default_factory=list)

    @property
    def n_leaves(self) -> int:
        return sum(1 for n in self.nodes if n.is_leaf)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Evaluate the tree on raw feature rows (NaN = missing)."""
        out = np.empty(len(X), dtype=np.float64)
        stack = [(0, np.arange(len(X), dtype=np.intp))]
        while stack:
            node_id, rows = stack.pop()
            if not len(rows):
                continue
            node = self.nodes[node_id]
            if node.is_leaf:
                out[rows] = node.value
                continue
            col = X[rows, node.feature]
            missing = np.isnan(col)
            if node.categories is not None:
                go_left = np.isin(col, node.categories)
            else:
                go_left = col <= node.threshold
            go_left = np.where(missing, node.missing_left, go_left)
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out

    def apply_binned(self, binned: np.ndarray, mapper: BinMapper) -> np.ndarray:
        """Evaluate on pre-binned training rows (training-time fast path)."""
        out = np.empty(len(binned), dtype=np.float64)
        stack = [(0, np.arange(len(binned), dtype=np.intp))]
        while stack:
            node_id, rows = stack.pop()
            if not len(rows):
                continue
            node = self.nodes[node_id]
            if node.is_leaf:
                out[rows] = node.value
                continue
            bins = binned[rows, node.feature]
            missing = bins == mapper.missing_bin(node.feature)
            if node.categories is not None:
                go_left = np.isin(bins, node.categories)
            else:
                go_left = bins <= node.bin_index
            go_left = np.where(missing, node.missing_left, go_left)
            stack.append((node.left, rows[go_left]))
            stack.append((node.right, rows[~go_left]))
        return out


def _directional_gains(sum_left, cnt_left, sum_miss, cnt_miss, total_sum,
                       total_cnt, min_leaf):
    """Gain arrays for missing-goes-left and missing-goes-right."""

    def gains(s_left, c_left):
        c_right = total_cnt - c_left
        s_right = total_sum - s_left
        ok = (c_left >= min_leaf) & (c_right >= min_leaf)
        with np.errstate(divide="ignore", invalid="ignore"):
            value = np.where(ok, s_left**2 / c_left + s_right**2 / c_right,
                             -np.inf)
        return value

    left_dir = gains(sum_left + sum_miss, cnt_left + cnt_miss)
    right_dir = gains(sum_left, cnt_left)
    return left_dir, right_dir


def find_best_split(
    binned: np.ndarray,
    residuals: np.ndarray,
    rows: np.ndarray,
    mapper: BinMapper,
    features: np.ndarray,
    min_samples_leaf: int,
) -> SplitCandidate | None:
    """Best admissible split of one node over the given feature subset.

    Numeric candidates are every bin boundary with either missing
    direction; categorical candidates are prefixes of categories sorted
    by mean residual. Returns None when no candidate beats the parent.
    """
    r = residuals[rows]
    total_sum = float(r.sum())
    total_cnt = len(rows)
    if total_cnt < 2 * min_samples_leaf:
        return None
    parent_score = total_sum**2 / total_cnt
    min_gain = _GAIN_EPS * (1.0 + abs(parent_score))

    best: SplitCandidate | None = None
    for feature in features:
        n_value = mapper.n_value_bins[feature]
        if n_value < 2 and mapper.kinds[feature] == "numeric":
            continue
        bins = binned[rows, feature]
        n_total_bins = n_value + 1
        sums = np.bincount(bins, weights=r, minlength=n_total_bins)
        cnts = np.bincount(bins, minlength=n_total_bins)
        sum_miss = float(sums[n_value])
        cnt_miss = int(cnts[n_value])

        if mapper.kinds[feature] == "numeric":
            cum_sum = np.cumsum(sums[:n_value])[:-1]
            cum_cnt = np.cumsum(cnts[:n_value])[:-1]
            if not len(cum_sum):
                continue
            order = None  # thresholds follow bin order directly
        else:
            present = np.flatnonzero(cnts[:n_value] > 0)
            if len(present) < 2:
                continue
            means = sums[present] / cnts[present]
            order = present[np.lexsort((present, means))]
            cum_sum = np.cumsum(sums[order])[:-1]
            cum_cnt = np.cumsum(cnts[order])[:-1]

        left_dir, right_dir = _directional_gains(
            cum_sum, cum_cnt, sum_miss, cnt_miss, total_sum, total_cnt,
            min_samples_leaf,
        )
        if cnt_miss == 0:
            gains = left_dir
            choose_left = np.ones(len(gains), dtype=bool)
        else:
            gains = np.maximum(left_dir, right_dir)
            choose_left = left_dir >= right_dir

        k = int(np.argmax(gains))
        gain = float(gains[k]) - parent_score
        if not np.isfinite(gain) or gain <= min_gain:
            continue
        if best is not None and gain <= best.gain:
            continue
        if order is None:
            candidate = SplitCandidate(
                gain=gain,
                feature=int(feature),
                bin_index=k,
                threshold=mapper.threshold_for_bin(feature, k),
                categories=None,
                missing_left=bool(choose_left[k]),
            )
        else:
            candidate = SplitCandidate(
                gain=gain,
                feature=int(feature),
                bin_index=k,
                threshold=None,
                categories=tuple(sorted(int(c) for c in order[: k + 1])),
                missing_left=bool(choose_left[k]),
            )
        best = candidate
    return best


def _partition(binned, rows, mapper, candidate: SplitCandidate):
    bins = binned[rows, candidate.feature]
    missing = bins == mapper.missing_bin(candidate.feature)
    if candidate.categories is not None:
        go_left = np.isin(bins, candidate.categories)
    else:
        go_left = bins <= candidate.bin_index
    go_left = np.where(missing, candidate.missing_left, go_left)
    return rows[go_left], rows[~go_left]


def grow_tree(
    binned: np.ndarray,
    residuals: np.ndarray,
    rows: np.ndarray,
    mapper: BinMapper,
    features: np.ndarray,
    max_leaves: int,
    min_samples_leaf: int,
) -> Tree:
    """Grow one tree leaf-wise: always split the leaf with the best gain.

    The expansion order is deterministic: gains tie-break by node
    creation order, and each leaf enters the queue exactly once with its
    best candidate.
    """
    tree = Tree()

    def make_leaf(node_rows) -> int:
        node = TreeNode(
            value=float(residuals[node_rows].mean()),
            is_leaf=True,
            n_samples=len(node_rows),
        )
        tree.nodes.append(node)
        return len(tree.nodes) - 1

    root = make_leaf(rows)
    heap: list = []
    counter = 0

    def push(node_id, node_rows):
        nonlocal counter
        candidate = find_best_split(
            binned, residuals, node_rows, mapper, features, min_samples_leaf
        )
        if candidate is not None:
            heappush(heap, (-candidate.gain, counter, node_id, node_rows,
                            candidate))
            counter += 1

    push(root, rows)
    n_leaves = 1
    while heap and n_leaves < max_leaves:
        _, _, node_id, node_rows, candidate = heappop(heap)
        left_rows, right_rows = _partition(binned, node_rows, mapper, candidate)
        left_id = make_leaf(left_rows)
        right_id = make_leaf(right_rows)
        node = tree.nodes[node_id]
        node.is_leaf = False
        node.feature = candidate.feature
        node.threshold = candidate.threshold
        node.categories = candidate.categories
        node.missing_left = candidate.missing_left
        node.left = left_id
        node.right = right_id
        node.bin_index = candidate.bin_index
        n_leaves += 1
        push(left_id, left_rows)
        push(right_id, right_rows)
    return tree
