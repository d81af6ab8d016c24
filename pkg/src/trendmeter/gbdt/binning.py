"""Histogram binning of feature columns for split search.

Numeric features bin by equal-frequency quantiles computed on the
training fold only; when a feature has no more distinct values than
bins, the binning is lossless (one bin per value, edges at midpoints).
Categorical columns pass their integer codes through unchanged. Each
feature reserves one extra trailing bin for missing values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class BinMapper:
    kinds: tuple[str, ...]  # "numeric" | "categorical" per feature
    edges: list[np.ndarray | None]  # split thresholds per numeric feature
    n_value_bins: list[int]  # bins excluding the missing bin

    @classmethod
    def fit(cls, X: np.ndarray, kinds, n_bins: int) -> "BinMapper":
        edges: list[np.ndarray | None] = []
        n_value_bins: list[int] = []
        for j, kind in enumerate(kinds):
            col = X[:, j]
            finite = col[~np.isnan(col)]
            if kind == "categorical":
                edges.append(None)
                top = int(finite.max()) if finite.size else 0
                n_value_bins.append(top + 1)
                continue
            uniq = np.unique(finite)
            if len(uniq) <= 1:
                edges.append(np.empty(0))
                n_value_bins.append(max(len(uniq), 1))
            elif len(uniq) <= n_bins:
                edges.append((uniq[:-1] + uniq[1:]) / 2.0)
                n_value_bins.append(len(uniq))
            else:
                qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
                cut = np.unique(np.quantile(finite, qs))
                edges.append(cut)
                n_value_bins.append(len(cut) + 1)
        return cls(kinds=tuple(kinds), edges=edges, n_value_bins=n_value_bins)

    def missing_bin(self, feature: int) -> int:
        return self.n_value_bins[feature]

    def transform(self, X: np.ndarray) -> np.ndarray:
        """Map raw values onto bin indices; NaN maps to the missing bin.

        Numeric bins are right-closed: bin b holds values in
        (edge[b-1], edge[b]], so "value <= edge[b]" and "bin <= b" agree.
        """
        n, p = X.shape
        out = np.empty((n, p), dtype=np.int32)
        for j in range(p):
            col = X[:, j]
            missing = np.isnan(col)
            if self.kinds[j] == "categorical":
                binned = np.zeros(n, dtype=np.int32)
                codes = col[~missing].astype(np.int32)
                binned[~missing] = np.clip(codes, 0, self.n_value_bins[j] - 1)
            else:
                binned = np.searchsorted(
                    self.edges[j], col, side="left"
                ).astype(np.int32)
            binned[missing] = self.missing_bin(j)
            out[:, j] = binned
        return out

    def threshold_for_bin(self, feature: int, bin_index: int) -> float:
        """The raw-value threshold equivalent to splitting after a bin."""
        return float(self.edges[feature][bin_index])
