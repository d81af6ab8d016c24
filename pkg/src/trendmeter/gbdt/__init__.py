"""From-scratch gradient-boosted regression trees on binned features,
trained as complementary temporal-fold ensembles.
"""

from .binning import BinMapper
from .boosting import ModelBundle, predict, train
from .bundle_io import load_bundle, save_bundle
from .tree import SplitCandidate, Tree, find_best_split, grow_tree

__all__ = [
    "BinMapper",
    "ModelBundle",
    "SplitCandidate",
    "Tree",
    "find_best_split",
    "grow_tree",
    "load_bundle",
    "predict",
    "save_bundle",
    "train",
]
