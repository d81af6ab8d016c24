"""Versioned JSON serialization of trained bundles.

Format v1: one JSON object holding params, feature schema, categorical
dictionary, per-fold base scores and tree lists, the training data hash,
and creation metadata. Floats serialize via their shortest round-trip
repr, so save -> load -> save is byte-stable.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from ..config import GbdtParams
from ..errors import DataError
from ..features import CategoricalDictionary, FeatureSchema
from .boosting import ModelBundle
from .tree import Tree, TreeNode

FORMAT_VERSION = 1


def _node_to_dict(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"leaf": node.value, "n": node.n_samples}
    out = {
        "feature": node.feature,
        "missing_left": node.missing_left,
        "left": node.left,
        "right": node.right,
        "bin_index": node.bin_index,
        "n": node.n_samples,
    }
    if node.categories is not None:
        out["categories"] = list(node.categories)
    else:
        out["threshold"] = node.threshold
    return out


def _node_from_dict(raw: dict) -> TreeNode:
    if "leaf" in raw:
        return TreeNode(value=raw["leaf"], is_leaf=True, n_samples=raw.get("n", 0))
    return TreeNode(
        is_leaf=False,
        feature=raw["feature"],
        threshold=raw.get("threshold"),
        categories=tuple(raw["categories"]) if "categories" in raw else None,
        missing_left=raw["missing_left"],
        left=raw["left"],
        right=raw["right"],
        bin_index=raw.get("bin_index", -1),
        n_samples=raw.get("n", 0),
    )


def bundle_to_dict(bundle: ModelBundle) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "params": dataclasses.asdict(bundle.params),
        "schema": bundle.schema.to_dict(),
        "dictionary": bundle.dictionary.to_dict(),
        "base_scores": [float(b) for b in bundle.base_scores],
        "fold_ensembles": [
            [[_node_to_dict(n) for n in tree.nodes] for tree in trees]
            for trees in bundle.fold_ensembles
        ],
        "data_hash": bundle.data_hash,
        "seed": bundle.seed,
        "constant_target": bundle.constant_target,
        "created_at": bundle.created_at,
        "meta": bundle.meta,
    }


def bundle_from_dict(raw: dict) -> ModelBundle:
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"unsupported bundle format version: {version}")
    return ModelBundle(
        params=GbdtParams(**raw["params"]),
        schema=FeatureSchema.from_dict(raw["schema"]),
        dictionary=CategoricalDictionary.from_dict(raw["dictionary"]),
        fold_ensembles=[
            [Tree(nodes=[_node_from_dict(n) for n in tree]) for tree in trees]
            for trees in raw["fold_ensembles"]
        ],
        base_scores=[float(b) for b in raw["base_scores"]],
        data_hash=raw["data_hash"],
        seed=raw["seed"],
        created_at=raw.get("created_at", ""),
        constant_target=raw.get("constant_target", False),
        meta=raw.get("meta", {}),
    )


def save_bundle(bundle: ModelBundle, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(bundle_to_dict(bundle), indent=1, sort_keys=True),
        encoding="utf-8",
    )


def load_bundle(path) -> ModelBundle:
    path = Path(path)
    if not path.exists():
        raise DataError(f"bundle file not found: {path}")
    return bundle_from_dict(json.loads(path.read_text(encoding="utf-8")))
