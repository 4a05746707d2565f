"""
Decision-tree ensembles over binary features and their exact Walsh-Hadamard spectra

Branching convention: a split on feature i sends x_i == 0 to the left child
and x_i == 1 to the right child. Ensembles combine trees by weighted sum
(random forests use weights 1/T, boosted models weight 1).
"""
import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from errors import DimensionMismatchError, PropertyViolation, ResourceGuardError, SchemaError
from fourier_core import ZERO_TOL, SparseSpectrum, as_point_array, as_point_matrix

logger = logging.getLogger(__name__)

MAX_TREE_DEPTH = 40
COMBINE_WEIGHTED_SUM = "weighted_sum"


@dataclass(frozen=True)
class TreeLeaf:
    value: float


@dataclass(frozen=True)
class TreeSplit:
    feature: int
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[TreeLeaf, TreeSplit]


@dataclass(frozen=True)
class WeightedTree:
    weight: float
    root: TreeNode


@dataclass
class TransformStats:
    """Bookkeeping from tree_to_spectrum / ensemble_to_spectrum"""
    internal_nodes: int = 0
    bound_checks: int = 0
    max_node_support: int = 0
    max_depth: int = 0

    def absorb(self, other: "TransformStats"):
        self.internal_nodes += other.internal_nodes
        self.bound_checks += other.bound_checks
        self.max_node_support = max(self.max_node_support, other.max_node_support)
        self.max_depth = max(self.max_depth, other.max_depth)


def _walk(root: TreeNode):
    stack = [root]
    while stack:
        node = stack.pop()
        yield node
        if isinstance(node, TreeSplit):
            stack.append(node.right)
            stack.append(node.left)


def tree_depth(root: TreeNode) -> int:
    depth = 0
    stack = [(root, 0)]
    while stack:
        node, level = stack.pop()
        if isinstance(node, TreeSplit):
            stack.append((node.left, level + 1))
            stack.append((node.right, level + 1))
        else:
            depth = max(depth, level)
    return depth


def max_feature(root: TreeNode) -> int:
    """Largest feature index used by the tree (-1 for a bare leaf)"""
    return max((node.feature for node in _walk(root) if isinstance(node, TreeSplit)), default=-1)


@dataclass(frozen=True)
class TreeEnsemble:
    n_features: int
    trees: Tuple[WeightedTree, ...]
    combine: str = COMBINE_WEIGHTED_SUM

    def __post_init__(self):
        object.__setattr__(self, "trees", tuple(self.trees))
        if self.combine != COMBINE_WEIGHTED_SUM:
            raise ValueError(f"unsupported combine rule {self.combine!r}")
        for t, tree in enumerate(self.trees):
            if max_feature(tree.root) >= self.n_features:
                raise DimensionMismatchError(
                    f"tree {t} splits on feature {max_feature(tree.root)} "
                    f"but n_features={self.n_features}", "tree model")

    @property
    def max_depth(self) -> int:
        return max((tree_depth(t.root) for t in self.trees), default=0)

    def predict(self, x) -> float:
        pt = as_point_array(x, self.n_features, "point")
        return float(sum(t.weight * eval_tree(t.root, pt) for t in self.trees))

    def predict_many(self, points) -> np.ndarray:
        pts = as_point_matrix(points, self.n_features)
        out = np.zeros(pts.shape[0])
        for tree in self.trees:
            out += tree.weight * eval_tree_many(tree.root, pts)
        return out


def eval_tree(root: TreeNode, x) -> float:
    """Value of the leaf reached by x (left when x[feature] == 0)"""
    x = x.to_array() if hasattr(x, "to_array") else np.asarray(x).ravel()
    node = root
    while isinstance(node, TreeSplit):
        if node.feature >= x.size:
            raise DimensionMismatchError(f"split on feature {node.feature} for a point of "
                                         f"length {x.size}", "point")
        node = node.right if x[node.feature] else node.left
    return float(node.value)


def eval_tree_many(root: TreeNode, points: np.ndarray) -> np.ndarray:
    """Route every row of a (m, n) 0/1 matrix through the tree at once"""
    out = np.zeros(points.shape[0])
    stack = [(root, np.arange(points.shape[0]))]
    while stack:
        node, rows = stack.pop()
        if rows.size == 0:
            continue
        if isinstance(node, TreeLeaf):
            out[rows] = node.value
            continue
        go_right = points[rows, node.feature] == 1
        stack.append((node.left, rows[~go_right]))
        stack.append((node.right, rows[go_right]))
    return out


# ---------------------------------------------------------------------------
# exact transform
# ---------------------------------------------------------------------------

def _merge(left: Dict[int, float], right: Dict[int, float], feature: int) -> Dict[int, float]:
    # t = (L + R)/2 + shift_{e_i}(L - R)/2
    bit = 1 << feature
    out: Dict[int, float] = defaultdict(float)
    for mask, coef in left.items():
        half = 0.5 * coef
        out[mask] += half
        out[mask ^ bit] += half
    for mask, coef in right.items():
        half = 0.5 * coef
        out[mask] += half
        out[mask ^ bit] -= half
    return {mask: coef for mask, coef in out.items() if abs(coef) >= ZERO_TOL}


def _tree_terms(root: TreeNode, max_depth: int = MAX_TREE_DEPTH) -> Tuple[Dict[int, float], TransformStats]:
    stats = TransformStats(max_depth=tree_depth(root))
    if stats.max_depth > max_depth:
        raise ResourceGuardError(f"tree depth {stats.max_depth} exceeds guard {max_depth}")
    ops: List[Tuple[TreeNode, bool]] = [(root, False)]
    values: List[Dict[int, float]] = []
    while ops:
        node, ready = ops.pop()
        if isinstance(node, TreeLeaf):
            values.append({0: float(node.value)} if node.value != 0.0 else {})
            continue
        if not ready:
            ops.append((node, True))
            ops.append((node.right, False))
            ops.append((node.left, False))
            continue
        right = values.pop()
        left = values.pop()
        merged = _merge(left, right, node.feature)
        bound = 2 * (len(left) + len(right))
        stats.internal_nodes += 1
        stats.bound_checks += 1
        if len(merged) > bound:
            raise PropertyViolation("tree sparsity recursion", len(merged), bound)
        stats.max_node_support = max(stats.max_node_support, len(merged))
        values.append(merged)
    terms = values.pop()
    if len(terms) > 4 ** stats.max_depth:
        raise PropertyViolation("tree sparsity 4^depth", len(terms), 4 ** stats.max_depth)
    return terms, stats


def tree_to_spectrum(root: TreeNode, n: int, max_depth: int = MAX_TREE_DEPTH,
                     stats: Optional[TransformStats] = None) -> SparseSpectrum:
    """Exact spectrum of a single tree over n features"""
    if max_feature(root) >= n:
        raise DimensionMismatchError(f"tree uses feature {max_feature(root)} but n={n}",
                                     "tree model")
    terms, tree_stats = _tree_terms(root, max_depth)
    if stats is not None:
        stats.absorb(tree_stats)
    return SparseSpectrum.from_int_terms(n, terms, ZERO_TOL)


def ensemble_to_spectrum(ensemble: TreeEnsemble, workers: int = 1,
                         max_depth: int = MAX_TREE_DEPTH,
                         stats: Optional[TransformStats] = None) -> SparseSpectrum:
    """Weighted termwise sum of the per-tree spectra.

    Trees are transformed independently (optionally on a thread pool); the
    accumulation always runs in tree order.
    """
    def one(tree: WeightedTree):
        return _tree_terms(tree.root, max_depth)

    if workers > 1 and len(ensemble.trees) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_tree = list(pool.map(one, ensemble.trees))
    else:
        per_tree = [one(tree) for tree in ensemble.trees]

    acc: Dict[int, float] = defaultdict(float)
    for tree, (terms, tree_stats) in zip(ensemble.trees, per_tree):
        if stats is not None:
            stats.absorb(tree_stats)
        for mask, coef in terms.items():
            acc[mask] += tree.weight * coef
    spectrum = SparseSpectrum.from_int_terms(ensemble.n_features, acc, ZERO_TOL)
    logger.debug("ensemble of %d trees -> %d terms (degree %d)", len(ensemble.trees),
                 spectrum.support_size, spectrum.degree)
    return spectrum


# ---------------------------------------------------------------------------
# model files
# ---------------------------------------------------------------------------

def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and np.isfinite(value)


def _parse_node(obj, path: str) -> TreeNode:
    ops = [(obj, path, False)]
    built: List[TreeNode] = []
    while ops:
        node, where, ready = ops.pop()
        if not isinstance(node, dict):
            raise SchemaError("node must be an object", where)
        if "value" in node:
            if len(node) != 1:
                raise SchemaError("leaf must only carry 'value'", where)
            if not _is_number(node["value"]):
                raise SchemaError("leaf value must be a finite number", where + "/value")
            built.append(TreeLeaf(float(node["value"])))
            continue
        if ready:
            right = built.pop()
            left = built.pop()
            built.append(TreeSplit(node["feature"], left, right))
            continue
        feature = node.get("feature")
        if not isinstance(feature, int) or isinstance(feature, bool) or feature < 0:
            raise SchemaError("'feature' must be a non-negative integer", where + "/feature")
        for side in ("left", "right"):
            if side not in node:
                raise SchemaError(f"split is missing '{side}'", where)
        ops.append((node, where, True))
        ops.append((node["right"], where + "/right", False))
        ops.append((node["left"], where + "/left", False))
    return built[0]


def tree_model_from_dict(payload) -> TreeEnsemble:
    """Parse the native tree-model JSON object"""
    if not isinstance(payload, dict):
        raise SchemaError("tree model must be a JSON object", "/")
    n = payload.get("n_features")
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise SchemaError("'n_features' must be a positive integer", "/n_features")
    combine = payload.get("combine", COMBINE_WEIGHTED_SUM)
    if combine != COMBINE_WEIGHTED_SUM:
        raise SchemaError(f"'combine' must be {COMBINE_WEIGHTED_SUM!r}", "/combine")
    trees = payload.get("trees")
    if not isinstance(trees, list):
        raise SchemaError("'trees' must be a list", "/trees")
    parsed = []
    for t, entry in enumerate(trees):
        if not isinstance(entry, dict):
            raise SchemaError("tree entry must be an object", f"/trees/{t}")
        weight = entry.get("weight", 1.0)
        if not _is_number(weight):
            raise SchemaError("'weight' must be a finite number", f"/trees/{t}/weight")
        if "root" not in entry:
            raise SchemaError("tree entry is missing 'root'", f"/trees/{t}")
        root = _parse_node(entry["root"], f"/trees/{t}/root")
        if max_feature(root) >= n:
            bad = next(p for p in _feature_paths(entry["root"], f"/trees/{t}/root") if p[1] >= n)
            raise SchemaError(f"feature {bad[1]} out of range for n_features={n}", bad[0])
        parsed.append(WeightedTree(float(weight), root))
    return TreeEnsemble(n, tuple(parsed), combine)


def _feature_paths(obj, path: str):
    stack = [(obj, path)]
    while stack:
        node, where = stack.pop()
        if "feature" in node:
            yield where + "/feature", node["feature"]
            stack.append((node["right"], where + "/right"))
            stack.append((node["left"], where + "/left"))


def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, TreeLeaf):
        return {"value": node.value}
    return {"feature": node.feature, "left": _node_to_dict(node.left),
            "right": _node_to_dict(node.right)}


def tree_model_to_dict(ensemble: TreeEnsemble) -> dict:
    return {"n_features": ensemble.n_features, "combine": ensemble.combine,
            "trees": [{"weight": t.weight, "root": _node_to_dict(t.root)} for t in ensemble.trees]}


def from_native(payload) -> TreeEnsemble:
    return tree_model_from_dict(payload)


def from_xgboost_json(payload) -> TreeEnsemble:
    """Extension point: XGBoost `dump_model(..., dump_format='json')` output.

    Splits must be pre-binarized and transposed to the left-on-zero convention.
    """
    raise NotImplementedError("xgboost_json conversion is not implemented")


def from_lightgbm_json(payload) -> TreeEnsemble:
    """Extension point: LightGBM `dump_model()` output"""
    raise NotImplementedError("lightgbm_json conversion is not implemented")


def from_catboost_json(payload) -> TreeEnsemble:
    """Extension point: CatBoost `save_model(format='json')` oblivious trees"""
    raise NotImplementedError("catboost_json conversion is not implemented")


CONVERTERS: Dict[str, Callable[[dict], TreeEnsemble]] = {
    "native": from_native,
    "xgboost_json": from_xgboost_json,
    "lightgbm_json": from_lightgbm_json,
    "catboost_json": from_catboost_json,
}


def load_tree_model(path: Union[str, Path], fmt: str = "native") -> TreeEnsemble:
    if fmt not in CONVERTERS:
        raise ValueError(f"unknown model format {fmt!r}; choose from {sorted(CONVERTERS)}")
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc.msg})", line=exc.lineno) from exc
    return CONVERTERS[fmt](payload)


def save_tree_model(ensemble: TreeEnsemble, path: Union[str, Path]):
    Path(path).write_text(json.dumps(tree_model_to_dict(ensemble), indent=2) + "\n")


# ---------------------------------------------------------------------------
# random models
# ---------------------------------------------------------------------------

def random_tree(n: int, depth: int, rng=None, ragged: float = 0.0,
                leaf_low: float = -1.0, leaf_high: float = 1.0) -> TreeNode:
    """Random tree of at most `depth` levels; features distinct along each path.

    With ragged > 0 each internal position becomes a leaf early with that
    probability (the root is always a split when depth > 0).
    """
    rng = np.random.default_rng(rng)
    if depth > n:
        raise ValueError("depth cannot exceed n when features are distinct per path")

    def build(level: int, used: Tuple[int, ...]) -> TreeNode:
        if level == depth or (level > 0 and rng.random() < ragged):
            return TreeLeaf(float(rng.uniform(leaf_low, leaf_high)))
        free = np.setdiff1d(np.arange(n), used)
        feature = int(rng.choice(free))
        return TreeSplit(feature, build(level + 1, used + (feature,)),
                         build(level + 1, used + (feature,)))

    return build(0, ())


def random_ensemble(n: int, n_trees: int, depth: int, rng=None, ragged: float = 0.0,
                    weights: Optional[Sequence[float]] = None) -> TreeEnsemble:
    """Random forest style ensemble (weights default to 1/T)"""
    rng = np.random.default_rng(rng)
    if weights is None:
        weights = [1.0 / n_trees] * n_trees
    trees = tuple(WeightedTree(float(w), random_tree(n, depth, rng, ragged)) for w in weights)
    return TreeEnsemble(n, trees)
