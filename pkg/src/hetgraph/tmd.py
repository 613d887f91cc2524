"""Tree Mover's Distance between node-featured graphs.

Computation trees are interned: two subtrees with identical root features and
identical child multisets share one integer id, so the recursive tree
distance is memoized on id pairs and every identical subtree is compared once.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from math import comb
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .graphio import Dataset, Graph


@dataclass(frozen=True)
class ComputationTree:
    """Rooted tree with a feature vector per node; children kept in canonical order."""

    features: tuple[float, ...]
    children: tuple[ComputationTree, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(float(x) for x in self.features))
        object.__setattr__(self, "children", tuple(sorted(self.children, key=lambda t: t.key)))

    @cached_property
    def key(self) -> tuple:
        return (self.features, tuple(c.key for c in self.children))

    @cached_property
    def depth(self) -> int:
        return 1 + max((c.depth for c in self.children), default=0)


def blank_tree(dim: int) -> ComputationTree:
    return ComputationTree((0.0,) * dim)


def computation_tree(g: Graph, v: int, depth: int) -> ComputationTree:
    """Depth-``depth`` unrolling of node ``v``; every neighbour (parent included)
    becomes a child at each level."""
    if not 0 <= v < g.n:
        raise ValueError(f"node {v} out of range")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    adj = g.adjacency_lists()
    memo: dict[tuple[int, int], ComputationTree] = {}

    def build(u: int, level: int) -> ComputationTree:
        if (u, level) not in memo:
            kids = () if level == 1 else tuple(build(w, level - 1) for w in adj[u])
            memo[(u, level)] = ComputationTree(tuple(g.features[u]), kids)
        return memo[(u, level)]

    return build(v, depth)


def blank_tree_augment(a: list[ComputationTree], b: list[ComputationTree], dim: int | None = None
                       ) -> tuple[list[ComputationTree], list[ComputationTree]]:
    """Pad the smaller multiset with blank trees until both have equal size."""
    if dim is None:
        sample = a[0] if a else (b[0] if b else None)
        dim = len(sample.features) if sample is not None else 0
    blank = blank_tree(dim)
    a2 = list(a) + [blank] * max(len(b) - len(a), 0)
    b2 = list(b) + [blank] * max(len(a) - len(b), 0)
    return a2, b2


@dataclass(frozen=True)
class WeightSchedule:
    """Level -> positive weight; levels without an explicit entry use ``default``."""

    weights: dict[int, float] = field(default_factory=dict)
    default: float = 1.0
    tag: str = "constant(1)"

    def __post_init__(self) -> None:
        if self.default <= 0 or any(w <= 0 for w in self.weights.values()):
            raise ValueError("weights must be positive")

    def __call__(self, level: int) -> float:
        return self.weights.get(level, self.default)


def constant_weights(c: float = 1.0) -> WeightSchedule:
    return WeightSchedule({}, float(c), f"constant({c:g})")


def pascal_weights(depth: int, epsilon: float) -> WeightSchedule:
    """``w(l) = epsilon * C(L+1, l-1) / C(L+1, l)`` with ``L = depth``.

    The formula covers levels ``1 .. L+1``, i.e. every level of the depth
    ``L+1`` trees an ``L``-layer model sees; higher levels weigh 1. Along a
    root-to-level-``k`` path the weights multiply to
    ``epsilon**k * C(L+1, k)``, which dominates the ``C(L, k)`` ways a
    sum-with-self aggregation reaches that level.
    """
    if depth < 1 or epsilon <= 0:
        raise ValueError("need depth >= 1 and epsilon > 0")
    w = {l: epsilon * comb(depth + 1, l - 1) / comb(depth + 1, l) for l in range(1, depth + 2)}
    return WeightSchedule(w, 1.0, f"pascal(eps={epsilon:g},L={depth})")


class TreeTable:
    """Interned computation trees with memoized pairwise tree distances."""

    def __init__(self, dim: int, weights: WeightSchedule):
        self.dim = dim
        self.weights = weights
        self._ids: dict[tuple[bytes, tuple[int, ...]], int] = {}
        self.features: list[np.ndarray] = []
        self.children: list[tuple[int, ...]] = []
        self.depths: list[int] = []
        self._td: dict[tuple[int, int], float] = {}
        self.blank = self.intern(np.zeros(dim), ())

    def intern(self, x: np.ndarray, kids: tuple[int, ...]) -> int:
        x = np.asarray(x, dtype=float)
        x = x + 0.0  # -0.0 and 0.0 must share an id
        kids = tuple(sorted(kids))
        sig = (x.tobytes(), kids)
        tid = self._ids.get(sig)
        if tid is None:
            tid = len(self.features)
            self._ids[sig] = tid
            self.features.append(x)
            self.children.append(kids)
            self.depths.append(1 + max((self.depths[k] for k in kids), default=0))
        return tid

    def add_tree(self, t: ComputationTree) -> int:
        return self.intern(np.array(t.features), tuple(self.add_tree(c) for c in t.children))

    def graph_trees(self, g: Graph, depth: int) -> list[int]:
        """Ids of the depth-``depth`` computation trees of every node of ``g``."""
        if g.num_features != self.dim:
            raise ValueError(f"feature dimension {g.num_features} != {self.dim}")
        adj = g.adjacency_lists()
        level = [self.intern(g.features[v], ()) for v in range(g.n)]
        for _ in range(depth - 1):
            level = [self.intern(g.features[v], tuple(level[w] for w in adj[v])) for v in range(g.n)]
        return level

    def matching_cost(self, a: list[int] | tuple[int, ...], b: list[int] | tuple[int, ...]) -> float:
        """Optimal transport with unit mass per tree after blank-tree augmentation."""
        size = max(len(a), len(b))
        if size == 0:
            return 0.0
        a = list(a) + [self.blank] * (size - len(a))
        b = list(b) + [self.blank] * (size - len(b))
        cost = np.array([[self.distance(i, j) for j in b] for i in a])
        rows, cols = linear_sum_assignment(cost)
        return float(cost[rows, cols].sum())

    def distance(self, a: int, b: int) -> float:
        if a == b:
            return 0.0
        key = (a, b) if a < b else (b, a)
        cached = self._td.get(key)
        if cached is not None:
            return cached
        d = float(np.linalg.norm(self.features[a] - self.features[b]))
        level = max(self.depths[a], self.depths[b])
        if level > 1:
            d += self.weights(level) * self.matching_cost(self.children[a], self.children[b])
        self._td[key] = d
        return d


def tree_distance(t1: ComputationTree, t2: ComputationTree, w: WeightSchedule) -> float:
    """Recursive tree distance: root feature distance plus ``w(L)`` times the
    optimal matching of blank-augmented child multisets, ``L`` the larger depth."""
    if len(t1.features) != len(t2.features):
        raise ValueError("feature dimension mismatch")
    table = TreeTable(len(t1.features), w)
    return table.distance(table.add_tree(t1), table.add_tree(t2))


def tmd(g1: Graph, g2: Graph, depth: int, w: WeightSchedule | None = None,
        table: TreeTable | None = None) -> float:
    """Optimal transport between the depth-``depth`` computation-tree multisets."""
    if g1.num_features != g2.num_features:
        raise ValueError(f"feature dimension mismatch: {g1.num_features} vs {g2.num_features}")
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if table is None:
        table = TreeTable(g1.num_features, w or constant_weights())
    return table.matching_cost(table.graph_trees(g1, depth), table.graph_trees(g2, depth))


DEFAULT_DEPTH = 4


def _tmd_rows(graphs: list[Graph], rows: list[int], depth: int, w: WeightSchedule) -> list[tuple[int, list[float]]]:
    table = TreeTable(graphs[0].num_features, w)
    trees = [table.graph_trees(g, depth) for g in graphs]
    out = []
    for i in rows:
        out.append((i, [table.matching_cost(trees[i], trees[j]) for j in range(i + 1, len(graphs))]))
    return out


def _read_checkpoint(path: Path, n: int) -> dict[int, list[float]]:
    done: dict[int, list[float]] = {}
    if not path.exists():
        return done
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.strip().split(",")
            if not parts or not parts[0]:
                continue
            try:
                i = int(parts[0])
                vals = [float(x) for x in parts[1:]]
            except ValueError:
                break  # torn last line from an interrupted run
            if len(vals) != n - 1 - i:
                break
            done[i] = vals
    return done


def tmd_matrix(d: Dataset | list[Graph], depth: int = DEFAULT_DEPTH, w: WeightSchedule | None = None,
               workers: int = 1, checkpoint: str | os.PathLike | None = None) -> np.ndarray:
    """Symmetric matrix of pairwise TMDs with zero diagonal.

    With ``checkpoint`` set, each finished row (upper-triangle entries) is
    appended to that file as ``i,d_i(i+1),...`` and rows already present are
    not recomputed. Rows are distributed over ``workers`` processes; only the
    calling process writes the checkpoint.
    """
    graphs = list(d.graphs if isinstance(d, Dataset) else d)
    n = len(graphs)
    w = w or constant_weights()
    if n == 0:
        return np.zeros((0, 0))
    dims = {g.num_features for g in graphs}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions {sorted(dims)}")
    out = np.zeros((n, n))
    done = _read_checkpoint(Path(checkpoint), n) if checkpoint else {}
    todo = [i for i in range(n - 1) if i not in done]
    fh = open(checkpoint, "a", encoding="utf-8", newline="\n") if checkpoint else None
    try:
        def record(i: int, vals: list[float]) -> None:
            done[i] = vals
            if fh is not None:
                fh.write(",".join([str(i)] + [repr(v) for v in vals]) + "\n")
                fh.flush()

        if workers > 1 and len(todo) > 1:
            # interleaved chunks balance the shrinking row lengths
            chunks = [todo[k::workers * 4] for k in range(min(len(todo), workers * 4))]
            with ProcessPoolExecutor(workers) as pool:
                futures = [pool.submit(_tmd_rows, graphs, c, depth, w) for c in chunks]
                for fut in futures:
                    for i, vals in fut.result():
                        record(i, vals)
        else:
            for i, vals in _tmd_rows(graphs, todo, depth, w) if todo else []:
                record(i, vals)
    finally:
        if fh is not None:
            fh.close()
    for i, vals in done.items():
        out[i, i + 1:] = vals
        out[i + 1:, i] = vals
    return out


@dataclass(frozen=True)
class ClassDistanceRatio:
    value: float
    same: float
    different: float
    infinite: bool


def class_distance_ratio(labels, i: int, dist: np.ndarray) -> ClassDistanceRatio:
    """Nearest same-label distance (excluding ``i``) over nearest different-label distance.

    ``labels`` is a Dataset or a label sequence. A zero denominator gives
    ``inf`` with ``infinite=True`` (0/0 also maps to ``inf``).
    """
    if isinstance(labels, Dataset):
        if labels.task.kind != "classification":
            raise ValueError("class-distance ratios need a classification task")
        labels = labels.labels()
    labels = list(labels)
    same = [dist[i, j] for j in range(len(labels)) if j != i and labels[j] == labels[i]]
    diff = [dist[i, j] for j in range(len(labels)) if labels[j] != labels[i]]
    if not same:
        raise ValueError(f"graph {i} has no other graph with the same label")
    if not diff:
        raise ValueError(f"graph {i} has no graph with a different label")
    num, den = float(min(same)), float(min(diff))
    if den == 0.0:
        return ClassDistanceRatio(float("inf"), num, den, True)
    return ClassDistanceRatio(num / den, num, den, False)
