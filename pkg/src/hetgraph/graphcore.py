"""Classical topological graph characteristics used as regression covariates."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import astuple, dataclass, fields

import numpy as np

from .graphio import Graph


class TimeBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class Assortativity:
    value: float
    degenerate: bool


@dataclass(frozen=True)
class TopoFeatures:
    edge_density: float
    average_degree: float
    degree_assortativity: float
    diameter: float
    avg_clustering: float
    transitivity: float
    algebraic_connectivity: float
    curvature_gap: float
    largest_clique_ratio: float

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def as_row(self) -> list[float]:
        return list(astuple(self))


def edge_density(g: Graph) -> float:
    if g.n < 2:
        raise ValueError("edge density needs at least two nodes")
    return 2.0 * g.m / (g.n * (g.n - 1))


def average_degree(g: Graph) -> float:
    if g.n < 1:
        raise ValueError("empty graph")
    return 2.0 * g.m / g.n


def degree_assortativity(g: Graph) -> Assortativity:
    """Pearson correlation of endpoint degrees over both orientations of each edge.

    Zero marginal variance (e.g. regular graphs) yields ``0.0`` flagged as
    degenerate.
    """
    if g.m == 0:
        raise ValueError("degree assortativity needs at least one edge")
    deg = g.degrees().astype(float)
    e = np.array(g.sorted_edges())
    x = np.concatenate([deg[e[:, 0]], deg[e[:, 1]]])
    y = np.concatenate([deg[e[:, 1]], deg[e[:, 0]]])
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx <= 1e-12 * len(x) or syy <= 1e-12 * len(y):
        return Assortativity(0.0, True)
    return Assortativity(float(xc @ yc) / np.sqrt(sxx * syy), False)


def _bfs_eccentricity(adj: list[list[int]], s: int) -> int:
    dist = {s: 0}
    queue = deque([s])
    far = 0
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                far = max(far, dist[w])
                queue.append(w)
    return far


def diameter(g: Graph) -> float:
    """Exact diameter of the largest connected component (ties: lowest node)."""
    from .spectral import connected_components

    comps = connected_components(g)
    largest = max(comps, key=len)  # max() keeps the first of equal-size components
    adj = g.adjacency_lists()
    return float(max(_bfs_eccentricity(adj, s) for s in largest))


def _triangles_and_triads(g: Graph) -> tuple[np.ndarray, np.ndarray]:
    adj = [set(a) for a in g.adjacency_lists()]
    tri = np.zeros(g.n)
    for u in range(g.n):
        for v in adj[u]:
            if v > u:
                for w in adj[u] & adj[v]:
                    if w > v:
                        tri[[u, v, w]] += 1
    deg = g.degrees().astype(float)
    return tri, deg * (deg - 1) / 2.0


def avg_clustering(g: Graph) -> float:
    tri, pairs = _triangles_and_triads(g)
    local = np.divide(tri, pairs, out=np.zeros(g.n), where=pairs > 0)
    return float(local.mean())


def transitivity(g: Graph) -> float:
    tri, pairs = _triangles_and_triads(g)
    triads = pairs.sum()
    if triads == 0:
        return 0.0
    # each triangle was counted once per corner
    return float(tri.sum() / triads)


def max_clique_size(g: Graph, time_budget: float | None = 30.0) -> int:
    """Bron-Kerbosch with Tomita pivoting; raises once ``time_budget`` seconds pass."""
    adj = [set(a) for a in g.adjacency_lists()]
    best = 1 if g.n else 0
    deadline = None if time_budget is None else time.monotonic() + time_budget
    stack = [(set(), set(range(g.n)), set())]
    while stack:
        if deadline is not None and time.monotonic() > deadline:
            raise TimeBudgetExceeded(f"clique search exceeded {time_budget}s")
        r, p, x = stack.pop()
        if not p and not x:
            best = max(best, len(r))
            continue
        if len(r) + len(p) <= best:
            continue
        pivot = max(p | x, key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot]):
            stack.append((r | {v}, p & adj[v], x & adj[v]))
            p = p - {v}
            x = x | {v}
    return best


def largest_clique_ratio(g: Graph, time_budget: float | None = 30.0) -> float:
    return max_clique_size(g, time_budget) / g.n


def topo_features(g: Graph, alpha: float = 0.0, laplacian_kind: str = "combinatorial") -> TopoFeatures:
    from .curvature import curvature_gap
    from .spectral import fiedler_value

    if g.n < 2:
        raise ValueError("topological features need at least two nodes")
    return TopoFeatures(
        edge_density=edge_density(g),
        average_degree=average_degree(g),
        degree_assortativity=degree_assortativity(g).value,
        diameter=diameter(g),
        avg_clustering=avg_clustering(g),
        transitivity=transitivity(g),
        algebraic_connectivity=fiedler_value(g, laplacian_kind),
        curvature_gap=curvature_gap(g, alpha).value,
        largest_clique_ratio=largest_clique_ratio(g),
    )
