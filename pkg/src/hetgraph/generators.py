"""Small deterministic graph families and seeded random graphs."""

from __future__ import annotations

import numpy as np

from .graphio import Graph, make_graph


def path_graph(n: int, **kw) -> Graph:
    return make_graph(n, [(i, i + 1) for i in range(n - 1)], **kw)


def cycle_graph(n: int, **kw) -> Graph:
    if n < 3:
        raise ValueError("cycles need at least three nodes")
    return make_graph(n, [(i, (i + 1) % n) for i in range(n)], **kw)


def complete_graph(n: int, **kw) -> Graph:
    return make_graph(n, [(i, j) for i in range(n) for j in range(i + 1, n)], **kw)


def star_graph(leaves: int, **kw) -> Graph:
    """Hub 0 joined to ``leaves`` leaves."""
    return make_graph(leaves + 1, [(0, i) for i in range(1, leaves + 1)], **kw)


def barbell_graph(k: int = 4, **kw) -> Graph:
    """Two copies of K_k on nodes ``0..k-1`` and ``k..2k-1`` joined by the bridge ``(k-1, k)``."""
    edges = [(i, j) for i in range(k) for j in range(i + 1, k)]
    edges += [(i + k, j + k) for i, j in edges]
    edges.append((k - 1, k))
    return make_graph(2 * k, edges, **kw)


def disjoint_union(a: Graph, b: Graph, **kw) -> Graph:
    edges = list(a.edges) + [(u + a.n, v + a.n) for u, v in b.edges]
    return make_graph(a.n + b.n, edges, **kw)


def erdos_renyi(rng: np.random.Generator, n: int, p: float, dim: int | None = None, **kw) -> Graph:
    """G(n, p); with ``dim`` set, features are uniform on (-1, 1)."""
    iu = np.triu_indices(n, 1)
    mask = rng.random(len(iu[0])) < p
    edges = [(int(u), int(v)) for u, v in zip(iu[0][mask], iu[1][mask])]
    features = None if dim is None else rng.uniform(-1.0, 1.0, size=(n, dim))
    return make_graph(n, edges, features, **kw)


def random_connected(rng: np.random.Generator, n: int, p: float = 0.3, **kw) -> Graph:
    """A random recursive tree on shuffled labels plus G(n, p) edges."""
    order = rng.permutation(n)
    edges = set()
    for i in range(1, n):
        u, v = int(order[i]), int(order[rng.integers(0, i)])
        edges.add((min(u, v), max(u, v)))
    extra = erdos_renyi(rng, n, p)
    edges |= set(extra.edges)
    return make_graph(n, sorted(edges), **kw)
