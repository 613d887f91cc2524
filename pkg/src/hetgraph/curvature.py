"""Ollivier-Ricci curvature, curvature gap, curvature node profiles and BORF rewiring."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graphio import Graph

ZERO_TOL = 1e-12


@dataclass(frozen=True)
class CurvatureMap:
    kappa: dict[tuple[int, int], float]
    alpha: float

    def __getitem__(self, edge: tuple[int, int]) -> float:
        u, v = edge
        return self.kappa[(min(u, v), max(u, v))]

    def values(self) -> np.ndarray:
        return np.array([self.kappa[e] for e in sorted(self.kappa)])


def transport(supply: np.ndarray, demand: np.ndarray, cost: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact balanced transportation problem by successive shortest paths.

    Bellman-Ford on the residual bipartite network handles the negative
    reverse arcs. Each augmentation exhausts a supply, a demand or a residual
    reverse arc, so the loop terminates after finitely many steps.
    """
    supply = np.asarray(supply, dtype=float).copy()
    demand = np.asarray(demand, dtype=float).copy()
    cost = np.asarray(cost, dtype=float)
    ns, nt = len(supply), len(demand)
    if cost.shape != (ns, nt):
        raise ValueError("cost matrix shape does not match supports")
    if abs(supply.sum() - demand.sum()) > 1e-9 * max(1.0, supply.sum()):
        raise ValueError("unbalanced transportation problem")
    flow = np.zeros((ns, nt))
    eps = 1e-15
    # node ids: sources 0..ns-1, sinks ns..ns+nt-1
    while supply.max(initial=0.0) > eps and demand.max(initial=0.0) > eps:
        dist = np.full(ns + nt, np.inf)
        pred = np.full(ns + nt, -1)
        dist[:ns][supply > eps] = 0.0
        for _ in range(ns + nt):
            changed = False
            for i in range(ns):
                if dist[i] == np.inf:
                    continue
                for j in range(nt):
                    d = dist[i] + cost[i, j]
                    if d < dist[ns + j] - 1e-15:
                        dist[ns + j] = d
                        pred[ns + j] = i
                        changed = True
            for j in range(nt):
                if dist[ns + j] == np.inf:
                    continue
                for i in range(ns):
                    if flow[i, j] > eps:
                        d = dist[ns + j] - cost[i, j]
                        if d < dist[i] - 1e-15:
                            dist[i] = d
                            pred[i] = ns + j
                            changed = True
            if not changed:
                break
        open_sinks = [j for j in range(nt) if demand[j] > eps and dist[ns + j] < np.inf]
        if not open_sinks:
            raise RuntimeError("transportation problem has no augmenting path")
        sink = min(open_sinks, key=lambda j: (dist[ns + j], j))
        # walk back to the source, collecting the bottleneck
        path = []
        node = ns + sink
        while node >= ns or pred[node] != -1:
            prev = int(pred[node])
            path.append((prev, node))
            node = prev
        source = node
        delta = min(supply[source], demand[sink])
        for a, b in path:
            if a >= ns:  # reverse arc sink a -> source b
                delta = min(delta, flow[b, a - ns])
        for a, b in path:
            if a < ns:
                flow[a, b - ns] += delta
            else:
                flow[b, a - ns] -= delta
        supply[source] -= delta
        demand[sink] -= delta
    return float(np.sum(flow * cost)), flow


def shortest_path_lengths(g: Graph) -> np.ndarray:
    """All-pairs hop distances by BFS; unreachable pairs are ``inf``."""
    adj = g.adjacency_lists()
    out = np.full((g.n, g.n), np.inf)
    for s in range(g.n):
        out[s, s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if out[s, w] == np.inf:
                    out[s, w] = out[s, u] + 1
                    queue.append(w)
    return out


def _measure(adj: list[list[int]], u: int, alpha: float) -> dict[int, float]:
    if not adj[u]:
        raise ValueError(f"node {u} is isolated")
    mu = {w: (1.0 - alpha) / len(adj[u]) for w in adj[u]}
    if alpha > 0:
        mu[u] = mu.get(u, 0.0) + alpha
    return mu


def edge_curvature(adj: list[list[int]], dist: np.ndarray, u: int, v: int, alpha: float = 0.0) -> float:
    mu_u, mu_v = _measure(adj, u, alpha), _measure(adj, v, alpha)
    src, dst = sorted(mu_u), sorted(mu_v)
    cost = dist[np.ix_(src, dst)]
    w1, _ = transport(np.array([mu_u[x] for x in src]), np.array([mu_v[y] for y in dst]), cost)
    return 1.0 - w1 / dist[u, v]


def ollivier_curvature(g: Graph, alpha: float = 0.0) -> CurvatureMap:
    """Ollivier-Ricci curvature ``1 - W1(mu_u, mu_v)`` of every edge.

    ``mu_u`` keeps mass ``alpha`` at ``u`` and spreads ``1 - alpha`` evenly over
    its neighbours; transport costs are hop distances in the whole graph.
    """
    if not 0.0 <= alpha < 1.0:
        raise ValueError("alpha must lie in [0, 1)")
    adj = g.adjacency_lists()
    dist = shortest_path_lengths(g)
    kappa = {(u, v): edge_curvature(adj, dist, u, v, alpha) for u, v in g.sorted_edges()}
    return CurvatureMap(kappa, alpha)


@dataclass(frozen=True)
class CurvatureGap:
    value: float
    degenerate: bool


def curvature_gap(g: Graph, alpha: float = 0.0, kappa: CurvatureMap | None = None) -> CurvatureGap:
    """Standardized gap between mean negative and mean positive edge curvature."""
    if kappa is None:
        kappa = ollivier_curvature(g, alpha)
    vals = kappa.values()
    inter = vals[vals < -ZERO_TOL]
    intra = vals[vals > ZERO_TOL]
    if inter.size == 0 or intra.size == 0:
        return CurvatureGap(0.0, True)
    sigma = np.sqrt(0.5 * (inter.var() + intra.var()))
    if sigma <= ZERO_TOL:
        return CurvatureGap(0.0, True)
    return CurvatureGap(float(abs(inter.mean() - intra.mean()) / sigma), False)


def lcp_encoding(g: Graph, alpha: float = 0.0) -> np.ndarray:
    """Per node: min, max, mean, std and median curvature of incident edges."""
    adj = g.adjacency_lists()
    if any(not a for a in adj):
        raise ValueError("curvature profile undefined for isolated nodes")
    kappa = ollivier_curvature(g, alpha)
    out = np.zeros((g.n, 5))
    for v, nbrs in enumerate(adj):
        k = np.array([kappa[(v, w)] for w in nbrs])
        out[v] = (k.min(), k.max(), k.mean(), k.std(), np.median(k))
    return out


def _best_addition(adj: list[set[int]], u: int, v: int) -> tuple[int, int] | None:
    best: tuple[int, tuple[int, int]] | None = None
    for p in sorted(adj[u]):
        for q in sorted(adj[v]):
            if p == q or q in adj[p]:
                continue
            pair = (min(p, q), max(p, q))
            score = len(adj[p] & adj[q])
            if best is None or score > best[0] or (score == best[0] and pair < best[1]):
                best = (score, pair)
    return None if best is None else best[1]


def _connected(adj: list[set[int]]) -> bool:
    if not adj:
        return True
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == len(adj)


def borf_rewire(g: Graph, batches: int, h_add: int, h_del: int, alpha: float = 0.0):
    """Batch Ollivier-Ricci rewiring.

    Each batch recomputes curvature, then for each of the ``h_add`` most
    negatively curved edges ``(u, v)`` adds the non-edge ``(p, q)`` with
    ``p`` adjacent to ``u`` and ``q`` adjacent to ``v`` that has the most
    common neighbours, and removes the ``h_del`` most positively curved edges
    unless a removal would disconnect the graph. Skipped edits are recorded
    in ``report.skipped``.
    """
    from .rewiring import RewiringReport
    from .spectral import fiedler_value, is_connected

    if h_add < 0 or h_del < 0 or batches < 0:
        raise ValueError("batches, h_add and h_del must be nonnegative")
    if not is_connected(g):
        raise ValueError("BORF needs a connected graph")
    lam_before = fiedler_value(g) if g.n >= 2 else 0.0
    adj = [set(a) for a in g.adjacency_lists()]
    added: list[tuple[int, int]] = []
    removed: list[tuple[int, int]] = []
    details: list[dict] = []
    skipped: list[dict] = []
    current = g
    for batch in range(batches if (h_add or h_del) else 0):
        kappa = ollivier_curvature(current, alpha)
        ranked = sorted(kappa.kappa.items(), key=lambda kv: (kv[1], kv[0]))
        for (u, v), k in ranked[:h_add]:
            pair = _best_addition(adj, u, v)
            if pair is None:
                skipped.append({"batch": batch, "op": "add", "around": [u, v], "kappa": k})
                continue
            p, q = pair
            adj[p].add(q)
            adj[q].add(p)
            added.append(pair)
            details.append({"batch": batch, "op": "add", "edge": list(pair), "around": [u, v], "kappa": k})
        by_high = sorted(kappa.kappa.items(), key=lambda kv: (-kv[1], kv[0]))
        for (u, v), k in by_high[:h_del]:
            if v not in adj[u]:
                continue
            adj[u].discard(v)
            adj[v].discard(u)
            if not _connected(adj):
                adj[u].add(v)
                adj[v].add(u)
                skipped.append({"batch": batch, "op": "remove", "edge": [u, v], "kappa": k})
                continue
            removed.append((u, v))
            details.append({"batch": batch, "op": "remove", "edge": [u, v], "kappa": k})
        current = g.with_edges((u, w) for u in range(g.n) for w in adj[u] if u < w)
    lam_after = fiedler_value(current) if g.n >= 2 else 0.0
    report = RewiringReport(g.id, added, removed, lam_before, lam_after, bool(added or removed),
                            details=details, skipped=skipped)
    return current, report
