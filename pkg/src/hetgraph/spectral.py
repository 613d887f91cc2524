"""Laplacians, a dense Jacobi eigensolver, Fiedler pairs, consensus dynamics and
spectral node encodings."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .graphio import Graph

DENSE_LIMIT = 4096


class ConvergenceError(RuntimeError):
    pass


class DisconnectedGraphError(ValueError):
    pass


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # columns, orthonormal
    sweeps: int = 0


def laplacian(g: Graph, kind: str = "combinatorial") -> np.ndarray:
    """Graph Laplacian as a dense symmetric matrix.

    ``kind="normalized"`` gives ``I - D^{-1/2} A D^{-1/2}``; rows and columns
    of isolated nodes are all zero.
    """
    a = g.adjacency()
    deg = a.sum(axis=1)
    if kind == "combinatorial":
        return np.diag(deg) - a
    if kind in ("normalized", "symmetric-normalized"):
        inv_sqrt = np.zeros_like(deg)
        nz = deg > 0
        inv_sqrt[nz] = 1.0 / np.sqrt(deg[nz])
        lap = np.diag(nz.astype(float)) - inv_sqrt[:, None] * a * inv_sqrt[None, :]
        return lap
    raise ValueError(f"unknown Laplacian kind {kind!r}")


@njit(cache=True)
def _jacobi_sweep(a: np.ndarray, vt: np.ndarray) -> None:
    n = a.shape[0]
    for p in range(n - 1):
        for q in range(p + 1, n):
            apq = a[p, q]
            if apq == 0.0:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            if theta == 0.0:
                t = 1.0
            elif abs(theta) > 1e150:
                t = 0.5 / theta
            else:
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
            c = 1.0 / np.sqrt(t * t + 1.0)
            s = t * c
            app = a[p, p]
            aqq = a[q, q]
            for k in range(n):
                apk = a[p, k]
                aqk = a[q, k]
                a[p, k] = c * apk - s * aqk
                a[q, k] = s * apk + c * aqk
            # symmetry: mirror the two updated rows into their columns
            for k in range(n):
                a[k, p] = a[p, k]
                a[k, q] = a[q, k]
            a[p, p] = app - t * apq
            a[q, q] = aqq + t * apq
            a[p, q] = 0.0
            a[q, p] = 0.0
            for k in range(n):
                vpk = vt[p, k]
                vqk = vt[q, k]
                vt[p, k] = c * vpk - s * vqk
                vt[q, k] = s * vpk + c * vqk


@njit(cache=True)
def _off_norm(a: np.ndarray) -> float:
    n = a.shape[0]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                acc += a[i, j] * a[i, j]
    return np.sqrt(acc)


def eig_sym(m: np.ndarray, tol: float = 1e-12, max_sweeps: int = 50,
            dense_limit: int = DENSE_LIMIT) -> SpectralDecomposition:
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi rotations.

    Pairs are visited row by row; iteration stops once the off-diagonal
    Frobenius norm is at most ``tol * ||m||_F``. Eigenpairs come back in
    ascending order.
    """
    a = np.array(m, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    n = a.shape[0]
    if n < 1:
        raise ValueError("matrix must be at least 1x1")
    if n > dense_limit:
        raise ValueError(f"order {n} exceeds dense limit {dense_limit}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    a = np.ascontiguousarray(0.5 * (a + a.T))
    vt = np.eye(n)  # eigenvectors as rows
    target = tol * np.linalg.norm(a)
    sweeps = 0
    while _off_norm(a) > target:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {_off_norm(a):.3e})")
        _jacobi_sweep(a, vt)
        sweeps += 1
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return SpectralDecomposition(w[order], vt.T[:, order].copy(), sweeps)


def fix_sign(x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Flip ``x`` so that its first entry with magnitude above ``tol`` is positive."""
    nz = np.flatnonzero(np.abs(x) > tol)
    if nz.size and x[nz[0]] < 0:
        return -x
    return x


def connected_components(g: Graph) -> list[list[int]]:
    adj = g.adjacency_lists()
    seen = [False] * g.n
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [s], []
        while stack:
            u = stack.pop()
            comp.append(u)
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(sorted(comp))
    return comps


def is_connected(g: Graph) -> bool:
    return len(connected_components(g)) == 1


def fiedler(g: Graph, kind: str = "combinatorial") -> tuple[float, np.ndarray]:
    """Second-smallest Laplacian eigenvalue and a unit eigenvector.

    Disconnected graphs return exactly 0.0; the vector then lies in the null
    space.
    """
    if g.n < 2:
        raise ValueError("Fiedler value needs at least two nodes")
    dec = eig_sym(laplacian(g, kind))
    lam = float(dec.eigenvalues[1])
    if not is_connected(g):
        lam = 0.0
    vec = dec.eigenvectors[:, 1]
    return max(lam, 0.0), fix_sign(vec / np.linalg.norm(vec))


def fiedler_value(g: Graph, kind: str = "combinatorial") -> float:
    return fiedler(g, kind)[0]


@dataclass(frozen=True)
class ConsensusResult:
    times: np.ndarray
    states: np.ndarray  # len(times) x n
    decay_rate: float
    limit: float


def consensus_simulate(g: Graph, x0: np.ndarray, t_end: float, dt: float,
                       method: str = "exact") -> ConsensusResult:
    """Integrate ``dx/dt = -L x`` on a connected graph.

    ``method="exact"`` evaluates ``Q exp(-Lambda t) Q^T x0`` at every step;
    ``method="euler"`` uses explicit Euler, which requires
    ``dt < 2 / lambda_max``. ``decay_rate`` is the least-squares slope of
    ``log ||x(t) - mean(x0)||`` over the second half of the trajectory (it
    approaches ``-lambda_2``).
    """
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (g.n,):
        raise ValueError(f"x0 must have length {g.n}")
    if not is_connected(g):
        raise DisconnectedGraphError("consensus dynamics need a connected graph")
    if dt <= 0 or t_end <= 0:
        raise ValueError("t_end and dt must be positive")
    dec = eig_sym(laplacian(g))
    lam, q = dec.eigenvalues, dec.eigenvectors
    steps = int(round(t_end / dt))
    times = np.arange(steps + 1) * dt
    mean = float(x0.mean())
    if method == "exact":
        coeff = q.T @ x0
        coeff[0] = 0.0  # the mean mode is added back exactly below
        dev = (np.exp(-np.outer(times, np.maximum(lam, 0.0))) * coeff) @ q.T
        states = mean + dev
    elif method == "euler":
        if dt >= 2.0 / lam[-1]:
            raise ValueError(f"unstable step: dt={dt} >= 2/lambda_max={2.0 / lam[-1]:.6g}")
        lap = laplacian(g)
        states = np.empty((steps + 1, g.n))
        states[0] = x0
        for i in range(steps):
            states[i + 1] = states[i] - dt * (lap @ states[i])
        dev = states - mean
    else:
        raise ValueError(f"unknown method {method!r}")
    norms = np.linalg.norm(dev, axis=1)
    half = slice(steps // 2, steps + 1)
    t_half, n_half = times[half], norms[half]
    ok = n_half > 0
    if ok.sum() >= 2:
        rate = float(np.polyfit(t_half[ok], np.log(n_half[ok]), 1)[0])
    else:
        rate = float("-inf")
    return ConsensusResult(times, states, rate, mean)


def lape_encoding(g: Graph, k: int) -> np.ndarray:
    """Eigenvectors of ``lambda_2 .. lambda_{k+1}`` of the combinatorial Laplacian."""
    if k >= g.n:
        raise ValueError(f"k={k} must be smaller than n={g.n}")
    if k < 0:
        raise ValueError("k must be nonnegative")
    dec = eig_sym(laplacian(g))
    out = np.zeros((g.n, k))
    for j in range(k):
        out[:, j] = fix_sign(dec.eigenvectors[:, j + 1])
    return out


def rwpe_encoding(g: Graph, k: int) -> np.ndarray:
    """Column ``t-1`` holds the diagonal of ``(D^{-1} A)^t``."""
    deg = g.degrees()
    if np.any(deg == 0):
        raise ValueError("random-walk encoding undefined for isolated nodes")
    p = g.adjacency() / deg[:, None]
    out = np.zeros((g.n, k))
    step = np.eye(g.n)
    for t in range(k):
        step = step @ p
        out[:, t] = np.diag(step)
    return out


def ldp_encoding(g: Graph) -> np.ndarray:
    """Degree, then min/max/mean/std of neighbour degrees (population std)."""
    deg = g.degrees()
    out = np.zeros((g.n, 5))
    for v, nbrs in enumerate(g.adjacency_lists()):
        out[v, 0] = deg[v]
        if nbrs:
            d = deg[nbrs].astype(float)
            out[v, 1:] = (d.min(), d.max(), d.mean(), d.std())
    return out
