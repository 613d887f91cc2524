"""Heterogeneity profiles from prediction logs and the statistics built on them."""

from __future__ import annotations

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.special import betainc

from .graphio import PredictionRecord

log = logging.getLogger(__name__)

MIN_EVALUATIONS = 100
METRICS = ("acc", "mae")


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class GraphStats:
    count: int
    mean: float
    variance: float  # unbiased; nan for a single evaluation


@dataclass
class HeterogeneityProfile:
    metric: str
    stats: dict[int, GraphStats] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")

    @property
    def higher_is_better(self) -> bool:
        return self.metric == "acc"

    def graph_ids(self) -> list[int]:
        return sorted(self.stats)

    def means(self, ids: Iterable[int] | None = None) -> np.ndarray:
        ids = self.graph_ids() if ids is None else ids
        return np.array([self.stats[i].mean for i in ids])

    def sorted_rows(self) -> list[tuple[int, int, float, float]]:
        """``(graph_id, count, mean, variance)`` ordered by mean, then id."""
        items = sorted(self.stats.items(), key=lambda kv: (kv[1].mean, kv[0]))
        return [(gid, s.count, s.mean, s.variance) for gid, s in items]


def build_profile(records: Iterable[PredictionRecord], metric: str) -> HeterogeneityProfile:
    """Per-graph count, mean and unbiased variance of the recorded values."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    groups: dict[int, list[float]] = defaultdict(list)
    for r in records:
        if metric == "acc" and r.value not in (0.0, 1.0):
            raise ValueError(f"graph {r.graph_id}: accuracy values must be 0 or 1")
        if metric == "mae" and r.value < 0:
            raise ValueError(f"graph {r.graph_id}: negative error value")
        groups[r.graph_id].append(r.value)
    if not groups:
        raise ValueError("no prediction records")
    stats = {}
    for gid, vals in groups.items():
        v = np.array(vals)
        var = float(v.var(ddof=1)) if v.size > 1 else float("nan")
        stats[gid] = GraphStats(int(v.size), float(v.mean()), var)
    few = sum(1 for s in stats.values() if s.count < MIN_EVALUATIONS)
    if few:
        log.warning("%d graph(s) have fewer than %d evaluations", few, MIN_EVALUATIONS)
    return HeterogeneityProfile(metric, stats)


@dataclass(frozen=True)
class Correlation:
    r: float
    p: float
    n: int


def pearson(x, y) -> Correlation:
    """Sample Pearson correlation with a two-sided Student-t p-value.

    ``p = I_{df/(df+t^2)}(df/2, 1/2)`` with ``t = r sqrt(df / (1 - r^2))`` and
    ``df = n - 2``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be vectors of equal length")
    n = x.size
    if n < 3:
        raise ValueError("need at least three observations")
    xc, yc = x - x.mean(), y - y.mean()
    sxx, syy = float(xc @ xc), float(yc @ yc)
    if sxx == 0 or syy == 0:
        raise ValueError("zero variance")
    r = float(np.clip(xc @ yc / math.sqrt(sxx * syy), -1.0, 1.0))
    df = n - 2
    if abs(r) == 1.0:
        return Correlation(r, 0.0, n)
    t2 = r * r * df / (1.0 - r * r)
    p = float(betainc(0.5 * df, 0.5, df / (df + t2)))
    return Correlation(r, p, n)


@dataclass
class LassoFit:
    coef: np.ndarray  # original feature scale, length = number of input columns
    intercept: float
    lam: float
    r2: float
    means: np.ndarray
    scales: np.ndarray
    dropped: list[int]
    sweeps: int

    @property
    def support(self) -> list[int]:
        return [int(j) for j in np.flatnonzero(self.coef != 0.0)]


def _standardize(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, list[int]]:
    means = x.mean(axis=0)
    scales = x.std(axis=0)
    dropped = [int(j) for j in np.flatnonzero(scales <= 1e-12 * np.maximum(1.0, np.abs(means)))]
    keep = np.setdiff1d(np.arange(x.shape[1]), dropped)
    z = (x[:, keep] - means[keep]) / scales[keep]
    return z, means, scales, dropped


def lambda_max(x: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty that zeroes every standardized coefficient."""
    z, *_ = _standardize(np.asarray(x, dtype=float))
    yc = np.asarray(y, dtype=float) - np.mean(y)
    return float(np.max(np.abs(z.T @ yc)) / len(yc)) if z.shape[1] else 0.0


def lasso_fit(x, y, lam: float, tol: float = 1e-8, max_sweeps: int = 10_000) -> LassoFit:
    """Cyclic coordinate descent with soft-thresholding.

    Minimizes ``(1/2n) ||y - b0 - Z b||^2 + lam ||b||_1`` over standardized
    columns ``Z`` (zero mean, unit population variance; constant columns are
    dropped and reported). Stops when no coefficient moves more than ``tol``
    in a sweep. Coefficients are returned on the original feature scale.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ValueError("X must have one row per target value")
    if lam < 0:
        raise ValueError("penalty must be nonnegative")
    n, p = x.shape
    z, means, scales, dropped = _standardize(x)
    y_mean = float(y.mean())
    resid = y - y_mean
    beta = np.zeros(z.shape[1])
    sweeps = 0
    delta = 0.0
    if z.shape[1]:
        while True:
            delta = 0.0
            for j in range(z.shape[1]):
                old = beta[j]
                rho = z[:, j] @ resid / n + old
                new = math.copysign(max(abs(rho) - lam, 0.0), rho)
                if new != old:
                    resid -= (new - old) * z[:, j]
                    beta[j] = new
                    delta = max(delta, abs(new - old))
            sweeps += 1
            if delta <= tol:
                break
            if sweeps >= max_sweeps:
                raise ConvergenceError(f"lasso did not converge in {max_sweeps} sweeps (last change {delta:.3e})")
    keep = np.setdiff1d(np.arange(p), dropped)
    coef = np.zeros(p)
    coef[keep] = beta / scales[keep]
    intercept = y_mean - float(coef @ means)
    ss_tot = float(((y - y_mean) ** 2).sum())
    ss_res = float((resid ** 2).sum())
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return LassoFit(coef, intercept, float(lam), r2, means, scales, dropped, sweeps)


def lasso_grid(x, y, num: int = 20, ratio: float = 1e-3) -> np.ndarray:
    """Descending logarithmic penalty grid from ``lambda_max`` to ``lambda_max * ratio``."""
    top = lambda_max(x, y)
    if top <= 0:
        return np.zeros(1)
    return np.geomspace(top, top * ratio, num)


def lasso_cv(x, y, lambdas: np.ndarray | None = None, folds: int = 5, seed: int = 0
             ) -> tuple[LassoFit, np.ndarray, np.ndarray]:
    """K-fold cross-validated penalty choice; returns the refit at the best
    penalty, the grid and the mean held-out squared error per grid point."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lambdas = lasso_grid(x, y) if lambdas is None else np.asarray(lambdas, dtype=float)
    n = len(y)
    folds = max(2, min(folds, n))
    order = np.random.default_rng(seed).permutation(n)
    parts = np.array_split(order, folds)
    errors = np.zeros(len(lambdas))
    for k, test in enumerate(parts):
        train = np.concatenate([p for i, p in enumerate(parts) if i != k])
        for i, lam in enumerate(lambdas):
            fit = lasso_fit(x[train], y[train], lam)
            pred = fit.intercept + x[test] @ fit.coef
            errors[i] += float(((y[test] - pred) ** 2).sum())
    errors /= n
    best = int(np.argmin(errors))  # first minimum = largest penalty among ties
    return lasso_fit(x, y, lambdas[best]), lambdas, errors


def optimal_depth_distribution(profiles: Mapping[int, HeterogeneityProfile]
                               ) -> tuple[dict[int, int], dict[int, int]]:
    """Best depth per graph and the histogram of best depths.

    Accuracy profiles pick the largest mean, MAE profiles the smallest; ties
    go to the smaller depth.
    """
    if len(profiles) < 2:
        raise ValueError("need profiles for at least two depths")
    depths = sorted(profiles)
    metrics = {profiles[d].metric for d in depths}
    if len(metrics) != 1:
        raise ValueError("profiles mix metrics")
    ids = set(profiles[depths[0]].stats)
    for d in depths[1:]:
        if set(profiles[d].stats) != ids:
            raise ValueError(f"depth {d} covers a different set of graphs")
    sign = 1.0 if profiles[depths[0]].higher_is_better else -1.0
    best: dict[int, int] = {}
    for gid in sorted(ids):
        scores = [sign * profiles[d].stats[gid].mean for d in depths]
        best[gid] = depths[int(np.argmax(scores))]  # argmax keeps the first (smallest depth) on ties
    hist = {d: 0 for d in depths}
    for d in best.values():
        hist[d] += 1
    return best, hist


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    graphs: int
    mean: float
    variance: float


def training_dynamics(records: Iterable[PredictionRecord]) -> list[EpochStats]:
    """Per epoch: mean and cross-graph (population) variance of per-graph mean values."""
    per: dict[int, dict[int, list[float]]] = defaultdict(lambda: defaultdict(list))
    for r in records:
        if r.epoch is None:
            raise ValueError(f"record for graph {r.graph_id}, run {r.run_id} has no epoch")
        per[r.epoch][r.graph_id].append(r.value)
    out = []
    for epoch in sorted(per):
        means = np.array([np.mean(v) for _, v in sorted(per[epoch].items())])
        out.append(EpochStats(epoch, len(means), float(means.mean()), float(means.var())))
    return out


def encoding_effect(base: HeterogeneityProfile, enc: HeterogeneityProfile) -> dict[int, float]:
    """Per-graph ratio of mean accuracy with the encoding over mean accuracy without.

    ``x/0`` with ``x > 0`` maps to ``inf``; ``0/0`` maps to 1.
    """
    if base.metric != "acc" or enc.metric != "acc":
        raise ValueError("encoding effects are defined for accuracy profiles")
    if set(base.stats) != set(enc.stats):
        raise ValueError("profiles cover different graphs")
    out = {}
    for gid in sorted(base.stats):
        b, e = base.stats[gid].mean, enc.stats[gid].mean
        if b == 0:
            out[gid] = 1.0 if e == 0 else math.inf
        else:
            out[gid] = e / b
    return out
