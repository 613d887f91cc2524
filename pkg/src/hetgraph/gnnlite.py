"""Sum-aggregation message passing forward pass and its Lipschitz accounting,
used to check the TMD stability bound numerically."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphio import Graph
from .tmd import pascal_weights, tmd


@dataclass(frozen=True)
class Layer:
    """Update map ``z -> W2 relu(W1 z + b1) + b2``."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __call__(self, z: np.ndarray) -> np.ndarray:
        return np.maximum(z @ self.w1.T + self.b1, 0.0) @ self.w2.T + self.b2

    def scaled(self, c: float) -> Layer:
        return Layer(c * self.w1, self.b1, c * self.w2, self.b2)


@dataclass(frozen=True)
class ForwardModel:
    layers: tuple[Layer, ...]
    readout_w: np.ndarray
    readout_b: np.ndarray

    def __post_init__(self) -> None:
        dim = self.input_dim
        for i, layer in enumerate(self.layers):
            if layer.w1.shape[1] != dim or layer.w2.shape[0] != layer.b2.shape[0] \
                    or layer.w1.shape[0] != layer.b1.shape[0] or layer.w2.shape[1] != layer.w1.shape[0]:
                raise ValueError(f"layer {i} dimensions do not chain")
            dim = layer.w2.shape[0]
        if self.readout_w.shape[1] != dim or self.readout_w.shape[0] != self.readout_b.shape[0]:
            raise ValueError("readout dimensions do not chain")
        params = [self.readout_w, self.readout_b]
        for layer in self.layers:
            params += [layer.w1, layer.b1, layer.w2, layer.b2]
        if not all(np.all(np.isfinite(p)) for p in params):
            raise ValueError("model parameters must be finite")

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return (self.layers[0].w1 if self.layers else self.readout_w).shape[1]

    def scaled(self, c: float) -> ForwardModel:
        return ForwardModel(tuple(l.scaled(c) for l in self.layers), c * self.readout_w, self.readout_b)


def random_model(rng: np.random.Generator, in_dim: int, layers: int, hidden: int = 4, width: int = 4,
                 out_dim: int = 1, bias: bool = False) -> ForwardModel:
    """Parameters uniform on (-1, 1).

    Message-passing biases stay zero unless ``bias`` is set: the bound treats
    padding trees as zero-feature nodes, which only embed to zero when every
    update map fixes the origin. The readout bias cancels in output
    differences and is always drawn.
    """
    def u(*shape):
        return rng.uniform(-1.0, 1.0, size=shape)

    out = []
    dim = in_dim
    for _ in range(layers):
        b1 = u(hidden) if bias else np.zeros(hidden)
        b2 = u(width) if bias else np.zeros(width)
        out.append(Layer(u(hidden, dim), b1, u(width, hidden), b2))
        dim = width
    return ForwardModel(tuple(out), u(out_dim, dim), u(out_dim))


def node_embeddings(g: Graph, model: ForwardModel) -> np.ndarray:
    if g.num_features != model.input_dim:
        raise ValueError(f"graph has {g.num_features} features, model expects {model.input_dim}")
    a_hat = g.adjacency() + np.eye(g.n)
    x = np.array(g.features, dtype=float)
    for layer in model.layers:
        x = layer(a_hat @ x)
    return x


def gcn_forward(g: Graph, model: ForwardModel) -> np.ndarray:
    """``L`` rounds of summing over ``N(v) + {v}`` and applying the update map,
    then a sum readout and the final linear map."""
    x = node_embeddings(g, model)
    return model.readout_w @ x.sum(axis=0) + model.readout_b


def spectral_norm(w: np.ndarray, rtol: float = 1e-10, max_iter: int = 100_000) -> float:
    """Largest singular value by power iteration on ``W^T W``."""
    w = np.asarray(w, dtype=float)
    if not w.any():
        return 0.0
    gram = w.T @ w
    v = np.ones(gram.shape[0]) + 0.1 * np.arange(gram.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        u = gram @ v
        new = float(np.linalg.norm(u))
        if new == 0.0:
            # start vector in the kernel; restart on a coordinate axis with the largest column
            v = np.zeros_like(v)
            v[int(np.argmax(np.sum(gram * gram, axis=0)))] = 1.0
            continue
        v = u / new
        if abs(new - lam) <= rtol * new:
            lam = new
            break
        lam = new
    return float(np.sqrt(lam))


def lipschitz_bounds(model: ForwardModel) -> list[float]:
    """Per-layer Lipschitz constants ``||W2|| ||W1||``; the readout is the last entry."""
    ks = [spectral_norm(l.w1) * spectral_norm(l.w2) for l in model.layers]
    ks.append(spectral_norm(model.readout_w))
    return ks


@dataclass(frozen=True)
class BoundCheck:
    lhs: float
    rhs: float
    holds: bool
    lipschitz: float
    distance: float


def verify_tmd_bound(g1: Graph, g2: Graph, model: ForwardModel, epsilon: float = 1.0) -> BoundCheck:
    """Compare ``||h(G) - h(G')||`` with the Lipschitz product times the TMD at
    depth ``L + 1`` under Pascal weights."""
    lhs = float(np.linalg.norm(gcn_forward(g1, model) - gcn_forward(g2, model)))
    layers = model.num_layers
    k = float(np.prod(lipschitz_bounds(model)))
    dist = tmd(g1, g2, layers + 1, pascal_weights(max(layers, 1), epsilon))
    rhs = k * dist
    return BoundCheck(lhs, rhs, lhs <= rhs + 1e-9, k, dist)
