"""Graph datasets, TUDataset text files, prediction logs and CSV tables."""

from __future__ import annotations

import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

log = logging.getLogger(__name__)


class FormatError(ValueError):
    """Malformed input file; message carries file name and line number."""


@dataclass(frozen=True)
class Graph:
    """Undirected simple graph with node features and a graph-level label.

    ``edges`` holds normalized pairs ``(u, v)`` with ``u < v``. ``label`` is an
    int for classification and a tuple of floats for regression.
    """

    id: int
    n: int
    edges: frozenset[tuple[int, int]]
    features: np.ndarray = field(compare=False, repr=False)
    label: int | tuple[float, ...] = 0

    def __post_init__(self) -> None:
        edges = frozenset((min(u, v), max(u, v)) for u, v in self.edges)
        for u, v in edges:
            if u == v:
                raise ValueError(f"graph {self.id}: self-loop at node {u}")
            if u < 0 or v >= self.n:
                raise ValueError(f"graph {self.id}: edge ({u}, {v}) out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)
        feats = np.asarray(self.features, dtype=float)
        if feats.ndim == 1 and feats.size == 0:
            feats = feats.reshape(self.n, 0)
        if feats.ndim != 2 or feats.shape[0] != self.n:
            raise ValueError(f"graph {self.id}: features must be {self.n} x m, got {feats.shape}")
        feats.setflags(write=False)
        object.__setattr__(self, "features", feats)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (
            self.id == other.id
            and self.n == other.n
            and self.edges == other.edges
            and self.label == other.label
            and self.features.shape == other.features.shape
            and bool(np.array_equal(self.features, other.features))
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def adjacency_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in self.sorted_edges():
            adj[u].append(v)
            adj[v].append(u)
        for nbrs in adj:
            nbrs.sort()
        return adj

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] = a[v, u] = 1.0
        return a

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n, dtype=int)
        for u, v in self.edges:
            deg[u] += 1
            deg[v] += 1
        return deg

    def with_edges(self, edges: Iterable[tuple[int, int]]) -> Graph:
        return Graph(self.id, self.n, frozenset(edges), self.features, self.label)

    def permuted(self, perm: Sequence[int]) -> Graph:
        """Relabel node ``i`` as ``perm[i]``."""
        perm = list(perm)
        feats = np.zeros_like(self.features)
        feats[perm] = self.features
        edges = frozenset((perm[u], perm[v]) for u, v in self.edges)
        return Graph(self.id, self.n, edges, feats, self.label)


def make_graph(
    n: int,
    edges: Iterable[tuple[int, int]],
    features: np.ndarray | None = None,
    label: int | tuple[float, ...] = 0,
    gid: int = 0,
) -> Graph:
    """Convenience constructor; missing features become a single all-ones column."""
    if features is None:
        features = np.ones((n, 1))
    return Graph(gid, n, frozenset(edges), np.asarray(features, dtype=float), label)


@dataclass(frozen=True)
class Task:
    kind: str  # "classification" | "regression"
    size: int  # classes k, or target dimension d

    def __post_init__(self) -> None:
        if self.kind not in ("classification", "regression"):
            raise ValueError(f"unknown task kind {self.kind!r}")


@dataclass
class Dataset:
    name: str
    graphs: list[Graph]
    task: Task
    label_map: dict[str, int] = field(default_factory=dict)
    self_loops_dropped: int = 0

    def __post_init__(self) -> None:
        ids = [g.id for g in self.graphs]
        if len(set(ids)) != len(ids):
            raise ValueError("graph ids must be unique")
        for g in self.graphs:
            if self.task.kind == "classification":
                if not isinstance(g.label, (int, np.integer)) or not 0 <= g.label < self.task.size:
                    raise ValueError(f"graph {g.id}: label {g.label!r} outside [0, {self.task.size})")
            elif len(g.label) != self.task.size:  # type: ignore[arg-type]
                raise ValueError(f"graph {g.id}: regression label must have length {self.task.size}")

    def __len__(self) -> int:
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def labels(self) -> list:
        return [g.label for g in self.graphs]

    def replace_graphs(self, graphs: list[Graph]) -> Dataset:
        return Dataset(self.name, graphs, self.task, dict(self.label_map), self.self_loops_dropped)


# --------------------------------------------------------------------------- TU


def _read_lines(path: Path) -> list[str]:
    with open(path, encoding="utf-8") as fh:
        return [line.strip() for line in fh]


def _parse_numbers(path: Path, lineno: int, line: str, conv=float) -> list:
    try:
        return [conv(tok) for tok in line.replace(",", " ").split()]
    except ValueError:
        raise FormatError(f"{path.name}:{lineno}: non-numeric token in {line!r}") from None


def _parse_int_column(path: Path) -> list[int]:
    out = []
    for lineno, line in enumerate(_read_lines(path), 1):
        if not line:
            continue
        vals = _parse_numbers(path, lineno, line, int)
        if len(vals) != 1:
            raise FormatError(f"{path.name}:{lineno}: expected one integer, got {line!r}")
        out.append(vals[0])
    return out


def parse_tu_dataset(directory: str | os.PathLike, name: str) -> Dataset:
    """Read a dataset in the TUDataset text layout.

    Mandatory files are ``{name}_A.txt``, ``{name}_graph_indicator.txt`` and
    ``{name}_graph_labels.txt``. Integer node labels are one-hot encoded and
    placed before any ``{name}_node_attributes.txt`` columns. Graph labels are
    classification labels when every token is an integer (remapped to
    ``0..k-1``, mapping kept in ``Dataset.label_map``); otherwise each line is
    a real regression target.
    """
    root = Path(directory)

    def path_of(suffix: str) -> Path:
        return root / f"{name}_{suffix}.txt"

    for suffix in ("A", "graph_indicator", "graph_labels"):
        if not path_of(suffix).is_file():
            raise FileNotFoundError(f"missing mandatory file {path_of(suffix)}")

    indicator = _parse_int_column(path_of("graph_indicator"))
    total_nodes = len(indicator)
    graph_ids = sorted(set(indicator))
    gid_pos = {gid: i for i, gid in enumerate(graph_ids)}
    node_graph = np.array([gid_pos[g] for g in indicator], dtype=int)
    offsets: dict[int, int] = {}
    counts = np.bincount(node_graph, minlength=len(graph_ids))
    for node, g in enumerate(node_graph):
        offsets.setdefault(int(g), node)
    for node, g in enumerate(node_graph):
        if node - offsets[int(g)] >= counts[g]:
            raise FormatError(f"{path_of('graph_indicator').name}:{node + 1}: nodes of a graph must be contiguous")

    edge_sets: list[set[tuple[int, int]]] = [set() for _ in graph_ids]
    self_loops = 0
    a_path = path_of("A")
    for lineno, line in enumerate(_read_lines(a_path), 1):
        if not line:
            continue
        vals = _parse_numbers(a_path, lineno, line, int)
        if len(vals) != 2:
            raise FormatError(f"{a_path.name}:{lineno}: expected two node ids, got {line!r}")
        u, v = vals[0] - 1, vals[1] - 1
        for node in (u, v):
            if not 0 <= node < total_nodes:
                raise FormatError(f"{a_path.name}:{lineno}: node {node + 1} absent from graph indicator")
        if node_graph[u] != node_graph[v]:
            raise FormatError(f"{a_path.name}:{lineno}: edge joins nodes of different graphs")
        if u == v:
            self_loops += 1
            continue
        g = int(node_graph[u])
        a, b = u - offsets[g], v - offsets[g]
        edge_sets[g].add((min(a, b), max(a, b)))
    if self_loops:
        log.warning("%s: dropped %d self-loop(s)", name, self_loops)

    feature_blocks: list[np.ndarray] = []
    nl_path = path_of("node_labels")
    if nl_path.is_file():
        node_labels = _parse_int_column(nl_path)
        if len(node_labels) != total_nodes:
            raise FormatError(f"{nl_path.name}: {len(node_labels)} lines for {total_nodes} nodes")
        alphabet = sorted(set(node_labels))
        # alphabet spans 0..max so that label values map to fixed columns
        lo = min(0, alphabet[0])
        width = alphabet[-1] - lo + 1
        onehot = np.zeros((total_nodes, width))
        onehot[np.arange(total_nodes), np.array(node_labels) - lo] = 1.0
        feature_blocks.append(onehot)
    na_path = path_of("node_attributes")
    if na_path.is_file():
        rows = []
        for lineno, line in enumerate(_read_lines(na_path), 1):
            if line:
                rows.append(_parse_numbers(na_path, lineno, line))
        if len(rows) != total_nodes:
            raise FormatError(f"{na_path.name}: {len(rows)} lines for {total_nodes} nodes")
        if len({len(r) for r in rows}) > 1:
            raise FormatError(f"{na_path.name}: ragged attribute rows")
        feature_blocks.append(np.array(rows, dtype=float))
    features = np.hstack(feature_blocks) if feature_blocks else np.zeros((total_nodes, 0))

    gl_path = path_of("graph_labels")
    raw_labels = []
    for lineno, line in enumerate(_read_lines(gl_path), 1):
        if line:
            raw_labels.append((lineno, line))
    if len(raw_labels) != len(graph_ids):
        raise FormatError(f"{gl_path.name}: {len(raw_labels)} labels for {len(graph_ids)} graphs")
    # sorted graph ids index the label file by position (ids are 1..N in TU files)
    try:
        int_labels = [int(line) for _, line in raw_labels]
    except ValueError:
        int_labels = None

    label_map: dict[str, int] = {}
    if int_labels is not None:
        distinct = sorted(set(int_labels))
        label_map = {str(v): i for i, v in enumerate(distinct)}
        labels: list = [label_map[str(v)] for v in int_labels]
        task = Task("classification", len(distinct))
    else:
        labels = [tuple(_parse_numbers(gl_path, lineno, line)) for lineno, line in raw_labels]
        if len({len(t) for t in labels}) != 1:
            raise FormatError(f"{gl_path.name}: regression targets of differing length")
        task = Task("regression", len(labels[0]))

    graphs = []
    for g, gid in enumerate(graph_ids):
        n = int(counts[g])
        if n == 0:
            raise FormatError(f"graph {gid} has zero nodes")
        start = offsets[g]
        graphs.append(Graph(gid, n, frozenset(edge_sets[g]), features[start:start + n], labels[g]))
    return Dataset(name, graphs, task, label_map, self_loops)


def write_tu_dataset(dataset: Dataset, directory: str | os.PathLike, name: str | None = None) -> None:
    """Write ``dataset`` in the TUDataset layout (both arc directions per edge).

    Features are written as ``node_attributes``; classification labels are
    written through the inverse of ``label_map`` when one is present.
    """
    name = name or dataset.name
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    inverse = {v: k for k, v in dataset.label_map.items()}
    offset = 0
    with open(root / f"{name}_A.txt", "w", newline="\n") as fa, \
            open(root / f"{name}_graph_indicator.txt", "w", newline="\n") as fi, \
            open(root / f"{name}_graph_labels.txt", "w", newline="\n") as fl:
        attrs = []
        for g in dataset.graphs:
            for u, v in g.sorted_edges():
                fa.write(f"{u + offset + 1}, {v + offset + 1}\n{v + offset + 1}, {u + offset + 1}\n")
            fi.writelines(f"{g.id}\n" for _ in range(g.n))
            if dataset.task.kind == "classification":
                fl.write(f"{inverse.get(g.label, g.label)}\n")
            else:
                fl.write(", ".join(repr(float(x)) for x in g.label) + "\n")  # type: ignore[union-attr]
            attrs.append(g.features)
            offset += g.n
    feats = np.vstack(attrs) if attrs else np.zeros((0, 0))
    if feats.shape[1] > 0:
        with open(root / f"{name}_node_attributes.txt", "w", newline="\n") as fh:
            for row in feats:
                fh.write(", ".join(repr(float(x)) for x in row) + "\n")


# ----------------------------------------------------------------- prediction logs


@dataclass(frozen=True)
class PredictionRecord:
    graph_id: int
    run_id: int
    epoch: int | None
    value: float


def parse_prediction_log(path: str | os.PathLike, metric: str | None = None) -> list[PredictionRecord]:
    """Read a JSON-lines log of per-graph evaluations.

    ``metric`` is ``"acc"`` (values must be 0 or 1), ``"mae"`` (values must be
    nonnegative) or None to skip value checks.
    """
    records = []
    p = Path(path)
    with open(p, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
                epoch = obj.get("epoch")
                rec = PredictionRecord(
                    int(obj["graph_id"]),
                    int(obj["run_id"]),
                    None if epoch is None else int(epoch),
                    float(obj["value"]),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
                raise FormatError(f"{p.name}:{lineno}: malformed record ({exc})") from None
            if metric == "acc" and rec.value not in (0.0, 1.0):
                raise FormatError(f"{p.name}:{lineno}: classification value must be 0 or 1, got {rec.value}")
            if metric == "mae" and rec.value < 0:
                raise FormatError(f"{p.name}:{lineno}: negative error value {rec.value}")
            records.append(rec)
    return records


def write_prediction_log(records: Iterable[PredictionRecord], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            obj: dict = {"graph_id": r.graph_id, "run_id": r.run_id}
            if r.epoch is not None:
                obj["epoch"] = r.epoch
            obj["value"] = r.value
            fh.write(json.dumps(obj) + "\n")


# ------------------------------------------------------------------------ tables


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        if v == 0:
            v = 0.0  # drop the sign of -0.0
        return format(v, "#.6g")
    return str(value)


def render_table(rows: Sequence[Sequence], header: Sequence[str], comment: str | None = None) -> str:
    lines = []
    if comment is not None:
        lines.append("# " + comment)
    lines.append(",".join(header))
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise ValueError(f"row {i} has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(format_cell(c) for c in row))
    return "\n".join(lines) + "\n"


def write_table(rows: Sequence[Sequence], header: Sequence[str], path: str | os.PathLike,
                comment: str | None = None) -> None:
    """Write comma-separated rows; floats get 6 significant digits.

    Rows are written in the order given. ``comment`` becomes a leading
    ``# ...`` line.
    """
    text = render_table(rows, header, comment)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_table(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    """Read a table written by :func:`write_table`, skipping ``#`` comment lines."""
    header: list[str] | None = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if header is None:
                header = fields
            else:
                rows.append(fields)
    if header is None:
        raise FormatError(f"{Path(path).name}: no header line")
    return header, rows
