"""``hetgraph`` command line interface."""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, curvature, graphcore, graphio, rewiring, spectral
from . import tmd as tmdmod
from .graphio import FormatError

log = logging.getLogger("hetgraph")


class UsageError(Exception):
    pass


# ----------------------------------------------------------------------- output


class Emitter:
    """Writes tables/objects to a path or stdout, CSV or JSON, with a provenance line."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.provenance = provenance(args)

    def table(self, rows, header, path: str | None = None, extra: dict | None = None) -> None:
        path = path if path is not None else getattr(self.args, "out", None)
        if self.args.json:
            obj = {"provenance": self.provenance, "columns": list(header),
                   "rows": [[_jsonable(c) for c in r] for r in rows]}
            if extra:
                obj.update({k: _jsonable(v) for k, v in extra.items()})
            text = json.dumps(obj, indent=1, sort_keys=False) + "\n"
        else:
            text = graphio.render_table(rows, header, comment=self.provenance)
        _write(text, path)

    def obj(self, payload: dict, path: str | None = None) -> None:
        path = path if path is not None else getattr(self.args, "out", None)
        if self.args.json:
            text = json.dumps({"provenance": self.provenance, **{k: _jsonable(v) for k, v in payload.items()}},
                              indent=1) + "\n"
        else:
            rows = [[k, v] for k, v in payload.items()]
            text = graphio.render_table(rows, ["key", "value"], comment=self.provenance)
        _write(text, path)

    def jsonl(self, objects, path: str) -> None:
        lines = ["# " + self.provenance] + [json.dumps(_jsonable(o), sort_keys=True) for o in objects]
        _write("\n".join(lines) + "\n", path)


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if math.isnan(f) or math.isinf(f):
            return str(f)
        return f
    return v


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


_SKIP_PROVENANCE = {"func", "json", "threads", "verbose"}


def provenance(args: argparse.Namespace) -> str:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in _SKIP_PROVENANCE and k != "command"}
    return f"hetgraph {__version__} subcommand={args.command} flags={json.dumps(_jsonable(flags), sort_keys=True)}"


# ---------------------------------------------------------------------- helpers


def _load(args) -> graphio.Dataset:
    directory = args.dataset
    name = args.name
    if not name:
        found = sorted(p.name[:-len("_A.txt")] for p in Path(directory).glob("*_A.txt"))
        name = found[0] if len(found) == 1 else Path(directory).resolve().name
    return graphio.parse_tu_dataset(directory, name)


def _workers(args) -> int:
    return max(1, int(args.threads or 1))


def _read_vector(path: str) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8")
    vals = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.extend(float(t) for t in line.replace(",", " ").split())
        except ValueError:
            raise FormatError(f"{Path(path).name}:{lineno}: non-numeric token") from None
    return np.array(vals)


def _read_profile(path: str, metric: str | None = None) -> analysis.HeterogeneityProfile:
    header, rows = graphio.read_table(path)
    need = ("graph_id", "count", "mean", "variance")
    if any(h not in header for h in need):
        raise FormatError(f"{Path(path).name}: expected columns {need}")
    idx = {h: header.index(h) for h in need}
    stats = {int(r[idx["graph_id"]]): analysis.GraphStats(int(r[idx["count"]]), float(r[idx["mean"]]),
                                                          float(r[idx["variance"]])) for r in rows}
    if metric is None:
        metric = "acc" if all(0.0 <= s.mean <= 1.0 for s in stats.values()) else "mae"
    return analysis.HeterogeneityProfile(metric, stats)


def _column(path: str, col: str) -> dict[int, float]:
    header, rows = graphio.read_table(path)
    if "graph_id" not in header or col not in header:
        raise FormatError(f"{Path(path).name}: needs columns graph_id and {col}")
    i, j = header.index("graph_id"), header.index(col)
    return {int(r[i]): float(r[j]) for r in rows}


def _weights(args) -> tmdmod.WeightSchedule:
    if args.epsilon is not None and args.w_const is not None:
        raise UsageError("--epsilon and --w-const are mutually exclusive")
    if args.epsilon is not None:
        return tmdmod.pascal_weights(args.depth, args.epsilon)
    return tmdmod.constant_weights(args.w_const if args.w_const is not None else 1.0)


# --------------------------------------------------------------------- commands


def cmd_features(args, out: Emitter) -> None:
    ds = _load(args)
    rows = []
    for g in ds.graphs:
        feats = graphcore.topo_features(g, alpha=args.alpha, laplacian_kind=args.laplacian)
        rows.append([g.id] + feats.as_row())
    out.table(rows, ["graph_id"] + graphcore.TopoFeatures.names())


def cmd_fiedler(args, out: Emitter) -> None:
    ds = _load(args)
    vals = rewiring._fiedler_values(ds.graphs, args.laplacian, _workers(args))
    out.table([[g.id, v] for g, v in zip(ds.graphs, vals)], ["graph_id", "lambda2"])


def cmd_consensus(args, out: Emitter) -> None:
    ds = _load(args)
    g = _pick_graph(ds, args.graph)
    x0 = _read_vector(args.x0)
    res = spectral.consensus_simulate(g, x0, args.t_end, args.dt, method=args.method)
    lam2 = spectral.fiedler_value(g)
    rows = [[float(t)] + [float(v) for v in state] for t, state in zip(res.times, res.states)]
    header = ["t"] + [f"x{i}" for i in range(g.n)]
    out.table(rows, header, extra={"decay_rate": res.decay_rate, "lambda2": lam2, "limit": res.limit})
    if args.summary:
        out.obj({"graph_id": g.id, "lambda2": lam2, "decay_rate": res.decay_rate, "limit": res.limit},
                path=args.summary)


def _pick_graph(ds: graphio.Dataset, gid: int | None) -> graphio.Graph:
    if gid is None:
        return ds.graphs[0]
    for g in ds.graphs:
        if g.id == gid:
            return g
    raise ValueError(f"no graph with id {gid}")


def cmd_encode(args, out: Emitter) -> None:
    ds = _load(args)
    rows = []
    width = 0
    for g in ds.graphs:
        if args.kind == "lape":
            enc = spectral.lape_encoding(g, args.k)
        elif args.kind == "rwpe":
            enc = spectral.rwpe_encoding(g, args.k)
        elif args.kind == "ldp":
            enc = spectral.ldp_encoding(g)
        else:
            enc = curvature.lcp_encoding(g, args.alpha)
        width = enc.shape[1]
        rows.extend([g.id, v] + list(row) for v, row in enumerate(enc))
    out.table(rows, ["graph_id", "node"] + [f"c{j + 1}" for j in range(width)])


def _emit_rewired(args, out: Emitter, ds: graphio.Dataset, reports) -> None:
    if args.out_dir:
        graphio.write_tu_dataset(ds, args.out_dir, ds.name)
        Path(args.out_dir, f"{ds.name}_provenance.txt").write_text("# " + out.provenance + "\n", encoding="utf-8")
    if args.report:
        out.jsonl([r.to_json() for r in reports], args.report)
    rows = [[r.graph_id, len(r.edges_added), len(r.edges_removed), r.lambda2_before, r.lambda2_after, r.rewired]
            for r in reports]
    out.table(rows, ["graph_id", "added", "removed", "lambda2_before", "lambda2_after", "rewired"])


def _budget(args, ds) -> int:
    if args.budget is not None:
        return args.budget
    b = rewiring.default_budget(ds.name)
    if b is None:
        raise UsageError(f"--budget is required for dataset {ds.name!r} (no default known)")
    return b


def cmd_rewire(args, out: Emitter) -> None:
    ds = _load(args)
    workers = _workers(args)
    if args.method == "fosr":
        k = args.k if args.k is not None else _budget(args, ds)
        new, reports = rewiring.uniform_fosr(ds, k, args.laplacian, workers)
    elif args.method == "selective":
        policy = rewiring.ThresholdPolicy(args.quantile, args.laplacian, _budget(args, ds), args.stop_at_threshold)
        new, reports, threshold = rewiring.selective_fosr(ds, policy, workers)
        log.info("threshold lambda* = %.6g", threshold)
    else:
        graphs, reports = [], []
        for g in ds.graphs:
            if not spectral.is_connected(g):
                # outside BORF's domain: pass through unchanged and say so in the report
                lam = spectral.fiedler_value(g) if g.n >= 2 else 0.0
                rep = rewiring.RewiringReport(g.id, [], [], lam, lam, False,
                                              skipped=[{"op": "graph", "reason": "disconnected"}])
                graphs.append(g)
                reports.append(rep)
                continue
            g2, rep = curvature.borf_rewire(g, args.batches, args.h_add, args.h_del, args.alpha)
            graphs.append(g2)
            reports.append(rep)
        skipped = sum(1 for r in reports if r.skipped and r.skipped[0].get("reason") == "disconnected")
        if skipped:
            log.warning("%d disconnected graph(s) left unchanged by BORF", skipped)
        new = ds.replace_graphs(graphs)
    _emit_rewired(args, out, new, reports)


def cmd_spectral_dist(args, out: Emitter) -> None:
    ds = _load(args)
    workers = _workers(args)
    budget = _budget(args, ds)
    policy = rewiring.ThresholdPolicy(args.quantile, args.laplacian, budget, args.stop_at_threshold)
    variants = [("none", ds)]
    variants.append(("fosr", rewiring.uniform_fosr(ds, budget, args.laplacian, workers)[0]))
    variants.append(("selective-fosr", rewiring.selective_fosr(ds, policy, workers)[0]))
    rows = []
    for name, d in variants:
        s = rewiring.spectral_distribution(d, args.laplacian, workers)
        rows.append([name] + [s[f] for f in rewiring.SUMMARY_FIELDS])
    out.table(rows, ["variant"] + list(rewiring.SUMMARY_FIELDS))


def cmd_depth(args, out: Emitter) -> None:
    args.dataset = args.from_dataset
    ds = _load(args)
    policy = rewiring.ThresholdPolicy(args.quantile, args.laplacian)
    lam = rewiring.select_threshold(ds, policy, _workers(args))
    depth = rewiring.depth_heuristic(lam)
    if args.json:
        out.obj({"lambda_star": lam, "inverse": 1.0 / lam, "depth": depth})
    else:
        sys.stdout.write(f"lambda_star={graphio.format_cell(lam)}\n"
                         f"inverse={graphio.format_cell(1.0 / lam)}\n"
                         f"depth={depth}\n")
        if args.out:
            out.obj({"lambda_star": lam, "inverse": 1.0 / lam, "depth": depth})


def cmd_tmd(args, out: Emitter) -> None:
    ds = _load(args)
    w = _weights(args)
    dist = tmdmod.tmd_matrix(ds, args.depth, w, _workers(args), args.checkpoint)
    ids = [g.id for g in ds.graphs]
    labels = [g.label if isinstance(g.label, int) else -1 for g in ds.graphs]
    rows = [[gid, lab] + list(row) for gid, lab, row in zip(ids, labels, dist)]
    out.table(rows, ["graph_id", "label"] + [f"d{gid}" for gid in ids],
              extra={"depth": args.depth, "weights": w.tag})


def cmd_cdr(args, out: Emitter) -> None:
    header, rows = graphio.read_table(args.dist)
    if header[:2] != ["graph_id", "label"]:
        raise FormatError(f"{Path(args.dist).name}: expected graph_id,label,... header")
    ids = [int(r[0]) for r in rows]
    labels = [int(r[1]) for r in rows]
    dist = np.array([[float(x) for x in r[2:]] for r in rows])
    if dist.shape != (len(ids), len(ids)):
        raise FormatError("distance matrix is not square")
    table = []
    for i, gid in enumerate(ids):
        c = tmdmod.class_distance_ratio(labels, i, dist)
        table.append([gid, labels[i], c.value, c.same, c.different, c.infinite])
    out.table(table, ["graph_id", "label", "ratio", "same", "different", "infinite"])


def cmd_verify_bound(args, out: Emitter) -> None:
    from .generators import erdos_renyi
    from .gnnlite import random_model, verify_tmd_bound

    rng = np.random.default_rng(args.seed)
    rows = []
    for pair in range(args.n_pairs):
        layers = int(rng.integers(1, args.layers + 1))
        dim = int(rng.integers(1, args.max_features + 1))
        g1 = erdos_renyi(rng, int(rng.integers(1, args.max_nodes + 1)), float(rng.uniform(0.2, 0.9)), dim)
        g2 = erdos_renyi(rng, int(rng.integers(1, args.max_nodes + 1)), float(rng.uniform(0.2, 0.9)), dim)
        model = random_model(rng, dim, layers)
        res = verify_tmd_bound(g1, g2, model, args.epsilon)
        rows.append([pair, g1.n, g2.n, layers, res.lhs, res.rhs, res.holds])
    out.table(rows, ["pair", "n1", "n2", "layers", "lhs", "rhs", "holds"],
              extra={"all_hold": all(r[-1] for r in rows)})
    if not all(r[-1] for r in rows):
        raise RuntimeError(f"bound violated on {sum(not r[-1] for r in rows)} pair(s)")


def cmd_profile(args, out: Emitter) -> None:
    records = graphio.parse_prediction_log(args.log, args.metric)
    prof = analysis.build_profile(records, args.metric)
    out.table(prof.sorted_rows(), ["graph_id", "count", "mean", "variance"])


def cmd_lasso(args, out: Emitter) -> None:
    header, rows = graphio.read_table(args.features)
    if header[0] != "graph_id":
        raise FormatError(f"{Path(args.features).name}: first column must be graph_id")
    target = _column(args.target, args.target_col)
    feats = {int(r[0]): [float(x) for x in r[1:]] for r in rows}
    ids = sorted(set(feats) & set(target))
    if len(ids) < 3:
        raise ValueError("fewer than three graphs shared between features and target")
    x = np.array([feats[i] for i in ids])
    y = np.array([target[i] for i in ids])
    if args.lam is not None:
        fit = analysis.lasso_fit(x, y, args.lam)
    else:
        fit, _, _ = analysis.lasso_cv(x, y, folds=args.folds, seed=args.seed)
    names = header[1:]
    table = [[name, float(c), j in fit.dropped] for j, (name, c) in enumerate(zip(names, fit.coef))]
    table.append(["(intercept)", fit.intercept, False])
    out.table(table, ["feature", "coef", "dropped"], extra={"lambda": fit.lam, "r2": fit.r2, "n": len(ids)})
    log.info("lambda=%.6g r2=%.6g n=%d", fit.lam, fit.r2, len(ids))


def cmd_correlate(args, out: Emitter) -> None:
    xs = _column(args.x, args.x_col)
    ys = _column(args.y, args.y_col)
    ids = [i for i in sorted(set(xs) & set(ys)) if math.isfinite(xs[i]) and math.isfinite(ys[i])]
    excluded = len(set(xs) & set(ys)) - len(ids)
    c = analysis.pearson([xs[i] for i in ids], [ys[i] for i in ids])
    out.obj({"r": c.r, "p": c.p, "n": c.n, "excluded_nonfinite": excluded})


def cmd_depth_dist(args, out: Emitter) -> None:
    if args.depths:
        depths = args.depths
        if len(depths) != len(args.logs):
            raise UsageError("--depths must match --logs one to one")
    else:
        depths = []
        for p in args.logs:
            m = re.findall(r"\d+", Path(p).stem)
            if not m:
                raise UsageError(f"cannot infer depth from {p}; pass --depths")
            depths.append(int(m[-1]))
    profiles = {d: analysis.build_profile(graphio.parse_prediction_log(p, args.metric), args.metric)
                for d, p in zip(depths, args.logs)}
    best, hist = analysis.optimal_depth_distribution(profiles)
    out.table([[d, c] for d, c in sorted(hist.items())], ["depth", "graphs"])
    if args.per_graph:
        out.table([[g, d] for g, d in sorted(best.items())], ["graph_id", "best_depth"], path=args.per_graph)


def cmd_dynamics(args, out: Emitter) -> None:
    records = graphio.parse_prediction_log(args.log, args.metric)
    stats = analysis.training_dynamics(records)
    out.table([[s.epoch, s.graphs, s.mean, s.variance] for s in stats], ["epoch", "graphs", "mean", "variance"])


def cmd_encoding_effect(args, out: Emitter) -> None:
    base = _read_profile(args.base, "acc")
    enc = _read_profile(args.enc, "acc")
    ratios = analysis.encoding_effect(base, enc)
    out.table([[g, r] for g, r in ratios.items()], ["graph_id", "ratio"])


# ----------------------------------------------------------------------- parser


def _dataset_args(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--dataset", required=required, help="directory with TUDataset text files")
    p.add_argument("--name", help="dataset file prefix (default: directory name)")


def _laplacian_arg(p: argparse.ArgumentParser) -> None:
    p.add_argument("--laplacian", choices=["combinatorial", "normalized"], default="combinatorial")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output file (default: stdout)")
    common.add_argument("--json", action="store_true", help="emit JSON instead of CSV")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--config", help="key=value file; flags override its values")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="hetgraph", description=__doc__)
    parser.add_argument("--version", action="version", version=f"hetgraph {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("features", parents=[common], help="topological features per graph")
    _dataset_args(p)
    _laplacian_arg(p)
    p.add_argument("--alpha", type=float, default=0.0, help="curvature laziness")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("fiedler", parents=[common], help="Fiedler value per graph")
    _dataset_args(p)
    _laplacian_arg(p)
    p.set_defaults(func=cmd_fiedler)

    p = sub.add_parser("consensus", parents=[common], help="simulate dx/dt = -Lx on one graph")
    _dataset_args(p)
    p.add_argument("--graph", type=int, help="graph id (default: first graph)")
    p.add_argument("--x0", required=True, help="file with one initial value per node")
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--method", choices=["exact", "euler"], default="exact")
    p.add_argument("--summary", help="also write lambda2 / decay rate to this file")
    p.set_defaults(func=cmd_consensus)

    p = sub.add_parser("encode", parents=[common], help="node encodings")
    _dataset_args(p)
    p.add_argument("--kind", choices=["lape", "rwpe", "ldp", "lcp"], required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--alpha", type=float, default=0.0)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("rewire", help="rewire a dataset")
    rsub = p.add_subparsers(dest="method", required=True)
    for method, helptext in (("fosr", "FoSR on every graph"), ("selective", "FoSR below a Fiedler threshold"),
                             ("borf", "curvature-based rewiring")):
        q = rsub.add_parser(method, parents=[common], help=helptext)
        _dataset_args(q)
        q.add_argument("--out-dir", help="write the rewired dataset here in TU format")
        q.add_argument("--report", help="JSON-lines file of per-graph edits")
        if method in ("fosr", "selective"):
            _laplacian_arg(q)
            q.add_argument("--budget", type=int, help="edges per graph (default: known dataset table)")
        if method == "fosr":
            q.add_argument("--k", type=int, help="edges per graph (alias of --budget)")
        if method == "selective":
            q.add_argument("--quantile", type=float, default=0.5)
            q.add_argument("--stop-at-threshold", action="store_true")
        if method == "borf":
            q.add_argument("--batches", type=int, default=1)
            q.add_argument("--h-add", type=int, default=4)
            q.add_argument("--h-del", type=int, default=2)
            q.add_argument("--alpha", type=float, default=0.0)
        q.set_defaults(func=cmd_rewire, method=method)

    p = sub.add_parser("spectral-dist", parents=[common], help="Fiedler summaries: none / FoSR / selective")
    _dataset_args(p)
    _laplacian_arg(p)
    p.add_argument("--budget", type=int)
    p.add_argument("--quantile", type=float, default=0.5)
    p.add_argument("--stop-at-threshold", action="store_true")
    p.set_defaults(func=cmd_spectral_dist)

    p = sub.add_parser("depth", parents=[common], help="depth heuristic from the threshold gap")
    p.add_argument("--from-dataset", required=True)
    p.add_argument("--name")
    p.add_argument("--quantile", type=float, default=0.5)
    _laplacian_arg(p)
    p.set_defaults(func=cmd_depth)

    p = sub.add_parser("tmd", parents=[common], help="pairwise Tree Mover's Distances")
    _dataset_args(p)
    p.add_argument("--depth", type=int, default=tmdmod.DEFAULT_DEPTH)
    p.add_argument("--epsilon", type=float, help="Pascal weights with this epsilon")
    p.add_argument("--w-const", type=float, help="constant weight (default 1)")
    p.add_argument("--checkpoint", help="row checkpoint file for resuming")
    p.set_defaults(func=cmd_tmd)

    p = sub.add_parser("cdr", parents=[common], help="class-distance ratios from a TMD matrix")
    p.add_argument("--dist", required=True)
    p.set_defaults(func=cmd_cdr)

    p = sub.add_parser("verify-bound", parents=[common], help="randomized TMD stability-bound check")
    p.add_argument("--n-pairs", type=int, default=100)
    p.add_argument("--max-nodes", type=int, default=8)
    p.add_argument("--layers", type=int, default=3)
    p.add_argument("--max-features", type=int, default=3)
    p.add_argument("--epsilon", type=float, default=1.0)
    p.set_defaults(func=cmd_verify_bound)

    p = sub.add_parser("profile", parents=[common], help="heterogeneity profile from a log")
    p.add_argument("--log", required=True)
    p.add_argument("--metric", choices=analysis.METRICS, required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("lasso", parents=[common], help="lasso regression of a profile on features")
    p.add_argument("--features", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--target-col", default="mean")
    p.add_argument("--lambda", dest="lam", type=float, help="fixed penalty (default: cross-validated)")
    p.add_argument("--folds", type=int, default=5)
    p.set_defaults(func=cmd_lasso)

    p = sub.add_parser("correlate", parents=[common], help="Pearson correlation of two columns")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--x-col", default="ratio")
    p.add_argument("--y-col", default="mean")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("depth-dist", parents=[common], help="optimal-depth histogram from per-depth logs")
    p.add_argument("--logs", nargs="+", required=True)
    p.add_argument("--depths", nargs="+", type=int)
    p.add_argument("--metric", choices=analysis.METRICS, default="acc")
    p.add_argument("--per-graph", help="also write the best depth of every graph")
    p.set_defaults(func=cmd_depth_dist)

    p = sub.add_parser("dynamics", parents=[common], help="per-epoch mean and variance")
    p.add_argument("--log", required=True)
    p.add_argument("--metric", choices=analysis.METRICS, default=None)
    p.set_defaults(func=cmd_dynamics)

    p = sub.add_parser("encoding-effect", parents=[common], help="per-graph accuracy ratio")
    p.add_argument("--base", required=True)
    p.add_argument("--enc", required=True)
    p.set_defaults(func=cmd_encoding_effect)
    return parser


def _read_config(path: str) -> dict[str, str]:
    cfg = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        cfg[k.strip().lstrip("-").replace("-", "_")] = v.strip()
    return cfg


def _subparser(parser: argparse.ArgumentParser, argv: list[str]) -> argparse.ArgumentParser | None:
    node = parser
    rest = list(argv)
    while True:
        subs = [a for a in node._actions if isinstance(a, argparse._SubParsersAction)]
        if not subs:
            return node
        choice = next((t for t in rest if t in subs[0].choices), None)
        if choice is None:
            return None
        rest = rest[rest.index(choice) + 1:]
        node = subs[0].choices[choice]


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    if "--config" not in argv and not any(a.startswith("--config=") for a in argv):
        return
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    leaf = _subparser(parser, argv)
    if leaf is None or not known.config:
        return
    cfg = _read_config(known.config)
    actions = {a.dest: a for a in leaf._actions}
    defaults = {}
    for key, raw in cfg.items():
        if key not in actions:
            raise UsageError(f"unknown config key {key!r}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
        elif act.nargs in ("+", "*"):
            defaults[key] = [act.type(t) if act.type else t for t in raw.split()]
        else:
            defaults[key] = act.type(raw) if act.type else raw
        act.required = False
    leaf.set_defaults(**defaults)


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except (UsageError, OSError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": "usage", "message": str(exc)}) + "\n")
        return 2
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on bad usage, 0 on --help/--version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args, Emitter(args))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(json.dumps({"error": "usage", "message": str(exc)}) + "\n")
        return 2
    except (FormatError, FileNotFoundError, OSError, ValueError, RuntimeError) as exc:
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
