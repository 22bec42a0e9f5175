"""AUC, subgraph profiling, seed-averaged experiments, and sweeps.

AUC is the exact Mann-Whitney statistic with midrank tie handling,
computed by sorting.  Experiments run the full per-seed pipeline
(split, extract, label, train or score, evaluate) and aggregate over
seeds; sweeps grid over (h, k).  Reports serialize to a versioned TSV
whose runtime column defaults to "-" so repeated runs stay
byte-identical; wall-clock timings always appear in the text report.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .extract import ExtractionConfig, extract_batch
from .graph import DataError, Graph
from .heuristics import HeuristicKind, score_instances
from .labeling import assemble_batch, label_cap_policy, label_subgraph
from .model import ModelConfig, predict, train
from .splits import split_edges

REPORT_HEADER = "# sesample-report v1"
REPORT_COLUMNS = ("dataset", "method", "h", "k", "seed", "auc", "runtime_s", "avg_nodes", "avg_edges")

HEURISTIC_METHODS = ("cn", "aa", "ppr")
METHODS = (*HEURISTIC_METHODS, "gnn")


def auc(pos_scores, neg_scores) -> float:
    """P(random positive outranks random negative), ties counted half."""
    pos = np.asarray(pos_scores, dtype=np.float64)
    neg = np.asarray(neg_scores, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise DataError("auc needs at least one score in each class")
    scores = np.concatenate([pos, neg])
    uniq, inv, counts = np.unique(scores, return_inverse=True, return_counts=True)
    starts = np.cumsum(counts) - counts  # 0-based start index of each tie group
    midranks = starts + (counts + 1) / 2.0  # 1-based midrank of each group
    rank_sum_pos = midranks[inv[: pos.size]].sum()
    m, n = pos.size, neg.size
    return float((rank_sum_pos - m * (m + 1) / 2.0) / (m * n))


def profile_samples(samples) -> tuple[float, float]:
    """Mean local node and undirected edge counts over samples."""
    if not samples:
        raise DataError("cannot profile an empty sample list")
    nodes = np.array([s.num_local_nodes for s in samples], dtype=np.float64)
    edges = np.array([s.num_local_edges for s in samples], dtype=np.float64)
    return float(nodes.mean()), float(edges.mean())


@dataclass(frozen=True)
class SeedResult:
    seed: int
    auc: float
    runtime_s: float
    avg_nodes: float
    avg_edges: float


@dataclass(frozen=True)
class ExperimentReport:
    dataset: str
    method: str
    h: int
    k: int
    results: tuple[SeedResult, ...]
    config_snapshot: dict = field(default_factory=dict)

    @property
    def aucs(self) -> np.ndarray:
        return np.array([r.auc for r in self.results])

    @property
    def mean_auc(self) -> float:
        return float(self.aucs.mean())

    @property
    def std_auc(self) -> float:
        return float(self.aucs.std())  # population std: a single seed reports 0

    @property
    def mean_runtime_s(self) -> float:
        return float(np.mean([r.runtime_s for r in self.results]))

    @property
    def mean_avg_nodes(self) -> float:
        return float(np.mean([r.avg_nodes for r in self.results]))

    @property
    def mean_avg_edges(self) -> float:
        return float(np.mean([r.avg_edges for r in self.results]))


def _heuristic_seed(g: Graph, method: str, kind: HeuristicKind, seed: int, ratios) -> SeedResult:
    t0 = time.perf_counter()
    splits = split_edges(g, ratios, seed)
    test = splits.split_instances("test")
    scores = score_instances(splits.observed_graph, test, kind)
    labels = np.array([i.label for i in test])
    value = auc(scores[labels == 1], scores[labels == 0])
    return SeedResult(seed, value, time.perf_counter() - t0, float("nan"), float("nan"))


def _gnn_seed(
    g: Graph,
    seed: int,
    extraction: ExtractionConfig,
    model_config: ModelConfig,
    ratios,
    threads: int = 1,
) -> SeedResult:
    t0 = time.perf_counter()
    splits = split_edges(g, ratios, seed)
    cfg = replace(extraction, seed=seed)
    samples = extract_batch(splits.observed_graph, splits.instances, cfg, threads=threads)
    labeled = [label_subgraph(s) for s in samples]
    by_split: dict[str, list] = {"train": [], "val": [], "test": []}
    for inst, ls in zip(splits.instances, labeled):
        by_split[inst.split].append((ls, inst.label))
    cap = label_cap_policy([ls for ls, _ in by_split["train"]])
    assembled = {
        name: list(
            zip(assemble_batch([ls for ls, _ in pairs], g, cap), [l for _, l in pairs])
        )
        for name, pairs in by_split.items()
    }
    mcfg = replace(model_config, seed=seed)
    params, _history = train(assembled["train"], assembled["val"], mcfg)
    pos, neg = [], []
    for ls, label in assembled["test"]:
        (pos if label == 1 else neg).append(predict(params, ls, mcfg))
    value = auc(np.asarray(pos), np.asarray(neg))
    avg_nodes, avg_edges = profile_samples([ls.sample for ls, _ in by_split["train"]])
    return SeedResult(seed, value, time.perf_counter() - t0, avg_nodes, avg_edges)


def run_experiment(
    g: Graph,
    dataset: str,
    method: str,
    seeds,
    extraction: ExtractionConfig | None = None,
    model_config: ModelConfig | None = None,
    heuristic: HeuristicKind | None = None,
    ratios=(0.85, 0.05, 0.10),
    threads: int = 1,
) -> ExperimentReport:
    """Full pipeline per seed; aggregates AUC, runtime, and sparsity stats."""
    method = method.lower()
    if method not in METHODS:
        raise DataError(f"unknown method {method!r}; expected one of {METHODS}")
    seeds = list(seeds)
    if not seeds:
        raise DataError("need at least one seed")

    if method in HEURISTIC_METHODS:
        kind = heuristic or HeuristicKind(method.upper())
        h = k = 0

        def one(seed: int) -> SeedResult:
            try:
                return _heuristic_seed(g, method, kind, seed, ratios)
            except Exception as e:
                raise RuntimeError(f"seed {seed}: {e}") from e

        snapshot = {"kind": kind.kind, "ppr_alpha": kind.ppr_alpha, "ppr_tol": kind.ppr_tol}
    else:
        if extraction is None:
            raise DataError("gnn method needs an ExtractionConfig")
        mcfg = model_config or ModelConfig()
        h, k = extraction.h, extraction.k if extraction.mode == "rw" else 0

        def one(seed: int) -> SeedResult:
            try:
                return _gnn_seed(g, seed, extraction, mcfg, ratios)
            except Exception as e:
                raise RuntimeError(f"seed {seed}: {e}") from e

        snapshot = {
            "mode": extraction.mode,
            "h": extraction.h,
            "k": extraction.k,
            "layer_dims": list(mcfg.layer_dims),
            "sortpool_k": mcfg.sortpool_k,
            "mlp_hidden": mcfg.mlp_hidden,
            "dropout_p": mcfg.dropout_p,
            "lr": mcfg.lr,
            "batch_size": mcfg.batch_size,
            "epochs": mcfg.epochs,
        }
    snapshot["ratios"] = list(ratios)

    if threads > 1 and len(seeds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = tuple(pool.map(one, seeds))
    else:
        results = tuple(one(s) for s in seeds)
    return ExperimentReport(dataset, method, h, k, results, snapshot)


def sweep(
    g: Graph,
    dataset: str,
    h_values,
    k_values,
    seeds,
    model_config: ModelConfig | None = None,
    ratios=(0.85, 0.05, 0.10),
    threads: int = 1,
) -> list[ExperimentReport]:
    """One rw-mode experiment per (h, k) cell, ordered by (h, k)."""
    h_values, k_values = list(h_values), list(k_values)
    if not h_values or not k_values:
        raise DataError("sweep needs nonempty h and k grids")
    reports = []
    for h in sorted(h_values):
        for k in sorted(k_values):
            extraction = ExtractionConfig("rw", h=h, k=k, seed=0)
            reports.append(
                run_experiment(
                    g, dataset, "gnn", seeds, extraction, model_config,
                    ratios=ratios, threads=threads,
                )
            )
    return reports


def _fmt(x: float) -> str:
    if isinstance(x, float) and np.isnan(x):
        return "nan"
    return f"{x:.6f}"


def report_rows(report: ExperimentReport, timings: bool = False) -> list[str]:
    """Per-seed rows followed by the aggregate row (seed=-1)."""
    rows = []
    for r in report.results:
        rows.append(
            "\t".join(
                [
                    report.dataset,
                    report.method,
                    str(report.h),
                    str(report.k),
                    str(r.seed),
                    _fmt(r.auc),
                    _fmt(r.runtime_s) if timings else "-",
                    _fmt(r.avg_nodes),
                    _fmt(r.avg_edges),
                ]
            )
        )
    rows.append(
        "\t".join(
            [
                report.dataset,
                report.method,
                str(report.h),
                str(report.k),
                "-1",
                _fmt(report.mean_auc),
                _fmt(report.mean_runtime_s) if timings else "-",
                _fmt(report.mean_avg_nodes),
                _fmt(report.mean_avg_edges),
            ]
        )
    )
    return rows


def write_report_tsv(reports, path, timings: bool = False) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(REPORT_HEADER + "\n")
        fh.write("\t".join(REPORT_COLUMNS) + "\n")
        for report in reports:
            for row in report_rows(report, timings=timings):
                fh.write(row + "\n")


def format_report_text(report: ExperimentReport) -> str:
    """Human-readable summary including wall-clock timings."""
    lines = [
        f"dataset={report.dataset} method={report.method} h={report.h} k={report.k}",
        f"  AUC mean={report.mean_auc:.4f} std={report.std_auc:.4f} over {len(report.results)} seed(s)",
        f"  runtime mean={report.mean_runtime_s:.2f}s"
        f"  avg_nodes={_fmt(report.mean_avg_nodes)} avg_edges={_fmt(report.mean_avg_edges)}",
    ]
    for r in report.results:
        lines.append(
            f"    seed={r.seed} auc={r.auc:.4f} runtime={r.runtime_s:.2f}s"
            f" nodes={_fmt(r.avg_nodes)} edges={_fmt(r.avg_edges)}"
        )
    return "\n".join(lines)


__all__ = [
    "auc",
    "profile_samples",
    "SeedResult",
    "ExperimentReport",
    "run_experiment",
    "sweep",
    "report_rows",
    "write_report_tsv",
    "format_report_text",
    "REPORT_HEADER",
    "REPORT_COLUMNS",
    "METHODS",
]
