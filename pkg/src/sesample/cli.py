"""Command-line pipeline: split | extract | train | heuristic | eval | sweep | profile.

Every command writes a JSON manifest next to its primary output with
the resolved flags, input hashes, and tool version; outputs are
written atomically so failures leave no partial files.  Exit codes:
0 success, 1 usage error, 2 data error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .evaluate import (
    ExperimentReport,
    SeedResult,
    auc,
    format_report_text,
    profile_samples,
    run_experiment,
    sweep,
    write_report_tsv,
)
from .extract import ExtractionConfig, extract_batch
from .graph import DataError, build_graph, read_edge_list, read_features, write_node_map
from .heuristics import HeuristicKind, score_instances
from .kernels import backend as kernel_backend
from .labeling import (
    assemble_batch,
    label_cap_policy,
    label_subgraph,
    read_bundle,
    write_bundle,
)
from .model import ModelConfig, predict, save_params, train
from .splits import SPLIT_NAMES, read_splits, split_edges, write_splits

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic(path: Path, writer) -> None:
    """Run writer(tmp) then rename; a failure leaves no partial file."""
    tmp = path.with_name(path.name + ".tmp")
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _atomic_write_text(path: Path, text: str) -> None:
    _atomic(path, lambda tmp: tmp.write_text(text, encoding="utf-8"))


def _write_manifest(command: str, args, inputs: list[Path], outputs: list[Path], flags: dict):
    manifest = {
        "tool": "sesample",
        "version": __version__,
        "command": command,
        "kernel_backend": kernel_backend(),
        "flags": flags,
        "inputs": {Path(p).name: _sha256(p) for p in inputs},
        "outputs": [p.name for p in outputs],
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = outputs[0].with_name(outputs[0].name + ".manifest.json")
    _atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _load_graph(args, with_features: bool = False):
    edges, num_nodes, id_map = read_edge_list(args.edges)
    features = None
    if with_features and getattr(args, "features", None):
        features = read_features(args.features, id_map)
    return build_graph(edges, num_nodes, features), id_map


def _out(args, suffix: str) -> Path:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = args.name or Path(args.edges).stem
    return out_dir / f"{name}{suffix}"


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip() != ""]
    except ValueError:
        raise DataError(f"expected a comma-separated integer list, got {text!r}")


def cmd_split(args) -> int:
    ratios = tuple(args.ratios)
    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        print(
            f"sesample split: error: --ratios must be positive and sum to 1, got {ratios}",
            file=sys.stderr,
        )
        return EXIT_USAGE
    g, id_map = _load_graph(args)
    splits = split_edges(g, ratios, args.seed)
    split_path = _out(args, ".splits")
    nodemap_path = _out(args, ".nodemap")
    _atomic(split_path, lambda tmp: write_splits(splits, tmp))
    _atomic(nodemap_path, lambda tmp: write_node_map(id_map, tmp))
    _write_manifest(
        "split",
        args,
        [Path(args.edges)],
        [split_path, nodemap_path],
        {"ratios": list(ratios), "seed": args.seed},
    )
    counts = {name: sum(1 for i in splits.instances if i.split == name) for name in SPLIT_NAMES}
    print(f"wrote {split_path} ({counts['train']}/{counts['val']}/{counts['test']} instances)")
    return EXIT_OK


def cmd_extract(args) -> int:
    g, _ = _load_graph(args)
    splits = read_splits(args.splits)
    if splits.observed_graph.num_nodes != g.num_nodes:
        raise DataError(
            f"split file says {splits.observed_graph.num_nodes} nodes, edge list has {g.num_nodes}"
        )
    cfg = ExtractionConfig(args.mode, h=args.hops, k=args.walks, seed=args.seed)
    samples = extract_batch(splits.observed_graph, splits.instances, cfg, threads=args.threads)
    labeled = [label_subgraph(s, scheme=args.labeling) for s in samples]
    outputs = []
    for name in SPLIT_NAMES:
        sub = [ls for inst, ls in zip(splits.instances, labeled) if inst.split == name]
        path = _out(args, f".{name}.bundle")
        _atomic(path, lambda tmp: write_bundle(sub, tmp))
        outputs.append(path)
    _write_manifest(
        "extract",
        args,
        [Path(args.edges), Path(args.splits)],
        outputs,
        {
            "mode": args.mode,
            "hops": args.hops,
            "walks": args.walks,
            "seed": args.seed,
            "labeling": args.labeling,
            "threads": args.threads,
        },
    )
    avg_nodes, avg_edges = profile_samples(samples)
    print(
        f"extracted {len(samples)} subgraphs (avg {avg_nodes:.1f} nodes, "
        f"{avg_edges:.1f} edges) -> {outputs[0].parent}"
    )
    return EXIT_OK


def cmd_train(args) -> int:
    g, _ = _load_graph(args, with_features=True)
    splits = read_splits(args.splits)
    bundles = {}
    bundle_paths = []
    for name in SPLIT_NAMES:
        path = Path(f"{args.bundles}.{name}.bundle")
        if not path.exists():
            raise DataError(f"missing bundle file {path}")
        bundle_paths.append(path)
        bundles[name] = read_bundle(path)
    pairs = {}
    for name in SPLIT_NAMES:
        insts = splits.split_instances(name)
        if len(insts) != len(bundles[name]):
            raise DataError(
                f"{name}: split file has {len(insts)} instances but bundle has {len(bundles[name])}"
            )
        for inst, ls in zip(insts, bundles[name]):
            s = ls.sample
            if int(s.nodes[s.u_local]) != inst.u or int(s.nodes[s.v_local]) != inst.v:
                raise DataError(
                    f"{name}: bundle sample targets ({s.nodes[s.u_local]}, {s.nodes[s.v_local]}) "
                    f"do not match split instance ({inst.u}, {inst.v}); "
                    "bundle and split file are out of order"
                )
        pairs[name] = list(zip(bundles[name], [i.label for i in insts]))

    cap = label_cap_policy([ls for ls, _ in pairs["train"]])
    assembled = {
        name: list(zip(assemble_batch([ls for ls, _ in lst], g, cap), [l for _, l in lst]))
        for name, lst in pairs.items()
    }
    config = ModelConfig(
        layer_dims=tuple(_parse_int_list(args.layer_dims)),
        sortpool_k=args.sortpool_k,
        mlp_hidden=args.mlp_hidden,
        dropout_p=args.dropout,
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    params, history = train(assembled["train"], assembled["val"], config)
    elapsed = time.perf_counter() - t0

    ckpt_path = _out(args, ".ckpt")
    _atomic(ckpt_path, lambda tmp: save_params(params, tmp))

    cfg_resolved = replace(config, sortpool_k=params.sortpool_k)
    test_insts = splits.split_instances("test")
    score_lines = []
    pos, neg = [], []
    for (ls, label), inst in zip(assembled["test"], test_insts):
        p = predict(params, ls, cfg_resolved)
        (pos if label == 1 else neg).append(p)
        score_lines.append(f"{inst.u} {inst.v} {inst.label} {inst.split} {p:.12g}")
    scores_path = _out(args, ".gnn.scores")
    _atomic_write_text(scores_path, "\n".join(score_lines) + "\n")

    hist_lines = ["epoch\ttrain_loss\tval_auc"]
    for row in history:
        hist_lines.append(f"{row['epoch']}\t{row['train_loss']:.6f}\t{row['val_auc']:.6f}")
    hist_path = _out(args, ".history.tsv")
    _atomic_write_text(hist_path, "\n".join(hist_lines) + "\n")

    _write_manifest(
        "train",
        args,
        [Path(args.edges), Path(args.splits), *bundle_paths],
        [ckpt_path, scores_path, hist_path],
        {
            "layer_dims": list(config.layer_dims),
            "sortpool_k": params.sortpool_k,
            "label_cap": cap,
            "input_dim": params.input_dim,
            "mlp_hidden": config.mlp_hidden,
            "dropout": config.dropout_p,
            "lr": config.lr,
            "batch_size": config.batch_size,
            "epochs": config.epochs,
            "seed": args.seed,
            "init": "glorot-uniform",
        },
    )
    best = max(history, key=lambda r: r["val_auc"])
    test_auc = auc(np.asarray(pos), np.asarray(neg))
    print(
        f"trained {config.epochs} epochs in {elapsed:.1f}s; "
        f"best val AUC {best['val_auc']:.4f} (epoch {best['epoch']}); test AUC {test_auc:.4f}"
    )
    print(f"wrote {ckpt_path}, {scores_path}, {hist_path}")
    return EXIT_OK


def cmd_heuristic(args) -> int:
    g, _ = _load_graph(args)
    splits = read_splits(args.splits)
    kind = HeuristicKind(args.kind.upper(), ppr_alpha=args.ppr_alpha, ppr_tol=args.ppr_tol)
    scores = score_instances(splits.observed_graph, splits.instances, kind)
    lines = [
        f"{inst.u} {inst.v} {inst.label} {inst.split} {score:.12g}"
        for inst, score in zip(splits.instances, scores)
    ]
    path = _out(args, f".{args.kind.lower()}.scores")
    _atomic_write_text(path, "\n".join(lines) + "\n")
    _write_manifest(
        "heuristic",
        args,
        [Path(args.edges), Path(args.splits)],
        [path],
        {"kind": kind.kind, "ppr_alpha": kind.ppr_alpha, "ppr_tol": kind.ppr_tol},
    )
    test = [i for i in splits.instances if i.split == "test"]
    test_scores = np.array([s for i, s in zip(splits.instances, scores) if i.split == "test"])
    labels = np.array([i.label for i in test])
    print(f"{kind.kind} test AUC {auc(test_scores[labels == 1], test_scores[labels == 0]):.4f}")
    print(f"wrote {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    path = Path(args.scores)
    pos, neg = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 5:
                raise DataError(f"{path}:{ln}: expected 'u v label split score'")
            label, split, score = int(parts[2]), parts[3], float(parts[4])
            if label not in (0, 1):
                raise DataError(f"{path}:{ln}: label must be 0 or 1")
            if split not in SPLIT_NAMES:
                raise DataError(f"{path}:{ln}: unknown split tag {split!r}")
            if split == args.split:
                (pos if label == 1 else neg).append(score)
    value = auc(np.asarray(pos), np.asarray(neg))
    print(f"AUC({args.split}) = {value:.6f}")
    return EXIT_OK


def _model_config_from(args) -> ModelConfig:
    return ModelConfig(
        layer_dims=tuple(_parse_int_list(args.layer_dims)),
        sortpool_k=args.sortpool_k,
        mlp_hidden=args.mlp_hidden,
        dropout_p=args.dropout,
        lr=args.lr,
        batch_size=args.batch_size,
        epochs=args.epochs,
    )


def cmd_sweep(args) -> int:
    g, _ = _load_graph(args, with_features=True)
    name = args.name or Path(args.edges).stem
    reports = sweep(
        g,
        name,
        _parse_int_list(args.hops),
        _parse_int_list(args.walks),
        _parse_int_list(args.seeds),
        model_config=_model_config_from(args),
        threads=args.threads,
    )
    path = _out(args, ".sweep.tsv")
    _atomic(path, lambda tmp: write_report_tsv(reports, tmp, timings=args.timings))
    _write_manifest(
        "sweep",
        args,
        [Path(args.edges)],
        [path],
        {
            "hops": args.hops,
            "walks": args.walks,
            "seeds": args.seeds,
            "epochs": args.epochs,
            "threads": args.threads,
            "timings": args.timings,
        },
    )
    for report in reports:
        print(format_report_text(report))
    print(f"wrote {path}")
    return EXIT_OK


def cmd_profile(args) -> int:
    g, _ = _load_graph(args)
    name = args.name or Path(args.edges).stem
    seeds = _parse_int_list(args.seeds)
    reports = []
    for mode in ("bfs", "rw"):
        results = []
        for seed in seeds:
            t0 = time.perf_counter()
            splits = split_edges(g, (0.85, 0.05, 0.10), seed)
            cfg = ExtractionConfig(mode, h=args.hops, k=args.walks, seed=seed)
            samples = extract_batch(
                splits.observed_graph, splits.instances, cfg, threads=args.threads
            )
            train_samples = [
                s for inst, s in zip(splits.instances, samples) if inst.split == "train"
            ]
            avg_nodes, avg_edges = profile_samples(train_samples)
            results.append(
                SeedResult(seed, float("nan"), time.perf_counter() - t0, avg_nodes, avg_edges)
            )
        reports.append(
            ExperimentReport(
                name,
                mode,
                args.hops,
                args.walks if mode == "rw" else 0,
                tuple(results),
                {"hops": args.hops, "walks": args.walks},
            )
        )
    path = _out(args, ".profile.tsv")
    _atomic(path, lambda tmp: write_report_tsv(reports, tmp, timings=args.timings))
    _write_manifest(
        "profile",
        args,
        [Path(args.edges)],
        [path],
        {"hops": args.hops, "walks": args.walks, "seeds": args.seeds, "threads": args.threads},
    )
    bfs_r, rw_r = reports
    print(
        f"bfs h={args.hops}: avg {bfs_r.mean_avg_nodes:.1f} nodes / {bfs_r.mean_avg_edges:.1f} edges; "
        f"rw h={args.hops} k={args.walks}: avg {rw_r.mean_avg_nodes:.1f} nodes / "
        f"{rw_r.mean_avg_edges:.1f} edges"
    )
    if rw_r.mean_avg_edges > 0:
        print(
            f"compression: {bfs_r.mean_avg_nodes / max(rw_r.mean_avg_nodes, 1e-12):.2f}x nodes, "
            f"{bfs_r.mean_avg_edges / max(rw_r.mean_avg_edges, 1e-12):.2f}x edges"
        )
    print(f"wrote {path}")
    return EXIT_OK


def _add_common(p: argparse.ArgumentParser, edges: bool = True) -> None:
    if edges:
        p.add_argument("--edges", required=True, help="edge-list file ('u v' per line)")
    p.add_argument("--out-dir", default=".", help="output directory (default: .)")
    p.add_argument("--name", default=None, help="output basename (default: edge file stem)")
    p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")


def _add_model_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--layer-dims", default="32,32,32,1", help="conv layer widths (default 32,32,32,1)")
    p.add_argument("--sortpool-k", type=int, default=None, help="rows kept by sort pooling (default: 0.6-quantile policy)")
    p.add_argument("--mlp-hidden", type=int, default=128)
    p.add_argument("--dropout", type=float, default=0.5)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--epochs", type=int, default=50)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sesample", description=__doc__)
    parser.add_argument("--version", action="version", version=f"sesample {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("split", help="split edges into train/val/test with 1:1 negatives")
    _add_common(p)
    p.add_argument("--ratios", type=float, nargs=3, default=[0.85, 0.05, 0.10],
                   metavar=("TRAIN", "VAL", "TEST"))
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("extract", help="extract and label enclosing subgraphs")
    _add_common(p)
    p.add_argument("--splits", required=True, help="split file from `sesample split`")
    p.add_argument("--mode", required=True, choices=["bfs", "rw"])
    p.add_argument("--hops", type=int, required=True, help="hop count / walk length")
    p.add_argument("--walks", type=int, default=1, help="walks per endpoint (rw mode)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--labeling", choices=["drnl", "zero-one"], default="drnl")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", help="train the subgraph classifier on extracted bundles")
    _add_common(p)
    p.add_argument("--splits", required=True)
    p.add_argument("--bundles", required=True,
                   help="bundle prefix (expects <prefix>.{train,val,test}.bundle)")
    p.add_argument("--features", default=None, help="optional node feature file")
    p.add_argument("--seed", type=int, default=0)
    _add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("heuristic", help="score instances with a classical heuristic")
    _add_common(p)
    p.add_argument("--splits", required=True)
    p.add_argument("--kind", required=True, choices=["cn", "aa", "ppr"])
    p.add_argument("--ppr-alpha", type=float, default=0.85)
    p.add_argument("--ppr-tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_heuristic)

    p = sub.add_parser("eval", help="AUC of a scores file")
    p.add_argument("--scores", required=True, help="scores file ('u v label split score')")
    p.add_argument("--split", default="test", choices=list(SPLIT_NAMES))
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="grid (h, k) experiments, seed-averaged")
    _add_common(p)
    p.add_argument("--features", default=None)
    p.add_argument("--hops", required=True, help="comma-separated walk lengths")
    p.add_argument("--walks", required=True, help="comma-separated walk counts")
    p.add_argument("--seeds", required=True, help="comma-separated seeds")
    p.add_argument("--timings", action="store_true",
                   help="write wall-clock runtimes into the TSV (not byte-reproducible)")
    _add_model_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("profile", help="compare bfs vs rw subgraph sparsity")
    _add_common(p)
    p.add_argument("--hops", type=int, required=True)
    p.add_argument("--walks", type=int, required=True)
    p.add_argument("--seeds", required=True, help="comma-separated seeds")
    p.add_argument("--timings", action="store_true")
    p.set_defaults(func=cmd_profile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (DataError, FileNotFoundError, IsADirectoryError, PermissionError) as e:
        print(f"sesample: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except AssertionError as e:
        print(f"sesample: internal invariant violated: {e}", file=sys.stderr)
        return EXIT_INTERNAL
    except RuntimeError as e:
        print(f"sesample: data error: {e}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
