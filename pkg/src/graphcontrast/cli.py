"""Command-line interface.

Exit codes: 0 success, 1 configuration or usage problems, 2 unreadable or
invalid data, 3 training divergence. Output files are written to a
temporary name and renamed on success, so failures never leave partial
files behind. The GCC_SEED environment variable, when set, overrides the
configured seed.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
import zlib

import numpy as np

from .checkpoint import CorruptCheckpointError, config_to_dict, load_checkpoint, save_checkpoint
from .downstream import (GraphDataset, LabeledNodes, embed_graph, embed_nodes, graph_classify,
                         load_graph_set, load_labels, load_truth, node_classify,
                         top_k_similarity)
from .graphs import GraphDataError, load_edge_list
from .synthetic import desk_corpus
from .training import PROFILES, TrainingDivergedError, pretrain

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2
EXIT_DIVERGED = 3


class ConfigError(ValueError):
    """Bad configuration file, key, or value."""


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems via exit code 1."""

    def error(self, message):
        raise ConfigError(message)


# key -> (python type, config section) for pretrain config files
CONFIG_SCHEMA = {
    "profile": (str, None),
    "seed": (int, None),
    "restart_prob": (float, "rwr"),
    "max_set_size": (int, "rwr"),
    "step_budget": (int, "rwr"),
    "temperature": (float, "contrast"),
    "dictionary_size": (int, "contrast"),
    "momentum": (float, "contrast"),
    "mechanism": (str, "contrast"),
    "num_layers": (int, "gin"),
    "hidden_dim": (int, "gin"),
    "out_dim": (int, "gin"),
    "positional_dim": (int, "gin"),
    "degree_buckets": (int, "gin"),
    "dropout": (float, "gin"),
    "batch_size": (int, "top"),
    "total_steps": (int, "top"),
    "warmup_steps": (int, "top"),
    "peak_lr": (float, "top"),
    "weight_decay": (float, "top"),
    "clip_norm": (float, "top"),
    "checkpoint_interval": (int, "top"),
}


def parse_config_file(path) -> dict:
    """key=value lines; '#' starts a comment; unknown keys are rejected."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}: line {lineno}: expected key=value, got {text!r}")
        key, _, raw = text.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in CONFIG_SCHEMA:
            raise ConfigError(f"{path}: line {lineno}: unknown config key {key!r}")
        typ, _ = CONFIG_SCHEMA[key]
        try:
            values[key] = typ(raw)
        except ValueError:
            raise ConfigError(
                f"{path}: line {lineno}: cannot parse {raw!r} as {typ.__name__} for {key}") from None
    return values


def build_pretrain_config(values: dict):
    """Assemble a PretrainConfig from a profile plus overrides."""
    import dataclasses

    from .contrast import ContrastConfig
    from .encoder import GinConfig
    from .sampling import RwrConfig
    from .training import PretrainConfig

    values = dict(values)
    profile = values.pop("profile", "moco-desk")
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}; choose from {sorted(PROFILES)}")
    seed = values.pop("seed", 0)
    env_seed = os.environ.get("GCC_SEED")
    if env_seed is not None:
        try:
            seed = int(env_seed)
        except ValueError:
            raise ConfigError(f"GCC_SEED must be an integer, got {env_seed!r}") from None
    base = PROFILES[profile](seed=seed)

    sections = {"rwr": dataclasses.asdict(base.rwr),
                "gin": dataclasses.asdict(base.gin),
                "contrast": dataclasses.asdict(base.contrast),
                "top": {f: getattr(base, f) for f in ("batch_size", "total_steps", "warmup_steps",
                                                      "peak_lr", "weight_decay", "clip_norm",
                                                      "checkpoint_interval")}}
    for key, value in values.items():
        _, section = CONFIG_SCHEMA[key]
        sections[section][key] = value
    sections["rwr"]["seed"] = seed
    try:
        return PretrainConfig(rwr=RwrConfig(**sections["rwr"]),
                              gin=GinConfig(**sections["gin"]),
                              contrast=ContrastConfig(**sections["contrast"]),
                              seed=seed, **sections["top"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _write_text_atomic(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _format_row(vid, row) -> str:
    return ",".join([str(vid)] + [f"{x:.9g}" for x in row])


def _load_corpus(args) -> list:
    if args.synthetic:
        return desk_corpus()
    if not args.graph:
        raise ConfigError("provide --synthetic or at least one --graph file")
    return [load_edge_list(p) for p in args.graph]


def cmd_pretrain(args) -> int:
    values = parse_config_file(args.config) if args.config else {}
    cfg = build_pretrain_config(values)
    corpus = _load_corpus(args)
    rows = []

    def progress(step, loss, lr):
        print(f"step={step} loss={loss:.6f} lr={lr:.8f}")
        rows.append(f"{step},{loss:.17g},{lr:.17g}")

    ckpt = pretrain(corpus, cfg, progress=progress)
    save_checkpoint(ckpt, args.out)
    _write_text_atomic(args.out + ".loss.csv", "step,loss,lr\n" + "\n".join(rows) + "\n")
    print(f"wrote checkpoint to {args.out} ({ckpt.step} steps)")
    return EXIT_OK


def _read_vertices_file(path) -> np.ndarray:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                out.append(int(text))
            except ValueError:
                raise GraphDataError(f"{path}: line {lineno}: expected a vertex id") from None
    if not out:
        raise GraphDataError(f"{path}: no vertex ids found")
    return np.array(out, dtype=np.int64)


def cmd_embed(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    g = load_edge_list(args.graph)
    dim = ckpt.config.gin.out_dim
    header = ",".join(["id"] + [f"e{i}" for i in range(dim)])
    if args.mode == "node":
        vertices = _read_vertices_file(args.vertices) if args.vertices else None
        emb = embed_nodes(ckpt, g, vertices=vertices)
        if vertices is None:
            vertices = np.arange(g.num_vertices)
        lines = [header] + [_format_row(int(v), emb[i]) for i, v in enumerate(vertices)]
    else:
        emb = embed_graph(ckpt, g)
        lines = [header, _format_row(0, emb)]
    _write_text_atomic(args.out, "\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} embedding rows to {args.out}")
    return EXIT_OK


def _print_fold_report(mean_acc, fold_accs) -> None:
    for i, acc in enumerate(fold_accs):
        print(f"fold={i} acc={acc:.6f}")
    print(f"mean_acc={mean_acc:.6f}")


def cmd_node_classify(args) -> int:
    if args.folds < 2:
        raise ConfigError("--folds must be at least 2")
    ckpt = load_checkpoint(args.ckpt)
    g = load_edge_list(args.graph)
    data = load_labels(args.labels, g)
    mean_acc, fold_accs = node_classify(ckpt, data, mode=args.mode, folds=args.folds,
                                        seed=args.seed)
    _print_fold_report(mean_acc, fold_accs)
    return EXIT_OK


def cmd_graph_classify(args) -> int:
    if args.folds < 2:
        raise ConfigError("--folds must be at least 2")
    ckpt = load_checkpoint(args.ckpt)
    data = load_graph_set(args.dataset)
    mean_acc, fold_accs = graph_classify(ckpt, data, mode=args.mode, folds=args.folds,
                                         seed=args.seed)
    _print_fold_report(mean_acc, fold_accs)
    return EXIT_OK


def cmd_simsearch(args) -> int:
    if args.k < 1:
        raise ConfigError("--k must be at least 1")
    ckpt = load_checkpoint(args.ckpt)
    g1 = load_edge_list(args.graph_a)
    g2 = load_edge_list(args.graph_b)
    truth = load_truth(args.truth)
    if not truth:
        raise GraphDataError(f"{args.truth}: truth set is empty")
    score = top_k_similarity(ckpt, g1, g2, truth, k=args.k)
    print(f"hits_at_{args.k}={score:.6f}")
    return EXIT_OK


def cmd_inspect(args) -> int:
    ckpt = load_checkpoint(args.ckpt)
    flat = {}

    def flatten(prefix, obj):
        for key, value in obj.items():
            if isinstance(value, dict):
                flatten(f"{prefix}{key}.", value)
            else:
                flat[f"{prefix}{key}"] = value

    flatten("", config_to_dict(ckpt.config))
    for key in sorted(flat):
        print(f"{key}={flat[key]}")
    print(f"step={ckpt.step}")
    print(f"adam_step_count={ckpt.adam_step_count}")

    def checksum(tensors) -> str:
        crc = 0
        for name in sorted(tensors):
            crc = zlib.crc32(tensors[name].tobytes(), crc)
        return f"{crc:08x}"

    print(f"checksum.theta_q={checksum(ckpt.theta_q)}")
    if ckpt.theta_k is not None:
        print(f"checksum.theta_k={checksum(ckpt.theta_k)}")
    if ckpt.queue_storage is not None:
        print(f"checksum.queue={zlib.crc32(ckpt.queue_storage.tobytes()):08x}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="graphcontrast",
                     description="Contrastive subgraph pre-training and transfer tools")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("pretrain", help="pre-train an encoder")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--synthetic", action="store_true", help="train on the built-in corpus")
    p.add_argument("--graph", action="append", help="edge list file (repeatable)")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.set_defaults(fn=cmd_pretrain)

    p = sub.add_parser("embed", help="write embeddings as CSV")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--mode", choices=("node", "graph"), default="node")
    p.add_argument("--vertices", help="file with one vertex id per line")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_embed)

    p = sub.add_parser("node-classify", help="k-fold vertex classification")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--graph", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--mode", choices=("freeze", "full"), default="freeze")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_node_classify)

    p = sub.add_parser("graph-classify", help="k-fold graph classification")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--dataset", required=True, help="graph-set file")
    p.add_argument("--mode", choices=("freeze", "full"), default="freeze")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_graph_classify)

    p = sub.add_parser("simsearch", help="top-k cross-graph vertex matching")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--graph-a", required=True)
    p.add_argument("--graph-b", required=True)
    p.add_argument("--truth", required=True, help="file of '<u> <v>' ground-truth pairs")
    p.add_argument("--k", type=int, default=10)
    p.set_defaults(fn=cmd_simsearch)

    p = sub.add_parser("inspect", help="print checkpoint metadata")
    p.add_argument("--ckpt", required=True)
    p.set_defaults(fn=cmd_inspect)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (GraphDataError, CorruptCheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
