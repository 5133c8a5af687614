"""Experiment harness CLI.

Subcommands: ``fetch`` downloads a benchmark dataset, ``train`` runs one
alignment-training experiment, ``sweep`` runs a reproducible grid of
them, ``erase-check`` reports the redundant-gate analysis for an
architecture, and ``evaluate`` re-scores a saved model.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O or network
failure, 4 numeric failure.  The output directory defaults to ``runs``
and can be overridden with the QEKBENCH_OUT environment variable (the
``--out`` flag wins); QEKBENCH_DATA plays the same role for ``--data-dir``.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import hashlib
import json
import math
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import datasets, svm
from .circuit import (
    ARCHITECTURES,
    AnsatzSpec,
    GateCounts,
    MalformedEchoError,
    bind_echo,
    build_ansatz,
    count_gates,
    echo_template,
    erase_redundant,
    format_circuit,
    simulate,
)
from .datasets import (
    ChecksumMismatchError,
    Dataset,
    DatasetParseError,
    FetchError,
    UnknownDatasetError,
)
from .kernel import DegenerateKernelError, kernel_cross, kernel_matrix, save_kernel_matrix
from .statesim import zero_probability
from .training import TrainConfig, train

SUMMARY_HEADER = (
    "dataset", "arch", "layers", "rep", "seed",
    "final_accuracy", "final_alignment", "elapsed_seconds",
    "one_qubit_gates", "two_qubit_gates", "status",
)


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def derive_seed(master: int, *parts) -> int:
    """Stable sub-seed from a master seed and a role tag.

    Hash-based so independent runs of a grid can derive their own seeds
    without coordination.  Deliberately excludes architecture and layer
    count: repetition r of every grid cell shares one random stream,
    which makes accuracy columns comparable across architectures at
    matched repetitions.
    """
    text = ":".join(str(p) for p in (master, *parts))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") % (1 << 63)


# ------------------------------------------------------------------ dataset prep


def _prepare_dataset(cfg: dict) -> tuple[Dataset, Dataset, int]:
    """Load, normalize, reduce and split; returns (train, test, split seed)."""
    name = cfg["dataset"]
    entry = datasets._manifest_entry(name)
    path = Path(cfg["data_dir"]) / entry["filename"]
    if not path.exists():
        raise CliError(
            2, f"dataset file {path} not found; run `qekbench fetch {name}` first"
        )
    ds = datasets.load(name, path)
    ds = datasets.normalize_minmax(ds)
    n_qubits = cfg["qubits"]
    if n_qubits > ds.n_features:
        raise CliError(
            2,
            f"{name!r} has {ds.n_features} usable features; "
            f"--qubits {n_qubits} is too wide",
        )
    ds = datasets.reduce_features(ds, n_qubits, cfg["reduce"])
    if cfg["subsample_per_class"] is not None:
        ds = datasets.subsample_per_class(
            ds,
            cfg["subsample_per_class"],
            derive_seed(cfg["split_base_seed"], "subsample"),
        )
    split_seed = datasets.select_split(
        ds, cfg["select_candidates"], cfg["train_fraction"], cfg["split_base_seed"]
    )
    train_ds, test_ds = datasets.stratified_split(ds, cfg["train_fraction"], split_seed)
    return train_ds, test_ds, split_seed


def _run_experiment(
    cfg: dict, train_ds: Dataset, test_ds: Dataset, run_seed: int
) -> dict:
    spec = AnsatzSpec(cfg["arch"], cfg["qubits"], cfg["layers"])
    config = TrainConfig(
        spec=spec,
        iterations=cfg["iterations"],
        batch_size=cfg["batch_size"],
        checkpoint_every=cfg["checkpoint_every"],
        learning_rate=cfg["learning_rate"],
        fd_epsilon=cfg["fd_epsilon"],
        init_seed=derive_seed(run_seed, "init"),
        batch_seed=derive_seed(run_seed, "batch"),
        feature_scale=cfg["feature_scale"],
    )
    params, trace = train(
        config,
        (train_ds.features, train_ds.labels),
        (test_ds.features, test_ds.labels),
        svm_c=cfg["svm_c"],
    )
    counts = count_gates(build_ansatz(spec))
    final = trace.final
    return {
        "spec": spec,
        "config": config,
        "params": params,
        "trace": trace,
        "gate_counts": counts,
        "final_alignment": final.alignment,
        "final_accuracy": final.test_accuracy,
        "elapsed_seconds": final.elapsed_seconds,
    }


# ------------------------------------------------------------------- subcommands


def cmd_fetch(args: argparse.Namespace) -> int:
    entry = datasets._manifest_entry(args.dataset)
    dest = Path(args.data_dir) / entry["filename"]
    cached = False
    if dest.exists():
        before = datasets._sha256(dest)
        path = datasets.fetch(args.dataset, dest)
        cached = datasets._sha256(path) == before
    else:
        path = datasets.fetch(args.dataset, dest)
    print(f"{'cached' if cached else 'fetched'} {path}")
    return 0


def _train_cfg(args: argparse.Namespace) -> dict:
    return {
        "dataset": args.dataset,
        "arch": args.arch,
        "layers": args.layers,
        "qubits": args.qubits,
        "iterations": args.iterations,
        "batch_size": args.batch_size,
        "checkpoint_every": args.checkpoint_every,
        "learning_rate": args.learning_rate,
        "fd_epsilon": args.fd_epsilon,
        "feature_scale": args.feature_scale,
        "svm_c": args.svm_c,
        "reduce": args.reduce,
        "train_fraction": args.train_fraction,
        "select_candidates": args.select_candidates,
        "split_base_seed": args.split_base_seed,
        "subsample_per_class": args.subsample_per_class,
        "data_dir": args.data_dir,
    }


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _train_cfg(args)
    train_ds, test_ds, split_seed = _prepare_dataset(cfg)
    result = _run_experiment(cfg, train_ds, test_ds, args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    tag = f"{args.dataset}_{args.arch}_{args.layers}_{args.seed}"
    trace_path = out_dir / f"trace_{tag}.csv"
    model_path = out_dir / f"model_{tag}.json"
    result["trace"].save(trace_path)
    _save_model(model_path, cfg, result, args.seed, split_seed)
    print(
        f"trained {tag}: final_alignment={result['final_alignment']!r} "
        f"final_accuracy={result['final_accuracy']!r}"
    )
    print(f"wrote {trace_path}")
    print(f"wrote {model_path}")
    return 0


def _save_model(
    path: Path, cfg: dict, result: dict, run_seed: int, split_seed: int
) -> None:
    config: TrainConfig = result["config"]
    payload = {
        "dataset": cfg["dataset"],
        "arch": cfg["arch"],
        "layers": cfg["layers"],
        "qubits": cfg["qubits"],
        "feature_scale": cfg["feature_scale"],
        "svm_c": cfg["svm_c"],
        "iterations": cfg["iterations"],
        "batch_size": cfg["batch_size"],
        "checkpoint_every": cfg["checkpoint_every"],
        "learning_rate": cfg["learning_rate"],
        "fd_epsilon": cfg["fd_epsilon"],
        "reduce": cfg["reduce"],
        "train_fraction": cfg["train_fraction"],
        "select_candidates": cfg["select_candidates"],
        "split_base_seed": cfg["split_base_seed"],
        "subsample_per_class": cfg["subsample_per_class"],
        "seed": run_seed,
        "init_seed": config.init_seed,
        "batch_seed": config.batch_seed,
        "split_seed": split_seed,
        "params": [float(v) for v in result["params"]],
        "final_alignment": result["final_alignment"],
        "final_test_accuracy": result["final_accuracy"],
        "elapsed_seconds": result["elapsed_seconds"],
        "gate_counts": {
            "one_qubit": result["gate_counts"].one_qubit,
            "two_qubit": result["gate_counts"].two_qubit,
        },
    }
    path.write_text(json.dumps(payload, indent=2) + "\n", "utf-8")


def cmd_evaluate(args: argparse.Namespace) -> int:
    model_path = Path(args.model)
    if not model_path.exists():
        raise CliError(2, f"model file {model_path} not found")
    payload = json.loads(model_path.read_text("utf-8"))
    if args.dataset != payload["dataset"]:
        raise CliError(
            2,
            f"model was trained on {payload['dataset']!r}, not {args.dataset!r}",
        )
    cfg = {
        "dataset": payload["dataset"],
        "qubits": payload["qubits"],
        "reduce": payload["reduce"],
        "train_fraction": payload["train_fraction"],
        "select_candidates": payload["select_candidates"],
        "split_base_seed": payload["split_base_seed"],
        "subsample_per_class": payload["subsample_per_class"],
        "data_dir": args.data_dir,
    }
    train_ds, test_ds, _ = _prepare_dataset(cfg)
    spec = AnsatzSpec(payload["arch"], payload["qubits"], payload["layers"])
    params = np.array(payload["params"], dtype=float)
    scale = payload["feature_scale"]
    gram = kernel_matrix(spec, params, train_ds.features, scale)
    model = svm.fit_ovr(gram, train_ds.labels, C=payload["svm_c"])
    cross = kernel_cross(spec, params, test_ds.features, train_ds.features, scale)
    acc = svm.accuracy(svm.predict(model, cross), test_ds.labels)
    print(f"test_accuracy={acc!r}")
    if args.gram_out:
        save_kernel_matrix(gram, args.gram_out)
        print(f"wrote {args.gram_out}")
    return 0


def cmd_erase_check(args: argparse.Namespace) -> int:
    spec = AnsatzSpec(args.arch, args.qubits, args.layers)
    template = echo_template(spec)
    simplified, n_erased = erase_redundant(template)
    before, after = count_gates(template), count_gates(simplified)
    print(f"erase-check arch={args.arch} layers={args.layers} qubits={args.qubits}")
    print(f"echo gates before: one_qubit={before.one_qubit} two_qubit={before.two_qubit}")
    print(f"echo gates after:  one_qubit={after.one_qubit} two_qubit={after.two_qubit}")
    print(f"erased: {n_erased}")
    rng = np.random.default_rng(args.seed)
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(0.0, 1.0, spec.n_qubits)
        xp = rng.uniform(0.0, 1.0, spec.n_qubits)
        theta = rng.uniform(0.0, 2.0 * np.pi, spec.n_params)
        p_full = zero_probability(simulate(bind_echo(template, x, xp, theta)))
        p_cut = zero_probability(simulate(bind_echo(simplified, x, xp, theta)))
        worst = max(worst, abs(p_full - p_cut))
    ok = worst < 1e-12
    print(f"value preservation over 100 random bindings: max|dp|={worst:.3e} "
          f"{'PASS' if ok else 'FAIL'}")
    print("simplified echo:")
    print(format_circuit(simplified) if simplified.gates else "(empty)")
    return 0 if ok else 4


# ------------------------------------------------------------------------ sweep

SWEEP_DEFAULTS = {
    "dataset": None,
    "architectures": list(ARCHITECTURES),
    "layers": [1, 2, 3, 4, 5],
    "repetitions": 25,
    "qubits": 5,
    "iterations": 5000,
    "batch_size": 5,
    "checkpoint_every": 250,
    "learning_rate": 0.2,
    "fd_epsilon": 1e-3,
    "feature_scale": 1.0,
    "svm_c": 1.0,
    "reduce": "pca",
    "train_fraction": 0.75,
    "select_candidates": 25,
    "split_base_seed": 0,
    "subsample_per_class": None,
    "master_seed": 0,
    "jobs": 1,
}


def _parse_int_list(text) -> list[int]:
    """Accept 3, "3", "1,3,5" or "1..5"."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(v) for v in text]
    text = str(text).strip()
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(tok) for tok in text.split(",") if tok.strip()]


def _load_sweep_config(args: argparse.Namespace) -> dict:
    cfg = dict(SWEEP_DEFAULTS)
    cfg["data_dir"] = args.data_dir
    cfg["out"] = args.out
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise CliError(2, f"config file {path} not found")
        try:
            loaded = json.loads(path.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise CliError(2, f"config file {path} is not valid JSON: {exc}")
        unknown = set(loaded) - set(SWEEP_DEFAULTS) - {"data_dir", "out"}
        if unknown:
            raise CliError(2, f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(loaded)
    # Explicit flags win over config-file values.
    for key in SWEEP_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            cfg[key] = flag
    if cfg["dataset"] is None:
        raise CliError(2, "sweep needs a dataset (config key or --dataset)")
    cfg["architectures"] = list(cfg["architectures"])
    for arch in cfg["architectures"]:
        if arch not in ARCHITECTURES:
            raise CliError(2, f"unknown architecture {arch!r}")
    cfg["layers"] = _parse_int_list(cfg["layers"])
    return cfg


def _sweep_cell(payload: dict) -> dict:
    """One grid cell; returns a summary row dict.  Top level so it pickles."""
    cfg = payload["cfg"]
    row = {
        "dataset": cfg["dataset"],
        "arch": cfg["arch"],
        "layers": cfg["layers"],
        "rep": payload["rep"],
        "seed": payload["run_seed"],
    }
    try:
        counts = count_gates(
            build_ansatz(AnsatzSpec(cfg["arch"], cfg["qubits"], cfg["layers"]))
        )
    except ValueError:
        counts = GateCounts(one_qubit=0, two_qubit=0)  # spec unconstructible
    row.update(one_qubit_gates=counts.one_qubit, two_qubit_gates=counts.two_qubit)
    try:
        result = _run_experiment(cfg, payload["train_ds"], payload["test_ds"],
                                 payload["run_seed"])
        row.update(
            final_accuracy=result["final_accuracy"],
            final_alignment=result["final_alignment"],
            elapsed_seconds=result["elapsed_seconds"],
            status="ok",
        )
    except Exception as exc:  # record the failure, keep the grid going
        row.update(
            final_accuracy=math.nan,
            final_alignment=math.nan,
            elapsed_seconds=math.nan,
            status=f"error: {exc}",
        )
    return row


def _format_row(row: dict) -> list:
    out = []
    for key in SUMMARY_HEADER:
        v = row[key]
        out.append(repr(v) if isinstance(v, float) else v)
    return out


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_sweep_config(args)
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    summary_path = out_dir / "summary.csv"

    done: set[tuple] = set()
    if summary_path.exists():
        with open(summary_path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader, ()))
            if header != SUMMARY_HEADER:
                raise CliError(2, f"{summary_path} has unexpected header {header!r}")
            for rec in reader:
                done.add((rec[0], rec[1], int(rec[2]), int(rec[3])))
        print(f"resuming sweep: {len(done)} cell(s) already in {summary_path}")

    base_cfg = {k: cfg[k] for k in (
        "dataset", "qubits", "iterations", "batch_size", "checkpoint_every",
        "learning_rate", "fd_epsilon", "feature_scale", "svm_c", "reduce",
        "train_fraction", "select_candidates", "split_base_seed",
        "subsample_per_class", "data_dir",
    )}
    train_ds, test_ds, _ = _prepare_dataset(base_cfg)

    pending = []
    for arch in cfg["architectures"]:
        for layers in cfg["layers"]:
            for rep in range(cfg["repetitions"]):
                key = (cfg["dataset"], arch, layers, rep)
                if key in done:
                    continue
                cell_cfg = dict(base_cfg, arch=arch, layers=layers)
                pending.append({
                    "cfg": cell_cfg,
                    "rep": rep,
                    "run_seed": derive_seed(cfg["master_seed"], "rep", rep),
                    "train_ds": train_ds,
                    "test_ds": test_ds,
                })

    new_file = not summary_path.exists()
    with open(summary_path, "a", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        if new_file:
            writer.writerow(SUMMARY_HEADER)
            fh.flush()
        if cfg["jobs"] > 1:
            with concurrent.futures.ProcessPoolExecutor(cfg["jobs"]) as pool:
                for row in pool.map(_sweep_cell, pending):
                    writer.writerow(_format_row(row))
                    fh.flush()
        else:
            for payload in pending:
                row = _sweep_cell(payload)
                writer.writerow(_format_row(row))
                fh.flush()
    print(f"sweep complete: {len(pending)} new cell(s) -> {summary_path}")

    stats_path = out_dir / "summary_stats.csv"
    _write_stats(summary_path, stats_path)
    print(f"wrote {stats_path}")
    return 0


def _write_stats(summary_path: Path, stats_path: Path) -> None:
    """Per-cell descriptive stats over repetitions, error rows excluded."""
    groups: dict[tuple, list[tuple[float, float]]] = {}
    order: list[tuple] = []
    with open(summary_path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            if rec["status"] != "ok":
                continue
            key = (rec["dataset"], rec["arch"], int(rec["layers"]))
            if key not in groups:
                groups[key] = []
                order.append(key)
            groups[key].append(
                (float(rec["final_accuracy"]), float(rec["final_alignment"]))
            )
    with open(stats_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow((
            "dataset", "arch", "layers", "n_runs",
            "accuracy_mean", "accuracy_median", "accuracy_q1", "accuracy_q3",
            "alignment_mean", "alignment_median", "alignment_q1", "alignment_q3",
        ))
        for key in sorted(order):
            vals = np.array(groups[key])
            acc, ali = vals[:, 0], vals[:, 1]
            writer.writerow((
                key[0], key[1], key[2], len(vals),
                repr(float(acc.mean())), repr(float(np.median(acc))),
                repr(float(np.percentile(acc, 25))), repr(float(np.percentile(acc, 75))),
                repr(float(ali.mean())), repr(float(np.median(ali))),
                repr(float(np.percentile(ali, 25))), repr(float(np.percentile(ali, 75))),
            ))


# ------------------------------------------------------------------ arg parsing


def _add_dataset_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--qubits", type=int, default=5)
    p.add_argument("--reduce", choices=("pca", "truncate"), default="pca")
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.add_argument("--select-candidates", type=int, default=25)
    p.add_argument("--split-base-seed", type=int, default=0)
    p.add_argument("--subsample-per-class", type=int, default=None)


def _add_train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iterations", type=int, default=5000)
    p.add_argument("--batch-size", type=int, default=5)
    p.add_argument("--checkpoint-every", type=int, default=250)
    p.add_argument("--learning-rate", type=float, default=0.2)
    p.add_argument("--fd-epsilon", type=float, default=1e-3)
    p.add_argument("--feature-scale", type=float, default=1.0)
    p.add_argument("--svm-c", type=float, default=1.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qekbench",
        description="Benchmark trainable quantum embedding kernels.",
    )
    default_out = os.environ.get("QEKBENCH_OUT", "runs")
    default_data = os.environ.get("QEKBENCH_DATA", "data")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("fetch", help="download and verify a benchmark dataset")
    p.add_argument("dataset")
    p.add_argument("--data-dir", default=default_data)
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("train", help="run one alignment-training experiment")
    p.add_argument("--dataset", required=True)
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_train_flags(p)
    _add_dataset_flags(p)
    p.add_argument("--data-dir", default=default_data)
    p.add_argument("--out", default=default_out)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="run a grid of experiments from a config file")
    p.add_argument("--config", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--architectures", type=lambda s: s.split(","), default=None)
    p.add_argument("--layers", default=None)
    p.add_argument("--repetitions", type=int, default=None)
    p.add_argument("--qubits", type=int, default=None)
    p.add_argument("--iterations", type=int, default=None)
    p.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    p.add_argument("--checkpoint-every", dest="checkpoint_every", type=int, default=None)
    p.add_argument("--learning-rate", dest="learning_rate", type=float, default=None)
    p.add_argument("--fd-epsilon", dest="fd_epsilon", type=float, default=None)
    p.add_argument("--feature-scale", dest="feature_scale", type=float, default=None)
    p.add_argument("--svm-c", dest="svm_c", type=float, default=None)
    p.add_argument("--reduce", choices=("pca", "truncate"), default=None)
    p.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    p.add_argument("--select-candidates", dest="select_candidates", type=int, default=None)
    p.add_argument("--split-base-seed", dest="split_base_seed", type=int, default=None)
    p.add_argument("--subsample-per-class", dest="subsample_per_class", type=int, default=None)
    p.add_argument("--master-seed", dest="master_seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--data-dir", default=default_data)
    p.add_argument("--out", default=default_out)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("erase-check", help="report redundant echo gates for an ansatz")
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p.add_argument("--layers", type=int, required=True)
    p.add_argument("--qubits", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_erase_check)

    p = sub.add_parser("evaluate", help="re-score a saved model on its dataset")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--gram-out", default=None)
    p.add_argument("--data-dir", default=default_data)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "func", None):
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except UnknownDatasetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DegenerateKernelError, MalformedEchoError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4
    except (FetchError, ChecksumMismatchError, DatasetParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
