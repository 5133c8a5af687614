"""Kernel-target alignment training by stochastic gradient ascent.

Each iteration draws a small batch, estimates the alignment gradient
with central finite differences, and steps the circuit parameters uphill.
Checkpoints record full-training-set alignment and the test accuracy of
an SVM fitted from scratch on the current kernel.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .circuit import AnsatzSpec
from .kernel import (
    DegenerateKernelError,
    kernel_cross,
    kernel_matrix,
    target_alignment,
)
from .svm import accuracy, fit_ovr, predict

TRACE_HEADER = ("iteration", "alignment", "test_accuracy", "elapsed_seconds")


@dataclass(frozen=True)
class TrainConfig:
    spec: AnsatzSpec
    iterations: int = 5000
    batch_size: int = 5
    checkpoint_every: int = 250
    learning_rate: float = 0.2
    fd_epsilon: float = 1e-3
    init_seed: int = 0
    batch_seed: int = 0
    feature_scale: float = 1.0

    def __post_init__(self) -> None:
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")
        if self.batch_size < 2:
            raise ValueError(f"batch_size must be >= 2, got {self.batch_size}")
        if self.checkpoint_every < 1:
            raise ValueError(f"checkpoint_every must be >= 1, got {self.checkpoint_every}")
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.fd_epsilon <= 0:
            raise ValueError(f"fd_epsilon must be > 0, got {self.fd_epsilon}")


@dataclass(frozen=True)
class TraceRow:
    iteration: int
    alignment: float
    test_accuracy: float
    elapsed_seconds: float


@dataclass(eq=False)
class AlignmentTrace:
    rows: list[TraceRow] = field(default_factory=list)

    @property
    def final(self) -> TraceRow:
        return self.rows[-1]

    def save(self, path: Union[str, Path]) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_HEADER)
            for r in self.rows:
                writer.writerow(
                    (r.iteration, repr(r.alignment), repr(r.test_accuracy), repr(r.elapsed_seconds))
                )

    @classmethod
    def load(cls, path: Union[str, Path]) -> "AlignmentTrace":
        rows = []
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = tuple(next(reader))
            if header != TRACE_HEADER:
                raise ValueError(f"unexpected trace header {header!r}")
            for rec in reader:
                rows.append(
                    TraceRow(int(rec[0]), float(rec[1]), float(rec[2]), float(rec[3]))
                )
        return cls(rows)


def init_params(spec: AnsatzSpec, seed: int) -> np.ndarray:
    """I.i.d. uniform angles on [0, 2*pi), drawn sequentially.

    Sequential draws mean a wider spec's vector starts with exactly the
    values a narrower spec gets from the same seed, which keeps runs with
    different layer counts comparable.
    """
    return np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, spec.n_params)


def batch_alignment(
    spec: AnsatzSpec,
    params: np.ndarray,
    features: np.ndarray,
    labels: Sequence[int],
    feature_scale: float = 1.0,
) -> float:
    """Alignment of the kernel restricted to one batch."""
    if len(features) < 2:
        raise ValueError("batch must contain at least 2 points")
    gram = kernel_matrix(spec, params, features, feature_scale)
    return target_alignment(gram, labels)


def fd_gradient(
    spec: AnsatzSpec,
    params: np.ndarray,
    features: np.ndarray,
    labels: Sequence[int],
    epsilon: float = 1e-3,
    feature_scale: float = 1.0,
) -> np.ndarray:
    """Central-difference gradient of batch alignment w.r.t. every parameter."""
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")
    grad = np.zeros(len(params))
    work = np.array(params, dtype=float)
    for k in range(len(params)):
        orig = work[k]
        work[k] = orig + epsilon
        hi = batch_alignment(spec, work, features, labels, feature_scale)
        work[k] = orig - epsilon
        lo = batch_alignment(spec, work, features, labels, feature_scale)
        work[k] = orig
        grad[k] = (hi - lo) / (2.0 * epsilon)
    return grad


def train(
    config: TrainConfig,
    train_set: tuple[np.ndarray, np.ndarray],
    test_set: tuple[np.ndarray, np.ndarray],
    svm_c: float = 1.0,
) -> tuple[np.ndarray, AlignmentTrace]:
    """Run alignment ascent and return (trained params, checkpoint trace).

    Batches of ``batch_size`` points are drawn uniformly without
    replacement from one generator seeded by ``batch_seed``.  Checkpoints
    land at iteration 0, every ``checkpoint_every`` iterations, and at
    the final iteration.  A checkpoint whose alignment is undefined
    (degenerate kernel) records NaN and training continues.
    """
    spec = config.spec
    x_train, y_train = np.asarray(train_set[0], float), np.asarray(train_set[1])
    x_test, y_test = np.asarray(test_set[0], float), np.asarray(test_set[1])
    for name, arr in (("train", x_train), ("test", x_test)):
        if arr.ndim != 2 or arr.shape[1] != spec.n_qubits:
            raise ValueError(
                f"{name} features must be (n, {spec.n_qubits}), got {arr.shape}"
            )
    n_train = len(x_train)
    if config.batch_size > n_train:
        raise ValueError(
            f"batch_size {config.batch_size} exceeds training set size {n_train}"
        )

    params = init_params(spec, config.init_seed)
    rng = np.random.default_rng(config.batch_seed)
    start = time.perf_counter()

    def checkpoint(iteration: int) -> TraceRow:
        gram = kernel_matrix(spec, params, x_train, config.feature_scale)
        try:
            align = target_alignment(gram, y_train)
        except DegenerateKernelError:
            align = math.nan
        try:
            model = fit_ovr(gram, y_train, C=svm_c)
            cross = kernel_cross(spec, params, x_test, x_train, config.feature_scale)
            acc = accuracy(predict(model, cross), y_test)
        except ValueError:
            acc = math.nan
        return TraceRow(iteration, align, acc, time.perf_counter() - start)

    trace = AlignmentTrace([checkpoint(0)])
    for it in range(1, config.iterations + 1):
        batch = rng.choice(n_train, size=config.batch_size, replace=False)
        grad = fd_gradient(
            spec, params, x_train[batch], y_train[batch],
            config.fd_epsilon, config.feature_scale,
        )
        params = params + config.learning_rate * grad
        if it % config.checkpoint_every == 0 or it == config.iterations:
            trace.rows.append(checkpoint(it))
    return params, trace
