"""Embedding kernels, Gram matrices, target alignment and shot estimators.

The kernel value for a pair (x, x') is the squared state overlap
|<0| U(x)^dagger U(x') |0>|**2, which both measurement procedures below
estimate: the echo test measures it as an all-zeros probability, the
swap test as 2 * P(ancilla=0) - 1.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence, Union

import numpy as np

from . import statesim
from .circuit import (
    AnsatzSpec,
    _resolve_source,
    build_ansatz,
    echo_circuit,
    shift_qubits,
    simulate,
)
from .statesim import State, apply_inplace, zero_probability


class DegenerateKernelError(ValueError):
    """Raised when a kernel matrix is identically zero and alignment is undefined."""


def kernel_value(
    spec: AnsatzSpec,
    params: np.ndarray,
    x: np.ndarray,
    x_prime: np.ndarray,
    feature_scale: float = 1.0,
) -> float:
    """Analytic kernel for one pair, via the echo circuit."""
    echo = echo_circuit(spec, x, x_prime, params, feature_scale)
    p = zero_probability(simulate(echo))
    return min(max(p, 0.0), 1.0)


def embedding_states(
    spec: AnsatzSpec,
    params: np.ndarray,
    features: np.ndarray,
    feature_scale: float = 1.0,
) -> np.ndarray:
    """Stack of embedded statevectors, one row of 2**n_qubits amplitudes per point."""
    features = np.asarray(features, dtype=float)
    if features.ndim != 2:
        raise ValueError(f"features must be 2-D, got shape {features.shape}")
    ansatz = build_ansatz(spec)
    out = np.empty((features.shape[0], 1 << spec.n_qubits), dtype=np.complex128)
    for i, row in enumerate(features):
        out[i] = simulate(ansatz, x=row, params=params, feature_scale=feature_scale).amplitudes
    return out


def kernel_matrix(
    spec: AnsatzSpec,
    params: np.ndarray,
    features: np.ndarray,
    feature_scale: float = 1.0,
) -> np.ndarray:
    """Full Gram matrix over ``features``.

    Embeds every point once and takes pairwise squared overlaps, which
    matches per-pair ``kernel_value`` calls to within simulation rounding.
    The upper triangle is mirrored and the diagonal pinned to exactly 1.
    """
    states = embedding_states(spec, params, features, feature_scale)
    gram = np.abs(states.conj() @ states.T) ** 2
    iu, ju = np.triu_indices(gram.shape[0], k=1)
    gram[ju, iu] = gram[iu, ju]
    np.clip(gram, 0.0, 1.0, out=gram)
    np.fill_diagonal(gram, 1.0)
    return gram


def kernel_cross(
    spec: AnsatzSpec,
    params: np.ndarray,
    features_rows: np.ndarray,
    features_cols: np.ndarray,
    feature_scale: float = 1.0,
) -> np.ndarray:
    """Rectangular kernel block, rows x columns (e.g. test points x training points)."""
    rows = embedding_states(spec, params, features_rows, feature_scale)
    cols = embedding_states(spec, params, features_cols, feature_scale)
    block = np.abs(rows.conj() @ cols.T) ** 2
    np.clip(block, 0.0, 1.0, out=block)
    return block


def ideal_kernel(labels: Sequence[int]) -> np.ndarray:
    """Target Gram matrix: +1 for same-label pairs, -1 otherwise."""
    y = np.asarray(labels)
    if y.ndim != 1 or len(y) == 0:
        raise ValueError("labels must be a non-empty 1-D sequence")
    return np.where(y[:, None] == y[None, :], 1.0, -1.0)


def target_alignment(gram: np.ndarray, labels: Sequence[int]) -> float:
    """Alignment of a Gram matrix with the label-induced ideal kernel.

    Uses the Frobenius inner product normalised by n * ||K||_F; the
    ideal kernel's norm is exactly n because all its entries are +-1.
    """
    gram = np.asarray(gram, dtype=float)
    n = gram.shape[0]
    if gram.shape != (n, n):
        raise ValueError(f"gram must be square, got shape {gram.shape}")
    if len(labels) != n:
        raise ValueError(f"{len(labels)} labels for a {n}x{n} gram matrix")
    if n < 2:
        raise ValueError("alignment needs at least 2 points")
    norm = float(np.sqrt(np.sum(gram * gram)))
    if norm == 0.0:
        raise DegenerateKernelError("kernel matrix is identically zero")
    ideal = ideal_kernel(labels)
    return float(np.sum(ideal * gram) / (n * norm))


# ------------------------------------------------------------- shot estimators


def loschmidt_estimate(
    spec: AnsatzSpec,
    params: np.ndarray,
    x: np.ndarray,
    x_prime: np.ndarray,
    shots: int,
    rng_seed: int,
    feature_scale: float = 1.0,
) -> float:
    """Shot-sampled echo test: frequency of the all-zeros outcome."""
    echo = echo_circuit(spec, x, x_prime, params, feature_scale)
    return statesim.sample_zero_probability(simulate(echo), shots, rng_seed)


def _swap_test_state(
    spec: AnsatzSpec,
    params: np.ndarray,
    x: np.ndarray,
    x_prime: np.ndarray,
    feature_scale: float,
) -> State:
    """State of the (2n+1)-qubit swap-test circuit before measurement.

    Qubit 0 is the ancilla; qubits 1..n hold U(x)|0>, qubits n+1..2n hold
    U(x')|0>.  The register-level controlled swap is decomposed into one
    3-qubit controlled swap per qubit pair, applied as an exact amplitude
    permutation.
    """
    n = spec.n_qubits
    total = 2 * n + 1
    if total > statesim.MAX_QUBITS:
        raise ValueError(
            f"swap test needs {total} qubits, above the {statesim.MAX_QUBITS} cap"
        )
    ansatz = build_ansatz(spec)
    state = statesim.new_zero_state(total)
    amps = state.amplitudes
    apply_inplace(amps, total, "H", 0)
    for offset, vec in ((1, x), (n + 1, x_prime)):
        placed = shift_qubits(ansatz, offset, total)
        for g in placed.gates:
            angle = None
            if g.source is not None:
                angle = _resolve_source(g.source, vec, params, feature_scale)
            apply_inplace(amps, total, g.kind, g.target, g.control, angle)
    view = amps.reshape((2,) * total)
    for q in range(1, n + 1):
        sel = [slice(None)] * total
        sel[0] = 1
        sel[q], sel[n + q] = 0, 1
        lo = tuple(sel)
        sel[q], sel[n + q] = 1, 0
        hi = tuple(sel)
        tmp = view[lo].copy()
        view[lo] = view[hi]
        view[hi] = tmp
    apply_inplace(amps, total, "H", 0)
    return state


def _ancilla_zero_probability(state: State) -> float:
    half = len(state.amplitudes) // 2
    block = state.amplitudes[:half]
    return float(np.sum(block.real**2 + block.imag**2))


def swap_test_value(
    spec: AnsatzSpec,
    params: np.ndarray,
    x: np.ndarray,
    x_prime: np.ndarray,
    feature_scale: float = 1.0,
) -> float:
    """Analytic swap-test kernel value, 2 * P(ancilla=0) - 1."""
    state = _swap_test_state(spec, params, x, x_prime, feature_scale)
    return min(max(2.0 * _ancilla_zero_probability(state) - 1.0, 0.0), 1.0)


def swap_test_estimate(
    spec: AnsatzSpec,
    params: np.ndarray,
    x: np.ndarray,
    x_prime: np.ndarray,
    shots: int,
    rng_seed: int,
    feature_scale: float = 1.0,
) -> float:
    """Shot-sampled swap test, clamped to [0, 1].

    Samples the ancilla marginal ``shots`` times with a seeded generator
    and maps the frequency through 2 * p - 1.
    """
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    state = _swap_test_state(spec, params, x, x_prime, feature_scale)
    p = min(max(_ancilla_zero_probability(state), 0.0), 1.0)
    hits = np.random.default_rng(rng_seed).binomial(shots, p)
    return min(max(2.0 * hits / shots - 1.0, 0.0), 1.0)


# ---------------------------------------------------------------- serialization


def save_kernel_matrix(gram: np.ndarray, path: Union[str, Path]) -> None:
    """Write a Gram matrix as CSV rows under an ``n=<size>`` header line."""
    gram = np.asarray(gram, dtype=float)
    n = gram.shape[0]
    if gram.shape != (n, n):
        raise ValueError(f"gram must be square, got shape {gram.shape}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"n={n}\n")
        for row in gram:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def load_kernel_matrix(path: Union[str, Path]) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header.startswith("n="):
            raise ValueError(f"bad kernel matrix header {header!r}")
        n = int(header[2:])
        gram = np.empty((n, n), dtype=float)
        for i in range(n):
            line = fh.readline()
            if not line:
                raise ValueError(f"kernel matrix truncated at row {i}")
            gram[i] = [float(tok) for tok in line.strip().split(",")]
    return gram
