"""Soft-margin SVM over precomputed kernel matrices.

The binary solver runs pairwise coordinate ascent on the C-SVC dual
(SMO): each step picks the maximal KKT violator on the "up" side, pairs
it with the point maximising the error gap on the "low" side, and solves
the two-variable subproblem exactly.  Multiclass goes through one-vs-rest
with ties broken toward the smallest class id.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

_BOUND_EPS = 1e-12


@dataclass(eq=False)
class BinarySvmModel:
    """Dual solution of one binary problem over a fixed training set."""

    alphas: np.ndarray
    bias: float
    labels: np.ndarray  # +-1 per training point
    C: float
    converged: bool = True


@dataclass(eq=False)
class OvrModel:
    """Ordered (class id, binary model) pairs; order is ascending class id."""

    members: list[tuple[int, BinarySvmModel]] = field(default_factory=list)


def _check_problem(gram: np.ndarray, y: np.ndarray, C: float) -> None:
    n = gram.shape[0]
    if gram.shape != (n, n):
        raise ValueError(f"gram must be square, got shape {gram.shape}")
    if y.shape != (n,):
        raise ValueError(f"{y.shape[0] if y.ndim == 1 else y.shape} labels for {n} points")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +-1")
    if len(np.unique(y)) < 2:
        raise ValueError("training set contains a single class")
    if C <= 0:
        raise ValueError(f"C must be > 0, got {C}")
    min_eig = float(np.linalg.eigvalsh(gram).min())
    if min_eig < -1e-6 * max(1.0, float(np.abs(gram).max())):
        warnings.warn(
            f"kernel matrix is not PSD (min eigenvalue {min_eig:.3e}); "
            "curvature will be clamped",
            stacklevel=3,
        )


def solve_dual(
    gram: np.ndarray,
    y: np.ndarray,
    C: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 1000,
) -> BinarySvmModel:
    """Solve the binary C-SVC dual for a precomputed kernel.

    Stops when the maximal KKT violation drops below ``tol`` or after
    ``max_passes`` sweeps (n pair updates each).  The box constraint
    0 <= alpha <= C and the equality sum(alpha * y) = 0 hold throughout;
    pair updates preserve the equality exactly.
    """
    gram = np.asarray(gram, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_problem(gram, y, C)
    n = gram.shape[0]
    alpha = np.zeros(n)
    f = np.zeros(n)  # f_i = sum_j alpha_j y_j K_ij, bias excluded
    pos, neg = y > 0, y < 0
    converged = False
    for _ in range(max_passes * n):
        # g_i = y_i - f_i is the negative KKT gradient along y_i.
        g = y - f
        can_up = (pos & (alpha < C - _BOUND_EPS)) | (neg & (alpha > _BOUND_EPS))
        can_lo = (neg & (alpha < C - _BOUND_EPS)) | (pos & (alpha > _BOUND_EPS))
        if not can_up.any() or not can_lo.any():
            converged = True
            break
        up_idx = np.flatnonzero(can_up)
        lo_idx = np.flatnonzero(can_lo)
        i = up_idx[np.argmax(g[up_idx])]
        j = lo_idx[np.argmin(g[lo_idx])]
        if g[i] - g[j] < tol:
            converged = True
            break
        e_i, e_j = f[i] - y[i], f[j] - y[j]
        # Clamp curvature so duplicate points (eta == 0) step to a bound.
        eta = max(gram[i, i] + gram[j, j] - 2.0 * gram[i, j], _BOUND_EPS)
        if y[i] != y[j]:
            lo_b = max(0.0, alpha[j] - alpha[i])
            hi_b = min(C, C + alpha[j] - alpha[i])
        else:
            lo_b = max(0.0, alpha[i] + alpha[j] - C)
            hi_b = min(C, alpha[i] + alpha[j])
        new_j = alpha[j] + y[j] * (e_i - e_j) / eta
        new_j = min(max(new_j, lo_b), hi_b)
        if abs(new_j - alpha[j]) < 1e-14:
            break  # numerically stalled
        # Exact arithmetic keeps new_i inside the box; rounding can
        # overshoot by an ulp, so clip it back.
        new_i = min(max(alpha[i] + y[i] * y[j] * (alpha[j] - new_j), 0.0), C)
        f += (new_i - alpha[i]) * y[i] * gram[:, i] + (new_j - alpha[j]) * y[j] * gram[:, j]
        alpha[i], alpha[j] = new_i, new_j
    bias = _solve_bias(alpha, f, y, C)
    return BinarySvmModel(alphas=alpha, bias=bias, labels=y.copy(), C=C, converged=converged)


def _solve_bias(alpha: np.ndarray, f: np.ndarray, y: np.ndarray, C: float) -> float:
    free = (alpha > 1e-8) & (alpha < C - 1e-8)
    g = y - f
    if free.any():
        return float(np.mean(g[free]))
    pos, neg = y > 0, y < 0
    can_up = (pos & (alpha < C - _BOUND_EPS)) | (neg & (alpha > _BOUND_EPS))
    can_lo = (neg & (alpha < C - _BOUND_EPS)) | (pos & (alpha > _BOUND_EPS))
    hi = g[can_up].max() if can_up.any() else 0.0
    lo = g[can_lo].min() if can_lo.any() else 0.0
    return float(0.5 * (hi + lo))


def dual_objective(alphas: np.ndarray, gram: np.ndarray, y: np.ndarray) -> float:
    """Dual objective sum(alpha) - 0.5 * alpha' Q alpha with Q = yy' * K."""
    ay = alphas * y
    return float(np.sum(alphas) - 0.5 * ay @ gram @ ay)


def decision_values(model: BinarySvmModel, kernel_rows: np.ndarray) -> np.ndarray:
    """Signed decision values for points whose kernel rows (vs training) are given."""
    kernel_rows = np.atleast_2d(np.asarray(kernel_rows, dtype=float))
    if kernel_rows.shape[1] != len(model.alphas):
        raise ValueError(
            f"kernel rows have {kernel_rows.shape[1]} columns, "
            f"model was trained on {len(model.alphas)} points"
        )
    return kernel_rows @ (model.alphas * model.labels) + model.bias


def fit_ovr(
    gram: np.ndarray,
    labels: np.ndarray,
    C: float = 1.0,
    tol: float = 1e-3,
    max_passes: int = 1000,
) -> OvrModel:
    """One binary model per class, that class against the rest."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    if len(classes) < 2:
        raise ValueError("need at least 2 classes")
    members = []
    for cid in classes:
        y = np.where(labels == cid, 1.0, -1.0)
        members.append((int(cid), solve_dual(gram, y, C, tol, max_passes)))
    return OvrModel(members=members)


def predict(model: OvrModel, kernel_rows: np.ndarray) -> np.ndarray:
    """Class of the largest decision value; ties go to the smallest class id."""
    kernel_rows = np.atleast_2d(np.asarray(kernel_rows, dtype=float))
    scores = np.column_stack(
        [decision_values(m, kernel_rows) for _, m in model.members]
    )
    ids = np.array([cid for cid, _ in model.members])
    # argmax returns the first maximum and members are sorted by class id.
    return ids[np.argmax(scores, axis=1)]


def accuracy(predicted: np.ndarray, actual: np.ndarray) -> float:
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {actual.shape}")
    if predicted.size == 0:
        raise ValueError("empty prediction set")
    return float(np.mean(predicted == actual))
