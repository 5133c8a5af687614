"""Benchmark dataset acquisition and preprocessing.

Supported datasets are pinned in ``manifest.json`` (shipped with the
package): download URL, content digest, and the column schema the loader
applies.  The preprocessing pipeline is min-max normalization, optional
feature reduction to the register width, and a seeded stratified split.

A manifest entry may ship with a null digest when the upstream bytes
were not available at packaging time; the first successful fetch then
records the observed digest in a ``.sha256`` sidecar next to the file
and later fetches verify against it.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import urllib.error
import urllib.request
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Union

import numpy as np

log = logging.getLogger(__name__)


class UnknownDatasetError(ValueError):
    pass


class FetchError(RuntimeError):
    """Network or I/O failure while downloading; retrying may help."""


class ChecksumMismatchError(RuntimeError):
    pass


class DatasetParseError(ValueError):
    pass


@dataclass(eq=False)
class Dataset:
    name: str
    features: np.ndarray  # (n_rows, n_features) float
    labels: np.ndarray  # (n_rows,) int class ids, 0-based
    class_names: list[str]

    @property
    def n_rows(self) -> int:
        return len(self.labels)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


_manifest_cache: Optional[dict] = None


def load_manifest() -> dict:
    global _manifest_cache
    if _manifest_cache is None:
        text = resources.files("qekbench").joinpath("manifest.json").read_text("utf-8")
        _manifest_cache = json.loads(text)
    return _manifest_cache


def dataset_names() -> tuple[str, ...]:
    return tuple(sorted(load_manifest()["datasets"]))


def _manifest_entry(name: str) -> dict:
    datasets = load_manifest()["datasets"]
    if name not in datasets:
        raise UnknownDatasetError(
            f"unknown dataset {name!r}; supported: {', '.join(sorted(datasets))}"
        )
    return datasets[name]


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


def fetch(
    name: str,
    destination: Union[str, Path],
    url: Optional[str] = None,
    timeout: float = 30.0,
) -> Path:
    """Download a manifest dataset to ``destination`` and verify its digest.

    Returns the destination path.  A file already present with the
    expected digest is left alone; a stale file is re-downloaded.  When
    the manifest digest is null, the digest observed on first fetch is
    recorded in ``<destination>.sha256`` and enforced afterwards.
    """
    entry = _manifest_entry(name)
    dest = Path(destination)
    lock = dest.with_name(dest.name + ".sha256")
    expected = entry["sha256"]
    if expected is None and lock.exists():
        expected = lock.read_text("utf-8").strip()

    if dest.exists():
        actual = _sha256(dest)
        if expected is None:
            lock.write_text(actual + "\n", "utf-8")
            log.info("recorded digest %s for %s", actual, dest)
            return dest
        if actual == expected:
            return dest
        log.warning("%s exists with digest %s, expected %s; refetching", dest, actual, expected)

    dest.parent.mkdir(parents=True, exist_ok=True)
    tmp = dest.with_name(dest.name + ".part")
    try:
        with urllib.request.urlopen(url or entry["url"], timeout=timeout) as resp:
            tmp.write_bytes(resp.read())
    except (urllib.error.URLError, OSError, TimeoutError) as exc:
        tmp.unlink(missing_ok=True)
        raise FetchError(f"download of {name!r} failed ({exc}); retry may help") from exc
    actual = _sha256(tmp)
    if expected is not None and actual != expected:
        tmp.unlink(missing_ok=True)
        raise ChecksumMismatchError(
            f"{name!r}: expected sha256 {expected}, got {actual} "
            "(file corrupt or moved upstream)"
        )
    tmp.replace(dest)
    if expected is None:
        lock.write_text(actual + "\n", "utf-8")
        log.info("recorded digest %s for %s", actual, dest)
    return dest


_MISSING_TOKENS = {"", "?"}


def load(name: str, path: Union[str, Path]) -> Dataset:
    """Parse a fetched file into a Dataset using the manifest schema.

    Rows with missing values are dropped (and logged); structurally
    malformed rows raise with their line number.  Raw labels are mapped
    to 0-based class ids in sorted order.
    """
    entry = _manifest_entry(name)
    delimiter = entry["delimiter"]
    label_col = entry["label_column"]
    drop = set(entry["drop_columns"])
    rows: list[list[float]] = []
    raw_labels: list[float] = []
    n_cols: Optional[int] = None
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            tokens = line.split(delimiter) if delimiter else line.split()
            if n_cols is None:
                n_cols = len(tokens)
            if len(tokens) != n_cols:
                raise DatasetParseError(
                    f"{path}, line {lineno}: expected {n_cols} fields, got {len(tokens)}"
                )
            if any(t.strip() in _MISSING_TOKENS for t in tokens):
                dropped += 1
                continue
            try:
                values = [float(t) for t in tokens]
            except ValueError as exc:
                raise DatasetParseError(f"{path}, line {lineno}: {exc}") from exc
            label_idx = label_col % n_cols
            raw_labels.append(values[label_idx])
            rows.append(
                [v for i, v in enumerate(values) if i != label_idx and i not in drop]
            )
    if not rows:
        raise DatasetParseError(f"{path}: no usable rows")
    if dropped:
        log.info("%s: dropped %d rows with missing values", path, dropped)
    classes = sorted(set(raw_labels))
    if len(classes) != entry["n_classes"]:
        raise ValueError(
            f"{name!r}: found {len(classes)} classes, manifest says {entry['n_classes']}"
        )
    to_id = {c: i for i, c in enumerate(classes)}
    labels = np.array([to_id[c] for c in raw_labels], dtype=int)
    names = [str(int(c)) if float(c).is_integer() else str(c) for c in classes]
    return Dataset(name, np.array(rows, dtype=float), labels, names)


# ---------------------------------------------------------------- preprocessing


def normalize_minmax(ds: Dataset) -> Dataset:
    """Scale each feature column to [0, 1] over the whole dataset.

    Constant columns carry no information and break the scaling, so they
    are dropped with a warning.
    """
    lo = ds.features.min(axis=0)
    hi = ds.features.max(axis=0)
    keep = hi > lo
    if not keep.any():
        raise ValueError(f"{ds.name!r}: all feature columns are constant")
    if not keep.all():
        warnings.warn(
            f"{ds.name!r}: dropping {int((~keep).sum())} constant feature column(s)",
            stacklevel=2,
        )
    scaled = (ds.features[:, keep] - lo[keep]) / (hi[keep] - lo[keep])
    return Dataset(ds.name, scaled, ds.labels.copy(), list(ds.class_names))


def _jacobi_eigh(matrix: np.ndarray, max_sweeps: int = 50) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi sweeps.

    Chosen over a LAPACK call for bit-level run-to-run determinism
    independent of the BLAS build.  Returns (eigenvalues, column
    eigenvectors), unsorted.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.diag(a).copy(), v
    scale = max(float(np.abs(a).max()), 1e-300)
    for _ in range(max_sweeps):
        off = float(np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2)))
        if off <= 1e-14 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                tau = (a[q, q] - a[p, p]) / (2.0 * apq)
                if tau >= 0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = 1.0 / (tau - math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    return np.diag(a).copy(), v


def pca_fit(features: np.ndarray, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Principal components of ``features``: (column mean, components, eigenvalues).

    Components are returned as rows, ordered by descending eigenvalue,
    each with a deterministic sign: the entry of largest magnitude is
    made positive (first such entry on ties).
    """
    features = np.asarray(features, dtype=float)
    n, f = features.shape
    if not 1 <= n_out <= f:
        raise ValueError(f"n_out must be in 1..{f}, got {n_out}")
    if n < 2:
        raise ValueError("need at least 2 rows for a covariance estimate")
    mean = features.mean(axis=0)
    centered = features - mean
    cov = centered.T @ centered / (n - 1)
    eigvals, eigvecs = _jacobi_eigh(cov)
    order = np.argsort(-eigvals, kind="stable")[:n_out]
    components = eigvecs[:, order].T.copy()
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return mean, components, eigvals[order]


def reduce_features(ds: Dataset, n_out: int, method: str = "pca") -> Dataset:
    """Shrink the feature matrix to ``n_out`` columns.

    ``pca`` projects onto the top principal components and re-normalizes
    the scores to [0, 1]; ``truncate`` keeps the first columns unchanged
    (ablation mode).
    """
    if not 1 <= n_out <= ds.n_features:
        raise ValueError(f"n_out must be in 1..{ds.n_features}, got {n_out}")
    if method == "truncate":
        return Dataset(
            ds.name, ds.features[:, :n_out].copy(), ds.labels.copy(), list(ds.class_names)
        )
    if method != "pca":
        raise ValueError(f"unknown reduction method {method!r}")
    mean, components, _ = pca_fit(ds.features, n_out)
    scores = (ds.features - mean) @ components.T
    projected = Dataset(ds.name, scores, ds.labels.copy(), list(ds.class_names))
    return normalize_minmax(projected)


def subsample_per_class(ds: Dataset, cap: int, seed: int) -> Dataset:
    """Keep at most ``cap`` rows per class, drawn uniformly with a seeded generator."""
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    rng = np.random.default_rng(seed)
    kept: list[np.ndarray] = []
    for cid in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == cid)
        if len(idx) > cap:
            idx = rng.choice(idx, size=cap, replace=False)
        kept.append(idx)
    sel = np.sort(np.concatenate(kept))
    return Dataset(ds.name, ds.features[sel].copy(), ds.labels[sel].copy(), list(ds.class_names))


def stratified_split(
    ds: Dataset, train_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Split per class: floor(train_fraction * count) rows to train, rest to test.

    Both sides keep at least one row of every class, so every class needs
    two rows minimum.  Row order within each side follows the original
    dataset order.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    test_idx: list[np.ndarray] = []
    for cid in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == cid)
        if len(idx) < 2:
            raise ValueError(
                f"class {ds.class_names[cid]!r} has {len(idx)} row(s); need >= 2 to split"
            )
        perm = rng.permutation(idx)
        k = int(math.floor(train_fraction * len(idx)))
        k = min(max(k, 1), len(idx) - 1)
        train_idx.append(perm[:k])
        test_idx.append(perm[k:])
    tr = np.sort(np.concatenate(train_idx))
    te = np.sort(np.concatenate(test_idx))
    make = lambda sel: Dataset(
        ds.name, ds.features[sel].copy(), ds.labels[sel].copy(), list(ds.class_names)
    )
    return make(tr), make(te)


def split_balance(train: Dataset, test: Dataset) -> float:
    """Largest absolute gap between per-class proportions of the two sides."""
    worst = 0.0
    for cid in range(len(train.class_names)):
        p_tr = float(np.mean(train.labels == cid))
        p_te = float(np.mean(test.labels == cid))
        worst = max(worst, abs(p_tr - p_te))
    return worst


def select_split(
    ds: Dataset,
    n_candidates: int = 25,
    train_fraction: float = 0.75,
    base_seed: int = 0,
) -> int:
    """Pick the split seed with the most class-balanced train/test sides.

    Scores seeds base_seed .. base_seed + n_candidates - 1 and returns
    the best; ties go to the smallest seed.  A deterministic stand-in
    for curating a split by hand.
    """
    if n_candidates < 1:
        raise ValueError(f"n_candidates must be >= 1, got {n_candidates}")
    best_seed, best_score = None, math.inf
    for seed in range(base_seed, base_seed + n_candidates):
        train, test = stratified_split(ds, train_fraction, seed)
        score = split_balance(train, test)
        if score < best_score:
            best_seed, best_score = seed, score
    return best_seed
