"""Dense vector/matrix primitives for the covariance-distance pipeline.

Vectors are 1-D and matrices 2-D ``float64`` numpy arrays.  The
eigendecomposition is a cyclic Jacobi sweep rather than a LAPACK call: it is
simple, deterministic, and more than adequate for the representation
dimensions in scope (d <= ~512).  Symmetric-input operations verify symmetry
within 1e-10 relative tolerance before touching the data.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyInput, MissingClassMean, NoConvergence, NotSymmetric, ZeroVector

SYMMETRY_RTOL = 1e-10
DEFAULT_PINV_RTOL = 1e-10
JACOBI_MAX_SWEEPS = 100


def as_vector(values: Iterable[float]) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatch(f"expected a 1-D vector, got shape {v.shape}")
    return v


def as_matrix(values) -> np.ndarray:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionMismatch(f"expected a 2-D matrix, got shape {m.shape}")
    return m


def _check_finite(a: np.ndarray, what: str) -> np.ndarray:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{what} contains NaN or Inf")
    return a


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = as_matrix(m)
    if m.shape[0] != m.shape[1]:
        raise NotSymmetric(f"matrix is not square: shape {m.shape}")
    scale = max(float(np.max(np.abs(m))), 1.0)
    if float(np.max(np.abs(m - m.T))) > SYMMETRY_RTOL * scale:
        raise NotSymmetric("matrix is not symmetric within 1e-10 relative tolerance")
    return m


def mean_vector(rows: Sequence[np.ndarray]) -> np.ndarray:
    """Componentwise arithmetic mean of equally sized vectors."""
    if len(rows) == 0:
        raise EmptyInput("mean_vector needs at least one row")
    first = as_vector(rows[0])
    total = np.zeros_like(first)
    for row in rows:
        row = as_vector(row)
        if row.shape != first.shape:
            raise DimensionMismatch(f"row of dimension {row.shape[0]} in a {first.shape[0]}-dim mean")
        total += row
    return _check_finite(total / len(rows), "mean")


def shared_covariance(rows: Sequence[np.ndarray], labels: Sequence[int], means: Sequence[np.ndarray]) -> np.ndarray:
    """Population covariance of rows around their per-class means.

    Computes (1/M) sum_i (x_i - mu_{y_i})(x_i - mu_{y_i})^T, shared across
    classes.  ``means`` is indexed by class id.
    """
    if len(rows) == 0:
        raise EmptyInput("shared_covariance needs at least one row")
    if len(rows) != len(labels):
        raise DimensionMismatch(f"{len(rows)} rows but {len(labels)} labels")
    dim = as_vector(rows[0]).shape[0]
    centered = np.empty((len(rows), dim))
    for i, (row, label) in enumerate(zip(rows, labels)):
        row = as_vector(row)
        if row.shape[0] != dim:
            raise DimensionMismatch(f"row {i} has dimension {row.shape[0]}, expected {dim}")
        if label < 0 or label >= len(means):
            raise MissingClassMean(f"no mean supplied for class {label}")
        mean = as_vector(means[label])
        if mean.shape[0] != dim:
            raise DimensionMismatch(f"class {label} mean has dimension {mean.shape[0]}, expected {dim}")
        centered[i] = row - mean
    cov = centered.T @ centered / len(rows)
    # Symmetrize away accumulation round-off.
    return _check_finite((cov + cov.T) / 2.0, "covariance")


def sym_eig(m: np.ndarray, max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns eigenvalues in descending order and the matching eigenvectors as
    matrix columns.  Raises NoConvergence if the off-diagonal mass has not
    vanished after ``max_sweeps`` full sweeps.
    """
    a = _check_symmetric(m).copy()
    _check_finite(a, "matrix")
    n = a.shape[0]
    vecs = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), vecs

    norm = float(np.linalg.norm(a))
    threshold = 1e-14 * max(norm, 1e-300)

    def off_diag_norm() -> float:
        return float(np.sqrt(np.sum(np.square(a - np.diag(a.diagonal())))))

    for _ in range(max_sweeps):
        if off_diag_norm() <= threshold:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-20 * max(norm, 1e-300):
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = _sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                _rotate(a, vecs, p, q, c, s)
    if off_diag_norm() > threshold:
        raise NoConvergence(f"Jacobi sweep cap of {max_sweeps} exceeded (off-diagonal norm {off_diag_norm():.3e})")

    values = a.diagonal().copy()
    order = np.argsort(values)[::-1]
    return values[order], vecs[:, order]


def _sign(x: float) -> float:
    return -1.0 if x < 0 else 1.0


def _rotate(a: np.ndarray, vecs: np.ndarray, p: int, q: int, c: float, s: float) -> None:
    # Orthogonal similarity with J[p,p]=J[q,q]=c, J[p,q]=s, J[q,p]=-s.
    col_p, col_q = a[:, p].copy(), a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q
    row_p, row_q = a[p, :].copy(), a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = 0.0
    a[q, p] = 0.0
    vec_p, vec_q = vecs[:, p].copy(), vecs[:, q].copy()
    vecs[:, p] = c * vec_p - s * vec_q
    vecs[:, q] = s * vec_p + c * vec_q


def pseudo_inverse(m: np.ndarray, rel_tol: float = DEFAULT_PINV_RTOL) -> np.ndarray:
    """Eigen-based Moore-Penrose inverse of a symmetric PSD matrix.

    Eigenvalues below ``rel_tol`` times the largest eigenvalue are treated as
    exact zeros, so rank-deficient covariances invert cleanly.
    """
    values, vecs = sym_eig(m)
    largest = float(values[0]) if values.size else 0.0
    if largest <= 0.0:
        return np.zeros_like(as_matrix(m))
    cutoff = rel_tol * largest
    keep = values > cutoff
    inverted = np.zeros_like(values)
    inverted[keep] = 1.0 / values[keep]
    pinv = (vecs * inverted) @ vecs.T
    return _check_finite((pinv + pinv.T) / 2.0, "pseudo-inverse")


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale ``v`` to unit Euclidean norm."""
    v = as_vector(v)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise ZeroVector("cannot normalize the zero vector")
    return _check_finite(v / norm, "normalized vector")


def pca_project_2d(rows: Sequence[np.ndarray]) -> np.ndarray:
    """Project rows onto the top-2 principal components of the centered data.

    Returns an (n, 2) array.  Inputs of dimension 1 get a zero second
    coordinate.
    """
    if len(rows) < 3:
        raise EmptyInput("pca_project_2d needs at least 3 rows")
    data = np.stack([as_vector(r) for r in rows])
    centered = data - data.mean(axis=0)
    dim = centered.shape[1]
    if dim == 1:
        return np.column_stack([centered[:, 0], np.zeros(len(rows))])
    cov = centered.T @ centered / len(rows)
    _, vecs = sym_eig((cov + cov.T) / 2.0)
    basis = vecs[:, :2]
    # Fix signs so the projection is unique: largest-magnitude component positive.
    for k in range(2):
        pivot = int(np.argmax(np.abs(basis[:, k])))
        if basis[pivot, k] < 0:
            basis[:, k] = -basis[:, k]
    return _check_finite(centered @ basis, "projection")
