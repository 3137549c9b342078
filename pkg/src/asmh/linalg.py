"""Small dense linear algebra used by the subspace constructions.

Everything here works on plain ``numpy`` arrays.  Matrices are assumed to be
small (dimension below ~100), so clarity is preferred over speed.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, LinAlgError

MAX_SWEEPS = 100
SYMMETRY_RTOL = 1e-10
ORTHONORMAL_TOL = 1e-10
CANDIDATE_NORM_TOL = 1e-8


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs of a symmetric matrix.

    ``eigenvalues`` are sorted in non-increasing order and column ``k`` of
    ``eigenvectors`` belongs to ``eigenvalues[k]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int = 0


def _as_matrix(a, name="matrix"):
    a = np.array(a, dtype=float)
    if a.ndim != 2:
        raise LinAlgError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise LinAlgError(f"{name} has non-finite entries")
    return a


def _fix_signs(v):
    # first clearly nonzero component of every column made positive
    for k in range(v.shape[1]):
        col = v[:, k]
        idx = np.flatnonzero(np.abs(col) > 1e-12)
        if idx.size and col[idx[0]] < 0:
            v[:, k] = -col
    return v


def symmetric_eigendecompose(a, max_sweeps=MAX_SWEEPS):
    """Eigendecomposition of a real symmetric matrix by cyclic Jacobi sweeps.

    Parameters
    ----------
    a : array_like, shape (m, m)
        Symmetric matrix (relative asymmetry up to ``1e-10`` is tolerated and
        removed by symmetrizing).
    max_sweeps : int
        Iteration cap; exceeding it raises :class:`ConvergenceError`.

    Returns
    -------
    EigenDecomposition
        Eigenvalues sorted descending, orthonormal eigenvectors as columns with
        the first nonzero component of each made positive.
    """
    a = _as_matrix(a)
    m, n = a.shape
    if m != n:
        raise LinAlgError(f"matrix must be square, got shape {a.shape}")
    scale = np.max(np.abs(a)) if a.size else 0.0
    if np.max(np.abs(a - a.T), initial=0.0) > SYMMETRY_RTOL * scale:
        raise LinAlgError("matrix is not symmetric")

    a = 0.5 * (a + a.T)
    v = np.eye(m)
    fro = np.linalg.norm(a)
    threshold = 1e-12 * fro

    sweep = 0
    while True:
        off = np.sqrt(2.0 * np.sum(np.triu(a, 1) ** 2))
        if off <= threshold:
            break
        if sweep >= max_sweeps:
            raise ConvergenceError(
                f"Jacobi iteration did not converge within {max_sweeps} sweeps "
                f"(off-diagonal norm {off:.3e})",
                max_sweeps,
            )
        sweep += 1
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e10:
                    t = 0.5 / theta
                else:
                    t = np.copysign(1.0, theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], _fix_signs(v[:, order]), sweep)


def check_orthonormal_columns(q, tol=ORTHONORMAL_TOL):
    q = _as_matrix(q, "basis")
    gram = q.T @ q
    err = np.max(np.abs(gram - np.eye(q.shape[1])), initial=0.0)
    if err > tol:
        raise LinAlgError(f"columns are not orthonormal (max Gram error {err:.2e})")
    return q


def complete_orthonormal_basis(partial):
    """Return ``m - k`` orthonormal columns completing ``partial`` to a basis.

    Candidates are the standard basis vectors taken in index order; each is
    orthogonalized (two Gram-Schmidt passes) against everything accepted so
    far and skipped when what remains has norm below ``1e-8``.
    """
    partial = np.array(partial, dtype=float)
    if partial.ndim == 1:
        partial = partial[:, None]
    partial = check_orthonormal_columns(partial)
    m, k = partial.shape
    if k >= m:
        raise LinAlgError(f"nothing to complete: {k} columns in dimension {m}")

    basis = [partial[:, j] for j in range(k)]
    out = []
    for i in range(m):
        if len(out) == m - k:
            break
        v = np.zeros(m)
        v[i] = 1.0
        for _ in range(2):
            for b in basis:
                v -= (b @ v) * b
        norm = np.linalg.norm(v)
        if norm < CANDIDATE_NORM_TOL:
            continue
        v /= norm
        basis.append(v)
        out.append(v)
    return np.column_stack(out)


def weighted_mean_covariance(points, weights):
    """Self-normalized weighted mean and covariance.

    ``mean = sum(w_i x_i) / sum(w)`` and
    ``cov = sum(w_i (x_i - mean)(x_i - mean)^T) / sum(w)``.
    """
    x = _as_matrix(points, "points")
    w = np.asarray(weights, dtype=float)
    if x.shape[0] < 2:
        raise LinAlgError("need at least 2 points")
    if w.shape != (x.shape[0],):
        raise LinAlgError(f"expected {x.shape[0]} weights, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise LinAlgError("weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise LinAlgError("weights sum to zero: importance sample is degenerate")

    p = w / total
    mean = p @ x
    centered = x - mean
    cov = (centered * p[:, None]).T @ centered
    return mean, 0.5 * (cov + cov.T)


def _cholesky_solve(a, b, rel_pivot_tol=1e-12):
    n = a.shape[0]
    lower = np.zeros_like(a)
    max_diag = np.max(np.abs(np.diag(a)))
    for j in range(n):
        pivot = a[j, j] - lower[j, :j] @ lower[j, :j]
        if pivot <= rel_pivot_tol * max_diag:
            raise LinAlgError(
                "design matrix is rank deficient (tiny pivot); "
                "use more points or points spread over more directions"
            )
        lower[j, j] = np.sqrt(pivot)
        for i in range(j + 1, n):
            lower[i, j] = (a[i, j] - lower[i, :j] @ lower[j, :j]) / lower[j, j]
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - lower[i, :i] @ y[:i]) / lower[i, i]
    x = np.zeros(n)
    for i in reversed(range(n)):
        x[i] = (y[i] - lower[i + 1:, i] @ x[i + 1:]) / lower[i, i]
    return x


def least_squares_fit(inputs, outputs):
    """Ordinary least squares fit of ``outputs ~ coefficients . x + intercept``.

    Inputs are standardized before solving the normal equations and the
    coefficients are mapped back afterwards.

    Returns
    -------
    coefficients : ndarray, shape (m,)
    intercept : float
    """
    x = _as_matrix(inputs, "inputs")
    y = np.asarray(outputs, dtype=float)
    n_points, m = x.shape
    if y.shape != (n_points,):
        raise LinAlgError(f"expected {n_points} outputs, got shape {y.shape}")
    if not np.all(np.isfinite(y)):
        raise LinAlgError("outputs have non-finite entries")
    if n_points < m + 1:
        raise LinAlgError(f"need at least {m + 1} points for {m} inputs, got {n_points}")

    center = x.mean(axis=0)
    scale = x.std(axis=0)
    if np.any(scale == 0):
        raise LinAlgError(
            "design matrix is rank deficient (an input is constant); "
            "use more points or points spread over more directions"
        )
    design = np.column_stack([(x - center) / scale, np.ones(n_points)])
    beta = _cholesky_solve(design.T @ design, design.T @ y)
    coefficients = beta[:m] / scale
    intercept = beta[m] - coefficients @ center
    return coefficients, float(intercept)
