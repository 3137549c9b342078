"""Active/inactive subspace constructions.

A subspace is stored by its orthonormal column bases: ``active_basis``
(``m x n``) and ``inactive_basis`` (``m x (m - n)``), so that
``x = active_basis @ y + inactive_basis @ z`` with ``y = active_basis.T @ x``
and ``z = inactive_basis.T @ x``.
"""

import warnings
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .errors import LinAlgError, SubspaceError
from .linalg import (
    check_orthonormal_columns,
    complete_orthonormal_basis,
    least_squares_fit,
    symmetric_eigendecompose,
    weighted_mean_covariance,
)


class SubspaceMethod(str, Enum):
    GRADIENT_COVARIANCE = "gradient_covariance"
    POSTERIOR_COVARIANCE = "posterior_covariance"
    LINEAR_REGRESSION = "linear_regression"


@dataclass(frozen=True)
class SpectralGap:
    cut_index: int
    gap_ratio: float


@dataclass(frozen=True)
class ActiveSubspace:
    """Orthonormal split of R^m into active and inactive directions.

    ``eigenvalues`` is empty for the regression method.  ``mean`` is the
    estimated posterior mean when the construction produces one, and
    ``weight_ess`` the effective number of importance weights behind it.
    """

    active_basis: np.ndarray
    inactive_basis: np.ndarray
    method: SubspaceMethod
    eigenvalues: np.ndarray = np.empty(0)
    gap: Optional[SpectralGap] = None
    mean: Optional[np.ndarray] = None
    weight_ess: Optional[float] = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.active_basis, dtype=float))
        i = np.atleast_2d(np.asarray(self.inactive_basis, dtype=float))
        if a.shape[0] != i.shape[0]:
            raise SubspaceError("active and inactive bases live in different dimensions")
        m, n = a.shape
        if not 1 <= n < m:
            raise SubspaceError(f"active dimension must be in [1, {m - 1}], got {n}")
        if i.shape[1] != m - n:
            raise SubspaceError(f"inactive basis needs {m - n} columns, got {i.shape[1]}")
        try:
            check_orthonormal_columns(np.hstack([a, i]))
        except LinAlgError as exc:
            raise SubspaceError(f"[active | inactive] is not an orthonormal basis: {exc}") from None
        method = SubspaceMethod(self.method)
        if method is SubspaceMethod.LINEAR_REGRESSION and n != 1:
            raise SubspaceError("the regression construction has a one-dimensional active subspace")
        object.__setattr__(self, "active_basis", a)
        object.__setattr__(self, "inactive_basis", i)
        object.__setattr__(self, "method", method)
        object.__setattr__(self, "eigenvalues", np.asarray(self.eigenvalues, dtype=float))
        if self.mean is not None:
            object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))

    @property
    def ambient_dim(self):
        return self.active_basis.shape[0]

    @property
    def active_dim(self):
        return self.active_basis.shape[1]

    @property
    def inactive_dim(self):
        return self.inactive_basis.shape[1]

    def active_coordinates(self, x):
        return np.asarray(x, dtype=float) @ self.active_basis

    def inactive_coordinates(self, x):
        return np.asarray(x, dtype=float) @ self.inactive_basis

    def to_full(self, y, z):
        """``B_a y + B_i z``; ``z`` may be a batch ``(M, m - n)``."""
        return np.asarray(y) @ self.active_basis.T + np.asarray(z) @ self.inactive_basis.T

    def projector(self):
        return self.active_basis @ self.active_basis.T

    # text artifact ---------------------------------------------------------

    def dumps(self):
        fmt = lambda row: " ".join(repr(float(v)) for v in row)
        lines = [
            "# active subspace",
            f"method = {self.method.value}",
            f"ambient_dim = {self.ambient_dim}",
            f"active_dim = {self.active_dim}",
            f"eigenvalues = {fmt(self.eigenvalues)}",
        ]
        if self.gap is not None:
            lines.append(f"gap = {self.gap.cut_index} {self.gap.gap_ratio!r}")
        if self.mean is not None:
            lines.append(f"mean = {fmt(self.mean)}")
        if self.weight_ess is not None:
            lines.append(f"weight_ess = {float(self.weight_ess)!r}")
        lines.append("[active_basis]")
        lines += [fmt(row) for row in self.active_basis]
        lines.append("[inactive_basis]")
        lines += [fmt(row) for row in self.inactive_basis]
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text):
        header = {}
        blocks = {}
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1]
                blocks[current] = []
            elif current is not None:
                blocks[current].append([float(v) for v in line.split()])
            else:
                key, _, value = line.partition("=")
                header[key.strip()] = value.strip()
        try:
            m = int(header["ambient_dim"])
            n = int(header["active_dim"])
            active = np.array(blocks["active_basis"]).reshape(m, n)
            inactive = np.array(blocks["inactive_basis"]).reshape(m, m - n)
            eig = np.array([float(v) for v in header.get("eigenvalues", "").split()])
            gap = None
            if "gap" in header:
                cut, ratio = header["gap"].split()
                gap = SpectralGap(int(cut), float(ratio))
            mean = None
            if "mean" in header:
                mean = np.array([float(v) for v in header["mean"].split()])
            ess = float(header["weight_ess"]) if "weight_ess" in header else None
            return cls(active, inactive, SubspaceMethod(header["method"]), eig, gap, mean, ess)
        except (KeyError, ValueError) as exc:
            raise SubspaceError(f"malformed subspace file: {exc}") from None

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


def detect_spectral_gap(eigenvalues, max_active_dim=None):
    """Locate the largest ratio between consecutive eigenvalues.

    The cut ``k`` maximizes ``lam[k-1] / max(lam[k], eps)`` with
    ``eps = 1e-12 * lam[0]`` (numerators are floored the same way);
    ties go to the smaller ``k``.
    """
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.ndim != 1 or lam.size < 2:
        raise SubspaceError("need at least 2 eigenvalues to locate a spectral gap")
    if np.any(lam < 0) or np.any(np.diff(lam) > 0):
        raise SubspaceError("eigenvalues must be nonnegative and sorted descending")
    eps = 1e-12 * lam[0]
    if eps == 0:
        return SpectralGap(1, 1.0)
    floored = np.maximum(lam, eps)
    ratios = floored[:-1] / floored[1:]
    if max_active_dim is not None:
        ratios = ratios[: max(1, int(max_active_dim))]
    k = int(np.argmax(ratios))
    return SpectralGap(k + 1, float(ratios[k]))


def _split_eigen(cov, method, active_dim, max_active_dim, mean=None, weight_ess=None):
    eig = symmetric_eigendecompose(cov)
    lam = np.maximum(eig.eigenvalues, 0.0)
    m = lam.size
    gap = detect_spectral_gap(lam, max_active_dim)
    n = gap.cut_index
    if active_dim is not None:
        n = int(active_dim)
        if not 1 <= n < m:
            raise SubspaceError(f"active_dim must be in [1, {m - 1}], got {n}")
    v = eig.eigenvectors
    return ActiveSubspace(v[:, :n], v[:, n:], method, lam, gap, mean, weight_ess)


def construct_gradient_covariance(loglik_gradient, prior_sampler, n_samples, rng,
                                  active_dim=None, max_active_dim=None):
    """Subspace from the prior expectation of the outer product of log-likelihood gradients.

    ``C = (1/N) sum_i g(X_i) g(X_i)^T`` with ``X_i`` drawn by
    ``prior_sampler(rng, N)`` and ``g = loglik_gradient`` (batched,
    ``(N, m) -> (N, m)``).  The active dimension comes from
    :func:`detect_spectral_gap` unless ``active_dim`` is given.
    """
    points = np.atleast_2d(np.asarray(prior_sampler(rng, n_samples), dtype=float))
    m = points.shape[1]
    if n_samples < m:
        warnings.warn(f"only {n_samples} prior draws for a {m}-dimensional gradient covariance",
                      stacklevel=2)
    grads = np.atleast_2d(np.asarray(loglik_gradient(points), dtype=float))
    bad = ~np.all(np.isfinite(grads), axis=1)
    if bad.any():
        i = int(np.argmax(bad))
        raise SubspaceError(f"non-finite log-likelihood gradient at draw {i}", point=points[i])
    cov = grads.T @ grads / grads.shape[0]
    return _split_eigen(cov, SubspaceMethod.GRADIENT_COVARIANCE, active_dim, max_active_dim)


def importance_log_weights(target, prior, points):
    """``log rho(X_i) - log rho_p(X_i)`` for prior draws ``X_i``."""
    log_p = prior.log_density(points)
    if not np.all(np.isfinite(log_p)):
        raise SubspaceError("prior density is not strictly positive at every draw")
    return target.log_density(points) - log_p


def construct_posterior_covariance(target, prior, n_samples, rng, active_dim=None,
                                   max_active_dim=None):
    """Subspace from the importance-sampled posterior covariance.

    Draws ``X_i`` from ``prior`` (a model with a sampler and a log-density),
    weights them by ``rho(X_i) / rho_p(X_i)`` and eigendecomposes the
    self-normalized weighted covariance.
    """
    if n_samples < 2:
        raise SubspaceError("need at least 2 prior draws")
    points = prior.sample(rng, n_samples)
    log_w = importance_log_weights(target, prior, points)
    top = np.max(log_w)
    if not np.isfinite(top):
        raise SubspaceError(
            "all importance weights are zero: the prior misses the posterior mass; "
            "use a broader prior sampler"
        )
    w = np.exp(log_w - top)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    if ess < 2.0:
        warnings.warn(
            f"importance weights are degenerate (effective size {ess:.3g} of {n_samples}); "
            "the covariance estimate is unreliable",
            stacklevel=2,
        )
    mean, cov = weighted_mean_covariance(points, w)
    return _split_eigen(cov, SubspaceMethod.POSTERIOR_COVARIANCE, active_dim, max_active_dim,
                        mean, ess)


def construct_linear_regression(scalar_field, points):
    """One-dimensional subspace from a linear fit ``field(x) ~ a . x + b``.

    The active direction is ``a / |a|``; the inactive basis completes it by
    Gram-Schmidt.  ``scalar_field`` is batched, ``(k, m) -> (k,)``; pass the
    density itself or ``|f| * density`` for an integrand ``f``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(scalar_field(points), dtype=float)
    if not np.all(np.isfinite(values)):
        raise SubspaceError("scalar field is not finite at every point")
    try:
        coef, _ = least_squares_fit(points, values)
    except LinAlgError as exc:
        raise SubspaceError(str(exc)) from None
    norm = np.linalg.norm(coef)
    if norm <= 1e-14 * max(1.0, np.abs(values).max()):
        raise SubspaceError("fitted coefficients vanish: the field is constant on these points")
    direction = coef / norm
    if direction[np.flatnonzero(np.abs(direction) > 1e-12)[0]] < 0:
        direction = -direction
    active = direction[:, None]
    return ActiveSubspace(active, complete_orthonormal_basis(active),
                          SubspaceMethod.LINEAR_REGRESSION)
