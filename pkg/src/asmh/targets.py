"""Target densities: Gaussians, mixtures and the Lorenz-96 posterior.

All densities are handled in log space and are unnormalized unless stated
otherwise.  A :class:`DensityModel` wraps a *batched* log-density callable,
``(k, m) -> (k,)``, and counts every point it evaluates.
"""

import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Optional

import numpy as np

from .errors import TargetError
from .ode import Lorenz96Params, _step_plan, integrate_batch

THREADS_ENV = "ASMH_THREADS"

LOG_2PI = np.log(2.0 * np.pi)


def n_threads():
    """Thread count for batched density evaluations (``ASMH_THREADS``, default 1)."""
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


@dataclass
class DensityModel:
    """An unnormalized log-density on R^m.

    Parameters
    ----------
    dim : int
        Ambient dimension ``m``.
    log_density_fn : callable
        Batched log-density, maps an ``(k, m)`` array to ``(k,)``.
    log_prior_fn, log_likelihood_fn : callable, optional
        Batched components with ``log_density = log_prior + log_likelihood``.
    loglik_gradient_fn : callable, optional
        Batched gradient of the log-likelihood, ``(k, m) -> (k, m)``.
    sampler : callable, optional
        ``sampler(rng, n) -> (n, m)`` exact draws (used for priors and tests).
    """

    dim: int
    log_density_fn: Callable
    log_prior_fn: Optional[Callable] = None
    log_likelihood_fn: Optional[Callable] = None
    loglik_gradient_fn: Optional[Callable] = None
    sampler: Optional[Callable] = None
    name: str = "density"
    evaluations: int = field(default=0, init=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, init=False, repr=False)

    def _points(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise TargetError(f"{self.name}: expected points of dimension {self.dim}, got {x.shape[1]}")
        return x, single

    def log_density(self, x):
        """Log-density at one point ``(m,)`` or a batch ``(k, m)``.

        NaN results are reported as ``-inf``.  Batches are split across
        ``ASMH_THREADS`` worker threads; results are reassembled in index
        order, so the output does not depend on the thread count.
        """
        x, single = self._points(x)
        k = x.shape[0]
        workers = min(n_threads(), k)
        if workers > 1:
            chunks = np.array_split(x, workers)
            with ThreadPoolExecutor(workers) as pool:
                out = np.concatenate(list(pool.map(self.log_density_fn, chunks)))
        else:
            out = np.asarray(self.log_density_fn(x), dtype=float)
        out = np.where(np.isnan(out), -np.inf, out)
        with self._lock:
            self.evaluations += k
        return float(out[0]) if single else out

    __call__ = log_density

    def log_prior(self, x):
        x, single = self._points(x)
        out = np.asarray(self.log_prior_fn(x), dtype=float)
        return float(out[0]) if single else out

    def log_likelihood(self, x):
        x, single = self._points(x)
        out = np.asarray(self.log_likelihood_fn(x), dtype=float)
        return float(out[0]) if single else out

    def loglik_gradient(self, x):
        if self.loglik_gradient_fn is None:
            raise TargetError(f"{self.name}: no log-likelihood gradient available")
        x, single = self._points(x)
        out = np.asarray(self.loglik_gradient_fn(x), dtype=float)
        return out[0] if single else out

    def sample(self, rng, n):
        if self.sampler is None:
            raise TargetError(f"{self.name}: no exact sampler available")
        return np.asarray(self.sampler(rng, n), dtype=float).reshape(n, self.dim)

    def reset_counter(self):
        with self._lock:
            self.evaluations = 0


@dataclass(frozen=True)
class GaussianSpec:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise TargetError(f"covariance shape {cov.shape} does not match mean of size {mean.size}")
        if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
            raise TargetError("covariance is not symmetric")
        try:
            chol = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            raise TargetError("covariance is not positive definite") from None
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)
        object.__setattr__(self, "_chol", chol)
        object.__setattr__(self, "_chol_inv_t", np.linalg.inv(chol).T)
        object.__setattr__(self, "_log_norm", -0.5 * mean.size * LOG_2PI - np.log(np.diag(chol)).sum())

    @property
    def dim(self):
        return self.mean.size

    def log_pdf(self, x):
        x = np.asarray(x, dtype=float)
        white = (np.atleast_2d(x) - self.mean) @ self._chol_inv_t
        out = self._log_norm - 0.5 * np.einsum("ij,ij->i", white, white)
        return float(out[0]) if x.ndim == 1 else out

    def sample(self, rng, n):
        return self.mean + rng.standard_normal((n, self.dim)) @ self._chol.T


def gaussian_log_density(spec, x):
    """Normalized ``log N(x; spec.mean, spec.covariance)`` (``x`` may be batched)."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spec.dim:
        raise TargetError(f"point of dimension {x.shape[-1]} for a {spec.dim}-dimensional Gaussian")
    return spec.log_pdf(x)


def _logsumexp(a, axis):
    top = np.max(a, axis=axis, keepdims=True)
    top = np.where(np.isfinite(top), top, 0.0)
    return np.squeeze(top, axis=axis) + np.log(np.sum(np.exp(a - top), axis=axis))


def mixture_log_density(components, x):
    """Log of ``sum_i w_i N(x; spec_i)`` with max-shifted exponentials.

    ``components`` is a sequence of ``(weight, GaussianSpec)`` pairs.
    """
    if len(components) == 0:
        raise TargetError("mixture has no components")
    weights = np.array([w for w, _ in components], dtype=float)
    if np.any(weights <= 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise TargetError("mixture weights must be positive and sum to 1")
    x = np.asarray(x, dtype=float)
    terms = np.stack(
        [np.log(w) + np.atleast_1d(gaussian_log_density(spec, x)) for w, spec in components]
    )
    out = _logsumexp(terms, axis=0)
    return float(out[0]) if x.ndim == 1 else out


class MixtureVariant(str, Enum):
    TWO_D = "2d"
    TEN_D = "10d"


MIXTURE_2D_MEAN = np.array([2.0, 2.0])
MIXTURE_2D_COV = np.array([[1.0, -0.9], [-0.9, 1.0]])


def mixture_components(variant):
    variant = MixtureVariant(variant)
    if variant is MixtureVariant.TWO_D:
        return [
            (0.5, GaussianSpec(MIXTURE_2D_MEAN, MIXTURE_2D_COV)),
            (0.5, GaussianSpec(-MIXTURE_2D_MEAN, MIXTURE_2D_COV)),
        ]
    mean = np.zeros(10)
    mean[0] = 2.0
    return [(0.5, GaussianSpec(mean, np.eye(10))), (0.5, GaussianSpec(-mean, np.eye(10)))]


def make_mixture_experiment_target(variant):
    """The two-component Gaussian mixture targets.

    ``"2d"``: modes at ``+-(2, 2)`` sharing the covariance
    ``[[1, -0.9], [-0.9, 1]]``.  ``"10d"``: modes at ``+-2 e1`` with identity
    covariances.  Both use equal weights.
    """
    components = mixture_components(variant)
    dim = components[0][1].dim

    def sampler(rng, n):
        which = rng.random(n) < components[0][0]
        a = components[0][1].sample(rng, n)
        b = components[1][1].sample(rng, n)
        return np.where(which[:, None], a, b)

    return DensityModel(
        dim=dim,
        log_density_fn=lambda x: mixture_log_density(components, x),
        sampler=sampler,
        name=f"mixture{MixtureVariant(variant).value}",
    )


def isotropic_gaussian(dim, variance, mean=None):
    """``DensityModel`` of ``N(mean, variance * I)`` with an exact sampler."""
    mean = np.zeros(dim) if mean is None else np.asarray(mean, dtype=float)
    spec = GaussianSpec(mean, variance * np.eye(dim))
    return DensityModel(dim=dim, log_density_fn=spec.log_pdf, sampler=spec.sample,
                        name=f"N(0,{variance:g}I)")


@dataclass(frozen=True)
class Lorenz96ExperimentConfig:
    """Parameter-inference setup; defaults reproduce the full-size experiment."""

    dim: int = 36
    forcing: float = 8.0
    t0: float = 0.0
    t1: float = 10.0
    step: float = 0.01
    noise_variance: float = 0.1
    prior_variance: float = 4.0
    obs_stride: int = 1

    @property
    def n_params(self):
        return self.dim + 1


def make_lorenz96_posterior(config, data):
    """Posterior over ``x = (initial state, F)`` given observations ``data``.

    Prior ``N(0, prior_variance * I)``; likelihood of every observed component
    ``N(d_t; s(x)_t, noise_variance)`` where ``s(x)`` is the RK4 forward solve
    on ``config``'s time grid.  Forward solves that diverge give ``-inf`` and
    increment ``model.diverged`` instead of raising.
    """
    K = config.dim
    m = config.n_params
    params = Lorenz96Params(K, config.forcing)
    values = np.asarray(data.values, dtype=float)
    idx = np.arange(0, len(data.times), config.obs_stride)
    n_times_expected = len(_step_plan(config.t0, config.t1, config.step)[0])
    if values.shape != (n_times_expected, K):
        raise TargetError(
            f"observations have shape {values.shape}, expected ({n_times_expected}, {K}) "
            "for the configured time grid"
        )
    observed = values[idx]
    n_obs = observed.size
    noise_var = config.noise_variance
    prior_var = config.prior_variance
    lik_norm = -0.5 * n_obs * (LOG_2PI + np.log(noise_var))
    prior_norm = -0.5 * m * (LOG_2PI + np.log(prior_var))
    counter = {"diverged": 0}
    lock = threading.Lock()

    def log_prior(x):
        return prior_norm - 0.5 * np.sum(x * x, axis=1) / prior_var

    def log_likelihood(x):
        _, states, diverged = integrate_batch(params, x[:, :K], x[:, K], config.t0, config.t1,
                                              config.step)
        resid = states[:, idx, :] - observed
        out = lik_norm - 0.5 * np.sum(resid * resid, axis=(1, 2)) / noise_var
        out[diverged | ~np.isfinite(out)] = -np.inf
        if diverged.any():
            with lock:
                counter["diverged"] += int(diverged.sum())
        return out

    def log_density(x):
        return log_prior(x) + log_likelihood(x)

    def sampler(rng, n):
        return rng.standard_normal((n, m)) * np.sqrt(prior_var)

    model = DensityModel(
        dim=m,
        log_density_fn=log_density,
        log_prior_fn=log_prior,
        log_likelihood_fn=log_likelihood,
        sampler=sampler,
        name=f"lorenz96(K={K})",
    )
    model.diverged_counter = counter
    return model


def lorenz96_prior(config):
    """The Gaussian prior of :func:`make_lorenz96_posterior` as a model."""
    return isotropic_gaussian(config.n_params, config.prior_variance)
