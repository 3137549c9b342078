"""Chain diagnostics: autocorrelation, effective sample size, KDE, mode occupancy.

Each diagnostic can be written to a small CSV for external plotting.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DiagnosticsError


@dataclass(frozen=True)
class AutocorrelationCurve:
    """Autocorrelation at lags ``0..L`` reduced over dimensions by maximum."""

    lags: np.ndarray
    values: np.ndarray
    per_dimension: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag", "value"])
            for lag, v in zip(self.lags, self.values):
                writer.writerow([int(lag), repr(float(v))])


def thin(chain, every):
    """Every ``every``-th row of ``chain``, starting with the first."""
    if every < 1:
        raise DiagnosticsError("thinning interval must be >= 1")
    return np.asarray(chain)[::every]


def _as_chain(chain):
    x = np.asarray(chain, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 2:
        raise DiagnosticsError(f"chain must have shape (N, m) with N >= 2, got {x.shape}")
    return x


def _acf_columns(x):
    """Biased (1/N) autocorrelation of every column at all lags, via FFT."""
    n = x.shape[0]
    centered = x - x.mean(axis=0)
    size = 1 << int(np.ceil(np.log2(2 * n - 1)))
    f = np.fft.rfft(centered, size, axis=0)
    acov = np.fft.irfft(f * np.conj(f), size, axis=0)[:n]
    return acov / acov[0]


def _varying_columns(x):
    var = x.var(axis=0)
    keep = var > 0
    if not keep.any():
        raise DiagnosticsError("chain is constant in every dimension")
    if not keep.all():
        warnings.warn(f"{int((~keep).sum())} constant dimension(s) excluded from diagnostics",
                      stacklevel=3)
    return keep


def autocorrelation(chain, max_lag, every=1):
    """Sample autocorrelation up to ``max_lag``, maximum over dimensions.

    Each dimension uses the full-chain mean and the lag-0 autocovariance for
    normalization (biased ``1/N`` estimator at every lag).  Constant
    dimensions are excluded with a warning.  ``every > 1`` thins the chain
    first.
    """
    x = _as_chain(thin(chain, every))
    if not 1 <= max_lag < x.shape[0]:
        raise DiagnosticsError(f"need 1 <= max_lag < N, got max_lag={max_lag}, N={x.shape[0]}")
    keep = _varying_columns(x)
    acf = _acf_columns(x[:, keep])[: max_lag + 1]
    acf[0] = 1.0
    acf = np.clip(acf, -1.0, 1.0)
    return AutocorrelationCurve(np.arange(max_lag + 1), acf.max(axis=1), acf)


def effective_sample_size(chain):
    """Effective sample size per dimension.

    ``N / (1 + 2 sum_k rho_k)`` where the sum stops at the first pair
    ``rho_k + rho_(k+1)`` (``k`` even, starting at lag 0) that is negative,
    Geyer's initial positive sequence.  Strongly anti-correlated chains can
    exceed ``N``; the value is reported unclamped (``inf`` if the
    denominator is not positive).  Constant dimensions give ``nan``.
    """
    x = _as_chain(chain)
    n, m = x.shape
    keep = _varying_columns(x)
    out = np.full(m, np.nan)
    acf = _acf_columns(x[:, keep])
    for col, d in enumerate(np.flatnonzero(keep)):
        rho = acf[:, col]
        n_pairs = n // 2
        pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
        neg = np.flatnonzero(pairs < 0)
        stop = neg[0] if neg.size else n_pairs
        tau = -1.0 + 2.0 * pairs[:stop].sum()
        out[d] = n / tau if tau > 0 else np.inf
    return out


def batch_mean_se(values, n_batches=50):
    """Standard error of the mean of a correlated series by batch means."""
    v = np.asarray(values, dtype=float)
    size = v.size // n_batches
    if size < 1:
        raise DiagnosticsError("series shorter than the number of batches")
    means = v[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return means.std(ddof=1) / np.sqrt(n_batches)


def scott_bandwidth(samples, weights=None):
    """Per-dimension Scott's rule ``n_eff^(-1/(d+4)) * sigma_dim``."""
    x = _points(samples)
    w = _weights(weights, x.shape[0])
    n_eff = w.sum() ** 2 / np.sum(w * w)
    p = w / w.sum()
    mean = p @ x
    sigma = np.sqrt(p @ (x - mean) ** 2)
    return n_eff ** (-1.0 / (x.shape[1] + 4)) * sigma


def _points(samples):
    x = np.asarray(samples, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _weights(weights, n):
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise DiagnosticsError("weights must be nonnegative, finite and one per sample")
    if w.sum() <= 0:
        raise DiagnosticsError("total sample weight is zero")
    return w


def gaussian_kde(samples, grid, bandwidth="scott", weights=None):
    """Weighted Gaussian kernel density estimate on a grid (dimension 1 or 2).

    Parameters
    ----------
    samples : array_like, shape (n,) or (n, d)
    grid : sequence of d 1-D arrays
        Grid coordinates per dimension; the result has shape
        ``(len(grid[0]), ..., len(grid[d-1]))`` (``ij`` indexing).
    bandwidth : "scott" or float or array of d floats
        Kernel standard deviation per dimension.
    weights : array_like, optional
        Nonnegative sample weights, normalized internally.
    """
    x = _points(samples)
    n, d = x.shape
    if d > 2:
        raise DiagnosticsError("KDE supports at most 2 dimensions")
    if len(grid) != d:
        raise DiagnosticsError(f"grid has {len(grid)} axes for {d}-dimensional samples")
    w = _weights(weights, n)
    p = w / w.sum()
    if isinstance(bandwidth, str):
        if bandwidth != "scott":
            raise DiagnosticsError(f"unknown bandwidth rule {bandwidth!r}")
        h = scott_bandwidth(x, w)
    else:
        h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (d,))
    if np.any(h <= 0):
        raise DiagnosticsError("bandwidth must be positive")

    # separable Gaussian kernels: one (n, len(axis)) factor per axis
    factors = []
    for axis in range(d):
        g = np.asarray(grid[axis], dtype=float)
        u = (g[None, :] - x[:, axis, None]) / h[axis]
        factors.append(np.exp(-0.5 * u * u) / (np.sqrt(2 * np.pi) * h[axis]))
    if d == 1:
        return p @ factors[0]
    return (factors[0] * p[:, None]).T @ factors[1]


def kde_to_csv(path, grid, density):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if len(grid) == 1:
            writer.writerow(["x", "density"])
            for gx, v in zip(grid[0], density):
                writer.writerow([repr(float(gx)), repr(float(v))])
        else:
            writer.writerow(["x", "y", "density"])
            for i, gx in enumerate(grid[0]):
                for j, gy in enumerate(grid[1]):
                    writer.writerow([repr(float(gx)), repr(float(gy)), repr(float(density[i, j]))])


def mode_occupancy(samples, mode_centers, weights=None):
    """Weight fraction of samples nearest (Euclidean) to each mode center."""
    x = _points(samples)
    centers = np.atleast_2d(np.asarray(mode_centers, dtype=float))
    if centers.shape[0] < 1:
        raise DiagnosticsError("need at least one mode center")
    w = _weights(weights, x.shape[0])
    dist = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    nearest = np.argmin(dist, axis=1)
    frac = np.bincount(nearest, weights=w, minlength=centers.shape[0]) / w.sum()
    return frac


def occupancy_to_csv(path, fractions):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["mode", "fraction"])
        for i, f in enumerate(fractions):
            writer.writerow([i + 1, repr(float(f))])
