"""Random-walk Metropolis-Hastings and active-subspace pseudo-marginal MH.

:func:`run_asmh` runs MH on the active coordinates ``y`` and integrates out the
inactive coordinates ``z`` by importance sampling.  With
``original_version=False`` the estimate for the current state is kept until
the next acceptance (grouped independence MH, asymptotically exact).  With
``original_version=True`` it is recomputed at every iteration
(Monte-Carlo-within-Metropolis, biased).

Randomness
----------
Every chain draws from labeled streams derived from one root seed: the
random-walk increments, the acceptance uniforms and the inactive draws each
have their own stream, and iteration ``i`` always consumes the ``i``-th block
of each.  Target evaluations never touch a random stream, so evaluating the
nested densities on several threads leaves the chain unchanged.
"""

import csv
import math
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .errors import SamplerError
from .seeding import seed_sequence

LOG_2PI = math.log(2.0 * math.pi)


class SamplerMode(str, Enum):
    VANILLA = "vanilla"
    ASMH_ORIGINAL = "asmh_original"
    EASMH = "easmh"


@dataclass(frozen=True)
class ProposalSpec:
    """Gaussian random-walk proposal with per-dimension (or scalar) scale."""

    scale: object = 1.0
    symmetric = True

    def __post_init__(self):
        scale = np.asarray(self.scale, dtype=float)
        if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
            raise SamplerError("proposal scales must be positive")
        object.__setattr__(self, "scale", scale)

    def step(self, current, noise):
        return current + self.scale * noise

    def log_density(self, to, frm):
        """``log q(to | frm)``."""
        d = (np.asarray(to) - frm) / self.scale
        k = d.size
        return -0.5 * (k * LOG_2PI + float(d @ d)) - _sum_log(self.scale, k)


def _sum_log(scale, k):
    return k * math.log(float(scale)) if scale.ndim == 0 else float(np.sum(np.log(scale)))


class InactiveKind(str, Enum):
    STANDARD_GAUSSIAN = "standard_gaussian"
    SCALED_GAUSSIAN = "scaled_gaussian"


@dataclass(frozen=True)
class InactiveProposal:
    """Importance distribution ``q_z`` on the inactive coordinates.

    ``standard_gaussian`` is ``N(0, I)``; ``scaled_gaussian`` is
    ``N(center, diag(scale^2))`` with scalar or per-coordinate ``scale`` and an
    optional ``center`` (default zero).
    """

    kind: InactiveKind = InactiveKind.STANDARD_GAUSSIAN
    scale: object = 1.0
    center: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = InactiveKind(self.kind)
        scale = np.asarray(1.0 if kind is InactiveKind.STANDARD_GAUSSIAN else self.scale, dtype=float)
        if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
            raise SamplerError("inactive proposal scale must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "scale", scale)
        if self.center is not None:
            if kind is InactiveKind.STANDARD_GAUSSIAN:
                raise SamplerError("a standard Gaussian has no center")
            object.__setattr__(self, "center", np.asarray(self.center, dtype=float))

    @classmethod
    def scaled(cls, scale, center=None):
        return cls(InactiveKind.SCALED_GAUSSIAN, scale, center)

    def from_noise(self, noise):
        z = noise * self.scale
        return z if self.center is None else z + self.center

    def log_density(self, z):
        """Batched ``log q_z``; ``z`` has shape ``(M, k)``."""
        z = np.atleast_2d(z)
        k = z.shape[1]
        d = z if self.center is None else z - self.center
        d = d / self.scale
        return -0.5 * (k * LOG_2PI + np.einsum("ij,ij->i", d, d)) - _sum_log(self.scale, k)

    def sample(self, rng, M, k):
        return self.from_noise(rng.standard_normal((M, k)))


@dataclass(frozen=True)
class MarginalEstimate:
    """``d = mean(w_j)`` stored as ``log_d`` with its draws and log-weights."""

    log_d: float
    z_draws: np.ndarray
    log_weights: np.ndarray


def log_mean_exp(log_w):
    top = np.max(log_w)
    if top == -np.inf:
        return -np.inf
    return float(top + np.log(np.sum(np.exp(log_w - top))) - np.log(log_w.size))


def estimate_marginal(target, subspace, y, qz, M, rng=None, noise=None):
    """Importance-sampling estimate of the marginal density at ``y``.

    ``d = (1/M) sum_j rho(B_a y + B_i z_j) / q_z(z_j)`` with ``z_j ~ q_z``.
    The standard normal ``noise`` (``(M, m - n)``) may be supplied instead of
    ``rng``.  If every weight is zero the estimate has ``log_d = -inf``.
    """
    if M < 1:
        raise SamplerError("M must be >= 1")
    k = subspace.inactive_dim
    if noise is None:
        noise = rng.standard_normal((M, k))
    z = qz.from_noise(noise)
    x = subspace.to_full(y, z)
    log_w = np.asarray(target.log_density(x), dtype=float) - qz.log_density(z)
    if np.any(np.isnan(log_w)):
        raise SamplerError("NaN importance weight")
    return MarginalEstimate(log_mean_exp(log_w), z, log_w)


def mh_accept(log_num, log_den, log_q_forward=0.0, log_q_backward=0.0, rng=None, u=None):
    """Metropolis-Hastings decision in log space.

    Accepts with probability
    ``min(1, exp(log_num + log_q_backward - log_den - log_q_forward))`` where
    ``log_q_forward = log q(proposed | current)`` and ``log_q_backward =
    log q(current | proposed)``.  A current state with ``log_den = -inf`` is
    left for any proposal with finite density; two ``-inf`` values reject.
    Pass a uniform ``u`` to make the decision without touching ``rng``.
    """
    values = (log_num, log_den, log_q_forward, log_q_backward)
    if any(math.isnan(v) for v in values):
        raise SamplerError("NaN in Metropolis-Hastings ratio")
    if log_den == -math.inf:
        return log_num > -math.inf
    log_alpha = log_num + log_q_backward - log_den - log_q_forward
    if log_alpha >= 0:
        return True
    if u is None:
        u = rng.random()
    return math.log(u) < log_alpha if u > 0 else True


@dataclass
class ChainOutput:
    """Result of one chain.

    ``samples`` holds the active coordinates ``y_i`` (full-space ``x_i`` for
    vanilla MH) after burn-in, ``iterations`` their iteration indices and
    ``log_d`` the estimate carried by each state (the exact log-density for
    vanilla MH).  For the active-subspace samplers ``z_draws`` (``(N, M, k)``)
    and ``log_weights`` (``(N, M)``) hold the nested draws of each state.
    """

    mode: SamplerMode
    samples: np.ndarray
    iterations: np.ndarray
    log_d: np.ndarray
    accepted: np.ndarray
    n_accepted: int
    n_proposals: int
    evaluation_count: int
    seed: object = None
    subspace: object = None
    z_draws: Optional[np.ndarray] = None
    log_weights: Optional[np.ndarray] = None
    timings: dict = field(default_factory=dict)

    @property
    def acceptance_rate(self):
        return self.n_accepted / self.n_proposals if self.n_proposals else 0.0

    @property
    def n_samples(self):
        return self.samples.shape[0]

    def x_samples(self, unweighted=False):
        """Full-space pseudo-samples ``(N, M, m)`` and their weights ``(N, M)``."""
        if self.mode is SamplerMode.VANILLA:
            return self.samples[:, None, :], np.ones((self.n_samples, 1))
        return reconstruct_x_samples(self.subspace, self.samples, self.z_draws,
                                     self.log_weights, unweighted)

    def flat_x_samples(self, unweighted=False):
        """Pseudo-samples flattened to ``(N*M, m)`` in ``(i, j)`` order, with their weights."""
        x, w = self.x_samples(unweighted)
        return x.reshape(-1, x.shape[-1]), w.reshape(-1)

    def to_csv(self, directory):
        """Write ``y_samples.csv`` and ``x_samples.csv`` into ``directory``."""
        fmt = lambda v: repr(float(v))
        n = self.samples.shape[1]
        with open(f"{directory}/y_samples.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "accepted"] + [f"y{k + 1}" for k in range(n)] + ["log_d"])
            for it, acc, row, ld in zip(self.iterations, self.accepted, self.samples, self.log_d):
                writer.writerow([int(it), int(acc)] + [fmt(v) for v in row] + [fmt(ld)])
        x, w = self.x_samples()
        m = x.shape[2]
        with open(f"{directory}/x_samples.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iter", "j", "weight"] + [f"x{k + 1}" for k in range(m)])
            for it, xs, ws in zip(self.iterations, x, w):
                for j in range(xs.shape[0]):
                    writer.writerow([int(it), j, fmt(ws[j])] + [fmt(v) for v in xs[j]])


def reconstruct_x_samples(subspace, y_samples, z_draws, log_weights, unweighted=False):
    """``x_ij = B_a y_i + B_i z_ij`` with per-row self-normalized weights.

    The weight of ``x_ij`` is ``w_ij / sum_j w_ij``, which turns the nested
    draws of state ``i`` into a self-normalized importance sample of the
    inactive conditional.  ``unweighted=True`` gives every draw ``1/M``.  A row
    whose weights are all zero also gets ``1/M``.
    """
    y = np.asarray(y_samples, dtype=float)
    z = np.asarray(z_draws, dtype=float)
    x = (y @ subspace.active_basis.T)[:, None, :] + z @ subspace.inactive_basis.T
    log_w = np.asarray(log_weights, dtype=float)
    M = log_w.shape[1]
    if unweighted:
        return x, np.full(log_w.shape, 1.0 / M)
    top = np.max(log_w, axis=1, keepdims=True)
    dead = ~np.isfinite(top[:, 0])
    w = np.exp(log_w - np.where(np.isfinite(top), top, 0.0))
    w[dead] = 1.0
    return x, w / w.sum(axis=1, keepdims=True)


def _root_seed(rng):
    if isinstance(rng, np.random.Generator):
        return int(rng.integers(2**63))
    if isinstance(rng, np.random.SeedSequence):
        return rng
    return int(rng)


class _Blocks:
    """Iteration-indexed standard normal (or uniform) blocks from one stream."""

    def __init__(self, seed, label, shape, uniform=False, block=1024):
        self.gen = np.random.default_rng(seed_sequence(seed, label))
        self.shape = tuple(shape)
        self.uniform = uniform
        self.block = block
        self.start = 0
        self.buf = None

    def __getitem__(self, i):
        if self.buf is None or not self.start <= i < self.start + self.block:
            if self.buf is not None and i != self.start + self.block:
                raise IndexError("blocks must be consumed in order")
            self.start = 0 if self.buf is None else self.start + self.block
            size = (self.block,) + self.shape
            self.buf = self.gen.random(size) if self.uniform else self.gen.standard_normal(size)
        return self.buf[i - self.start]


def run_vanilla_mh(target, proposal, x0, N, burn_in, rng):
    """Random-walk MH on the full space.

    The chain has ``N`` states including ``x0``, costing exactly ``N`` target
    evaluations.  The first ``burn_in`` states are dropped from the output.
    ``rng`` is an int seed, a ``SeedSequence`` or a ``Generator``.
    """
    if not N > burn_in >= 0:
        raise SamplerError(f"need N > burn_in >= 0, got N={N}, burn_in={burn_in}")
    seed = _root_seed(rng)
    x = np.array(x0, dtype=float)
    m = x.size
    start = time.perf_counter()
    evals0 = target.evaluations
    steps = _Blocks(seed, "vanilla-step", (m,))
    uniforms = _Blocks(seed, "vanilla-accept", (), uniform=True)

    log_p = target.log_density(x)
    if log_p == -np.inf:
        raise SamplerError("target density is zero at the starting point")
    samples = np.empty((N, m))
    log_ps = np.empty(N)
    accepted = np.zeros(N, dtype=bool)
    samples[0], log_ps[0] = x, log_p
    for i in range(1, N):
        prop = proposal.step(x, steps[i - 1])
        log_p_prop = target.log_density(prop)
        if mh_accept(log_p_prop, log_p, u=uniforms[i - 1]):
            x, log_p = prop, log_p_prop
            accepted[i] = True
        samples[i], log_ps[i] = x, log_p

    return ChainOutput(
        mode=SamplerMode.VANILLA,
        samples=samples[burn_in:],
        iterations=np.arange(N)[burn_in:],
        log_d=log_ps[burn_in:],
        accepted=accepted[burn_in:],
        n_accepted=int(accepted.sum()),
        n_proposals=N - 1,
        evaluation_count=target.evaluations - evals0,
        seed=seed,
        timings={"sampling": time.perf_counter() - start},
    )


def run_asmh(target, subspace, proposal_y, qz, x0, N, M, original_version, rng, burn_in=0):
    """Active-subspace Metropolis-Hastings.

    Parameters
    ----------
    target : DensityModel
    subspace : ActiveSubspace
    proposal_y : ProposalSpec
        Random walk on the active coordinates.
    qz : InactiveProposal
        Importance distribution of the inactive coordinates.
    x0 : array_like
        Start; its active coordinates ``B_a^T x0`` initialize the chain.
    N, M : int
        Iterations and nested draws per estimate.
    original_version : bool
        Re-estimate the current state every iteration (biased) instead of
        recycling its estimate (exact).
    rng : int, SeedSequence or Generator
    burn_in : int
        Leading iterations dropped from the output.

    Returns
    -------
    ChainOutput
        ``N - burn_in`` states.  Target evaluations: ``M (N + 1)`` when
        recycling, ``M (2N + 1)`` otherwise.
    """
    if N < 1 or M < 1:
        raise SamplerError("need N >= 1 and M >= 1")
    if not 0 <= burn_in < N:
        raise SamplerError(f"need 0 <= burn_in < N, got {burn_in}")
    if subspace.ambient_dim != target.dim:
        raise SamplerError(
            f"subspace lives in dimension {subspace.ambient_dim}, target in {target.dim}"
        )
    seed = _root_seed(rng)
    n, k = subspace.active_dim, subspace.inactive_dim
    mode = SamplerMode.ASMH_ORIGINAL if original_version else SamplerMode.EASMH
    start = time.perf_counter()
    evals0 = target.evaluations

    steps = _Blocks(seed, "asmh-step", (n,))
    uniforms = _Blocks(seed, "asmh-accept", (), uniform=True)
    z_new = _Blocks(seed, "asmh-z-proposed", (M, k))
    z_cur = _Blocks(seed, "asmh-z-current", (M, k)) if original_version else None
    z_init = np.random.default_rng(seed_sequence(seed, "asmh-z-init")).standard_normal((M, k))

    y = subspace.active_coordinates(np.asarray(x0, dtype=float))
    est = estimate_marginal(target, subspace, y, qz, M, noise=z_init)

    ys = np.empty((N, n))
    log_d = np.empty(N)
    accepted = np.zeros(N, dtype=bool)
    zs = np.empty((N, M, k))
    log_ws = np.empty((N, M))
    for i in range(N):
        y_prop = proposal_y.step(y, steps[i])
        est_prop = estimate_marginal(target, subspace, y_prop, qz, M, noise=z_new[i])
        if original_version:
            est = estimate_marginal(target, subspace, y, qz, M, noise=z_cur[i])
        if proposal_y.symmetric:
            log_fwd = log_bwd = 0.0
        else:
            log_fwd = proposal_y.log_density(y_prop, y)
            log_bwd = proposal_y.log_density(y, y_prop)
        if mh_accept(est_prop.log_d, est.log_d, log_fwd, log_bwd, u=uniforms[i]):
            y, est = y_prop, est_prop
            accepted[i] = True
        ys[i] = y
        log_d[i] = est.log_d
        zs[i] = est.z_draws
        log_ws[i] = est.log_weights

    return ChainOutput(
        mode=mode,
        samples=ys[burn_in:],
        iterations=np.arange(1, N + 1)[burn_in:],
        log_d=log_d[burn_in:],
        accepted=accepted[burn_in:],
        n_accepted=int(accepted.sum()),
        n_proposals=N,
        evaluation_count=target.evaluations - evals0,
        seed=seed,
        subspace=subspace,
        z_draws=zs[burn_in:],
        log_weights=log_ws[burn_in:],
        timings={"sampling": time.perf_counter() - start},
    )
