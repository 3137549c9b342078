"""Lorenz-96 vector fields, a fixed-step RK4 integrator and synthetic data.

State vectors use zero-based indices with cyclic wrap-around, so
``X[k - 2]``, ``X[k - 1]`` and ``X[k + 1]`` are taken modulo ``K``.
"""

import csv
from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np

from .errors import ODEError

DIVERGENCE_THRESHOLD = 1e8


@dataclass(frozen=True)
class TwoScaleParams:
    """Fast-variable block of the two-scale model (classical defaults)."""

    J: int = 10
    h: float = 1.0
    c: float = 10.0
    b: float = 10.0


@dataclass(frozen=True)
class Lorenz96Params:
    dim: int
    forcing: float = 8.0
    two_scale: Optional[TwoScaleParams] = None

    def __post_init__(self):
        if self.dim < 4:
            raise ODEError(f"Lorenz-96 needs at least 4 slow variables, got {self.dim}")
        ts = self.two_scale
        if ts is not None and (ts.J < 1 or ts.c == 0 or ts.b == 0):
            raise ODEError("two-scale model needs J >= 1 and nonzero c, b")

    @property
    def state_size(self):
        if self.two_scale is None:
            return self.dim
        return self.dim * (1 + self.two_scale.J)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    diverged: bool = False

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time"] + [f"x{k + 1}" for k in range(self.states.shape[1])])
            for t, row in zip(self.times, self.states):
                writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])


def lorenz96_rhs(params, state):
    """Time derivative of the Lorenz-96 state.

    ``state`` may carry leading batch axes; the last axis holds the ``K`` slow
    variables, followed by the ``K * J`` fast ones for the two-scale model.
    """
    state = np.asarray(state, dtype=float)
    if state.shape[-1] != params.state_size:
        raise ODEError(
            f"state has {state.shape[-1]} components, expected {params.state_size}"
        )
    K = params.dim
    x = state[..., :K]
    dx = (np.roll(x, -1, axis=-1) - np.roll(x, 2, axis=-1)) * np.roll(x, 1, axis=-1) - x + params.forcing
    if params.two_scale is None:
        return dx

    ts = params.two_scale
    y = state[..., K:]
    coupling = ts.h * ts.c / ts.b
    block_sums = y.reshape(y.shape[:-1] + (K, ts.J)).sum(axis=-1)
    dx = dx - coupling * block_sums
    dy = (
        -ts.c * ts.b * np.roll(y, -1, axis=-1) * (np.roll(y, -2, axis=-1) - np.roll(y, 1, axis=-1))
        - ts.c * y
        + coupling * np.repeat(x, ts.J, axis=-1)
    )
    return np.concatenate([dx, dy], axis=-1)


@numba.njit(cache=True, nogil=True)
def _l96_deriv(x, forcing, out):
    K = x.shape[0]
    for k in range(K):
        out[k] = (x[(k + 1) % K] - x[(k - 2) % K]) * x[(k - 1) % K] - x[k] + forcing


@numba.njit(cache=True, nogil=True)
def _rk4_single_scale(x0, forcing, h, n_full, last_h, threshold):
    n_batch, K = x0.shape
    n_times = n_full + 1 + (1 if last_h > 0.0 else 0)
    states = np.full((n_batch, n_times, K), np.nan)
    diverged = np.zeros(n_batch, dtype=np.bool_)
    k1 = np.empty(K)
    k2 = np.empty(K)
    k3 = np.empty(K)
    k4 = np.empty(K)
    tmp = np.empty(K)
    for b in range(n_batch):
        x = x0[b].copy()
        F = forcing[b]
        states[b, 0] = x
        for i in range(1, n_times):
            dt = h if i <= n_full else last_h
            _l96_deriv(x, F, k1)
            for k in range(K):
                tmp[k] = x[k] + 0.5 * dt * k1[k]
            _l96_deriv(tmp, F, k2)
            for k in range(K):
                tmp[k] = x[k] + 0.5 * dt * k2[k]
            _l96_deriv(tmp, F, k3)
            for k in range(K):
                tmp[k] = x[k] + dt * k3[k]
            _l96_deriv(tmp, F, k4)
            bad = False
            for k in range(K):
                x[k] = x[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k])
                if not (abs(x[k]) <= threshold):
                    bad = True
            if bad:
                diverged[b] = True
                break
            states[b, i] = x
    return states, diverged


def _step_plan(t0, t1, step):
    if not step > 0:
        raise ODEError(f"step must be positive, got {step}")
    if not t1 > t0:
        raise ODEError(f"need t1 > t0, got [{t0}, {t1}]")
    span = t1 - t0
    n = int(round(span / step))
    if n >= 1 and abs(n * step - span) <= 1e-9 * step:
        times = t0 + step * np.arange(n + 1)
        times[-1] = t1
        return times, n, 0.0
    n = int(np.floor(span / step))
    times = np.append(t0 + step * np.arange(n + 1), t1)
    return times, n, span - n * step


def integrate_batch(params, initial_states, forcings, t0, t1, step):
    """RK4-integrate several single-scale systems, each with its own forcing.

    Returns the ``times`` grid, the ``(batch, n_times, K)`` states (rows are
    NaN from the divergence point on) and a boolean divergence flag per row.
    """
    x0 = np.ascontiguousarray(np.atleast_2d(initial_states), dtype=float)
    forcings = np.ascontiguousarray(np.broadcast_to(forcings, (x0.shape[0],)), dtype=float)
    if x0.shape[1] != params.dim:
        raise ODEError(f"initial state has {x0.shape[1]} components, expected {params.dim}")
    times, n_full, last_h = _step_plan(t0, t1, step)
    states, diverged = _rk4_single_scale(x0, forcings, float(step), n_full, float(last_h),
                                         DIVERGENCE_THRESHOLD)
    return times, states, diverged


def integrate(params, initial_state, t0, t1, step):
    """Fixed-step classical RK4 from ``t0`` to ``t1``.

    States are saved at every step, starting with the initial state.  A final
    shortened step lands exactly on ``t1``.  If any component becomes
    non-finite or exceeds ``1e8`` in magnitude the integration stops and the
    returned trajectory is marked ``diverged`` (it then holds only the states
    computed before that point).
    """
    initial_state = np.asarray(initial_state, dtype=float)
    if initial_state.shape != (params.state_size,):
        raise ODEError(
            f"initial state has shape {initial_state.shape}, expected ({params.state_size},)"
        )
    if params.two_scale is None:
        times, states, diverged = integrate_batch(
            params, initial_state[None, :], params.forcing, t0, t1, step
        )
        states = states[0]
        if diverged[0]:
            n_ok = int(np.argmax(np.isnan(states[:, 0])))
            return Trajectory(times[:n_ok], states[:n_ok], True)
        return Trajectory(times, states, False)

    times, n_full, last_h = _step_plan(t0, t1, step)
    states = np.empty((times.size, initial_state.size))
    x = initial_state.copy()
    states[0] = x
    for i in range(1, times.size):
        dt = step if i <= n_full else last_h
        k1 = lorenz96_rhs(params, x)
        k2 = lorenz96_rhs(params, x + 0.5 * dt * k1)
        k3 = lorenz96_rhs(params, x + 0.5 * dt * k2)
        k4 = lorenz96_rhs(params, x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.abs(x) <= DIVERGENCE_THRESHOLD):
            return Trajectory(times[:i], states[:i], True)
        states[i] = x
    return Trajectory(times, states, False)


@dataclass(frozen=True)
class ObservationRecord:
    """Noisy observations ``values[t, k]`` of component ``k`` at ``times[t]``."""

    times: np.ndarray
    values: np.ndarray

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["time", "component", "value"])
            for t, row in zip(self.times, self.values):
                for k, v in enumerate(row):
                    writer.writerow([repr(float(t)), k + 1, repr(float(v))])

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header != ["time", "component", "value"]:
                raise ODEError(f"unexpected observation header {header}")
            for t, k, v in reader:
                rows.append((float(t), int(k), float(v)))
        rows.sort(key=lambda r: (r[0], r[1]))
        times = np.array(sorted({r[0] for r in rows}))
        n_comp = max(r[1] for r in rows)
        if len(rows) != times.size * n_comp:
            raise ODEError("observation file is not a complete time x component grid")
        values = np.array([r[2] for r in rows]).reshape(times.size, n_comp)
        return cls(times, values)


def generate_lorenz96_data(params, truth_initial, t0, t1, step, noise_variance, seed):
    """Forward solve from ``truth_initial`` plus i.i.d. Gaussian noise.

    Noise with variance ``noise_variance`` is added to every component of every
    saved state.  ``seed`` may be an int, a ``SeedSequence`` or a ``Generator``.
    """
    if noise_variance < 0:
        raise ODEError("noise_variance must be nonnegative")
    traj = integrate(params, truth_initial, t0, t1, step)
    if traj.diverged:
        raise ODEError("ground-truth trajectory diverged; choose another initial state")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(traj.states.shape) * np.sqrt(noise_variance)
    return ObservationRecord(traj.times.copy(), traj.states + noise)
