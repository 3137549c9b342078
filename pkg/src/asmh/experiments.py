"""End-to-end experiment runs: data, subspace, chain, diagnostics and artifacts.

A run directory holds

* ``config.txt``: the resolved configuration (feed it back to reproduce the run)
* ``data.csv``: Lorenz-96 observations (Lorenz-96 runs only)
* ``subspace.txt``: the active subspace (active-subspace samplers only)
* ``y_samples.csv`` and ``x_samples.csv``: the chain
* ``autocorrelation.csv``, ``kde.csv`` and, for the mixtures, ``kde_reference.csv``
  and ``occupancy.csv``
* ``summary.json``

A run that fails leaves a ``FAILED`` file with the error message next to
whatever it had already written.
"""

import csv
import json
import logging
import math
import os
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import diagnostics as diag
from .config import RunConfig
from .errors import ASMHError, ConfigError, SamplerError
from .ode import Lorenz96Params, ObservationRecord, generate_lorenz96_data, integrate
from .samplers import InactiveProposal, ProposalSpec, run_asmh, run_vanilla_mh
from .seeding import seed_sequence, stream
from .subspace import (
    ActiveSubspace,
    construct_gradient_covariance,
    construct_linear_regression,
    construct_posterior_covariance,
)
from .targets import (
    DensityModel,
    GaussianSpec,
    Lorenz96ExperimentConfig,
    isotropic_gaussian,
    lorenz96_prior,
    make_lorenz96_posterior,
    make_mixture_experiment_target,
    mixture_components,
    mixture_log_density,
)

log = logging.getLogger(__name__)

KDE_POINTS = 121
MIXTURE_KDE_RANGE = (-6.0, 6.0)


@dataclass
class Experiment:
    """Everything a run needs besides the sampler settings."""

    target: DensityModel
    construction_prior: DensityModel
    truth: Optional[np.ndarray] = None
    data: Optional[ObservationRecord] = None
    mode_centers: Optional[np.ndarray] = None
    kde_dims: tuple = (0, 1)
    # exact density of the plotted marginal convolved with the KDE kernel, if known
    kde_reference: object = None


@dataclass
class RunResult:
    output_dir: str
    summary: dict
    chain: object
    subspace: Optional[ActiveSubspace]


def lorenz96_setup(config):
    return Lorenz96ExperimentConfig(
        dim=config.l96_dim,
        forcing=config.l96_forcing,
        t0=config.l96_t0,
        t1=config.l96_t1,
        step=config.l96_step,
        noise_variance=config.l96_noise_variance,
        prior_variance=config.l96_prior_variance,
        obs_stride=config.l96_obs_stride,
    )


def lorenz96_truth(config):
    """Ground-truth ``(initial state, F)``.

    The state is the end of a ``spinup``-long solve from ``F * 1`` plus a
    ``0.01``-scaled Gaussian kick, so it lies on the attractor.
    """
    K, F = config.l96_dim, config.l96_forcing
    params = Lorenz96Params(K, F)
    kick = 0.01 * stream(config.seed, "truth").standard_normal(K)
    start = np.full(K, F) + kick
    if config.l96_spinup > 0:
        traj = integrate(params, start, 0.0, config.l96_spinup, config.l96_step)
        if traj.diverged:
            raise ASMHError("spin-up of the ground-truth state diverged")
        start = traj.states[-1]
    return np.append(start, F)


def lorenz96_data(config, truth=None):
    """Observations for ``config``: read from ``lorenz96.data_file`` or simulated."""
    if config.l96_data_file:
        return ObservationRecord.from_csv(config.l96_data_file)
    truth = lorenz96_truth(config) if truth is None else truth
    K = config.l96_dim
    return generate_lorenz96_data(Lorenz96Params(K, config.l96_forcing), truth[:K],
                                  config.l96_t0, config.l96_t1, config.l96_step,
                                  config.l96_noise_variance, stream(config.seed, "data"))


def _mixture_reference(variant, dims, bandwidth):
    """Exact marginal of the mixture on ``dims`` convolved with an isotropic kernel."""
    comps = []
    for w, spec in mixture_components(variant):
        idx = np.array(dims)
        cov = spec.covariance[np.ix_(idx, idx)] + bandwidth**2 * np.eye(len(idx))
        comps.append((w, GaussianSpec(spec.mean[idx], cov)))
    return lambda pts: np.exp(mixture_log_density(comps, pts))


def build_experiment(config, target=None, construction_prior=None):
    """Target, construction distribution and plotting metadata for ``config``."""
    if config.experiment in ("mixture2d", "mixture10d"):
        variant = config.experiment[len("mixture"):]
        model = make_mixture_experiment_target(variant)
        centers = np.array([spec.mean for _, spec in mixture_components(variant)])
        ref = None
        if isinstance(config.kde_bandwidth, float):
            ref = _mixture_reference(variant, (0, 1), config.kde_bandwidth)
        return Experiment(model, isotropic_gaussian(model.dim, config.construction_variance),
                          mode_centers=centers, kde_reference=ref)
    if config.experiment == "lorenz96":
        setup = lorenz96_setup(config)
        truth = lorenz96_truth(config)
        data = lorenz96_data(config, truth)
        model = make_lorenz96_posterior(setup, data)
        # parameter F against the last state component
        return Experiment(model, lorenz96_prior(setup), truth=truth, data=data,
                          kde_dims=(setup.dim, setup.dim - 1))
    if target is None:
        raise ConfigError(["experiment = custom needs a target passed from Python"])
    prior = construction_prior or isotropic_gaussian(target.dim, config.construction_variance)
    return Experiment(target, prior, kde_dims=(0, 1) if target.dim > 1 else (0,))


def build_subspace(config, experiment):
    """Construct (or load) the active subspace; returns it with the evaluations spent."""
    if config.subspace_file:
        return ActiveSubspace.load(config.subspace_file), 0
    target = experiment.target
    before = target.evaluations
    rng = stream(config.seed, "construction")
    kw = dict(active_dim=config.active_dim, max_active_dim=config.max_active_dim)
    if config.method == "linear_regression":
        if config.active_dim not in (None, 1):
            raise ConfigError(["subspace.active_dim: the regression construction is one-dimensional"])
        points = experiment.construction_prior.sample(rng, config.construction_N)
        subspace = construct_linear_regression(lambda x: np.exp(target.log_density(x)), points)
    elif config.method == "posterior_covariance":
        subspace = construct_posterior_covariance(target, experiment.construction_prior,
                                                  config.construction_N, rng, **kw)
    else:
        if target.loglik_gradient_fn is None:
            raise ConfigError(["subspace.method: gradient_covariance needs a target with a "
                               "log-likelihood gradient"])
        subspace = construct_gradient_covariance(
            target.loglik_gradient, experiment.construction_prior.sample,
            config.construction_N, rng, **kw)
    return subspace, target.evaluations - before


def _start_point(config, experiment, subspace):
    m = experiment.target.dim
    if isinstance(config.x0, str):
        if config.x0 == "origin":
            return np.zeros(m)
        if config.x0 == "truth":
            return experiment.truth.copy()
        if subspace is None or subspace.mean is None:
            raise ConfigError(["sampler.x0: subspace_mean needs a posterior-covariance subspace"])
        return subspace.mean.copy()
    x0 = np.atleast_1d(np.asarray(config.x0, dtype=float))
    if x0.size != m:
        raise ConfigError([f"sampler.x0: expected {m} values, got {x0.size}"])
    return x0


def _proposal_scale(value, dim, key):
    scale = np.atleast_1d(np.asarray(value, dtype=float))
    if scale.size == 1:
        return float(scale[0])
    if scale.size != dim:
        raise ConfigError([f"{key}: expected 1 or {dim} values, got {scale.size}"])
    return scale


def _inactive_proposal(config, subspace, x0):
    if config.qz == "standard_gaussian":
        return InactiveProposal()
    scale = _proposal_scale(config.qz_scale, subspace.inactive_dim, "sampler.qz_scale")
    center = subspace.inactive_coordinates(x0) if config.qz_center == "start" else None
    return InactiveProposal.scaled(scale, center)


def run_chain(config, experiment, subspace, x0):
    target = experiment.target
    if config.mode == "vanilla":
        proposal = ProposalSpec(_proposal_scale(config.proposal_scale, target.dim,
                                                "sampler.proposal_scale"))
        return run_vanilla_mh(target, proposal, x0, config.N, config.burn_in,
                              seed_sequence(config.seed, "chain"))
    proposal = ProposalSpec(_proposal_scale(config.proposal_scale, subspace.active_dim,
                                            "sampler.proposal_scale"))
    qz = _inactive_proposal(config, subspace, x0)
    return run_asmh(target, subspace, proposal, qz, x0, config.N, config.M,
                    config.mode == "asmh_original",
                    seed_sequence(config.seed, "chain"), config.burn_in)


def _json_value(v):
    if isinstance(v, (np.floating, float)):
        return float(v) if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_json_value(x) for x in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    return v


def subspace_summary(subspace):
    if subspace is None:
        return None
    return {
        "method": subspace.method.value,
        "active_dim": subspace.active_dim,
        "eigenvalues": subspace.eigenvalues,
        "gap_cut": subspace.gap.cut_index if subspace.gap else None,
        "gap_ratio": subspace.gap.gap_ratio if subspace.gap else None,
        "weight_ess": subspace.weight_ess,
    }


def _kde_grid(config, experiment, points):
    if config.experiment in ("mixture2d", "mixture10d"):
        axis = np.linspace(*MIXTURE_KDE_RANGE, KDE_POINTS)
        return [axis] * points.shape[1]
    grid = []
    for d in range(points.shape[1]):
        lo, hi = points[:, d].min(), points[:, d].max()
        pad = 0.25 * (hi - lo) if hi > lo else 1.0
        grid.append(np.linspace(lo - pad, hi + pad, KDE_POINTS))
    return grid


def write_diagnostics(config, experiment, chain, out_dir):
    """Autocorrelation, ESS, KDE and occupancy; returns the summary entries."""
    x, w = chain.flat_x_samples()
    thinned = diag.thin(x, config.thin)
    info = {}
    max_lag = min(config.max_lag, thinned.shape[0] - 1)
    acf = diag.autocorrelation(thinned, max_lag)
    acf.to_csv(os.path.join(out_dir, "autocorrelation.csv"))
    info["autocorrelation_lag1_10_max"] = float(acf.values[1:11].max())
    ess = diag.effective_sample_size(thinned)
    info["ess"] = ess
    info["ess_min"] = float(np.nanmin(ess)) if np.isfinite(ess).any() else None

    dims = list(experiment.kde_dims)
    pts = x[:, dims]
    grid = _kde_grid(config, experiment, pts)
    density = diag.gaussian_kde(pts, grid, config.kde_bandwidth, w)
    diag.kde_to_csv(os.path.join(out_dir, "kde.csv"), grid, density)
    cell = np.prod([g[1] - g[0] for g in grid])
    info["kde_mass"] = float(density.sum() * cell)
    if experiment.kde_reference is not None and len(grid) == 2:
        gx, gy = np.meshgrid(*grid, indexing="ij")
        ref = experiment.kde_reference(np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
        diag.kde_to_csv(os.path.join(out_dir, "kde_reference.csv"), grid, ref)
        info["kde_l1_error"] = float(np.abs(density - ref).sum() * cell)
    if experiment.mode_centers is not None:
        occ = diag.mode_occupancy(x, experiment.mode_centers, w)
        diag.occupancy_to_csv(os.path.join(out_dir, "occupancy.csv"), occ)
        info["occupancy"] = occ
        info["minority_occupancy"] = float(occ.min())
    return info


def run_experiment(config: RunConfig, target=None, construction_prior=None):
    """Run one configured experiment and write its artifacts.

    ``target`` (and optionally ``construction_prior``) supply the density for
    ``experiment = custom``.
    """
    out_dir = config.output_dir
    os.makedirs(out_dir, exist_ok=True)
    failed = os.path.join(out_dir, "FAILED")
    if os.path.exists(failed):
        os.remove(failed)
    try:
        return _run(config, target, construction_prior, out_dir)
    except Exception as exc:
        with open(failed, "w") as fh:
            fh.write(f"{type(exc).__name__}: {exc}\n")
        raise


def _run(config, target, construction_prior, out_dir):
    wall = time.perf_counter()
    timings = {}
    with open(os.path.join(out_dir, "config.txt"), "w") as fh:
        fh.write(config.to_text())

    t = time.perf_counter()
    experiment = build_experiment(config, target, construction_prior)
    timings["setup"] = time.perf_counter() - t
    if experiment.data is not None:
        experiment.data.to_csv(os.path.join(out_dir, "data.csv"))
    model = experiment.target
    model.reset_counter()

    subspace, construction_evals = None, 0
    if config.mode != "vanilla":
        t = time.perf_counter()
        subspace, construction_evals = build_subspace(config, experiment)
        timings["construction"] = time.perf_counter() - t
        if subspace.ambient_dim != model.dim:
            raise SamplerError(f"subspace lives in dimension {subspace.ambient_dim}, "
                               f"target in {model.dim}")
        subspace.save(os.path.join(out_dir, "subspace.txt"))
        log.info("subspace: %s, active dimension %d", subspace.method.value, subspace.active_dim)

    x0 = _start_point(config, experiment, subspace)
    t = time.perf_counter()
    chain = run_chain(config, experiment, subspace, x0)
    timings["sampling"] = time.perf_counter() - t
    chain.to_csv(out_dir)

    t = time.perf_counter()
    info = write_diagnostics(config, experiment, chain, out_dir)
    timings["diagnostics"] = time.perf_counter() - t

    diverged = getattr(model, "diverged_counter", None)
    summary = {
        "experiment": config.experiment,
        "mode": config.mode,
        "seed": config.seed,
        "acceptance_rate": chain.acceptance_rate,
        "n_accepted": chain.n_accepted,
        "n_proposals": chain.n_proposals,
        "n_samples": chain.n_samples,
        "sampler_evaluations": chain.evaluation_count,
        "construction_evaluations": construction_evals,
        "evaluation_count": chain.evaluation_count + construction_evals,
        "diverged_solves": diverged["diverged"] if diverged else 0,
        "subspace": subspace_summary(subspace),
        "start": x0,
        "truth": experiment.truth,
        "timings": timings,
        "wall_time": time.perf_counter() - wall,
        "config": config.to_dict(),
        "config_text": config.to_text(),
    }
    summary.update(info)
    summary = _json_value(summary)
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    return RunResult(out_dir, summary, chain, subspace)


# comparison ------------------------------------------------------------------

def read_x_samples(run_dir):
    """Full-space pseudo-samples and weights from a run's ``x_samples.csv``."""
    path = os.path.join(run_dir, "x_samples.csv")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:3] != ["iter", "j", "weight"]:
            raise ASMHError(f"{path}: unexpected header")
        rows = np.array([[float(v) for v in row[2:]] for row in reader])
    if rows.size == 0:
        raise ASMHError(f"{path}: no samples")
    return rows[:, 1:], rows[:, 0]


def read_summary(run_dir):
    path = os.path.join(run_dir, "summary.json")
    if not os.path.exists(path):
        raise ASMHError(f"{run_dir}: no summary.json (did the run finish?)")
    with open(path) as fh:
        return json.load(fh)


def compare_runs(run_dirs, max_lag=None, out_dir=None):
    """Overlay autocorrelation, acceptance and occupancy of finished runs.

    All runs must sample the same experiment in the same dimension.  Each
    chain is thinned by its own ``diagnostics.thin``; ``max_lag`` defaults
    to the smallest configured one.  Writes ``compare_*.csv`` into
    ``out_dir`` when given and returns the table rows.
    """
    if len(run_dirs) < 2:
        raise ConfigError(["compare needs at least two run directories"])
    runs = []
    for d in run_dirs:
        summary = read_summary(d)
        x, w = read_x_samples(d)
        runs.append((d, summary, x, w))
    experiments = {r[1]["experiment"] for r in runs}
    dims = {r[2].shape[1] for r in runs}
    if len(experiments) > 1 or len(dims) > 1:
        raise ASMHError(f"runs are not comparable: experiments {sorted(experiments)}, "
                        f"dimensions {sorted(dims)}")
    if max_lag is None:
        max_lag = min(r[1]["config"]["diagnostics.max_lag"] for r in runs)

    curves, acceptance, occupancy = [], [], []
    for d, summary, x, w in runs:
        thinned = diag.thin(x, summary["config"]["diagnostics.thin"])
        curve = diag.autocorrelation(thinned, min(max_lag, thinned.shape[0] - 1))
        curves.append(curve)
        acceptance.append((d, summary["mode"], summary["acceptance_rate"],
                           summary["evaluation_count"]))
        if summary.get("occupancy") is not None:
            occupancy.append((d, summary["occupancy"]))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "compare_autocorrelation.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["lag"] + [r[0] for r in runs])
            for lag in range(max(len(c.values) for c in curves)):
                writer.writerow([lag] + [repr(float(c.values[lag])) if lag < len(c.values) else ""
                                         for c in curves])
        with open(os.path.join(out_dir, "compare_acceptance.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["run", "mode", "acceptance_rate", "evaluation_count"])
            writer.writerows(acceptance)
        if occupancy:
            with open(os.path.join(out_dir, "compare_occupancy.csv"), "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["run", "mode", "fraction"])
                for d, occ in occupancy:
                    for k, f in enumerate(occ):
                        writer.writerow([d, k + 1, f])
    return {"autocorrelation": curves, "acceptance": acceptance, "occupancy": occupancy}
