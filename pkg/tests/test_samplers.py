import math

import numpy as np
import pytest
from scipy import stats

from asmh.diagnostics import effective_sample_size
from asmh.errors import SamplerError
from asmh.samplers import (
    InactiveProposal,
    ProposalSpec,
    SamplerMode,
    estimate_marginal,
    log_mean_exp,
    mh_accept,
    reconstruct_x_samples,
    run_asmh,
    run_vanilla_mh,
)
from asmh.subspace import ActiveSubspace
from asmh.targets import DensityModel, GaussianSpec, make_mixture_experiment_target

E = np.eye(2)
AXIS = ActiveSubspace(E[:, :1], E[:, 1:], "posterior_covariance")


def gaussian(mean, var):
    return DensityModel(len(mean), GaussianSpec(np.asarray(mean, float), np.diag(var)).log_pdf)


def test_acceptance_probability_two_thirds():
    rng = np.random.default_rng(0)
    n = 100_000
    hits = sum(mh_accept(math.log(2.0), math.log(3.0), rng=rng) for _ in range(n))
    sigma = math.sqrt(2 / 3 * 1 / 3 / n)
    assert abs(hits / n - 2 / 3) < 3 * sigma


def test_accept_edge_cases():
    assert mh_accept(0.0, -1.0, u=0.999)
    assert mh_accept(-1.0, -math.inf, u=0.5)
    assert not mh_accept(-math.inf, -math.inf, u=0.0)
    assert not mh_accept(-math.inf, 0.0, u=1e-300)
    # asymmetric proposal terms enter the ratio
    assert mh_accept(0.0, 0.0, log_q_forward=1.0, log_q_backward=0.0, u=math.exp(-1.0) - 1e-9)
    assert not mh_accept(0.0, 0.0, log_q_forward=1.0, log_q_backward=0.0, u=math.exp(-1.0) + 1e-9)
    with pytest.raises(SamplerError):
        mh_accept(float("nan"), 0.0, u=0.5)


def test_log_mean_exp_oracle():
    w = np.array([-1000.0, -1001.0, -np.inf])
    assert log_mean_exp(w) == pytest.approx(-1000 + math.log((1 + math.exp(-1)) / 3))
    assert log_mean_exp(np.full(3, -np.inf)) == -np.inf


def test_estimate_matches_direct_formula():
    target = gaussian([0.0, 0.0], [1.0, 4.0])
    qz = InactiveProposal()
    noise = np.random.default_rng(1).standard_normal((5, 1))
    est = estimate_marginal(target, AXIS, np.array([0.3]), qz, 5, noise=noise)
    x = np.column_stack([np.full(5, 0.3), noise[:, 0]])
    direct = np.mean(np.exp(target(x)) / (np.exp(-0.5 * noise[:, 0] ** 2) / math.sqrt(2 * math.pi)))
    assert est.log_d == pytest.approx(math.log(direct), rel=1e-12)


def test_estimate_is_unbiased():
    # marginal of N(0, diag(1, 4)) along e1 at 0 is 1 / sqrt(2 pi)
    target = gaussian([0.0, 0.0], [1.0, 4.0])
    rng = np.random.default_rng(2)
    d = np.exp([estimate_marginal(target, AXIS, np.zeros(1), InactiveProposal(), 1, rng).log_d
                for _ in range(20_000)])
    assert abs(d.mean() - 1 / math.sqrt(2 * math.pi)) < 3 * d.std() / math.sqrt(d.size)


def test_estimate_rejects_bad_m():
    with pytest.raises(SamplerError):
        estimate_marginal(gaussian([0.0, 0.0], [1.0, 1.0]), AXIS, np.zeros(1), InactiveProposal(), 0)


def test_inactive_proposal_density():
    qz = InactiveProposal.scaled([2.0, 0.5], center=[1.0, -1.0])
    z = np.array([[1.0, -1.0], [3.0, 0.0]])
    oracle = stats.multivariate_normal([1.0, -1.0], np.diag([4.0, 0.25])).logpdf(z)
    np.testing.assert_allclose(qz.log_density(z), oracle, rtol=1e-12)
    with pytest.raises(SamplerError):
        InactiveProposal.scaled(-1.0)


def test_vanilla_clt_on_standard_normal():
    target = DensityModel(1, lambda x: -0.5 * x[:, 0] ** 2)
    out = run_vanilla_mh(target, ProposalSpec(2.4), np.zeros(1), 50_001, 1, 3)
    y = out.samples[:, 0]
    se = y.std() / math.sqrt(effective_sample_size(y)[0])
    assert abs(y.mean()) < 3 * se
    assert out.evaluation_count == 50_001
    assert out.n_samples == 50_000


def test_vanilla_mixture_acceptance_near_one_third():
    target = make_mixture_experiment_target("2d")
    rates = [run_vanilla_mh(target, ProposalSpec(1.0), np.zeros(2), 5500, 500, s).acceptance_rate
             for s in range(5)]
    assert abs(np.mean(rates) - 0.32) < 0.10


def test_vanilla_rejects_zero_density_start():
    target = DensityModel(1, lambda x: np.where(x[:, 0] > 0, 0.0, -np.inf))
    with pytest.raises(SamplerError):
        run_vanilla_mh(target, ProposalSpec(1.0), [-1.0], 10, 0, 0)


def test_gimh_evaluation_count_and_recycling():
    target = gaussian([0.0, 0.0], [1.0, 4.0])
    out = run_asmh(target, AXIS, ProposalSpec(2.4), InactiveProposal(), np.zeros(2), 300, 3,
                   False, 4)
    assert out.mode is SamplerMode.EASMH
    assert out.evaluation_count == 3 * 301
    # a rejected step keeps both the state and its estimate
    for i in np.flatnonzero(~out.accepted[1:]) + 1:
        assert out.log_d[i] == out.log_d[i - 1]
        np.testing.assert_array_equal(out.z_draws[i], out.z_draws[i - 1])


def test_mcwm_evaluation_count_and_refresh():
    target = gaussian([0.0, 0.0], [1.0, 4.0])
    out = run_asmh(target, AXIS, ProposalSpec(2.4), InactiveProposal(), np.zeros(2), 300, 3,
                   True, 4)
    assert out.mode is SamplerMode.ASMH_ORIGINAL
    assert out.evaluation_count == 3 * 601
    rejected = np.flatnonzero(~out.accepted[1:]) + 1
    assert any(out.log_d[i] != out.log_d[i - 1] for i in rejected)


def test_gimh_weighted_x_mean_is_consistent():
    mu = np.array([1.0, -2.0])
    target = gaussian(mu, [1.0, 1.0])
    d = np.array([1.0, 1.0]) / math.sqrt(2)
    sub = ActiveSubspace(d[:, None], np.array([[1.0], [-1.0]]) / math.sqrt(2), "linear_regression")
    # q_z wider than the inactive conditional keeps the weight variance finite
    out = run_asmh(target, sub, ProposalSpec(2.4), InactiveProposal.scaled(2.0), np.zeros(2),
                   20_000, 4, False, 5)
    x, w = out.x_samples()
    per_iter = np.einsum("ij,ijk->ik", w, x)
    for k in range(2):
        se = per_iter[:, k].std() / math.sqrt(effective_sample_size(per_iter[:, k])[0])
        assert abs(per_iter[:, k].mean() - mu[k]) < 3 * se


def test_reconstruction_weights():
    y = np.array([[0.0], [1.0]])
    z = np.zeros((2, 3, 1))
    log_w = np.array([[0.0, math.log(3.0), -np.inf], [-np.inf, -np.inf, -np.inf]])
    x, w = reconstruct_x_samples(AXIS, y, z, log_w)
    np.testing.assert_allclose(w[0], [0.25, 0.75, 0.0])
    np.testing.assert_allclose(w[1], [1 / 3] * 3)
    np.testing.assert_allclose(x[1, :, 0], 1.0)
    _, flat = reconstruct_x_samples(AXIS, y, z, log_w, unweighted=True)
    np.testing.assert_allclose(flat, 1 / 3)


def test_same_seed_same_chain_and_thread_independence(monkeypatch):
    target = make_mixture_experiment_target("10d")
    e = np.eye(10)
    sub = ActiveSubspace(e[:, :1], e[:, 1:], "linear_regression")
    runs = []
    for threads in ("1", "1", "3"):
        monkeypatch.setenv("ASMH_THREADS", threads)
        runs.append(run_asmh(target, sub, ProposalSpec(1.0), InactiveProposal(), np.zeros(10),
                             200, 7, False, 9))
    for other in runs[1:]:
        np.testing.assert_array_equal(runs[0].samples, other.samples)
        np.testing.assert_array_equal(runs[0].z_draws, other.z_draws)
        np.testing.assert_array_equal(runs[0].log_weights, other.log_weights)


def test_chain_csv_layout(tmp_path):
    target = gaussian([0.0, 0.0], [1.0, 4.0])
    out = run_asmh(target, AXIS, ProposalSpec(1.0), InactiveProposal(), np.zeros(2), 5, 2, False, 0)
    out.to_csv(tmp_path)
    y_lines = (tmp_path / "y_samples.csv").read_text().splitlines()
    x_lines = (tmp_path / "x_samples.csv").read_text().splitlines()
    assert y_lines[0] == "iter,accepted,y1,log_d" and len(y_lines) == 6
    assert x_lines[0] == "iter,j,weight,x1,x2" and len(x_lines) == 11
    assert y_lines[1].startswith("1,")


def test_subspace_dimension_mismatch():
    with pytest.raises(SamplerError):
        run_asmh(gaussian([0.0] * 3, [1.0] * 3), AXIS, ProposalSpec(1.0), InactiveProposal(),
                 np.zeros(3), 5, 1, False, 0)
