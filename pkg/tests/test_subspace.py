import numpy as np
import pytest

from asmh.errors import SubspaceError
from asmh.subspace import (
    ActiveSubspace,
    SubspaceMethod,
    construct_gradient_covariance,
    construct_linear_regression,
    construct_posterior_covariance,
    detect_spectral_gap,
)
from asmh.targets import (
    DensityModel,
    GaussianSpec,
    isotropic_gaussian,
    make_mixture_experiment_target,
    mixture_components,
)


def angle_deg(u, v):
    c = abs(np.dot(u, v)) / (np.linalg.norm(u) * np.linalg.norm(v))
    return np.degrees(np.arccos(min(1.0, c)))


def normal_prior(dim, var):
    return lambda rng, n: rng.standard_normal((n, dim)) * np.sqrt(var)


def test_gap_hand_checked():
    gap = detect_spectral_gap([10, 9, 8, 7.5, 0.1, 0.05])
    assert gap.cut_index == 4
    assert gap.gap_ratio == pytest.approx(75.0)


def test_gap_exact_zero_tail_uses_floor():
    gap = detect_spectral_gap([4.0, 2.0, 0.0])
    assert gap.cut_index == 2
    assert gap.gap_ratio == pytest.approx(2.0 / 4e-12)


def test_gap_all_zero_and_cap():
    assert detect_spectral_gap([0.0, 0.0, 0.0]).cut_index == 1
    assert detect_spectral_gap([100.0, 99.0, 1.0], max_active_dim=1).cut_index == 1
    with pytest.raises(SubspaceError):
        detect_spectral_gap([1.0, 2.0])


def test_gradient_covariance_constant_gradient():
    grad = lambda x: np.tile([3.0, 4.0], (x.shape[0], 1))
    sub = construct_gradient_covariance(grad, normal_prior(2, 1.0), 50, np.random.default_rng(0))
    np.testing.assert_allclose(sub.eigenvalues, [25.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(np.abs(sub.active_basis[:, 0]), [0.6, 0.8], atol=1e-6)
    assert sub.active_dim == 1
    assert sub.method is SubspaceMethod.GRADIENT_COVARIANCE


def test_gradient_covariance_isotropic_has_no_gap():
    # log-likelihood -|x|^2 / 2 has gradient -x, so C = E[x x^T] = I under N(0, I)
    grad = lambda x: -x
    rng = np.random.default_rng(1)
    sub = construct_gradient_covariance(grad, normal_prior(3, 1.0), 4000, rng)
    lam = sub.eigenvalues
    assert lam.max() - lam.min() < 0.1
    assert sub.gap.gap_ratio < 1.1
    forced = construct_gradient_covariance(grad, normal_prior(3, 1.0), 4000, rng, active_dim=1)
    assert forced.active_dim == 1
    full = np.hstack([forced.active_basis, forced.inactive_basis])
    np.testing.assert_allclose(full.T @ full, np.eye(3), atol=1e-10)


def test_gradient_covariance_reports_bad_point():
    def grad(x):
        g = -x.copy()
        g[3] = np.nan
        return g
    with pytest.raises(SubspaceError) as info:
        construct_gradient_covariance(grad, normal_prior(2, 1.0), 10, np.random.default_rng(2))
    assert info.value.point is not None and info.value.point.shape == (2,)


def test_gradient_covariance_warns_when_undersampled():
    with pytest.warns(UserWarning):
        construct_gradient_covariance(lambda x: -x, normal_prior(5, 1.0), 3, np.random.default_rng(0))


def test_posterior_covariance_anisotropic_gaussian():
    target = DensityModel(2, GaussianSpec(np.zeros(2), np.diag([10.0, 0.1])).log_pdf)
    sub = construct_posterior_covariance(target, isotropic_gaussian(2, 25.0), 2000,
                                         np.random.default_rng(0))
    assert angle_deg(sub.active_basis[:, 0], [1.0, 0.0]) < 5.0
    assert sub.weight_ess > 10


def test_posterior_covariance_mixture_axis():
    # oracle: Cov = within-component covariance + mu mu^T, leading axis (1, 1)
    comps = mixture_components("2d")
    mu, sigma = comps[0][1].mean, comps[0][1].covariance
    exact = sigma + np.outer(mu, mu)
    lead = np.linalg.eigh(exact)[1][:, -1]
    assert angle_deg(lead, [1.0, 1.0]) < 1e-6
    target = make_mixture_experiment_target("2d")
    sub = construct_posterior_covariance(target, isotropic_gaussian(2, 10.0), 500,
                                         np.random.default_rng(4))
    assert angle_deg(sub.active_basis[:, 0], [1.0, 1.0]) < 10.0


def test_posterior_covariance_prior_misses_target():
    target = DensityModel(2, lambda x: np.where(np.abs(x[:, 0]) > 50, 0.0, -np.inf))
    with pytest.raises(SubspaceError, match="broader prior"):
        construct_posterior_covariance(target, isotropic_gaussian(2, 1.0), 20,
                                       np.random.default_rng(0))


def test_posterior_covariance_degenerate_weights_warn():
    target = DensityModel(2, GaussianSpec(np.full(2, 6.0), 1e-6 * np.eye(2)).log_pdf)
    with pytest.warns(UserWarning, match="degenerate"):
        sub = construct_posterior_covariance(target, isotropic_gaussian(2, 1.0), 100,
                                             np.random.default_rng(0))
    assert sub.weight_ess < 2


def test_regression_matches_lstsq_oracle():
    rng = np.random.default_rng(8)
    points = rng.standard_normal((500, 2)) * np.sqrt(10)
    field = lambda x: np.exp(-0.5 * np.sum((x - [2.0, 2.0]) ** 2, axis=1))
    sub = construct_linear_regression(field, points)
    coef = np.linalg.lstsq(np.column_stack([points, np.ones(500)]), field(points), rcond=None)[0][:2]
    assert angle_deg(sub.active_basis[:, 0], coef) < 1e-6
    assert sub.method is SubspaceMethod.LINEAR_REGRESSION


def test_regression_on_one_sided_bump():
    # a single bump at (2, 2): the best linear fit increases along (1, 1)
    rng = np.random.default_rng(9)
    points = rng.standard_normal((500, 2)) * np.sqrt(10)
    comps = mixture_components("2d")
    field = lambda x: np.exp(comps[0][1].log_pdf(x))
    sub = construct_linear_regression(field, points)
    assert angle_deg(sub.active_basis[:, 0], [1.0, 1.0]) < 15.0


def test_regression_constant_field():
    points = np.random.default_rng(0).standard_normal((20, 2))
    with pytest.raises(SubspaceError):
        construct_linear_regression(lambda x: np.ones(len(x)), points)


def test_subspace_round_trip(tmp_path):
    q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((4, 4)))
    sub = ActiveSubspace(q[:, :2], q[:, 2:], "posterior_covariance",
                         eigenvalues=[4.0, 3.0, 0.1, 0.0], mean=[1.0, 2.0, 3.0, 4.0],
                         weight_ess=12.5)
    path = tmp_path / "subspace.txt"
    sub.save(path)
    back = ActiveSubspace.load(path)
    np.testing.assert_array_equal(back.active_basis, sub.active_basis)
    np.testing.assert_array_equal(back.inactive_basis, sub.inactive_basis)
    np.testing.assert_array_equal(back.eigenvalues, sub.eigenvalues)
    np.testing.assert_array_equal(back.mean, sub.mean)
    assert back.weight_ess == 12.5 and back.method is sub.method


def test_subspace_validation_and_coordinates():
    e = np.eye(3)
    with pytest.raises(SubspaceError):
        ActiveSubspace(e[:, :2], e[:, 1:2], "posterior_covariance")
    with pytest.raises(SubspaceError):
        ActiveSubspace(e[:, :2], e[:, 2:], "linear_regression")
    with pytest.raises(SubspaceError):
        ActiveSubspace(e, np.zeros((3, 0)), "posterior_covariance")
    sub = ActiveSubspace(e[:, :1], e[:, 1:], "gradient_covariance")
    x = np.array([1.0, 2.0, 3.0])
    np.testing.assert_allclose(sub.to_full(sub.active_coordinates(x), sub.inactive_coordinates(x)), x)
    np.testing.assert_allclose(sub.projector(), np.diag([1.0, 0.0, 0.0]))
