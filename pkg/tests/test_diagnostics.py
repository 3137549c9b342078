import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from asmh.diagnostics import (
    autocorrelation,
    batch_mean_se,
    effective_sample_size,
    gaussian_kde,
    kde_to_csv,
    mode_occupancy,
    occupancy_to_csv,
    scott_bandwidth,
    thin,
)
from asmh.errors import DiagnosticsError


def ar1(phi, n, seed):
    rng = np.random.default_rng(seed)
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0] / np.sqrt(1 - phi**2)
    for i in range(1, n):
        x[i] = phi * x[i - 1] + e[i]
    return x


def test_white_noise_band():
    x = np.random.default_rng(0).standard_normal(10_000)
    curve = autocorrelation(x, 50)
    assert curve.values[0] == 1.0
    assert np.abs(curve.values[1:]).max() < 4 / np.sqrt(10_000)


def test_ar1_autocorrelation():
    x = ar1(0.5, 100_000, 1)
    curve = autocorrelation(x, 10)
    np.testing.assert_allclose(curve.values, 0.5 ** np.arange(11), atol=0.02)


def test_matches_direct_biased_estimator():
    x = np.random.default_rng(2).standard_normal((200, 3)).cumsum(axis=0)
    curve = autocorrelation(x, 5)
    c = x - x.mean(axis=0)
    direct = np.array([[np.sum(c[: 200 - k, d] * c[k:, d]) / np.sum(c[:, d] ** 2)
                        for d in range(3)] for k in range(6)])
    np.testing.assert_allclose(curve.per_dimension, direct, atol=1e-12)
    np.testing.assert_allclose(curve.values, direct.max(axis=1), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1),
       loc=st.floats(-1e3, 1e3), scale=st.floats(1e-3, 1e3))
def test_affine_invariance(seed, loc, scale):
    x = np.random.default_rng(seed).standard_normal((300, 2)).cumsum(axis=0)
    a = autocorrelation(x, 20).per_dimension
    b = autocorrelation(loc + scale * x, 20).per_dimension
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_thinning_and_constant_dimension():
    x = np.column_stack([np.arange(100.0), np.ones(100)])
    assert thin(x, 10).shape == (10, 2)
    with pytest.warns(UserWarning):
        curve = autocorrelation(x, 3, every=2)
    assert curve.per_dimension.shape == (4, 1)
    with pytest.raises(DiagnosticsError):
        autocorrelation(np.ones((10, 2)), 3)
    with pytest.raises(DiagnosticsError):
        autocorrelation(np.arange(5.0), 5)


def test_ess_white_noise_and_ar1():
    n = 100_000
    white = np.random.default_rng(3).standard_normal(n)
    assert abs(effective_sample_size(white)[0] / n - 1) < 0.15
    ess = effective_sample_size(ar1(0.5, n, 4))[0]
    assert abs(ess / n / (1 / 3) - 1) < 0.15


def test_ess_constant_dimension_is_nan():
    x = np.column_stack([np.random.default_rng(5).standard_normal(100), np.zeros(100)])
    with pytest.warns(UserWarning):
        ess = effective_sample_size(x)
    assert np.isfinite(ess[0]) and np.isnan(ess[1])


def test_batch_means():
    x = np.random.default_rng(6).standard_normal(50_000)
    assert abs(batch_mean_se(x) / (1 / np.sqrt(50_000)) - 1) < 0.3


def test_kde_matches_pdf_and_integrates_to_one():
    x = np.random.default_rng(7).standard_normal(10_000)
    grid = np.linspace(-3, 3, 301)
    dens = gaussian_kde(x, [grid])
    assert np.abs(dens - stats.norm.pdf(grid)).max() < 0.03
    wide = np.linspace(-8, 8, 801)
    assert abs(gaussian_kde(x, [wide]).sum() * (wide[1] - wide[0]) - 1) < 0.01


def test_kde_2d_mass_and_kernel_sum():
    rng = np.random.default_rng(8)
    x = rng.standard_normal((500, 2)) * [1.0, 2.0]
    w = rng.random(500)
    gx, gy = np.linspace(-6, 6, 121), np.linspace(-10, 10, 161)
    dens = gaussian_kde(x, [gx, gy], bandwidth=0.5, weights=w)
    assert abs(dens.sum() * (gx[1] - gx[0]) * (gy[1] - gy[0]) - 1) < 0.01
    # oracle: weighted sum of isotropic normal kernels, evaluated point by point
    p = w / w.sum()
    for i, j in [(60, 80), (70, 64), (0, 160)]:
        point = np.array([gx[i], gy[j]])
        oracle = np.sum(p * stats.multivariate_normal(point, 0.25 * np.eye(2)).pdf(x))
        assert dens[i, j] == pytest.approx(oracle, rel=1e-10, abs=1e-300)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(2, 40))
def test_kde_nonnegative_and_permutation_invariant(seed, n):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, 2))
    grid = [np.linspace(-3, 3, 11)] * 2
    dens = gaussian_kde(x, grid, bandwidth=0.7)
    assert np.all(dens >= 0)
    np.testing.assert_allclose(gaussian_kde(x[rng.permutation(n)], grid, bandwidth=0.7), dens,
                               rtol=1e-12, atol=1e-300)


def test_scott_bandwidth_unweighted():
    x = np.random.default_rng(9).standard_normal((400, 2))
    h = scott_bandwidth(x)
    np.testing.assert_allclose(h, 400 ** (-1 / 6) * x.std(axis=0), rtol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 60), k=st.integers(1, 4))
def test_occupancy_sums_to_one(seed, n, k):
    rng = np.random.default_rng(seed)
    frac = mode_occupancy(rng.standard_normal((n, 2)), rng.standard_normal((k, 2)), rng.random(n) + 0.01)
    assert frac.shape == (k,)
    assert abs(frac.sum() - 1.0) < 1e-12


def test_occupancy_values():
    x = np.array([[2.0, 2.0], [1.5, 2.5], [-2.0, -1.0], [3.0, 3.0]])
    frac = mode_occupancy(x, [[2.0, 2.0], [-2.0, -2.0]], weights=[1, 1, 2, 0])
    np.testing.assert_allclose(frac, [0.5, 0.5])


def test_csv_writers(tmp_path):
    curve = autocorrelation(np.random.default_rng(0).standard_normal(50), 3)
    curve.to_csv(tmp_path / "a.csv")
    assert (tmp_path / "a.csv").read_text().splitlines()[0] == "lag,value"
    kde_to_csv(tmp_path / "k.csv", [np.arange(2.0), np.arange(3.0)], np.ones((2, 3)))
    lines = (tmp_path / "k.csv").read_text().splitlines()
    assert lines[0] == "x,y,density" and len(lines) == 7
    occupancy_to_csv(tmp_path / "o.csv", [0.25, 0.75])
    assert (tmp_path / "o.csv").read_text().splitlines() == ["mode,fraction", "1,0.25", "2,0.75"]
