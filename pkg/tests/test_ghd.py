import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from hmmdr.exceptions import NumericalError, ParameterError
from hmmdr.ghd import (GHComponent, affine_component, density_and_moments, gh_covariance,
                       gh_log_density, gh_mean, gh_mixing_moments, gh_moments, mahalanobis,
                       sample_gh, sample_gig)
from hmmdr.specfun import GigParams, gig_conditional_moments, log_bessel_k

from oracles import gh_density_mixture_quad


def component(p=2, lam=1.0, omega=2.0, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((p, p))
    return GHComponent(lam, omega, rng.standard_normal(p), a @ a.T + p * np.eye(p),
                       rng.standard_normal(p))


# ---------------------------------------------------------------- mahalanobis

def test_mahalanobis_identity():
    assert mahalanobis([3.0, 4.0], [0.0, 0.0], np.eye(2)) == pytest.approx(25.0, abs=1e-14)


def test_mahalanobis_matches_solve():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((4, 4))
    s = a @ a.T + np.eye(4)
    x = rng.standard_normal((6, 4))
    mu = rng.standard_normal(4)
    want = np.array([(r - mu) @ np.linalg.solve(s, r - mu) for r in x])
    np.testing.assert_allclose(mahalanobis(x, mu, s), want, rtol=1e-10)


def test_mahalanobis_singular():
    with pytest.raises(NumericalError):
        mahalanobis([1.0, 0.0], [0.0, 0.0], np.zeros((2, 2)))


@given(st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
@settings(max_examples=100, deadline=None)
def test_mahalanobis_nonnegative(x):
    s = np.diag([1.0, 2.0, 0.5])
    d = mahalanobis(np.array(x), np.zeros(3), s)
    assert d >= 0
    if np.max(np.abs(x)) > 1e-100:
        assert d > 0


# ---------------------------------------------------------------- density

def test_parameter_validation():
    with pytest.raises(ParameterError):
        GHComponent(1.0, -1.0, [0.0], [[1.0]], [0.0])
    with pytest.raises(ParameterError):
        GHComponent(1.0, 1.0, [0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0])
    with pytest.raises(ParameterError):
        GHComponent(1.0, 1.0, [0.0, 0.0], np.eye(3), [0.0, 0.0])


@pytest.mark.parametrize("lam,omega,alpha,x", [
    (1.0, 2.0, [0.5, -0.3], [0.2, 1.0]),
    (-2.5, 0.7, [1.2, 0.0], [-1.0, 0.5]),
    (3.0, 5.0, [0.0, 0.0], [2.0, -2.0]),
    (-0.5, 1.0, [-0.4, 0.9], [0.0, 0.0]),
])
def test_density_matches_mixture_integral(lam, omega, alpha, x):
    mu = np.array([0.3, -0.2])
    sigma = np.array([[1.5, 0.4], [0.4, 0.8]])
    theta = GHComponent(lam, omega, mu, sigma, np.array(alpha))
    want = gh_density_mixture_quad(x, lam, omega, mu, sigma, alpha)
    assert math.exp(gh_log_density(np.array(x), theta)) == pytest.approx(want, rel=1e-8)


def test_symmetric_when_no_skew():
    theta = GHComponent(0.7, 1.3, [1.0, -1.0], [[2.0, 0.3], [0.3, 1.0]], [0.0, 0.0])
    for t in ([0.5, 0.2], [3.0, -1.0], [-0.1, 4.0]):
        t = np.array(t)
        assert gh_log_density(theta.mu + t, theta) == pytest.approx(gh_log_density(theta.mu - t, theta),
                                                                     rel=1e-13)


def test_one_dim_normalizes_spec_case():
    theta = GHComponent(1.0, 2.0, [0.0], [[1.0]], [0.5])
    f = lambda x: math.exp(gh_log_density(np.array([x]), theta))
    assert integrate.quad(f, -np.inf, np.inf, epsrel=1e-10)[0] == pytest.approx(1.0, abs=1e-6)


def test_row_and_single_point_forms_agree():
    theta = component(3)
    x = np.random.default_rng(2).standard_normal((5, 3))
    rows = gh_log_density(x, theta)
    assert rows.shape == (5,)
    for i in range(5):
        assert gh_log_density(x[i], theta) == rows[i]
    logf, a, b, c = density_and_moments(x, theta)
    np.testing.assert_allclose(logf, rows, rtol=1e-12)


def test_density_moments_are_conditional_moments():
    theta = component(2, lam=-1.5, omega=0.8)
    x = np.random.default_rng(3).standard_normal((4, 2))
    _, a, b, c = density_and_moments(x, theta)
    for i in range(4):
        chi = theta.omega + mahalanobis(x[i], theta.mu, theta.sigma)
        psi = theta.omega + theta.skew_norm()
        want = gig_conditional_moments(psi, chi, theta.lam - 1.0)
        np.testing.assert_allclose([a[i], b[i], c[i]], want, rtol=1e-12)


def test_far_points_stay_finite():
    theta = component(3)
    x = np.array([[1e4, -1e4, 3e3], [0.0, 0.0, 1e6]])
    assert np.all(np.isfinite(gh_log_density(x, theta)))


@given(st.permutations(range(3)))
@settings(max_examples=20, deadline=None)
def test_permutation_invariance(perm):
    theta = component(3, seed=5)
    perm = list(perm)
    x = np.array([0.4, -1.2, 2.0])
    moved = GHComponent(theta.lam, theta.omega, theta.mu[perm], theta.sigma[np.ix_(perm, perm)],
                        theta.alpha[perm])
    assert gh_log_density(x[perm], moved) == pytest.approx(gh_log_density(x, theta), rel=1e-12)


def test_affine_component_changes_density_by_jacobian():
    theta = component(3, seed=7)
    rng = np.random.default_rng(8)
    a = rng.standard_normal((3, 3)) + 2 * np.eye(3)
    b = rng.standard_normal(3)
    moved = affine_component(theta, a, b)
    x = rng.standard_normal((6, 3))
    lhs = gh_log_density(x @ a.T + b, moved)
    rhs = gh_log_density(x, theta) - math.log(abs(np.linalg.det(a)))
    np.testing.assert_allclose(lhs, rhs, rtol=1e-10)


# ---------------------------------------------------------------- normalization grid

ONE_DIM_GRID = [
    (1.0, 2.0, 0.0, 1.0, 0.5), (-0.5, 1.0, 1.0, 0.5, -1.0), (3.0, 0.5, -2.0, 2.0, 0.0),
    (-4.0, 6.0, 0.0, 1.0, 2.0), (0.0, 0.3, 0.5, 0.7, 0.3), (8.0, 12.0, 0.0, 1.0, -0.5),
    (-12.0, 55.0, 0.0, 0.2, 0.1), (2.5, 0.05, 1.0, 1.0, 1.0), (-1.5, 3.0, 0.0, 4.0, -3.0),
    (0.5, 80.0, 0.0, 1.0, 0.0),
]


@pytest.mark.parametrize("lam,omega,mu,s2,alpha", ONE_DIM_GRID)
def test_one_dim_normalization_grid(lam, omega, mu, s2, alpha):
    theta = GHComponent(lam, omega, [mu], [[s2]], [alpha])
    f = lambda x: math.exp(gh_log_density(np.array([x]), theta))
    m, v = gh_moments(theta)
    centre, sd = float(m[0]), math.sqrt(float(v[0, 0]))
    pts = [centre - 50 * sd, centre - 5 * sd, centre, centre + 5 * sd, centre + 50 * sd]
    total = sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-11, limit=400)[0]
                for lo, hi in zip(pts[:-1], pts[1:]))
    total += integrate.quad(f, -np.inf, pts[0], limit=400)[0] + integrate.quad(f, pts[-1], np.inf, limit=400)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


# ---------------------------------------------------------------- moments

def test_nominal_moments_examples():
    theta = GHComponent(1.0, 1.0, [1.0, 2.0], np.eye(2), [0.5, -0.5])
    np.testing.assert_array_equal(gh_mean(theta), [1.5, 1.5])
    zero = GHComponent(1.0, 1.0, [1.0, 2.0], np.eye(2), [0.0, 0.0])
    np.testing.assert_array_equal(gh_mean(zero), [1.0, 2.0])
    np.testing.assert_array_equal(gh_covariance(zero), np.eye(2))
    skew = GHComponent(1.0, 1.0, [0.0, 0.0], np.eye(2), [1.0, 0.0])
    np.testing.assert_array_equal(gh_covariance(skew), [[2.0, 0.0], [0.0, 1.0]])


def test_mixing_moments_closed_form_at_minus_half():
    # lambda = -1/2: W is inverse Gaussian with mean 1 and variance 1/omega
    for omega in (0.3, 1.0, 7.0):
        theta = GHComponent(-0.5, omega, [0.0], [[1.0]], [1.0])
        ew, vw = gh_mixing_moments(theta)
        assert ew == pytest.approx(1.0, rel=1e-12)
        assert vw == pytest.approx(1.0 / omega, rel=1e-10)


def test_exact_and_nominal_agree_when_mixing_is_unit():
    theta = GHComponent(-0.5, 1.0, [0.3, -1.0], [[1.0, 0.2], [0.2, 2.0]], [0.7, 0.4])
    m, s = gh_moments(theta)
    np.testing.assert_allclose(m, gh_mean(theta), rtol=1e-12)
    np.testing.assert_allclose(s, gh_covariance(theta), rtol=1e-10)


def _mc_check(theta, mean, cov, n=100_000, seed=11):
    x = sample_gh(theta, np.random.default_rng(seed), n)
    emp = x.mean(axis=0)
    se = np.sqrt(np.diag(cov) / n)
    assert np.all(np.abs(emp - mean) < 3 * se + 1e-12)
    emp_cov = np.cov(x.T, bias=True)
    # standard error of a sample covariance entry, estimated from the draws
    d = x - emp
    se_cov = np.sqrt(np.var(d[:, :, None] * d[:, None, :], axis=0) / n)
    assert np.all(np.abs(emp_cov - cov) < 4 * se_cov + 1e-12)


def test_monte_carlo_matches_nominal_moments_at_unit_mixing():
    theta = GHComponent(-0.5, 1.0, [1.0, -1.0], [[1.0, 0.3], [0.3, 0.5]], [0.5, -0.2])
    _mc_check(theta, gh_mean(theta), gh_covariance(theta))


def test_monte_carlo_matches_exact_moments():
    theta = GHComponent(2.0, 1.5, [0.0, 1.0], [[0.8, -0.2], [-0.2, 1.2]], [-0.6, 0.3])
    m, s = gh_moments(theta)
    _mc_check(theta, m, s)
    # and the nominal forms are measurably off for these parameters
    assert np.max(np.abs(m - gh_mean(theta))) > 0.1


# ---------------------------------------------------------------- sampling

def test_gig_sampler_inverse_gaussian_ks():
    omega = 1.3
    y = sample_gig(GigParams(omega, 1.0, -0.5), np.random.default_rng(4), 10_000)
    ks = stats.kstest(y, stats.invgauss(mu=1.0 / omega, scale=omega).cdf)
    assert ks.pvalue > 1e-3


def test_gig_sampler_mean_matches_moment():
    omega, lam, n = 2.0, 1.5, 100_000
    y = sample_gig(GigParams(omega, 1.0, lam), np.random.default_rng(5), n)
    a = gig_conditional_moments(omega, omega, lam)[0]
    assert abs(y.mean() - a) < 3 * y.std() / math.sqrt(n)
    assert np.all(y > 0)


def test_gh_sampler_unit_mixing_is_gaussian():
    theta = GHComponent(1.0, 1.0, [2.0, -1.0], [[1.0, 0.5], [0.5, 2.0]], [0.0, 0.0])
    x = sample_gh(theta, np.random.default_rng(6), 50_000, y=1.0)
    np.testing.assert_allclose(x.mean(axis=0), theta.mu, atol=0.03)
    np.testing.assert_allclose(np.cov(x.T), theta.sigma, atol=0.05)


def test_sampler_determinism():
    theta = component(3)
    a = sample_gh(theta, np.random.default_rng(9), 50)
    b = sample_gh(theta, np.random.default_rng(9), 50)
    np.testing.assert_array_equal(a, b)
