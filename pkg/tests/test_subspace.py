import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import special_ortho_group

from hmmdr.exceptions import DomainError, NumericalError
from hmmdr.ghd import GHComponent, affine_component, gh_covariance, gh_mean
from hmmdr.mixfit import Dataset, FitConfig, MixtureModel, fit_em
from hmmdr.subspace import (kernel_matrix, overall_covariance, principal_basis, project,
                            project_model, solve_directions)


def random_model(p, G, rng, lam=None, omega=None):
    comps = []
    for _ in range(G):
        a = rng.standard_normal((p, p))
        comps.append(GHComponent(rng.uniform(-3, 3) if lam is None else lam,
                                 rng.uniform(0.3, 5) if omega is None else omega,
                                 rng.standard_normal(p) * 2, a @ a.T + np.eye(p),
                                 rng.standard_normal(p)))
    w = rng.uniform(0.2, 1, G)
    return MixtureModel(w / w.sum(), comps)


def test_overall_covariance_hand_case():
    np.testing.assert_array_equal(overall_covariance(np.array([[0.0, 0.0], [2.0, 0.0]])),
                                  [[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DomainError):
        overall_covariance(np.ones((1, 2)))


def test_single_component_kernel_is_zero():
    model = random_model(3, 1, np.random.default_rng(0))
    np.testing.assert_allclose(kernel_matrix(model, np.eye(3)), 0.0, atol=1e-14)


def test_kernel_matches_scalar_loops():
    # two components, p = 2, nominal moments, every product written out
    c1 = GHComponent(1.0, 2.0, [0.0, 1.0], [[1.0, 0.2], [0.2, 2.0]], [0.5, 0.0])
    c2 = GHComponent(-1.0, 1.0, [3.0, -1.0], [[2.0, -0.3], [-0.3, 1.0]], [0.0, -1.0])
    model = MixtureModel(np.array([0.3, 0.7]), [c1, c2])
    sigma = np.array([[2.0, 0.5], [0.5, 1.5]])
    det = sigma[0, 0] * sigma[1, 1] - sigma[0, 1] * sigma[1, 0]
    sinv = [[sigma[1, 1] / det, -sigma[0, 1] / det], [-sigma[1, 0] / det, sigma[0, 0] / det]]
    pi = [0.3, 0.7]
    means = [[c.mu[i] + c.alpha[i] for i in range(2)] for c in (c1, c2)]
    covs = [[[c.sigma[i, j] + c.alpha[i] * c.alpha[j] for j in range(2)] for i in range(2)]
            for c in (c1, c2)]
    mbar = [sum(pi[g] * means[g][i] for g in range(2)) for i in range(2)]
    sbar = [[sum(pi[g] * covs[g][i][j] for g in range(2)) for j in range(2)] for i in range(2)]
    m1 = [[sum(pi[g] * (means[g][i] - mbar[i]) * (means[g][j] - mbar[j]) for g in range(2))
           for j in range(2)] for i in range(2)]
    want = [[0.0, 0.0], [0.0, 0.0]]
    for i in range(2):
        for j in range(2):
            s = 0.0
            for k in range(2):
                for l in range(2):
                    s += m1[i][k] * sinv[k][l] * m1[l][j]
                    for g in range(2):
                        s += (pi[g] * (covs[g][i][k] - sbar[i][k]) * sinv[k][l]
                              * (covs[g][j][l] - sbar[j][l]))
            want[i][j] = s
    np.testing.assert_allclose(kernel_matrix(model, sigma, "nominal"), want, rtol=1e-12, atol=1e-12)


def test_equal_covariances_leave_location_term():
    c1 = GHComponent(1.0, 1.0, [0.0, 0.0], np.eye(2), [0.0, 0.0])
    c2 = GHComponent(1.0, 1.0, [2.0, 1.0], np.eye(2), [0.0, 0.0])
    model = MixtureModel(np.array([0.5, 0.5]), [c1, c2])
    sigma = np.array([[2.0, 0.3], [0.3, 1.0]])
    d = np.array([2.0, 1.0])
    m1 = 0.25 * np.outer(d, d)
    np.testing.assert_allclose(kernel_matrix(model, sigma, "nominal"),
                               m1 @ np.linalg.solve(sigma, m1), rtol=1e-12)


def test_exact_and_nominal_kernels_coincide_at_unit_mixing():
    model = random_model(3, 3, np.random.default_rng(1), lam=-0.5, omega=1.0)
    np.testing.assert_allclose(kernel_matrix(model, np.eye(3), "exact"),
                               kernel_matrix(model, np.eye(3), "nominal"), rtol=1e-9, atol=1e-10)


def test_exact_kernel_uses_mixing_moments():
    # far from unit mixing the nominal moments overstate the skewness term
    model = random_model(2, 2, np.random.default_rng(2), lam=-12.0, omega=60.0)
    exact = kernel_matrix(model, np.eye(2), "exact")
    nominal = kernel_matrix(model, np.eye(2), "nominal")
    assert not np.allclose(exact, nominal, rtol=1e-3)
    with pytest.raises(DomainError):
        kernel_matrix(model, np.eye(2), "other")


def test_singular_sigma_raises():
    model = random_model(2, 2, np.random.default_rng(3))
    with pytest.raises(NumericalError):
        kernel_matrix(model, np.zeros((2, 2)))
    with pytest.raises(NumericalError):
        solve_directions(np.eye(2), np.diag([1.0, -1.0]))


def test_diagonal_case():
    basis = solve_directions(np.diag([3.0, 1.0, 0.0]), np.eye(3))
    assert basis.d == 2
    np.testing.assert_allclose(basis.eigenvalues, [3.0, 1.0], rtol=1e-14)
    np.testing.assert_allclose(np.abs(basis.directions), np.eye(3)[:, :2], atol=1e-14)


def test_identity_sigma_is_plain_eigenproblem():
    rng = np.random.default_rng(4)
    a = rng.standard_normal((4, 4))
    m = a @ a.T
    basis = solve_directions(m, np.eye(4))
    np.testing.assert_allclose(basis.eigenvalues, np.sort(np.linalg.eigvalsh(m))[::-1], rtol=1e-10)


def test_zero_kernel_gives_empty_basis_and_principal_fallback():
    assert solve_directions(np.zeros((3, 3)), np.eye(3)).d == 0
    sigma = np.diag([4.0, 1.0, 9.0])
    basis = principal_basis(sigma)
    np.testing.assert_allclose(basis.eigenvalues, [9.0, 4.0, 1.0])
    np.testing.assert_allclose(basis.directions.T @ sigma @ basis.directions, np.eye(3), atol=1e-14)


def residuals(m, sigma):
    basis = solve_directions(m, sigma)
    v = basis.directions
    ortho = np.max(np.abs(v.T @ sigma @ v - np.eye(basis.d)))
    eig = np.max(np.abs(m @ v - sigma @ v * basis.eigenvalues))
    return basis, ortho, eig


@given(st.integers(0, 100_000), st.integers(1, 5), st.integers(2, 4))
@settings(max_examples=60, deadline=None)
def test_sigma_orthonormal_and_eigen_residual(seed, p, G):
    rng = np.random.default_rng(seed)
    model = random_model(p, G, rng)
    a = rng.standard_normal((p, p))
    sigma = a @ a.T + np.eye(p)
    m = kernel_matrix(model, sigma)
    basis, ortho, eig = residuals(m, sigma)
    assert ortho <= 1e-8
    assert eig <= 1e-8 * max(np.linalg.norm(m, 2), 1.0)
    assert np.all(np.diff(basis.eigenvalues) <= 0) and np.all(basis.eigenvalues > 0)


@given(st.integers(0, 100_000))
@settings(max_examples=30, deadline=None)
def test_rotation_equivariance(seed):
    rng = np.random.default_rng(seed)
    p = 3
    model = random_model(p, 3, rng)
    a = rng.standard_normal((p, p))
    sigma = a @ a.T + np.eye(p)
    q = special_ortho_group.rvs(p, random_state=seed)
    rotated = MixtureModel(model.weights, [affine_component(c, q.T) for c in model.components])
    before = solve_directions(kernel_matrix(model, sigma), sigma).eigenvalues
    after = solve_directions(kernel_matrix(rotated, q.T @ sigma @ q), q.T @ sigma @ q).eigenvalues
    np.testing.assert_allclose(after, before, rtol=1e-8, atol=1e-8)


def test_project_coordinate_case_and_errors():
    x = np.arange(12.0).reshape(4, 3)
    basis = solve_directions(np.diag([3.0, 1.0, 0.0]), np.eye(3))
    np.testing.assert_allclose(np.abs(project(x, basis)), x[:, :2])
    with pytest.raises(DomainError):
        project(np.ones((2, 4)), basis)


def test_project_model_matches_moment_transport():
    rng = np.random.default_rng(5)
    model = random_model(3, 2, rng)
    basis = solve_directions(np.diag([3.0, 2.0, 1.0]), np.eye(3))
    means, covs = project_model(model, basis, "nominal")
    b = basis.directions
    for g, c in enumerate(model.components):
        np.testing.assert_allclose(means[g], b.T @ gh_mean(c), rtol=1e-12)
        np.testing.assert_allclose(covs[g], b.T @ gh_covariance(c) @ b, rtol=1e-12)


def test_fitted_model_directions_separate_groups():
    rng = np.random.default_rng(6)
    lab = np.arange(200) % 2
    x = rng.standard_normal((200, 3))
    x[:, 1] += 5.0 * lab
    data = Dataset(x, lab, np.ones(200, dtype=bool))
    model, _ = fit_em(data, 2, "classification", FitConfig(max_iter=50))
    sigma = overall_covariance(x)
    basis = solve_directions(kernel_matrix(model, sigma), sigma)
    lead = basis.directions[:, 0] / np.linalg.norm(basis.directions[:, 0])
    assert abs(lead[1]) > 0.95
