"""
Dimension-reduction subspace of a fitted GH mixture.

The kernel combines between-component location spread and between-component
scatter spread of the component means and covariances: by default the exact
GH moments ``mu + E[W] alpha`` and ``E[W] Sigma + Var[W] alpha alpha'``, or
with ``moments="nominal"`` the forms ``mu + alpha`` and ``Sigma + alpha alpha'``
(exact only when ``E[W] = Var[W] = 1``).
Directions solve ``M v = l Sigma v`` with ``Sigma`` the overall sample
covariance, normalized so ``V' Sigma V = I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import DomainError, NumericalError
from .ghd import gh_covariance, gh_mean, gh_moments

RETAIN_REL = 1e-8
MOMENTS = ("exact", "nominal")


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """
    Attributes
    ----------
    directions : ndarray of shape (p, d)
        Sigma-orthonormal columns, leading direction first.
    eigenvalues : ndarray of shape (d,)
        Positive, non-increasing.
    sigma_overall : ndarray of shape (p, p)
    """

    directions: np.ndarray
    eigenvalues: np.ndarray
    sigma_overall: np.ndarray

    @property
    def d(self) -> int:
        return self.directions.shape[1]


def _cholesky(s, what):
    try:
        return linalg.cholesky(s, lower=True)
    except linalg.LinAlgError:
        raise NumericalError(f"{what} is not positive definite") from None


def overall_covariance(x) -> np.ndarray:
    """Sample covariance about the sample mean with divisor n."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] < 2:
        raise DomainError("overall covariance needs at least 2 rows")
    d = x - x.mean(axis=0)
    s = d.T @ d / x.shape[0]
    return 0.5 * (s + s.T)


def _component_moments(model, moments):
    if moments not in MOMENTS:
        raise DomainError(f"moments must be one of {MOMENTS}, got {moments!r}")
    if moments == "exact":
        pairs = [gh_moments(c) for c in model.components]
    else:
        pairs = [(gh_mean(c), gh_covariance(c)) for c in model.components]
    return np.array([m for m, _ in pairs]), np.array([s for _, s in pairs])


def kernel_matrix(model, sigma_overall, moments="exact") -> np.ndarray:
    """
    ``M = M_I Sigma^-1 M_I + M_II``.

    ``M_I = sum_g pi_g (m_g - m)(m_g - m)'`` with ``m_g`` the component mean and
    ``m = sum_g pi_g m_g``; ``M_II = sum_g pi_g (S_g - S) Sigma^-1 (S_g - S)'``
    with ``S_g`` the component covariance and ``S = sum_g pi_g S_g``.
    ``moments`` picks :func:`~hmmdr.ghd.gh_moments` (``"exact"``) or
    :func:`~hmmdr.ghd.gh_mean`/:func:`~hmmdr.ghd.gh_covariance` (``"nominal"``).
    """
    sigma_overall = np.asarray(sigma_overall, dtype=float)
    chol = _cholesky(sigma_overall, "overall covariance")
    pi = model.weights
    means, covs = _component_moments(model, moments)
    dm = means - pi @ means
    m1 = (dm.T * pi) @ dm
    dc = covs - np.tensordot(pi, covs, axes=1)

    def sinv(a):
        return linalg.cho_solve((chol, True), a)

    m2 = sum(w * (c @ sinv(c.T)) for w, c in zip(pi, dc))
    m = m1 @ sinv(m1) + m2
    return 0.5 * (m + m.T)


def solve_directions(m, sigma_overall) -> SubspaceBasis:
    """
    Generalized eigenvectors of ``(M, Sigma)`` with eigenvalue above
    ``RETAIN_REL`` times the largest; may return ``d = 0`` when ``M = 0``.
    """
    m = np.asarray(m, dtype=float)
    sigma_overall = np.asarray(sigma_overall, dtype=float)
    if m.shape != sigma_overall.shape or m.shape[0] != m.shape[1]:
        raise DomainError("kernel and covariance must be square of equal size")
    chol = _cholesky(sigma_overall, "overall covariance")
    # L^-1 M L^-T
    w = linalg.solve_triangular(chol, m, lower=True)
    w = linalg.solve_triangular(chol, w.T, lower=True)
    vals, vecs = linalg.eigh(0.5 * (w + w.T))
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    top = vals[0] if vals.size else 0.0
    keep = vals > RETAIN_REL * top if top > 0 else np.zeros(vals.size, dtype=bool)
    dirs = linalg.solve_triangular(chol.T, vecs[:, keep], lower=False)
    # sign convention: largest-magnitude entry of each direction positive
    if dirs.size:
        idx = np.argmax(np.abs(dirs), axis=0)
        dirs = dirs * np.sign(dirs[idx, np.arange(dirs.shape[1])])
    return SubspaceBasis(dirs, vals[keep], sigma_overall)


def principal_basis(sigma_overall) -> SubspaceBasis:
    """
    Sigma-orthonormal principal axes, used when the kernel is zero (G = 1).

    Eigenvalues reported are those of ``Sigma`` itself.
    """
    sigma_overall = np.asarray(sigma_overall, dtype=float)
    _cholesky(sigma_overall, "overall covariance")
    vals, vecs = linalg.eigh(sigma_overall)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    dirs = vecs / np.sqrt(vals)
    idx = np.argmax(np.abs(dirs), axis=0)
    dirs = dirs * np.sign(dirs[idx, np.arange(dirs.shape[1])])
    return SubspaceBasis(dirs, vals, sigma_overall)


def project(x, basis: SubspaceBasis) -> np.ndarray:
    """HMMDR variables ``x @ directions``."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[1] != basis.directions.shape[0]:
        raise DomainError(
            f"data has {x.shape[1]} columns, basis expects {basis.directions.shape[0]}")
    return x @ basis.directions


def project_model(model, basis: SubspaceBasis, moments="exact"):
    """Projected component means ``B' m_g`` and covariances ``B' S_g B``."""
    b = basis.directions
    means, covs = _component_moments(model, moments)
    means = means @ b
    covs = np.einsum("ji,gjk,kl->gil", b, covs, b)
    return means, covs
