"""
Multivariate generalized hyperbolic (GH) component.

The component is the normal mean-variance mixture
``X = mu + Y alpha + sqrt(Y) U`` with ``U ~ N(0, Sigma)`` and
``Y ~ GIG(omega, 1, lambda)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats

from .exceptions import NumericalError, ParameterError
from .specfun import GigParams, _moments, log_bessel_k

_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class GHComponent:
    """
    Parameters of one GH component.

    Attributes
    ----------
    lam : float
        Index parameter.
    omega : float
        Concentration parameter, ``> 0``.
    mu : ndarray of shape (p,)
        Location.
    sigma : ndarray of shape (p, p)
        Symmetric positive definite scale matrix.
    alpha : ndarray of shape (p,)
        Skewness.
    """

    lam: float
    omega: float
    mu: np.ndarray
    sigma: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        p = mu.shape[0]
        if mu.ndim != 1 or alpha.shape != (p,) or sigma.shape != (p, p):
            raise ParameterError(
                f"inconsistent shapes mu={mu.shape}, alpha={alpha.shape}, sigma={sigma.shape}")
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise ParameterError(f"omega must be positive, got {self.omega}")
        if not np.isfinite(self.lam):
            raise ParameterError(f"lambda must be finite, got {self.lam}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(alpha)) and np.all(np.isfinite(sigma))):
            raise ParameterError("non-finite location, skewness or scale")
        if not np.allclose(sigma, sigma.T, rtol=1e-10, atol=1e-12):
            raise ParameterError("sigma is not symmetric")
        try:
            chol = linalg.cholesky(sigma, lower=True)
        except linalg.LinAlgError as exc:
            raise ParameterError(f"sigma is not positive definite: {exc}") from None
        object.__setattr__(self, "lam", float(self.lam))
        object.__setattr__(self, "omega", float(self.omega))
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "sigma", 0.5 * (sigma + sigma.T))
        object.__setattr__(self, "_chol", chol)

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    @property
    def chol(self) -> np.ndarray:
        """Lower Cholesky factor of ``sigma``."""
        return self._chol

    def log_det_sigma(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    def skew_norm(self) -> float:
        """``alpha' Sigma^-1 alpha``."""
        w = linalg.solve_triangular(self._chol, self.alpha, lower=True)
        return float(w @ w)

    def gig(self) -> GigParams:
        return GigParams(omega=self.omega, eta=1.0, lam=self.lam)


def _cholesky(sigma):
    try:
        return linalg.cholesky(np.asarray(sigma, dtype=float), lower=True)
    except linalg.LinAlgError:
        raise NumericalError("scale matrix is singular or not positive definite; "
                             "cannot form Sigma^-1 quadratic forms") from None


def mahalanobis(x, mu, sigma=None, *, chol=None):
    """
    Squared Mahalanobis distance ``(x - mu)' Sigma^-1 (x - mu)``.

    ``x`` may be a single p-vector or an (n, p) matrix of rows. Pass a
    precomputed lower Cholesky factor through ``chol`` to skip factorization.
    """
    if chol is None:
        chol = _cholesky(sigma)
    diff = np.asarray(x, dtype=float) - np.asarray(mu, dtype=float)
    w = linalg.solve_triangular(chol, diff.T, lower=True)
    out = np.sum(w * w, axis=0)
    return float(out) if np.ndim(out) == 0 else out


def _quadratic_terms(x, theta: GHComponent):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = linalg.solve_triangular(theta.chol, (x - theta.mu).T, lower=True)
    v = linalg.solve_triangular(theta.chol, theta.alpha, lower=True)
    delta = np.sum(w * w, axis=0)
    lin = v @ w  # (x - mu)' Sigma^-1 alpha
    return delta, float(v @ v), lin


def _assemble(theta, lt, chi, psi, lk, lin):
    p = theta.p
    return (
        0.5 * lt * (np.log(chi) - np.log(psi))
        + lk
        - 0.5 * p * _LOG_2PI
        - 0.5 * theta.log_det_sigma()
        - log_bessel_k(theta.lam, theta.omega)
        + lin
    )


def _log_density_parts(x, theta: GHComponent):
    """Row-wise (log density, delta) with delta the squared Mahalanobis distance."""
    delta, rho, lin = _quadratic_terms(x, theta)
    lt = theta.lam - 0.5 * theta.p
    chi = theta.omega + delta
    psi = theta.omega + rho
    logf = _assemble(theta, lt, chi, psi, log_bessel_k(lt, np.sqrt(psi * chi)), lin)
    return logf, delta


def density_and_moments(x, theta: GHComponent):
    """
    Row-wise log density together with E[Y|x], E[1/Y|x], E[log Y|x].

    Shares the Bessel evaluations between the density and the moments.
    """
    delta, rho, lin = _quadratic_terms(x, theta)
    lt = theta.lam - 0.5 * theta.p
    chi = theta.omega + delta
    psi = theta.omega + rho
    a, b, c, lk = _moments(psi, chi, lt)
    return _assemble(theta, lt, chi, psi, lk, lin), a, b, c


def gh_log_density(x, theta: GHComponent):
    """
    Log density of a GH component.

    Parameters
    ----------
    x : array_like of shape (p,) or (n, p)
    theta : GHComponent

    Returns
    -------
    float or ndarray of shape (n,)
    """
    single = np.ndim(x) == 0 or (np.ndim(x) == 1 and np.shape(x)[0] == theta.p)
    logf, _ = _log_density_parts(np.reshape(x, (-1, theta.p)), theta)
    return float(logf[0]) if single else logf


def gh_mean(theta: GHComponent) -> np.ndarray:
    """
    Skew-adjusted location ``mu + alpha``.

    This is the mean of the component only when ``E[W] = 1`` (for example
    ``lambda = -1/2``); :func:`gh_moments` gives the exact mean.
    """
    return theta.mu + theta.alpha


def gh_covariance(theta: GHComponent) -> np.ndarray:
    """
    Skew-adjusted scatter ``Sigma + alpha alpha'``; the covariance of the
    component only when ``E[W] = Var[W] = 1`` (``lambda = -1/2, omega = 1``).
    """
    return theta.sigma + np.outer(theta.alpha, theta.alpha)


def gh_mixing_moments(theta: GHComponent):
    """``E[W]`` and ``Var[W]`` for the mixing variable ``W ~ GIG(omega, 1, lambda)``."""
    lk = log_bessel_k(theta.lam, theta.omega)
    r1 = float(np.exp(log_bessel_k(theta.lam + 1.0, theta.omega) - lk))
    r2 = float(np.exp(log_bessel_k(theta.lam + 2.0, theta.omega) - lk))
    return r1, max(r2 - r1 * r1, 0.0)


def gh_moments(theta: GHComponent):
    """
    Exact mean ``mu + E[W] alpha`` and covariance
    ``E[W] Sigma + Var[W] alpha alpha'`` of the component.
    """
    ew, vw = gh_mixing_moments(theta)
    return theta.mu + ew * theta.alpha, ew * theta.sigma + vw * np.outer(theta.alpha, theta.alpha)


def affine_component(theta: GHComponent, a, b=None) -> GHComponent:
    """
    Parameters of ``A X + b`` for ``X`` from ``theta`` (``A`` square, invertible).

    The GH family is closed under affine maps: ``mu -> A mu + b``,
    ``alpha -> A alpha``, ``Sigma -> A Sigma A'``; ``lambda`` and ``omega``
    are unchanged.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.zeros(theta.p) if b is None else np.asarray(b, dtype=float)
    return GHComponent(theta.lam, theta.omega, a @ theta.mu + b, a @ theta.sigma @ a.T,
                       a @ theta.alpha)


def sample_gig(p: GigParams, rng, n: int) -> np.ndarray:
    """Draw ``n`` variates from GIG(omega, eta, lambda)."""
    rng = np.random.default_rng(rng)
    draws = stats.geninvgauss.rvs(p.lam, p.omega, size=n, random_state=rng)
    return p.eta * np.asarray(draws, dtype=float)


def sample_gh(theta: GHComponent, rng, n: int, *, y=None) -> np.ndarray:
    """
    Draw ``n`` rows from a GH component.

    Parameters
    ----------
    theta : GHComponent
    rng : numpy Generator or seed
    n : int
    y : array_like of shape (n,), optional
        Mixing values to use instead of GIG draws (e.g. all ones gives
        plain Gaussian draws).

    Returns
    -------
    ndarray of shape (n, p)
    """
    rng = np.random.default_rng(rng)
    if y is None:
        y = sample_gig(theta.gig(), rng, n)
    else:
        y = np.broadcast_to(np.asarray(y, dtype=float), (n,))
    u = rng.standard_normal((n, theta.p)) @ theta.chol.T
    return theta.mu + y[:, None] * theta.alpha + np.sqrt(y)[:, None] * u
