"""
Log-scale Bessel K numerics and the generalized inverse Gaussian law.

Everything here works with logarithms: the modified Bessel function of the
third kind :math:`K_\\lambda(x)` overflows or underflows for moderate orders
and arguments, and the GH density only ever needs ratios of it.

Two evaluation routes exist for :math:`\\log K_\\lambda(x)`:

- a direct route through the exponentially scaled ``scipy.special.kve``
  when ``max(|lambda|, x) <= DEBYE_SWITCH``;
- the uniform (Debye) asymptotic expansion of :math:`K_\\nu(\\nu z)` otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import gammaln, kve

from . import _kernels
from .exceptions import DomainError

DEBYE_SWITCH = 50.0
DEBYE_TERMS = 8
ORDER_STEP = 1e-5

_HALF_LOG_HALF_PI = 0.5 * math.log(math.pi / 2.0)


def _debye_polynomials(n_terms):
    """Exact coefficients of u_0..u_n (index = power of tau)."""
    polys = [[Fraction(1)]]
    for _ in range(n_terms):
        u = polys[-1]
        deg = len(u) - 1
        out = [Fraction(0)] * (deg + 4)
        # 1/2 t^2 (1 - t^2) u'(t)
        for j in range(1, deg + 1):
            d = j * u[j] / 2
            out[j + 1] += d
            out[j + 3] -= d
        # 1/8 int_0^t (1 - 5 s^2) u(s) ds
        for j in range(deg + 1):
            out[j + 1] += u[j] / (8 * (j + 1))
            out[j + 3] -= 5 * u[j] / (8 * (j + 3))
        while len(out) > 1 and out[-1] == 0:
            out.pop()
        polys.append(out)
    return polys


def _debye_table(n_terms):
    # u_k(t) / nu^k = sum_j c[k, k + 2j] t^(2j) / r^k  with  r = sqrt(nu^2 + x^2);
    # only powers k, k+2, ..., 3k of t occur, so the division by nu is exact.
    polys = _debye_polynomials(n_terms)
    table = []
    for k, u in enumerate(polys[1:], start=1):
        even = [float(u[k + 2 * j]) for j in range(k + 1)]
        table.append(((-1) ** k, even))
    return table


_DEBYE = _debye_table(DEBYE_TERMS)
_DEBYE_SIGNS, _DEBYE_COEF = _kernels.debye_matrix(_DEBYE)


@dataclass(frozen=True)
class GigParams:
    """Parameters of GIG(omega, eta, lambda) in the concentration/scale form."""

    omega: float
    eta: float = 1.0
    lam: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.omega) and self.omega > 0):
            raise DomainError(f"omega must be positive, got {self.omega}")
        if not (np.isfinite(self.eta) and self.eta > 0):
            raise DomainError(f"eta must be positive, got {self.eta}")
        if not np.isfinite(self.lam):
            raise DomainError(f"lambda must be finite, got {self.lam}")


def _check_bessel_args(nu, x):
    if np.any(np.isnan(nu)) or np.any(np.isnan(x)):
        raise DomainError("log_bessel_k: NaN input")
    if np.any(x <= 0):
        raise DomainError("log_bessel_k: argument must be > 0")


def _debye_series(t2, r):
    # works on floats and arrays alike
    series = 0.0
    rk = 1.0
    for sign, coef in _DEBYE:
        rk = rk * r
        poly = coef[-1]
        for cj in coef[-2::-1]:
            poly = poly * t2 + cj
        series = series + sign * poly / rk
    return series


def _log_k_debye(nu, x):
    """Debye expansion written in (nu, x) so that nu -> 0 stays finite."""
    r2 = nu * nu + x * x
    r = np.sqrt(r2)
    series = _debye_series(nu * nu / r2, r)
    # nu * log(x / (nu + r)) -> 0 as nu -> 0
    with np.errstate(invalid="ignore", divide="ignore"):
        shift = np.where(nu > 0, nu * np.log(x / (nu + r)), 0.0)
    return _HALF_LOG_HALF_PI - 0.5 * np.log(r) - r - shift + np.log1p(series)


def _log_k_debye_scalar(nu, x):
    r = math.hypot(nu, x)
    series = _debye_series((nu / r) ** 2, r)
    shift = nu * math.log(x / (nu + r)) if nu > 0 else 0.0
    return _HALF_LOG_HALF_PI - 0.5 * math.log(r) - r - shift + math.log1p(series)


def _log_k_direct(nu, x):
    with np.errstate(over="ignore", divide="ignore"):
        out = np.log(kve(nu, x)) - x
    bad = ~np.isfinite(out)
    if np.any(bad):
        # kve overflowed: x is tiny relative to nu, use the leading small-x term
        nb, xb = nu[bad], x[bad]
        small = np.where(
            nb > 1e-10,
            gammaln(np.maximum(nb, 1e-10)) - np.log(2.0) + nb * (np.log(2.0) - np.log(xb)),
            np.log(np.maximum(-np.log(xb / 2.0) - np.euler_gamma, np.finfo(float).tiny)),
        )
        out[bad] = small
    return out


def _log_k(nu, x, debye):
    out = np.empty(np.broadcast(nu, x).shape)
    nu, x, debye = np.broadcast_arrays(nu, x, debye)
    if np.any(debye):
        out[debye] = _log_k_debye(nu[debye], x[debye])
    if not np.all(debye):
        direct = ~debye
        out[direct] = _log_k_direct(nu[direct], x[direct])
    return out


def _use_debye(nu, x):
    return np.maximum(nu, x) > DEBYE_SWITCH


def log_bessel_k(lam, x):
    """
    Natural log of the modified Bessel function of the third kind.

    Parameters
    ----------
    lam : float or array_like
        Order; any real (``K_lam == K_{-lam}``).
    x : float or array_like
        Argument, strictly positive. Broadcast against ``lam``.

    Returns
    -------
    float or ndarray
        ``log K_lam(x)``; finite for every representable input.

    Raises
    ------
    DomainError
        If ``x <= 0`` or any input is NaN.
    """
    scalar = np.ndim(lam) == 0 and np.ndim(x) == 0
    nu = np.abs(np.asarray(lam, dtype=float))
    x = np.asarray(x, dtype=float)
    _check_bessel_args(nu, x)
    out = _log_k(nu, x, _use_debye(nu, x))
    return float(out) if scalar else out


def log_bessel_k_asymptotic(lam, x):
    """
    ``log K_lam(x)`` from the truncated Debye expansion only.

    The expansion is stated for ``K_nu(nu * z)``; the caller's argument is
    mapped to ``z = x / nu`` internally, written so that the limit ``nu -> 0``
    (the large-argument Hankel regime) is also finite. Accurate when
    ``max(|lam|, x) > DEBYE_SWITCH``.
    """
    scalar = np.ndim(lam) == 0 and np.ndim(x) == 0
    nu = np.abs(np.asarray(lam, dtype=float))
    x = np.asarray(x, dtype=float)
    _check_bessel_args(nu, x)
    nu, x = np.broadcast_arrays(nu, x)
    out = _log_k_debye(nu.astype(float), x.astype(float))
    return float(out) if scalar else out


def log_bessel_k_dorder(lam, x, step=ORDER_STEP):
    """Central difference of ``log K_nu(x)`` in the order at ``nu = lam``.

    Both stencil points use the evaluation route selected at the centre so
    the difference never straddles the switch between methods.
    """
    lam = np.asarray(lam, dtype=float)
    x = np.asarray(x, dtype=float)
    _check_bessel_args(lam, x)
    debye = _use_debye(np.abs(lam), x)
    hi = _log_k(np.abs(lam + step), x, debye)
    lo = _log_k(np.abs(lam - step), x, debye)
    return (hi - lo) / (2.0 * step)


def gig_log_density(y, p: GigParams):
    """
    Log density of GIG(omega, eta, lambda) at ``y``.

    ``h(y) = (y/eta)^(lambda-1) / (2 eta K_lambda(omega))
    * exp(-omega/2 (y/eta + eta/y))``
    """
    scalar = np.ndim(y) == 0
    y = np.asarray(y, dtype=float)
    if np.any(~(y > 0)):
        raise DomainError("gig_log_density: y must be > 0")
    u = y / p.eta
    out = (
        (p.lam - 1.0) * np.log(u)
        - np.log(2.0 * p.eta)
        - log_bessel_k(p.lam, p.omega)
        - 0.5 * p.omega * (u + 1.0 / u)
    )
    return float(out) if scalar else out


def log_bessel_k_family(lam, x, step=ORDER_STEP):
    """
    ``log K`` at orders ``lam - 1``, ``lam``, ``lam + 1`` plus the order derivative.

    Evaluated in one compiled pass (see ``_kernels``); the route switch is the
    same as for :func:`log_bessel_k`, decided at the centre order and shared
    by the neighbouring orders and the difference stencil.

    Returns
    -------
    lk_lo, lk, lk_hi, dlk : ndarray
        ``log K_{lam-1}(x)``, ``log K_lam(x)``, ``log K_{lam+1}(x)`` and
        ``d/d lam log K_lam(x)`` (central difference with ``step``).
    """
    lam, x = np.broadcast_arrays(np.asarray(lam, dtype=float), np.asarray(x, dtype=float))
    _check_bessel_args(lam, x)
    shape = x.shape
    lam = np.ascontiguousarray(lam).ravel()
    x = np.ascontiguousarray(x).ravel()
    out = [np.empty(x.shape[0]) for _ in range(4)]
    _kernels.log_k_family(lam, x, float(step), DEBYE_SWITCH, _DEBYE_SIGNS, _DEBYE_COEF, *out)
    return tuple(o.reshape(shape) for o in out)


def _log_k_scalar(nu, x, debye=None):
    """Scalar ``log K_nu(x)`` for validated inputs without array overhead."""
    nu = abs(nu)
    if debye is None:
        debye = max(nu, x) > DEBYE_SWITCH
    if debye:
        return _log_k_debye_scalar(nu, x)
    v = float(kve(nu, x))
    if 0.0 < v < np.inf:
        return math.log(v) - x
    return float(_log_k_direct(np.array([nu]), np.array([x]))[0])


def _dorder_scalar(lam, x, step=ORDER_STEP):
    """Scalar twin of ``log_bessel_k_dorder``."""
    debye = max(abs(lam), x) > DEBYE_SWITCH
    return (_log_k_scalar(lam + step, x, debye) - _log_k_scalar(lam - step, x, debye)) / (2.0 * step)


def log_k_index(lam, x, step=ORDER_STEP):
    """
    Scalar ``(log K_lam(x), log K_{lam+1}(x), d/dlam log K_lam(x))`` from the
    compiled kernel; ``x > 0`` is assumed (no validation).
    """
    return _kernels.log_k_index(float(lam), float(x), float(step), DEBYE_SWITCH,
                                _DEBYE_SIGNS, _DEBYE_COEF)


def newton_index(omega, lam, abar, bbar, cbar, om_lo, om_hi, lam_lo, lam_hi, hstep):
    """Compiled projected Newton for the (omega, lambda) update; see ``mixfit``."""
    return _kernels.newton_index(omega, lam, abar, bbar, cbar, float(om_lo), float(om_hi),
                                 float(lam_lo), float(lam_hi), ORDER_STEP, float(hstep),
                                 DEBYE_SWITCH, _DEBYE_SIGNS, _DEBYE_COEF)


def gig_conditional_moments(psi, chi, lambda_tilde):
    """
    E[Y], E[1/Y] and E[log Y] for Y with density proportional to
    ``y^(lambda_tilde - 1) exp(-(psi y + chi / y) / 2)``.

    This is the conditional law of the latent mixing variable given an
    observation, with ``psi = omega + alpha' Sigma^-1 alpha``,
    ``chi = omega + delta(x, mu | Sigma)`` and ``lambda_tilde = lambda - p/2``.
    Arrays broadcast.

    Returns
    -------
    a, b, c : float or ndarray
    """
    scalar = all(np.ndim(v) == 0 for v in (psi, chi, lambda_tilde))
    a, b, c, _ = _moments(psi, chi, lambda_tilde)
    if scalar:
        return float(a), float(b), float(c)
    return a, b, c


def _moments(psi, chi, lambda_tilde):
    # also hands back log K_lambda_tilde(sqrt(psi chi)) for density reuse
    psi = np.asarray(psi, dtype=float)
    chi = np.asarray(chi, dtype=float)
    if np.any(~(psi > 0)) or np.any(~(chi > 0)):
        raise DomainError("gig_conditional_moments: psi and chi must be > 0")
    s = np.sqrt(psi * chi)
    log_scale = 0.5 * (np.log(chi) - np.log(psi))
    lk_lo, lk, lk_hi, dlk = log_bessel_k_family(lambda_tilde, s)
    a = np.exp(log_scale + lk_hi - lk)
    # sqrt(psi/chi) K_{l+1}/K_l - 2l/chi equals sqrt(psi/chi) K_{l-1}/K_l,
    # which has no cancellation
    b = np.exp(lk_lo - lk - log_scale)
    c = log_scale + dlk
    return a, b, c, lk
