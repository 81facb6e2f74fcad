"""
Compiled batch evaluation of ``log K`` at neighbouring orders.

The E-step needs, for every row, ``log K`` at orders ``l - 1``, ``l`` and
``l + 1`` plus the order derivative. Calling ``scipy.special.kve`` four times
per row dominates the cost of an EM iteration, so this module evaluates the
whole family in one compiled pass:

- direct region: Temme's series (``x < 2``) or Steed's continued fraction
  (``x >= 2``) for ``K_mu, K_{mu+1}`` with ``|mu| <= 1/2``, followed by the
  (stable) forward recurrence up to the requested order;
- beyond the switch: the same (nu, x) Debye series as ``specfun``.

``specfun.log_bessel_k`` stays on ``kve``; tests compare the two routes.
"""

from __future__ import annotations

import math

import numba
import numpy as np

# Taylor coefficients of 1/Gamma(1 + z) about 0
_RGAMMA = np.array([
    1.0, 0.57721566490153286061, -0.65587807152025388108, -0.042002635034095235529,
    0.1665386113822914895, -0.042197734555544336748, -0.0096219715278769735621,
    0.0072189432466630995424, -0.0011651675918590651121, -0.00021524167411495097282,
    0.00012805028238811618615, -0.000020134854780788238656, -1.2504934821426706573e-6,
    1.1330272319816958824e-6, -2.0563384169776071035e-7, 6.1160951044814158179e-9,
    5.0020076444692229301e-9, -1.1812745704870201446e-9, 1.0434267116911005105e-10,
    7.782263439905071254e-12, -3.6968056186422057082e-12, 5.100370287454475979e-13,
    -2.0583260535665067832e-14, -5.3481225394230179824e-15, 1.2267786282382607902e-15,
    -1.1812593016974587695e-16, 1.1866922547516003326e-18, 1.4123806553180317816e-18,
])
_EPS = 1e-16
_LOG_RESCALE = 200.0 * math.log(10.0)
_HALF_LOG_HALF_PI = 0.5 * math.log(math.pi / 2.0)


def debye_matrix(table):
    """Pack ``specfun``'s Debye table into (signs, zero-padded coefficients)."""
    width = max(len(c) for _, c in table)
    coef = np.zeros((len(table), width))
    signs = np.empty(len(table))
    for k, (sign, c) in enumerate(table):
        signs[k] = sign
        coef[k, :len(c)] = c
    return signs, coef


@numba.njit(cache=True)
def _temme_steed(mu, x):
    """``log K_mu(x)`` and ``log K_{mu+1}(x)`` for ``|mu| <= 1/2``."""
    if x < 2.0:
        x2 = 0.5 * x
        pimu = math.pi * mu
        fact = 1.0 if abs(pimu) < _EPS else pimu / math.sin(pimu)
        d = -math.log(x2)
        e = mu * d
        fact2 = 1.0 if abs(e) < _EPS else math.sinh(e) / e
        m2 = mu * mu
        # gam1 = (1/G(1-mu) - 1/G(1+mu)) / (2 mu), gam2 = (1/G(1-mu) + 1/G(1+mu)) / 2
        gam1 = 0.0
        gam2 = 0.0
        pw = 1.0
        for k in range(0, _RGAMMA.shape[0], 2):
            gam2 += _RGAMMA[k] * pw
            gam1 -= _RGAMMA[k + 1] * pw
            pw *= m2
        gampl = gam2 - mu * gam1
        gammi = gam2 + mu * gam1
        ff = fact * (gam1 * math.cosh(e) + gam2 * fact2 * d)
        s0 = ff
        e = math.exp(e)
        p = 0.5 * e / gampl
        q = 0.5 / (e * gammi)
        c = 1.0
        d = x2 * x2
        s1 = p
        for i in range(1, 1000):
            ff = (i * ff + p + q) / (i * i - m2)
            c *= d / i
            p /= i - mu
            q /= i + mu
            term = c * ff
            s0 += term
            s1 += c * (p - i * ff)
            if abs(term) < abs(s0) * _EPS:
                break
        return math.log(s0), math.log(s1 * 2.0 / x)
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d
    delh = d
    q1 = 0.0
    q2 = 1.0
    a1 = 0.25 - mu * mu
    q = a1
    c = a1
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 100000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qn = (q1 - b * q2) / a
        q1 = q2
        q2 = qn
        q += c * qn
        b += 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h += delh
        ds = q * delh
        s += ds
        if abs(ds / s) < _EPS:
            break
    h = a1 * h
    lk = 0.5 * math.log(math.pi / (2.0 * x)) - x - math.log(s)
    return lk, lk + math.log((mu + x + 0.5 - h) / x)


@numba.njit(cache=True)
def _direct3(nu, x):
    """``log K`` at ``nu - 1``, ``nu``, ``nu + 1`` for ``nu >= 0``."""
    nl = int(nu + 0.5)
    mu = nu - nl
    l0, l1 = _temme_steed(mu, x)
    if nl == 0:
        # K_{nu-1} = K_{1-nu} = K_{(-mu)+1}
        return _temme_steed(-mu, x)[1], l0, l1
    # scaled forward recurrence; values are K / exp(base)
    base = l1
    km = 0.0
    k0 = math.exp(l0 - base)
    k1 = 1.0
    for i in range(1, nl + 1):
        k2 = (mu + i) * 2.0 / x * k1 + k0
        km = k0
        k0 = k1
        k1 = k2
        if k1 > 1e200:
            km *= 1e-200
            k0 *= 1e-200
            k1 *= 1e-200
            base += _LOG_RESCALE
    return math.log(km) + base, math.log(k0) + base, math.log(k1) + base


@numba.njit(cache=True)
def _direct(nu, x):
    nl = int(nu + 0.5)
    mu = nu - nl
    l0, l1 = _temme_steed(mu, x)
    if nl == 0:
        return l0
    if nl == 1:
        return l1
    base = l1
    k0 = math.exp(l0 - base)
    k1 = 1.0
    for i in range(1, nl):
        k2 = (mu + i) * 2.0 / x * k1 + k0
        k0 = k1
        k1 = k2
        if k1 > 1e200:
            k0 *= 1e-200
            k1 *= 1e-200
            base += _LOG_RESCALE
    return math.log(k1) + base


@numba.njit(cache=True)
def _debye(nu, x, signs, coef):
    r = math.sqrt(nu * nu + x * x)
    t2 = (nu / r) ** 2
    series = 0.0
    rk = 1.0
    for k in range(signs.shape[0]):
        rk *= r
        poly = 0.0
        for j in range(coef.shape[1] - 1, -1, -1):
            poly = poly * t2 + coef[k, j]
        series += signs[k] * poly / rk
    shift = nu * math.log(x / (nu + r)) if nu > 0 else 0.0
    return _HALF_LOG_HALF_PI - 0.5 * math.log(r) - r - shift + math.log1p(series)


@numba.njit(cache=True)
def log_k_family(lam, x, step, switch, signs, coef, lk_lo, lk, lk_hi, dlk):
    """
    Fill ``log K_{lam-1}(x)``, ``log K_lam(x)``, ``log K_{lam+1}(x)`` and the
    central difference of ``log K`` in the order, elementwise over 1-D arrays
    ``lam`` and ``x``. The route (direct or Debye) is chosen once per element
    from ``max(|lam|, x)`` and shared by all five evaluations.
    """
    for j in range(x.shape[0]):
        xj = x[j]
        lj = lam[j]
        nu = abs(lj)
        if max(nu, xj) > switch:
            below = _debye(abs(nu - 1.0), xj, signs, coef)
            mid = _debye(nu, xj, signs, coef)
            above = _debye(nu + 1.0, xj, signs, coef)
            hi = _debye(abs(lj + step), xj, signs, coef)
            lo = _debye(abs(lj - step), xj, signs, coef)
        else:
            below, mid, above = _direct3(nu, xj)
            hi = _direct(abs(lj + step), xj)
            lo = _direct(abs(lj - step), xj)
        lk[j] = mid
        if lj >= 0:
            lk_lo[j] = below
            lk_hi[j] = above
        else:
            lk_lo[j] = above
            lk_hi[j] = below
        dlk[j] = (hi - lo) / (2.0 * step)


@numba.njit(cache=True)
def _route(nu, x, debye, signs, coef):
    if debye:
        return _debye(nu, x, signs, coef)
    return _direct(nu, x)


@numba.njit(cache=True)
def log_k_index(lam, x, step, switch, signs, coef):
    """
    Scalar ``log K_lam(x)``, ``log K_{lam+1}(x)`` and the central difference
    of ``log K`` in the order at ``lam``, all on the route chosen at ``lam``.
    """
    debye = max(abs(lam), x) > switch
    lk = _route(abs(lam), x, debye, signs, coef)
    lk1 = _route(abs(lam + 1.0), x, debye, signs, coef)
    hi = _route(abs(lam + step), x, debye, signs, coef)
    lo = _route(abs(lam - step), x, debye, signs, coef)
    return lk, lk1, (hi - lo) / (2.0 * step)


@numba.njit(cache=True)
def _q_eval(om, lam, s_ab, cbar, step, switch, signs, coef):
    lk, lk1, dlk = log_k_index(lam, om, step, switch, signs, coef)
    ratio = math.exp(lk1 - lk)
    q = -lk + (lam - 1.0) * cbar - 0.5 * om * s_ab
    return q, ratio - lam / om - 0.5 * s_ab, cbar - dlk, ratio


@numba.njit(cache=True)
def newton_index(om, lam, abar, bbar, cbar, om_lo, om_hi, lam_lo, lam_hi,
                 step, hstep, switch, signs, coef):
    """
    Projected Newton ascent of ``q(om, lam) = -log K_lam(om) + (lam - 1) cbar
    - om (abar + bbar) / 2`` on a box; compiled twin of
    ``mixfit.update_index_concentration`` (same steps, same stopping rules).
    """
    s_ab = abar + bbar
    om = min(max(om, om_lo), om_hi)
    lam = min(max(lam, lam_lo), lam_hi)
    f, g0, g1, ratio = _q_eval(om, lam, s_ab, cbar, step, switch, signs, coef)
    for _ in range(50):
        free0 = not ((om <= om_lo and g0 < 0) or (om >= om_hi and g0 > 0))
        free1 = not ((lam <= lam_lo and g1 < 0) or (lam >= lam_hi and g1 > 0))
        if not (free0 or free1):
            break
        h00 = lam / om ** 2 + ratio * ratio - (2.0 * lam + 1.0) * ratio / om - 1.0
        _, a0, a1, _ = _q_eval(om, lam + hstep, s_ab, cbar, step, switch, signs, coef)
        _, b0, b1, _ = _q_eval(om, lam - hstep, s_ab, cbar, step, switch, signs, coef)
        h01 = (a0 - b0) / (2.0 * hstep)
        h11 = (a1 - b1) / (2.0 * hstep)
        s0 = 0.0
        s1 = 0.0
        if free0 and free1:
            # -H positive definite?
            if -h00 > 0 and h00 * h11 - h01 * h01 > 0:
                det = h00 * h11 - h01 * h01
                s0 = -(h11 * g0 - h01 * g1) / det
                s1 = -(-h01 * g0 + h00 * g1) / det
            else:
                sc = max(abs(h00), abs(h11), 1.0)
                s0 = g0 / sc
                s1 = g1 / sc
        elif free0:
            if -h00 > 0:
                s0 = -g0 / h00
            else:
                s0 = g0 / max(abs(h00), 1.0)
        else:
            if -h11 > 0:
                s1 = -g1 / h11
            else:
                s1 = g1 / max(abs(h11), 1.0)
        if g0 * s0 + g1 * s1 < 1e-14:
            break
        t = 1.0
        accepted = False
        while t > 1e-12:
            on = min(max(om + t * s0, om_lo), om_hi)
            ln = min(max(lam + t * s1, lam_lo), lam_hi)
            fn, gn0, gn1, rn = _q_eval(on, ln, s_ab, cbar, step, switch, signs, coef)
            if fn >= f:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        done = abs(on - om) <= 1e-12 * (1.0 + abs(om)) and abs(ln - lam) <= 1e-12 * (1.0 + abs(lam))
        om, lam, f, g0, g1, ratio = on, ln, fn, gn0, gn1, rn
        if done:
            break
    return om, lam
