"""
EM fitting of generalized hyperbolic mixtures.

Three learning paradigms share one engine:

``clustering``
    labels are ignored, every row is unlabelled.
``classification``
    labelled rows keep one-hot memberships, unlabelled rows are estimated,
    all rows drive the parameter estimates.
``discriminant``
    one component per class fitted on the labelled rows only; unlabelled
    rows are scored afterwards by posterior probability.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.special import logsumexp

from .exceptions import DomainError, FittingError, NumericalError, ParameterError
from .ghd import GHComponent, _log_density_parts, affine_component, density_and_moments
from .specfun import log_k_index, newton_index

logger = logging.getLogger(__name__)

MODES = ("clustering", "classification", "discriminant")


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Observation matrix with optional labels.

    ``labels`` holds contiguous class indices (``-1`` allowed for rows whose
    class is not recorded at all); ``known_mask`` marks rows whose label is
    used during fitting.
    """

    x: np.ndarray
    labels: np.ndarray | None = None
    known_mask: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] == 0:
            raise DomainError(f"x must be a non-empty (n, p) matrix, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DomainError("x contains non-finite values")
        n = x.shape[0]
        labels = self.labels
        if labels is not None:
            labels = np.asarray(labels).astype(int)
            if labels.shape != (n,):
                raise DomainError("labels must have one entry per row")
        mask = self.known_mask
        if mask is None:
            mask = np.zeros(n, dtype=bool) if labels is None else labels >= 0
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n,):
            raise DomainError("known_mask must have one entry per row")
        if mask.any() and (labels is None or np.any(labels[mask] < 0)):
            raise DomainError("rows marked known must carry a label")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "known_mask", mask)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]

    @property
    def k(self) -> int:
        return int(self.known_mask.sum())

    def n_classes(self) -> int:
        if not self.known_mask.any():
            return 0
        return int(self.labels[self.known_mask].max()) + 1

    def with_x(self, x) -> "Dataset":
        return replace(self, x=x)

    def subset(self, rows) -> "Dataset":
        lab = None if self.labels is None else self.labels[rows]
        return Dataset(self.x[rows], lab, self.known_mask[rows])


@dataclass(frozen=True)
class FitConfig:
    """EM settings; defaults follow the documented design choices."""

    epsilon: float = 1e-5
    max_iter: int = 500
    cov_floor: float = 1e-6
    max_reinit: int = 3
    omega_bounds: tuple = (1e-4, 1e4)
    lambda_bounds: tuple = (-20.0, 20.0)
    init: str = "ward"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise DomainError("epsilon must be > 0")
        if self.max_iter < 1:
            raise DomainError("max_iter must be >= 1")
        if self.init not in ("ward", "random"):
            raise DomainError(f"unknown init {self.init!r}")


@dataclass(eq=False)
class MixtureModel:
    """Fitted GH mixture plus fit metadata."""

    weights: np.ndarray
    components: list
    loglik_trace: list = field(default_factory=list)
    bic: float = float("nan")
    mode: str = "clustering"
    n_obs: int = 0
    converged: bool = False
    n_reinit: int = 0

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or len(w) != len(self.components) or len(w) == 0:
            raise ParameterError("need one positive weight per component")
        if np.any(~(w > 0)) or abs(w.sum() - 1.0) > 1e-12:
            raise ParameterError(f"weights must be positive and sum to 1, got {w}")
        if self.mode not in MODES:
            raise ParameterError(f"unknown mode {self.mode!r}")
        self.weights = w

    @property
    def n_components(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].p

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1] if self.loglik_trace else float("nan")

    def n_parameters(self) -> int:
        return n_free_params(self.n_components, self.p)

    def log_weighted_densities(self, x) -> np.ndarray:
        """``log pi_g + log f_h(x_i | theta_g)`` as an (n, G) matrix."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        cols = [_log_density_parts(x, c)[0] for c in self.components]
        return np.log(self.weights) + np.column_stack(cols)

    def predict_proba(self, x) -> np.ndarray:
        lw = self.log_weighted_densities(x)
        return np.exp(lw - logsumexp(lw, axis=1, keepdims=True))

    def predict(self, x) -> np.ndarray:
        return map_classify(Responsibilities(self.predict_proba(x)))


@dataclass(eq=False)
class Responsibilities:
    """Posterior memberships ``z_hat`` and conditional mixing moments (a, b, c)."""

    z_hat: np.ndarray
    a: np.ndarray | None = None
    b: np.ndarray | None = None
    c: np.ndarray | None = None
    loglik: float = float("nan")


def transform_model(model: MixtureModel, a, b=None) -> MixtureModel:
    """
    The mixture for ``A X + b``; log-likelihoods and BIC shift by the
    Jacobian term ``-n log |det A|``.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    shift = -model.n_obs * np.log(abs(np.linalg.det(a)))
    out = MixtureModel(model.weights.copy(), [affine_component(c, a, b) for c in model.components],
                       loglik_trace=[v + shift for v in model.loglik_trace],
                       bic=model.bic + 2.0 * shift, mode=model.mode, n_obs=model.n_obs,
                       converged=model.converged, n_reinit=model.n_reinit)
    return out


def n_free_params(G: int, p: int) -> int:
    """(G - 1) weights plus lambda, omega, mu, alpha and Sigma per component."""
    return (G - 1) + G * (2 + 2 * p + p * (p + 1) // 2)


def bic(loglik: float, r: int, n: int) -> float:
    """``2 loglik - r log n`` (larger is better)."""
    if n < 1 or r < 1:
        raise DomainError("bic needs n >= 1 and r >= 1")
    return 2.0 * loglik - r * np.log(n)


def aitken_converged(loglik_trace, epsilon: float) -> bool:
    """
    Aitken-accelerated stopping rule on the last three log-likelihoods.

    With ``a = (l2 - l1) / (l1 - l0)`` and the extrapolated limit
    ``l_inf = l1 + (l2 - l1) / (1 - a)``, the fit has converged when
    ``0 < l_inf - l1 < epsilon``. A sequence that has stopped moving
    (``l2 == l1``) counts as converged.
    """
    l0, l1, l2 = (float(v) for v in loglik_trace[-3:])
    if not (np.isfinite(l0) and np.isfinite(l1) and np.isfinite(l2)):
        return False
    step = l2 - l1
    if step == 0.0:
        return True
    prev = l1 - l0
    if prev == 0.0:
        return False
    acc = step / prev
    if acc == 1.0:
        return False
    gap = step / (1.0 - acc)
    return 0.0 < gap < epsilon


def map_classify(resp) -> np.ndarray:
    """Row-wise argmax of ``z_hat``; ties go to the lowest component index."""
    z = resp.z_hat if isinstance(resp, Responsibilities) else np.asarray(resp)
    return np.argmax(z, axis=1)


def _fixed_rows(data: Dataset, mode: str):
    if mode == "clustering":
        return np.zeros(data.n, dtype=bool)
    return data.known_mask


def e_step(data: Dataset, model: MixtureModel) -> Responsibilities:
    """
    Posterior memberships and conditional GIG moments under ``model``.

    Also records the observed log-likelihood of ``model`` on ``data``
    (mixture terms for free rows, labelled-component terms for fixed rows).
    """
    x = data.x
    n, p = x.shape
    G = model.n_components
    lw = np.empty((n, G))
    a = np.empty((n, G))
    b = np.empty((n, G))
    c = np.empty((n, G))
    for g, comp in enumerate(model.components):
        logf, a[:, g], b[:, g], c[:, g] = density_and_moments(x, comp)
        lw[:, g] = np.log(model.weights[g]) + logf
        bad = ~np.isfinite(lw[:, g])
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise FittingError(f"non-finite density at row {row}, component {g}")
    fixed = _fixed_rows(data, model.mode)
    norm = logsumexp(lw, axis=1)
    z = np.exp(lw - norm[:, None])
    ll = float(norm[~fixed].sum())
    if fixed.any():
        lab = data.labels[fixed]
        if lab.max() >= G:
            raise FittingError(f"label {lab.max()} has no component (G={G})")
        z[fixed] = 0.0
        z[np.flatnonzero(fixed), lab] = 1.0
        ll += float(lw[np.flatnonzero(fixed), lab].sum())
    return Responsibilities(z, a, b, c, ll)


_HESS_STEP = 1e-4


def _q_index(om, lam, abar, bbar, cbar):
    """GIG expected log-likelihood ``q(omega, lambda)`` and its gradient."""
    lk, lk1, dlk = log_k_index(lam, om)
    q = -lk + (lam - 1.0) * cbar - 0.5 * om * (abar + bbar)
    ratio = math.exp(lk1 - lk)
    # d/dx log K_l(x) = l/x - K_{l+1}(x)/K_l(x)
    g_om = ratio - lam / om - 0.5 * (abar + bbar)
    g_lam = cbar - dlk
    return q, np.array([g_om, g_lam]), ratio


def _q_hessian(om, lam, ratio, abar, bbar, cbar):
    # d/dx K_{l+1}/K_l = R^2 - (2l + 1) R / x - 1; the lambda column by differencing
    h_oo = lam / om ** 2 + ratio * ratio - (2.0 * lam + 1.0) * ratio / om - 1.0
    g_hi = _q_index(om, lam + _HESS_STEP, abar, bbar, cbar)[1]
    g_lo = _q_index(om, lam - _HESS_STEP, abar, bbar, cbar)[1]
    col = (g_hi - g_lo) / (2.0 * _HESS_STEP)
    return np.array([[h_oo, col[0]], [col[0], col[1]]])


def update_index_concentration(omega, lam, abar, bbar, cbar, config=FitConfig(), compiled=True):
    """
    Maximize ``-log K_lam(om) + (lam - 1) cbar - om (abar + bbar) / 2``
    over the box in ``config``; never returns a worse point than the start.

    The objective is concave in (omega, lambda), so a projected Newton
    iteration with backtracking is used, warm-started at the previous values.
    ``compiled=False`` runs the same iteration in plain Python (reference
    for the compiled kernel).
    """
    if compiled:
        return newton_index(float(omega), float(lam), float(abar), float(bbar), float(cbar),
                            *config.omega_bounds, *config.lambda_bounds, _HESS_STEP)
    lo = np.array([config.omega_bounds[0], config.lambda_bounds[0]])
    hi = np.array([config.omega_bounds[1], config.lambda_bounds[1]])
    x = np.clip([float(omega), float(lam)], lo, hi)
    f, g, ratio = _q_index(x[0], x[1], abar, bbar, cbar)
    for _ in range(50):
        free = ~(((x <= lo) & (g < 0)) | ((x >= hi) & (g > 0)))
        if not free.any():
            break
        H = _q_hessian(x[0], x[1], ratio, abar, bbar, cbar)[np.ix_(free, free)]
        step = np.zeros(2)
        try:
            np.linalg.cholesky(-H)
            step[free] = np.linalg.solve(H, -g[free])
        except np.linalg.LinAlgError:
            step[free] = g[free] / max(np.abs(np.diag(H)).max(), 1.0)
        decrement = float(g @ step)
        if decrement < 1e-14:
            break
        t = 1.0
        while t > 1e-12:
            xn = np.clip(x + t * step, lo, hi)
            fn, gn, rn = _q_index(xn[0], xn[1], abar, bbar, cbar)
            if fn >= f:
                break
            t *= 0.5
        else:
            break
        done = np.all(np.abs(xn - x) <= 1e-12 * (1.0 + np.abs(x)))
        x, f, g, ratio = xn, fn, gn, rn
        if done:
            break
    return float(x[0]), float(x[1])


def _floor_cov(s, rel):
    s = 0.5 * (s + s.T)
    vals, vecs = np.linalg.eigh(s)
    floor = rel * max(np.trace(s), np.finfo(float).tiny) / s.shape[0]
    if vals.min() >= floor:
        return s
    vals = np.maximum(vals, floor)
    return (vecs * vals) @ vecs.T


def _update_location(x, w, a, b):
    """Weighted closed-form (mu, alpha, Sigma) for one component."""
    ng = w.sum()
    sa, sb = w @ a, w @ b
    xs = w @ x
    xb = (w * b) @ x
    den = sa * sb - ng * ng
    if den > 1e-12 * ng * ng:
        mu = (sa * xb - ng * xs) / den
        alpha = (xs - ng * mu) / sa
    else:
        # mixing variable is (numerically) degenerate: symmetric update
        mu = xb / sb
        alpha = np.zeros(x.shape[1])
    d = x - mu
    r = xs / ng - mu
    s = (d.T * (w * b)) @ d / ng - np.outer(alpha, r) - np.outer(r, alpha) + (sa / ng) * np.outer(alpha, alpha)
    return mu, alpha, s


def m_step(data: Dataset, resp: Responsibilities, previous: MixtureModel | None = None,
           config: FitConfig = FitConfig(), *, symmetric: bool = False) -> MixtureModel:
    """
    Maximize the expected complete-data log-likelihood.

    ``symmetric=True`` holds ``alpha`` at zero (location and scale then
    reduce to b-weighted mean and scatter). ``previous`` supplies the
    starting point for the (omega, lambda) search and the fit mode.
    """
    x = data.x
    n, p = x.shape
    z = resp.z_hat
    G = z.shape[1]
    ng = z.sum(axis=0)
    if np.any(ng <= 0):
        raise FittingError(f"empty component(s) {np.flatnonzero(ng <= 0).tolist()}")
    comps = []
    for g in range(G):
        w = z[:, g]
        a = resp.a[:, g] if resp.a is not None else np.ones(n)
        b = resp.b[:, g] if resp.b is not None else np.ones(n)
        if symmetric:
            mu = (w * b) @ x / (w @ b)
            alpha = np.zeros(p)
            d = x - mu
            s = (d.T * (w * b)) @ d / ng[g]
        else:
            mu, alpha, s = _update_location(x, w, a, b)
        s = _floor_cov(s, config.cov_floor)
        if previous is not None:
            om0, lam0 = previous.components[g].omega, previous.components[g].lam
        else:
            om0, lam0 = 1.0, -0.5
        if resp.c is not None:
            abar, bbar, cbar = w @ a / ng[g], w @ b / ng[g], w @ resp.c[:, g] / ng[g]
            om, lam = update_index_concentration(om0, lam0, abar, bbar, cbar, config)
        else:
            om, lam = om0, lam0
        comps.append(GHComponent(lam, om, mu, s, alpha))
    weights = ng / ng.sum()
    weights = weights / weights.sum()
    mode = previous.mode if previous is not None else "clustering"
    return MixtureModel(weights, comps, mode=mode, n_obs=n)


def _hard_init(data: Dataset, z0: np.ndarray, mode: str, config: FitConfig) -> MixtureModel:
    """Model from hard memberships: class means/covariances, alpha = 0, omega = 1, lambda = -1/2."""
    rows = z0.sum(axis=1) > 0
    sub = Dataset(data.x[rows])
    resp = Responsibilities(z0[rows].astype(float))
    model = m_step(sub, resp, None, config, symmetric=True)
    model.mode = mode
    return model


def _standardized(x):
    sd = x.std(axis=0)
    sd[sd == 0] = 1.0
    return (x - x.mean(axis=0)) / sd


def ward_tree(x):
    """Ward linkage on column-standardized data (reused across G)."""
    if x.shape[0] < 2:
        return None
    return linkage(_standardized(x), method="ward")


def _ward_partition(tree, n, G):
    if G == 1 or tree is None:
        return np.zeros(n, dtype=int)
    lab = fcluster(tree, G, criterion="maxclust") - 1
    # relabel by first appearance so the result is order-canonical
    _, first = np.unique(lab, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    return remap[lab]


def initial_memberships(data: Dataset, G: int, mode: str, config: FitConfig = FitConfig(),
                        rng=None, tree=None) -> np.ndarray:
    """Hard (n, G) starting memberships for one EM run."""
    n = data.n
    z0 = np.zeros((n, G))
    fixed = _fixed_rows(data, mode)
    if mode == "clustering":
        if config.init == "random":
            lab = np.random.default_rng(rng).integers(0, G, size=n)
        else:
            if tree is None:
                tree = ward_tree(data.x)
            lab = _ward_partition(tree, n, G)
        if lab.max() + 1 < G:
            raise FittingError(f"initializer produced {lab.max() + 1} < {G} groups")
        z0[np.arange(n), lab] = 1.0
    else:
        # labelled rows seed the classes; unlabelled rows enter at the first E-step
        z0[np.flatnonzero(fixed), data.labels[fixed]] = 1.0
    return z0


def _reseed(data, model, resp, g, mode):
    """Hard memberships with component ``g`` rebuilt from the worst-fitting free rows."""
    n, p = data.x.shape
    G = model.n_components
    fixed = _fixed_rows(data, mode)
    lab = map_classify(resp)
    free = np.flatnonzero(~fixed)
    m = min(len(free), max(2 * (p + 1), n // (2 * G)))
    fit = logsumexp(model.log_weighted_densities(data.x), axis=1)
    worst = free[np.argsort(fit[free], kind="stable")[:m]]
    lab = lab.copy()
    lab[worst] = g
    z0 = np.zeros((n, G))
    z0[np.arange(n), lab] = 1.0
    if fixed.any():
        z0[fixed] = 0.0
        z0[np.flatnonzero(fixed), data.labels[fixed]] = 1.0
    return z0


def fit_em(data: Dataset, G: int, mode: str = "clustering", config: FitConfig = FitConfig(),
           *, init_z=None, rng=None, tree=None) -> tuple[MixtureModel, Responsibilities]:
    """
    One EM run with ``G`` components.

    Returns the final model (with ``loglik_trace`` and ``bic`` filled in) and
    the responsibilities of its last E-step.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    n, p = data.x.shape
    fixed = _fixed_rows(data, mode)
    if init_z is None:
        init_z = initial_memberships(data, G, mode, config, rng, tree)
    init_z = np.asarray(init_z, dtype=float)
    if init_z.shape != (n, G):
        raise DomainError(f"init_z must have shape {(n, G)}")
    if mode != "clustering":
        if fixed.any() and data.labels[fixed].max() >= G:
            raise FittingError("more labelled classes than components")
        init_z = init_z.copy()
        init_z[fixed] = 0.0
        init_z[np.flatnonzero(fixed), data.labels[fixed]] = 1.0

    ng0 = init_z.sum(axis=0)
    if np.any(ng0 < 2):
        raise FittingError(f"component(s) {np.flatnonzero(ng0 < 2).tolist()} start with < 2 rows")
    model = _hard_init(data, init_z, mode, config)
    trace = []
    n_reinit = 0
    converged = False
    resp = None
    for _ in range(config.max_iter):
        resp = e_step(data, model)
        trace.append(resp.loglik)
        if len(trace) >= 3 and aitken_converged(trace[-3:], config.epsilon):
            converged = True
            break
        small = np.flatnonzero(resp.z_hat.sum(axis=0) < p + 1)
        if small.size:
            if mode == "discriminant" or n_reinit >= config.max_reinit:
                raise FittingError(
                    f"component(s) {small.tolist()} collapsed below p+1={p + 1} rows "
                    f"after {n_reinit} re-initializations")
            n_reinit += 1
            logger.info("re-initializing component %d (G=%d)", small[0], G)
            z0 = _reseed(data, model, resp, int(small[0]), mode)
            model = _hard_init(data, z0, mode, config)
            trace = []
            continue
        model = m_step(data, resp, model, config)
    model.loglik_trace = trace
    model.converged = converged
    model.n_reinit = n_reinit
    model.n_obs = n
    model.bic = bic(trace[-1], model.n_parameters(), n)
    return model, resp


def fit_mixture(data: Dataset, mode: str = "clustering", g_range=(1, 6),
                config: FitConfig = FitConfig(), rng=None) -> MixtureModel:
    """
    Fit under one paradigm and return the selected model.

    Clustering searches ``g_range`` (inclusive) by BIC. Classification and
    discriminant analysis use one component per labelled class. In
    discriminant mode the fit uses the labelled rows only; score the
    unlabelled rows with :meth:`MixtureModel.predict_proba`.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    if mode == "discriminant":
        train = data.subset(data.known_mask)
        G = train.n_classes()
        if G < 1:
            raise DomainError("discriminant analysis needs labelled rows")
        counts = np.bincount(train.labels, minlength=G)
        if np.any(counts == 0):
            raise DomainError(f"classes without labelled rows: {np.flatnonzero(counts == 0).tolist()}")
        model, _ = fit_em(train, G, mode, config)
        return model
    if mode == "classification":
        G = data.n_classes()
        if G < 1:
            raise DomainError("classification needs labelled rows")
        counts = np.bincount(data.labels[data.known_mask], minlength=G)
        if np.any(counts == 0):
            raise DomainError(f"classes without labelled rows: {np.flatnonzero(counts == 0).tolist()}")
        model, _ = fit_em(data, G, mode, config)
        return model

    g_min, g_max = g_range
    if not 1 <= g_min <= g_max:
        raise DomainError(f"invalid component range {g_range}")
    # one independent stream per candidate G (only consumed by random starts)
    seeds = np.random.default_rng(rng).spawn(g_max - g_min + 1)
    tree = ward_tree(data.x) if config.init == "ward" else None
    best, causes = None, []
    for G, seed in zip(range(g_min, g_max + 1), seeds):
        if G > data.n // 2:
            causes.append(f"G={G}: too few rows ({data.n})")
            continue
        try:
            model, _ = fit_em(data, G, mode, config, rng=seed, tree=tree)
        except (FittingError, ParameterError, NumericalError, np.linalg.LinAlgError) as exc:
            causes.append(f"G={G}: {exc}")
            logger.info("fit with G=%d failed: %s", G, exc)
            continue
        if best is None or model.bic > best.bic:
            best = model
    if best is None:
        raise FittingError("every candidate fit failed", causes)
    return best
