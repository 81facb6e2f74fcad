"""
Greedy forward selection of HMMDR variables by BIC differences.

A candidate ``j`` joins the selected set ``s'`` when

    BIC_clust(s' + j) - [BIC_clust(s') + BIC_reg(j | s')] > 0,

i.e. when modelling it as part of the mixture beats explaining it by a
linear regression on the already selected variables. At the first step the
bracket is the single-component fit on the candidate alone.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .exceptions import DomainError
from .mixfit import Dataset, FitConfig, MixtureModel, fit_em, fit_mixture

logger = logging.getLogger(__name__)

VAR_FLOOR = 1e-12
RIDGE = 1e-8


@dataclass(eq=False)
class FeatureSelection:
    """Selected columns in inclusion order, their BIC differences, and the final fit."""

    selected: list
    bic_diffs: list
    best_model: MixtureModel | None = None
    history: list = field(default_factory=list)

    @property
    def columns(self) -> list:
        """Selected columns in ascending order (the column order of ``best_model``)."""
        return sorted(self.selected)


def bic_reg(target, predictors=None) -> float:
    """
    BIC of the Gaussian linear regression of ``target`` on ``predictors``
    (plus intercept), ``2 loglik - (q + 2) log n``.
    """
    y = np.asarray(target, dtype=float).ravel()
    n = y.shape[0]
    if n < 2:
        raise DomainError("bic_reg needs at least 2 rows")
    if predictors is None:
        p = np.empty((n, 0))
    else:
        p = np.asarray(predictors, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if p.shape[0] != n:
            raise DomainError("target and predictors differ in length")
    q = p.shape[1]
    design = np.column_stack([np.ones(n), p])
    gram = design.T @ design
    rhs = design.T @ y
    if np.linalg.matrix_rank(design) < q + 1:
        coef = linalg.solve(gram + RIDGE * np.eye(q + 1), rhs, assume_a="pos")
    else:
        coef = linalg.lstsq(design, y)[0]
    resid = y - design @ coef
    s2 = max(float(resid @ resid) / n, VAR_FLOOR)
    loglik = -0.5 * n * (np.log(2.0 * np.pi * s2) + 1.0)
    return 2.0 * loglik - (q + 2) * np.log(n)


class _FitCache:
    """Best mixture per column subset for one set of variables."""

    def __init__(self, data: Dataset, mode, g_range, config, seed):
        self.data = data
        self.mode = mode
        self.g_range = g_range
        self.config = config
        self.seed = seed
        self._models = {}
        self._null = {}

    def _rows(self):
        # discriminant fits only ever see labelled rows; the comparison
        # models must be scored on the same rows
        if self.mode == "discriminant":
            return self.data.known_mask
        return slice(None)

    def sub(self, cols):
        return self.data.with_x(self.data.x[:, list(cols)])

    def mixture(self, cols) -> MixtureModel:
        key = tuple(sorted(cols))
        if key not in self._models:
            rng = np.random.default_rng([self.seed, *key])
            self._models[key] = fit_mixture(self.sub(key), self.mode, self.g_range, self.config, rng)
        return self._models[key]

    def single(self, col) -> MixtureModel:
        """No-clustering (G = 1) model on one column."""
        if col not in self._null:
            x = self.data.x[self._rows(), col]
            self._null[col], _ = fit_em(Dataset(x), 1, "clustering", self.config)
        return self._null[col]

    def regression(self, col, given) -> float:
        rows = self._rows()
        return bic_reg(self.data.x[rows, col], self.data.x[rows][:, list(given)])


def bic_diff(candidate, current: FeatureSelection, cache: _FitCache) -> float:
    """BIC difference for adding ``candidate`` to ``current.selected``."""
    if candidate in current.selected:
        raise DomainError(f"column {candidate} is already selected")
    mix = cache.mixture([*current.selected, candidate])
    if not current.selected:
        if mix.n_components == 1:
            # the best clustering model is the no-clustering model itself
            return 0.0
        return mix.bic - cache.single(candidate).bic
    with_cand = mix.bic
    base = cache.mixture(current.selected).bic
    return with_cand - (base + cache.regression(candidate, current.selected))


def greedy_select(data: Dataset, config: FitConfig = FitConfig(), mode="clustering",
                  g_range=(1, 6), seed=0) -> FeatureSelection:
    """
    Forward search over the columns of ``data.x``.

    At every step each remaining candidate is scored with :func:`bic_diff`;
    the best (lowest index on ties) is added if its difference is positive.
    Candidates scoring ``<= 0`` are dropped for the rest of the search.
    The first winner is always kept so the result is never empty.
    """
    d = data.p
    if d < 1:
        raise DomainError("need at least one variable")
    cache = _FitCache(data, mode, g_range, config, seed)
    sel = FeatureSelection([], [])
    pool = list(range(d))
    while pool:
        scores = [bic_diff(j, sel, cache) for j in pool]
        sel.history.append(dict(zip(pool, scores)))
        best = int(np.argmax(scores))
        if sel.selected and scores[best] <= 0:
            break
        sel.selected.append(pool[best])
        sel.bic_diffs.append(scores[best])
        logger.info("selected column %d (diff %.3f)", pool[best], scores[best])
        pool = [j for j, s in zip(pool, scores) if s > 0 and j != pool[best]]
    sel.best_model = cache.mixture(sel.selected)
    return sel
