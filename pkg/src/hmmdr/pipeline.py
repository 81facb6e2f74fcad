"""
The HMMDR loop.

1. fit a GH mixture on the current variables;
2. estimate the HMMDR directions from the fit;
3. project and greedily select HMMDR variables;
4. refit on the selected variables;
5. go back to 2 until the selection keeps every current variable.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DomainError, HMMDRError, PipelineError
from .featsel import FeatureSelection, greedy_select
from .mixfit import (MODES, Dataset, FitConfig, MixtureModel, fit_mixture, map_classify,
                     transform_model)
from .subspace import (MOMENTS, SubspaceBasis, kernel_matrix, overall_covariance, principal_basis,
                       project, solve_directions)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PipelineConfig:
    """Settings of one HMMDR run."""

    g_range: tuple = (1, 6)
    fit: FitConfig = field(default_factory=FitConfig)
    standardize: bool = True
    max_outer: int = 10
    moments: str = "exact"

    def __post_init__(self):
        g_min, g_max = self.g_range
        if not 1 <= g_min <= g_max:
            raise DomainError(f"invalid component range {self.g_range}")
        if self.max_outer < 1:
            raise DomainError("max_outer must be >= 1")
        if self.moments not in MOMENTS:
            raise DomainError(f"moments must be one of {MOMENTS}")


@dataclass(eq=False)
class HmmdrResult:
    """
    Outcome of :func:`run_hmmdr`.

    ``loadings`` maps (standardized) input columns to the final HMMDR
    variables, ``projected = ((x - center) / scale) @ loadings``. In
    discriminant mode ``assignments`` and ``posterior`` cover the unknown rows
    (``scored_rows``); otherwise every row.
    """

    final_model: MixtureModel
    basis_history: list
    selected_features: FeatureSelection
    assignments: np.ndarray
    projected: np.ndarray
    iterations: int
    loadings: np.ndarray
    eigenvalues: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    posterior: np.ndarray
    scored_rows: np.ndarray
    mode: str = "clustering"

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return ((x - self.center) / self.scale) @ self.loadings


def standardize(x):
    """Column means, scales (population sd, 1 for constant columns), scaled matrix."""
    x = np.asarray(x, dtype=float)
    center = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    return center, scale, (x - center) / scale


def split_known(labels, rng=None, p_known=0.5) -> np.ndarray:
    """
    Mark each row known with probability ``p_known``; a class left without
    a known row is redrawn, and after repeated failure (or ``p_known = 0``)
    one of its rows is picked at random.
    """
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise DomainError("labels must be a non-empty vector")
    if not 0.0 <= p_known <= 1.0:
        raise DomainError("p_known must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    known = rng.uniform(size=labels.size) < p_known
    for cls in np.unique(labels):
        rows = np.flatnonzero(labels == cls)
        tries = 0
        while not known[rows].any() and p_known > 0 and tries < 100:
            known[rows] = rng.uniform(size=rows.size) < p_known
            tries += 1
        if not known[rows].any():
            known[rng.choice(rows)] = True
    return known


def _stage(name, it, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except HMMDRError as exc:
        raise PipelineError(name, it, exc) from exc
    except (ValueError, np.linalg.LinAlgError, FloatingPointError) as exc:
        raise PipelineError(name, it, exc) from exc


def _training_rows(data: Dataset, mode):
    return data.known_mask if mode == "discriminant" else np.ones(data.n, dtype=bool)


def _directions(model, x, it, moments):
    sigma = _stage("directions", it, overall_covariance, x)
    m = _stage("directions", it, kernel_matrix, model, sigma, moments)
    basis = _stage("directions", it, solve_directions, m, sigma)
    if basis.d == 0:
        # single component: the kernel vanishes, fall back to principal axes
        basis = _stage("directions", it, principal_basis, sigma)
    return basis


def run_hmmdr(data: Dataset, mode="clustering", config: PipelineConfig = PipelineConfig(),
              rng=None) -> HmmdrResult:
    """
    Run the HMMDR loop on ``data`` under one learning paradigm.

    Parameters
    ----------
    data : Dataset
        ``labels``/``known_mask`` are used in classification and discriminant
        modes and ignored in clustering.
    mode : {"clustering", "classification", "discriminant"}
    config : PipelineConfig
    rng : seed or numpy Generator
        Master seed; every fit draws from a stream derived from it.

    Returns
    -------
    HmmdrResult

    Raises
    ------
    PipelineError
        A stage failed; names the stage and the outer iteration.
    """
    if mode not in MODES:
        raise DomainError(f"unknown mode {mode!r}")
    if mode != "clustering" and not data.known_mask.any():
        raise DomainError(f"{mode} needs labelled rows")
    seed = int(np.random.default_rng(rng).integers(2**63 - 1))
    p = data.p
    if config.standardize:
        center, scale, x = standardize(data.x)
    else:
        center, scale, x = np.zeros(p), np.ones(p), data.x.copy()
    train = _training_rows(data, mode)

    current = data.with_x(x)
    loadings = np.eye(p)
    model = _stage("fit", 1, fit_mixture, current, mode, config.g_range, config.fit,
                   np.random.default_rng([seed, 0]))
    history = []
    it = 0
    sel = None
    eigenvalues = np.ones(p)
    for it in range(1, config.max_outer + 1):
        basis = _directions(model, current.x[train], it, config.moments)
        history.append(basis)
        z = _stage("select", it, project, current.x, basis)
        if current.p == 1 and sel is not None:
            # one variable left: the direction only rescales it, so the
            # forced selection and the refit follow by equivariance
            c = basis.directions[0, 0]
            model = _stage("refit", it, transform_model, model, [[c]])
            sel = FeatureSelection([0], list(sel.bic_diffs[:1]), model, sel.history)
            loadings = loadings * c
            eigenvalues = basis.eigenvalues
            current = current.with_x(z)
            break
        sel = _stage("select", it, greedy_select, current.with_x(z), config.fit, mode,
                     config.g_range, seed + it)
        cols = sel.columns
        loadings = loadings @ basis.directions[:, cols]
        eigenvalues = basis.eigenvalues[cols]
        current = current.with_x(z[:, cols])
        model = sel.best_model
        logger.info("iteration %d: kept %d of %d variables, G=%d",
                    it, len(cols), basis.d, model.n_components)
        if len(cols) == basis.d:
            break

    if mode == "discriminant":
        scored = np.flatnonzero(~data.known_mask)
    else:
        scored = np.arange(data.n)
    post = model.predict_proba(current.x[scored]) if scored.size else np.empty((0, model.n_components))
    if mode == "classification" and data.known_mask.any():
        # labelled rows keep their labels
        known = data.known_mask[scored]
        post[known] = 0.0
        post[np.flatnonzero(known), data.labels[scored][known]] = 1.0
    return HmmdrResult(
        final_model=model,
        basis_history=history,
        selected_features=sel,
        assignments=map_classify(post),
        projected=current.x,
        iterations=it,
        loadings=loadings,
        eigenvalues=eigenvalues,
        center=center,
        scale=scale,
        posterior=post,
        scored_rows=scored,
        mode=mode,
    )
