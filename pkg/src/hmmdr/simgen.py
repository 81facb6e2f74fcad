"""
Simulated data sets used to exercise the method.

Scenario I: three well-separated Gaussian components in three dimensions.
Scenario II: Scenario I plus five standard-normal noise columns.
Scenario III: three skewed GH components with random scale matrices.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .exceptions import DomainError
from .ghd import GHComponent, sample_gh
from .mixfit import Dataset

SCENARIO1_MEANS = np.array([[0.0, -2.0, 0.0], [2.0, 4.0, 0.0], [-2.0, -4.0, 2.0]])
SCENARIO1_WEIGHTS = np.full(3, 1.0 / 3.0)
SCENARIO1_COV = 0.5 * np.eye(3)


@dataclass(frozen=True)
class ScenarioSpec:
    """
    ``n`` is the total size for scenarios 1 and 2 and the per-component size
    for scenario 3; ``p`` only matters for scenario 3.
    """

    scenario: int
    n: int
    p: int = 3
    seed: int = 0
    lam: float = 1.0
    omega: float = 1.0
    mean_scale: float = 2.0

    def __post_init__(self):
        if self.scenario not in (1, 2, 3):
            raise DomainError(f"unknown scenario {self.scenario}")
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.scenario == 3 and self.p < 2:
            raise DomainError("scenario 3 needs p >= 2")
        rows = self.n * (3 if self.scenario == 3 else 1)
        dim = {1: 3, 2: 8, 3: self.p}[self.scenario]
        if rows < 3 * (dim + 2):
            warnings.warn(f"{rows} rows may be too few to fit {dim}-dimensional components",
                          stacklevel=2)


def _unlabelled_truth(x, labels):
    return Dataset(x, labels, np.zeros(len(labels), dtype=bool))


def scenario1(n, rng=None) -> Dataset:
    """``n`` draws from the Scenario I Gaussian mixture; ``labels`` hold the truth."""
    if n < 3:
        raise DomainError("scenario 1 needs n >= 3")
    rng = np.random.default_rng(rng)
    labels = rng.choice(3, size=n, p=SCENARIO1_WEIGHTS)
    chol = np.linalg.cholesky(SCENARIO1_COV)
    x = SCENARIO1_MEANS[labels] + rng.standard_normal((n, 3)) @ chol.T
    return _unlabelled_truth(x, labels)


def scenario2(n, rng=None) -> Dataset:
    """Scenario I followed by five independent N(0, 1) columns (same stream)."""
    if n < 3:
        raise DomainError("scenario 2 needs n >= 3")
    rng = np.random.default_rng(rng)
    base = scenario1(n, rng)
    noise = rng.standard_normal((n, 5))
    return _unlabelled_truth(np.hstack([base.x, noise]), base.labels)


def random_spd(p, rng, low=0.5, high=2.0) -> np.ndarray:
    """``Q D Q'`` with Haar-random orthogonal ``Q`` and ``D ~ U[low, high]``."""
    q = stats.ortho_group.rvs(p, random_state=rng) if p > 1 else np.ones((1, 1))
    d = rng.uniform(low, high, size=p)
    s = (q * d) @ q.T
    return 0.5 * (s + s.T)


def scenario3_components(p, rng, lam=1.0, omega=1.0, mean_scale=2.0):
    rng = np.random.default_rng(rng)
    comps = []
    for _ in range(3):
        mu = mean_scale * rng.standard_normal(p)
        comps.append(GHComponent(lam, omega, mu, random_spd(p, rng), -np.ones(p)))
    return comps


def scenario3(p, n_per_component=40, rng=None, *, lam=1.0, omega=1.0, mean_scale=2.0) -> Dataset:
    """Three GH components (skewness all -1) with ``n_per_component`` rows each."""
    if p < 2:
        raise DomainError("scenario 3 needs p >= 2")
    if n_per_component < 1:
        raise DomainError("n_per_component must be positive")
    rng = np.random.default_rng(rng)
    comps = scenario3_components(p, rng, lam, omega, mean_scale)
    x = np.vstack([sample_gh(c, rng, n_per_component) for c in comps])
    labels = np.repeat(np.arange(3), n_per_component)
    return _unlabelled_truth(x, labels)


def simulate(spec: ScenarioSpec) -> Dataset:
    rng = np.random.default_rng(spec.seed)
    if spec.scenario == 1:
        return scenario1(spec.n, rng)
    if spec.scenario == 2:
        return scenario2(spec.n, rng)
    return scenario3(spec.p, spec.n, rng, lam=spec.lam, omega=spec.omega,
                     mean_scale=spec.mean_scale)
