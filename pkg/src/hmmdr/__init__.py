"""
Mixtures of generalized hyperbolic distributions with dimension reduction.

The scikit-learn style entry points are :class:`GHMixture` and
:class:`HMMDR`; the functional layer lives in the submodules.
"""

from .estimators import HMMDR, GHMixture
from .exceptions import (DomainError, FittingError, HMMDRError, InputError, NumericalError,
                         ParameterError, PipelineError)
from .ghd import GHComponent
from .metrics import ari, confusion
from .mixfit import Dataset, FitConfig, MixtureModel, fit_em, fit_mixture
from .pipeline import HmmdrResult, PipelineConfig, run_hmmdr
from .simgen import ScenarioSpec, simulate

__version__ = "0.1.0"

__all__ = [
    "HMMDR", "GHMixture", "GHComponent", "Dataset", "FitConfig", "MixtureModel",
    "PipelineConfig", "HmmdrResult", "ScenarioSpec", "fit_em", "fit_mixture", "run_hmmdr",
    "simulate", "ari", "confusion", "HMMDRError", "DomainError", "ParameterError",
    "NumericalError", "FittingError", "PipelineError", "InputError",
]
