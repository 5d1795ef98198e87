"""Partially linear kernel ridge regression across heterogeneous subpopulations."""

from __future__ import annotations

from .eigensystems import DomainError, EigenKernel, Family, TruncationError
from .plkrr import (AggregateModel, DegreesOfFreedomError, PLDataset, RankDeficientError,
                    SubFit, aggregate, boost, fit_heterogeneous, fit_subpopulation, oracle_fit,
                    predict)

__version__ = "0.1.0"

__all__ = [
    "AggregateModel", "DegreesOfFreedomError", "DomainError", "EigenKernel", "Family",
    "PLDataset", "RankDeficientError", "SubFit", "TruncationError", "aggregate", "boost",
    "fit_heterogeneous", "fit_subpopulation", "oracle_fit", "predict", "__version__",
]
