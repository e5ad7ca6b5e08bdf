"""Higher-order informational interactions (O-information) among time-series channels.

Two estimators are available: a closed-form Gaussian one (covariance
log-determinants) and a matrix-based Renyi entropy one (exact spectrum or
randomized trace estimation). :mod:`hoinfo.views` sweeps all channel pairs,
triplets and quadruplets.
"""

__version__ = "0.1.0"

from .core import (
    Defect,
    Estimator,
    EstimatorConfig,
    InteractionTensor,
    PairwiseMatrix,
    TimeSeriesMatrix,
    load_timeseries,
    read_tensor,
    standardize,
    write_tensor,
)
from .errors import (
    DefectThresholdExceeded,
    DegenerateBandwidthError,
    EstimatorError,
    HoiError,
    InputError,
    SingularCovarianceError,
)
from .gaussian import (
    CovarianceMatrix,
    covariance,
    gaussian_dtc,
    gaussian_entropy,
    gaussian_oinfo,
    gaussian_tc,
)
from .renyi import (
    GramMatrix,
    ProbeSet,
    batch_entropy,
    gram,
    joint_gram,
    pairwise_mi,
    renyi_entropy_exact,
    renyi_entropy_randomized,
    renyi_oinfo,
)
from .views import build_order_view, build_pairwise_view, enumerate_tuples, sparsify_top_fraction

__all__ = [
    "CovarianceMatrix",
    "Defect",
    "DefectThresholdExceeded",
    "DegenerateBandwidthError",
    "Estimator",
    "EstimatorConfig",
    "EstimatorError",
    "GramMatrix",
    "HoiError",
    "InputError",
    "InteractionTensor",
    "PairwiseMatrix",
    "ProbeSet",
    "SingularCovarianceError",
    "TimeSeriesMatrix",
    "batch_entropy",
    "build_order_view",
    "build_pairwise_view",
    "covariance",
    "enumerate_tuples",
    "gaussian_dtc",
    "gaussian_entropy",
    "gaussian_oinfo",
    "gaussian_tc",
    "gram",
    "joint_gram",
    "load_timeseries",
    "pairwise_mi",
    "read_tensor",
    "renyi_entropy_exact",
    "renyi_entropy_randomized",
    "renyi_oinfo",
    "sparsify_top_fraction",
    "standardize",
    "write_tensor",
]
