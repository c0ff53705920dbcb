"""Observer algorithms: generic designs and the benchmark instances."""

from .design import DesignTriple, GradientEstimator, RegressorBuilder
from .generic import (
    CoordinateObserver,
    IIObserver,
    KKLObserver,
    KKLPEBObserver,
    Observer,
    PEBObserver,
    SingularManifoldError,
    iio_from_coordinate_observer,
)

__all__ = [
    "CoordinateObserver",
    "DesignTriple",
    "GradientEstimator",
    "IIObserver",
    "KKLObserver",
    "KKLPEBObserver",
    "Observer",
    "PEBObserver",
    "RegressorBuilder",
    "SingularManifoldError",
    "iio_from_coordinate_observer",
]
