"""Entropy certificates from adapted metrics: HD * log+ Lip against topological entropy."""

__version__ = "0.1.0"

from .errors import HausLipError  # noqa: E402
from .exact_linalg import IntegerMatrix, char_poly, eigenvalues, entropy, real_jordan  # noqa: E402
from .torus_metric import (analytic_certificate, build_product_metric,  # noqa: E402
                           build_torus_metric, choose_eta, torus_dist)
from .symbolic import Subshift, SymbolicPoint, cylinder_dimension, sft_entropy  # noqa: E402
from .estimators import MetricSample, box_dimension, empirical_lip, empirical_skew  # noqa: E402

__all__ = [
    "HausLipError", "IntegerMatrix", "char_poly", "eigenvalues", "entropy", "real_jordan",
    "analytic_certificate", "build_product_metric", "build_torus_metric", "choose_eta",
    "torus_dist", "Subshift", "SymbolicPoint", "cylinder_dimension", "sft_entropy",
    "MetricSample", "box_dimension", "empirical_lip", "empirical_skew",
]
