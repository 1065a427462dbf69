"""Quantile correlations, quantile partial correlations and quantile autoregression."""

from __future__ import annotations

from quantcorr.bandwidth import BandwidthRule, bandwidth, bofinger, hall_sheather
from quantcorr.correlation import (
    CorrEstimate,
    qcor,
    qcor_estimate,
    qcor_variance,
    qpcor,
    qpcor_estimate,
    qpcor_variance,
)
from quantcorr.csvio import ColumnSpec, read_series
from quantcorr.diagnostics import PortmanteauResult, box_pierce, qacf_residuals
from quantcorr.errors import NumericalError, QuantCorrError, ValidationError
from quantcorr.numerics import chi_square_sf, empirical_quantile, psi, rho
from quantcorr.qar import (
    Correlogram,
    QarFit,
    SparsityEstimates,
    backward_eliminate,
    fit_qar,
    qpacf,
    sparsity,
)
from quantcorr.quantreg import fit_least_squares, fit_quantile
from quantcorr.simulation import ExperimentReport, run_experiment

__all__ = [
    "BandwidthRule", "bandwidth", "bofinger", "hall_sheather",
    "CorrEstimate", "qcor", "qcor_estimate", "qcor_variance",
    "qpcor", "qpcor_estimate", "qpcor_variance",
    "ColumnSpec", "read_series",
    "PortmanteauResult", "box_pierce", "qacf_residuals",
    "NumericalError", "QuantCorrError", "ValidationError",
    "chi_square_sf", "empirical_quantile", "psi", "rho",
    "Correlogram", "QarFit", "SparsityEstimates",
    "backward_eliminate", "fit_qar", "qpacf", "sparsity",
    "fit_least_squares", "fit_quantile",
    "ExperimentReport", "run_experiment",
]
__version__ = "0.1.0"
