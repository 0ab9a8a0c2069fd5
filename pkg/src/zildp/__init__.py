"""zildp: zero-inflated multivariate Laplace privacy with corrected-loss
M-estimation and trade-off accounting."""

__version__ = "0.1.0"

from .distributions import (NoiseParams, laplace_cdf, laplace_quantile,
                            sample_sl, sample_truncated_normal, sample_zil,
                            sl_log_density)
from .estimation import (EstimateReport, LinearModelSpec, OptimOptions,
                         estimate, linear_asyvar, minimize,
                         sandwich_covariance)
from .harness import ExperimentConfig, ResultTable, run_experiment
from .losses import (LossSpec, drcl_subgrad, drcl_value, make_loss,
                     sdrcl_subgrad, sdrcl_value, sl_corrected_subgrad,
                     sl_corrected_value)
from .mechanism import (Dataset, ReleaseBundle, SupportBox, diam_attribute,
                        diam_individual, drdp_release, privacy_report,
                        read_bundle, write_bundle, zil_release)
from .rng import RngStream
from .tradeoff import (PrivacyBudget, TradeoffCurve, F_c, F_c_inverse,
                       beta_c, beta_c_delta, calibrate, delta_profile,
                       delta_profile_zil, empirical_tradeoff, f_eps_delta,
                       t1c_closed_form, tradeoff_shrink)

__all__ = [
    "NoiseParams", "RngStream", "SupportBox", "Dataset", "ReleaseBundle",
    "PrivacyBudget", "TradeoffCurve", "OptimOptions", "EstimateReport",
    "LinearModelSpec", "ExperimentConfig", "ResultTable",
    "sample_sl", "sample_zil", "sample_truncated_normal", "sl_log_density",
    "laplace_cdf", "laplace_quantile",
    "f_eps_delta", "F_c", "F_c_inverse", "beta_c", "beta_c_delta",
    "t1c_closed_form", "empirical_tradeoff", "tradeoff_shrink",
    "delta_profile", "delta_profile_zil", "calibrate",
    "diam_attribute", "diam_individual", "zil_release", "drdp_release",
    "privacy_report", "write_bundle", "read_bundle",
    "LossSpec", "make_loss", "drcl_value", "drcl_subgrad",
    "sl_corrected_value", "sl_corrected_subgrad", "sdrcl_value",
    "sdrcl_subgrad",
    "minimize", "estimate", "sandwich_covariance", "linear_asyvar",
    "run_experiment",
]
