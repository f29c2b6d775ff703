"""Componentwise shrinkage for many normal means: estimators, exact risk, SURE, CV and NPEB."""
from .cv import CvCriterion, PanelSample, cv_holdout, cv_loo, select_cv
from .density import BandwidthRule, KernelDensity, bandwidth, eval_kde
from .estimators import (Kind, ShrinkageRule, SpikeNormal, apply_rule, discrete_oracle_m, lasso_m,
                         pretest_m, ridge_m, spike_normal_optimal_m, tweedie_m)
from .ingest import RawEstimates, destudentize, orthogonalize, studentize
from .npeb import DiscreteMixture, fit_em, npeb_m
from .numerics import (RegParam, SeedSpec, gauss_hermite, minimize_scalar, std_normal_cdf,
                       std_normal_pdf)
from .risk import (compound_risk, cw_risk, cw_risk_lasso, cw_risk_pretest, cw_risk_ridge, int_risk,
                   int_risk_quadrature, oracle_lambda, oracle_zeros_risk, ridge_oracle_lambda,
                   risk_surface, risk_decomposition)
from .simulate import (SimConfig, SimResult, compound_loss, draw_means, draw_panel, draw_sample,
                       run_study, simulate_optimal_risk)
from .sure import SureCriterion, select_sure, sure_oracle_gap, sure_value

__version__ = "0.1.0"
