"""Variational relevance vector machines for sparse kernel regression and
binary classification."""
from ._linalg import NumericalError
from .classification import (
    ClassificationModel,
    ClassificationPosterior,
    fit_classification,
    jj_log_bound,
    lower_bound_cls,
    predict_proba,
    update_q_alpha_cls,
    update_q_w_cls,
    update_xi,
)
from .datasets import (
    Dataset,
    bayes_error,
    cross_validate_width,
    gen_sinc,
    gen_two_class,
    load_csv,
    write_csv,
)
from .io import load_model, save_model
from .kernels import KernelSpec, build_design_matrix, kernel_eval
from .regression import (
    FitConfig,
    FitError,
    FitReport,
    RegressionModel,
    RegressionPosterior,
    fit_regression,
    lower_bound,
    moments,
    predict_regression,
    relevance_vectors,
    update_q_alpha,
    update_q_tau,
    update_q_w,
)
from .special import (
    DomainError,
    HyperpriorConfig,
    digamma,
    lambda_xi,
    ln_gamma,
    marginal_weight_log_density,
    sigmoid,
)

__version__ = "0.1.0"
