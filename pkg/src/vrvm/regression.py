"""Variational relevance vector regression.

The posterior is approximated by Q(w) Q(alpha) Q(tau) with a Gaussian
over the weights and independent Gammas over the weight precisions and
the noise precision.  Each factor has a closed-form coordinate-ascent
update, and the lower bound is evaluated exactly after every sweep.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._linalg import NumericalError, spd_inverse
from .kernels import DesignMatrix, KernelSpec, Standardizer, as_rows, build_design_matrix
from .special import HyperpriorConfig, digamma, gamma_entropy, ln_gamma

LN_2PI = math.log(2.0 * math.pi)

TAU_SHAPE_RULES = ("exact", "n_plus_one")


class FitError(NumericalError):
    """Numerical failure during fitting; carries the lower-bound trace so far."""

    def __init__(self, message, elbo_trace=None):
        super().__init__(message)
        self.elbo_trace = list(elbo_trace or [])


@dataclass(frozen=True)
class FitConfig:
    """Loop controls and initial moments shared by regression and classification.

    ``tau_shape`` selects the noise-precision shape update: ``"exact"`` uses
    c + N/2, the maximizer of the bound; ``"n_plus_one"`` uses c + (N+1)/2.

    A fit stops once the relative bound change drops below ``tol``.  When
    ``param_tol`` is set, the last sweep must also have moved every
    posterior quantity by less than ``param_tol`` (max-norm).
    """

    tol: float = 1e-6
    max_iter: int = 500
    alpha_init: float = 1.0
    tau_init: float = 1.0
    xi_init: float = 1.0
    tau_shape: str = "exact"
    relevance_threshold: float = 1e-3
    standardize: bool = False
    param_tol: Optional[float] = None

    def __post_init__(self):
        if not self.tol >= 0:
            raise ValueError("tol must be >= 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not (self.alpha_init > 0 and self.tau_init > 0 and self.xi_init >= 0):
            raise ValueError("initial moments must be positive")
        if self.tau_shape not in TAU_SHAPE_RULES:
            raise ValueError(f"tau_shape must be one of {TAU_SHAPE_RULES}")
        if not self.relevance_threshold >= 0:
            raise ValueError("relevance_threshold must be >= 0")
        if self.param_tol is not None and not self.param_tol > 0:
            raise ValueError("param_tol must be positive")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class RegressionPosterior:
    mu_w: np.ndarray
    sigma_w: np.ndarray
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    c_tilde: float
    d_tilde: float

    def copy(self) -> "RegressionPosterior":
        return RegressionPosterior(self.mu_w.copy(), self.sigma_w.copy(),
                                   self.a_tilde.copy(), self.b_tilde.copy(),
                                   float(self.c_tilde), float(self.d_tilde))

    def max_abs_diff(self, other: "RegressionPosterior") -> float:
        return max(
            np.max(np.abs(self.mu_w - other.mu_w)),
            np.max(np.abs(self.sigma_w - other.sigma_w)),
            np.max(np.abs(self.a_tilde - other.a_tilde)),
            np.max(np.abs(self.b_tilde - other.b_tilde)),
            abs(self.c_tilde - other.c_tilde),
            abs(self.d_tilde - other.d_tilde),
        )


@dataclass
class Moments:
    w: np.ndarray
    ww: np.ndarray
    alpha: np.ndarray
    ln_alpha: np.ndarray
    tau: float = float("nan")
    ln_tau: float = float("nan")

    @property
    def w_sq(self) -> np.ndarray:
        return np.diag(self.ww).copy()


@dataclass
class FitReport:
    elbo_trace: list
    n_iterations: int
    converged: bool
    relevance_mask: np.ndarray
    noise_std_estimate: Optional[float] = None
    alpha_mean_max: list = field(default_factory=list)


@dataclass
class RegressionModel:
    kernel: KernelSpec
    centres: np.ndarray
    posterior: RegressionPosterior
    hyperprior: HyperpriorConfig
    standardizer: Optional[Standardizer] = None
    meta: dict = field(default_factory=dict)

    task = "regression"

    def __post_init__(self):
        n_cols = len(self.centres) + (1 if self.kernel.include_bias else 0)
        if self.posterior.mu_w.shape != (n_cols,):
            raise ValueError(
                f"posterior has {self.posterior.mu_w.shape[0]} weights but "
                f"{len(self.centres)} centres imply {n_cols}"
            )

    def design(self, X) -> np.ndarray:
        X = as_rows(X)
        if X.shape[1] != self.centres.shape[1]:
            raise ValueError(f"input dimension {X.shape[1]} != training dimension {self.centres.shape[1]}")
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return build_design_matrix(self.kernel, X, self.centres).values

    @property
    def tau_mean(self) -> float:
        return self.posterior.c_tilde / self.posterior.d_tilde

    @property
    def noise_std(self) -> float:
        return 1.0 / math.sqrt(self.tau_mean)

    def predict(self, X):
        """Predictive means and variances for each row of ``X``."""
        phi = self.design(X)
        mean = phi @ self.posterior.mu_w
        var = 1.0 / self.tau_mean + np.einsum("ij,jk,ik->i", phi, self.posterior.sigma_w, phi)
        return mean, var


def _phi(phi) -> np.ndarray:
    return phi.values if isinstance(phi, DesignMatrix) else np.asarray(phi, dtype=float)


# -- factor updates ---------------------------------------------------------

def update_q_w(phi, t, alpha_mean, tau_mean):
    """Gaussian factor over the weights given current precision moments."""
    P = _phi(phi)
    t = np.asarray(t, dtype=float)
    alpha_mean = np.asarray(alpha_mean, dtype=float)
    if P.shape[0] != t.shape[0] or P.shape[1] != alpha_mean.shape[0]:
        raise ValueError(f"inconsistent shapes: phi {P.shape}, t {t.shape}, alpha {alpha_mean.shape}")
    if not (np.all(np.isfinite(alpha_mean)) and np.all(alpha_mean > 0)):
        raise ValueError("alpha_mean must be finite and positive")
    if not tau_mean > 0:
        raise ValueError("tau_mean must be positive")
    precision = np.diag(alpha_mean) + tau_mean * (P.T @ P)
    sigma, _, _ = spd_inverse(precision)
    mu = tau_mean * (sigma @ (P.T @ t))
    return mu, sigma


def update_q_alpha(hyperprior: HyperpriorConfig, w_sq_mean):
    """Gamma factors over the weight precisions."""
    w_sq_mean = np.asarray(w_sq_mean, dtype=float)
    if np.any(w_sq_mean < 0):
        raise NumericalError(f"negative second moment in <w_m^2>: min {w_sq_mean.min():.3g}")
    a_tilde = np.full(w_sq_mean.shape, hyperprior.a + 0.5)
    b_tilde = hyperprior.b + 0.5 * w_sq_mean
    return a_tilde, b_tilde


def _expected_sq_error(P, t, w_mean, ww_mean) -> float:
    """sum_n t_n^2 - 2 <w>^T sum_n phi_n t_n + sum_n phi_n^T <ww^T> phi_n."""
    return float(t @ t - 2.0 * w_mean @ (P.T @ t) + np.sum((P @ ww_mean) * P))


def update_q_tau(hyperprior: HyperpriorConfig, phi, t, w_mean, ww_mean, tau_shape: str = "exact"):
    """Gamma factor over the noise precision."""
    P = _phi(phi)
    t = np.asarray(t, dtype=float)
    n = t.shape[0]
    if tau_shape == "exact":
        c_tilde = hyperprior.c + 0.5 * n
    elif tau_shape == "n_plus_one":
        c_tilde = hyperprior.c + 0.5 * (n + 1)
    else:
        raise ValueError(f"unknown tau_shape {tau_shape!r}")
    sq = _expected_sq_error(P, t, np.asarray(w_mean, float), np.asarray(ww_mean, float)) if n else 0.0
    d_tilde = hyperprior.d + 0.5 * sq
    if not d_tilde > 0:
        raise NumericalError(f"noise rate update gave d_tilde={d_tilde:.6g} <= 0")
    return c_tilde, d_tilde


def moments(posterior: RegressionPosterior) -> Moments:
    mu = posterior.mu_w
    return Moments(
        w=mu,
        ww=posterior.sigma_w + np.outer(mu, mu),
        alpha=posterior.a_tilde / posterior.b_tilde,
        ln_alpha=digamma(posterior.a_tilde) - np.log(posterior.b_tilde),
        tau=posterior.c_tilde / posterior.d_tilde,
        ln_tau=digamma(posterior.c_tilde) - math.log(posterior.d_tilde),
    )


# -- lower bound ------------------------------------------------------------

def _weight_terms(sigma, mom: Moments, hyperprior: HyperpriorConfig, a_tilde, b_tilde):
    """Terms shared with classification: prior/entropy of w and alpha."""
    k = sigma.shape[0]
    a, b = hyperprior.a, hyperprior.b
    w_sq = mom.w_sq
    _, logdet = np.linalg.slogdet(sigma)
    return {
        "w_prior": float(-0.5 * k * LN_2PI + 0.5 * np.sum(mom.ln_alpha)
                         - 0.5 * np.sum(mom.alpha * w_sq)),
        "alpha_prior": float(k * a * math.log(b) + (a - 1.0) * np.sum(mom.ln_alpha)
                             - b * np.sum(mom.alpha) - k * ln_gamma(a)),
        "w_entropy": float(0.5 * k * (1.0 + LN_2PI) + 0.5 * logdet),
        "alpha_entropy": float(np.sum(gamma_entropy(a_tilde, b_tilde))),
    }


def _check_terms(terms: dict) -> dict:
    for name, value in terms.items():
        if not math.isfinite(value):
            raise NumericalError(f"lower bound term {name!r} is not finite ({value})")
    return terms


def lower_bound_terms(phi, t, posterior: RegressionPosterior, hyperprior: HyperpriorConfig) -> dict:
    """The seven expectation terms of the bound, keyed by name.

    ``likelihood``, ``w_prior``, ``alpha_prior`` and ``tau_prior`` are
    expected log densities under Q; the ``*_entropy`` terms are -<ln Q>.
    """
    P = _phi(phi)
    t = np.asarray(t, dtype=float)
    n = t.shape[0]
    mom = moments(posterior)
    c, d = hyperprior.c, hyperprior.d
    sq = _expected_sq_error(P, t, mom.w, mom.ww) if n else 0.0
    terms = {
        "likelihood": 0.5 * n * mom.ln_tau - 0.5 * n * LN_2PI - 0.5 * mom.tau * sq,
    }
    terms.update(_weight_terms(posterior.sigma_w, mom, hyperprior, posterior.a_tilde, posterior.b_tilde))
    terms["tau_prior"] = float(c * math.log(d) + (c - 1.0) * mom.ln_tau - d * mom.tau - ln_gamma(c))
    terms["tau_entropy"] = float(gamma_entropy(posterior.c_tilde, posterior.d_tilde))
    return _check_terms(terms)


def lower_bound(phi, t, posterior: RegressionPosterior, hyperprior: HyperpriorConfig) -> float:
    return float(sum(lower_bound_terms(phi, t, posterior, hyperprior).values()))


# -- fitting ----------------------------------------------------------------

def initial_posterior(n_data: int, n_basis: int, hyperprior: HyperpriorConfig,
                      config: FitConfig) -> RegressionPosterior:
    """Gamma factors with means alpha_init and tau_init; Q(w) is a placeholder
    that the first sweep overwrites."""
    a_t = hyperprior.a + 0.5
    c_t = hyperprior.c + 0.5 * n_data
    return RegressionPosterior(
        mu_w=np.zeros(n_basis),
        sigma_w=np.eye(n_basis) / config.alpha_init,
        a_tilde=np.full(n_basis, a_t),
        b_tilde=np.full(n_basis, a_t / config.alpha_init),
        c_tilde=c_t,
        d_tilde=c_t / config.tau_init,
    )


def sweep(P, t, post: RegressionPosterior, hyperprior: HyperpriorConfig, config: FitConfig,
          monitor: Optional[Callable] = None) -> RegressionPosterior:
    """One pass Q(w) -> Q(alpha) -> Q(tau); returns the updated posterior."""
    post = post.copy()
    post.mu_w, post.sigma_w = update_q_w(P, t, post.a_tilde / post.b_tilde, post.c_tilde / post.d_tilde)
    if monitor is not None:
        monitor("w", post)
    post.a_tilde, post.b_tilde = update_q_alpha(hyperprior, np.diag(post.sigma_w) + post.mu_w ** 2)
    if monitor is not None:
        monitor("alpha", post)
    ww = post.sigma_w + np.outer(post.mu_w, post.mu_w)
    post.c_tilde, post.d_tilde = update_q_tau(hyperprior, P, t, post.mu_w, ww, config.tau_shape)
    if monitor is not None:
        monitor("tau", post)
    return post


def converged_step(prev: float, curr: float, tol: float) -> bool:
    """Relative change test; the scale is floored at 1 so a bound near zero
    does not demand an impossible absolute precision."""
    return abs(curr - prev) < tol * max(abs(prev), 1.0)


def has_converged(trace, old_post, new_post, config: FitConfig) -> bool:
    if len(trace) < 2 or not converged_step(trace[-2], trace[-1], config.tol):
        return False
    return config.param_tol is None or new_post.max_abs_diff(old_post) < config.param_tol


def fit_regression(X_rows, t, kernel: KernelSpec, hyperprior: Optional[HyperpriorConfig] = None,
                   config: Optional[FitConfig] = None, monitor: Optional[Callable] = None):
    """Fit a regression model with one basis function per training input.

    ``monitor(step, posterior)`` is called after every factor update, with
    ``step`` one of ``"w"``, ``"alpha"``, ``"tau"``.
    """
    hyperprior = hyperprior or HyperpriorConfig()
    config = config or FitConfig()
    X = as_rows(X_rows)
    t = np.asarray(t, dtype=float).ravel()
    if X.shape[0] != t.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {t.shape[0]} targets")
    if X.shape[0] < 2:
        raise ValueError("at least two training points are required")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(t))):
        raise ValueError("training data contains non-finite values")

    standardizer = Standardizer.fit(X) if config.standardize else None
    Xs = standardizer.transform(X) if standardizer is not None else X
    dm = build_design_matrix(kernel, Xs, Xs)
    P = dm.values

    post = initial_posterior(len(t), P.shape[1], hyperprior, config)
    trace, alpha_max = [], []
    converged = False
    n_iter = 0
    try:
        for n_iter in range(1, config.max_iter + 1):
            new = sweep(P, t, post, hyperprior, config, monitor)
            post, old = new, post
            trace.append(lower_bound(P, t, post, hyperprior))
            alpha_max.append(float(np.max(post.a_tilde / post.b_tilde)))
            if has_converged(trace, old, post, config):
                converged = True
                break
    except NumericalError as exc:
        raise FitError(f"regression fit failed at sweep {n_iter}: {exc}", trace) from exc

    model = RegressionModel(
        kernel=kernel, centres=X.copy(), posterior=post, hyperprior=hyperprior,
        standardizer=standardizer,
        meta={"n_iterations": n_iter, "converged": converged,
              "final_elbo": trace[-1], "elbo_trace": list(trace), "config": config.to_dict()},
    )
    idx, _ = relevance_vectors(model, config.relevance_threshold)
    mask = np.zeros(len(X), dtype=bool)
    mask[idx - (1 if kernel.include_bias else 0)] = True
    report = FitReport(
        elbo_trace=trace, n_iterations=n_iter, converged=converged,
        relevance_mask=mask, noise_std_estimate=model.noise_std, alpha_mean_max=alpha_max,
    )
    return model, report


# -- prediction -------------------------------------------------------------

def predict_regression(model: RegressionModel, x):
    """Predictive mean and variance at a single input vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.centres.shape[1],):
        raise ValueError(f"input has shape {x.shape}, expected ({model.centres.shape[1]},)")
    mean, var = model.predict(x[None, :])
    return float(mean[0]), float(var[0])


def relevance_vectors(model, threshold: float = 1e-3):
    """Indices into the weight vector of kernel weights with |mean| > threshold.

    The bias weight (index 0 when present) is never counted.
    """
    mean = model.posterior.mu_w if hasattr(model.posterior, "mu_w") else model.posterior.m
    offset = 1 if model.kernel.include_bias else 0
    kernel_w = mean[offset:]
    idx = np.flatnonzero(np.abs(kernel_w) > threshold) + offset
    if threshold == 0:
        idx = np.arange(offset, len(mean))
    return idx, int(len(idx))
