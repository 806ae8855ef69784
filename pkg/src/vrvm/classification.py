"""Variational relevance vector classification.

The logistic likelihood is replaced by the Jaakkola-Jordan exponential-
quadratic lower bound, one variational parameter xi_n per data point,
which keeps every factor update in closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._linalg import NumericalError, spd_inverse
from .kernels import KernelSpec, Standardizer, as_rows, build_design_matrix
from .regression import (
    FitConfig,
    FitError,
    FitReport,
    Moments,
    _check_terms,
    _phi,
    _weight_terms,
    has_converged,
    relevance_vectors,
    update_q_alpha,
)
from .special import HyperpriorConfig, digamma, lambda_xi, log_sigmoid, sigmoid

PREDICT_METHODS = ("mackay", "mean_plugin")

# shared contract with the regression precision update
update_q_alpha_cls = update_q_alpha


@dataclass
class ClassificationPosterior:
    m: np.ndarray
    S: np.ndarray
    a_tilde: np.ndarray
    b_tilde: np.ndarray
    xi: np.ndarray

    def copy(self) -> "ClassificationPosterior":
        return ClassificationPosterior(self.m.copy(), self.S.copy(), self.a_tilde.copy(),
                                       self.b_tilde.copy(), self.xi.copy())

    def max_abs_diff(self, other: "ClassificationPosterior") -> float:
        return max(
            np.max(np.abs(self.m - other.m)),
            np.max(np.abs(self.S - other.S)),
            np.max(np.abs(self.a_tilde - other.a_tilde)),
            np.max(np.abs(self.b_tilde - other.b_tilde)),
            np.max(np.abs(self.xi - other.xi)) if len(self.xi) else 0.0,
        )


@dataclass
class ClassificationModel:
    kernel: KernelSpec
    centres: np.ndarray
    posterior: ClassificationPosterior
    hyperprior: HyperpriorConfig
    standardizer: Optional[Standardizer] = None
    meta: dict = field(default_factory=dict)
    threshold: float = 0.5

    task = "classification"

    def __post_init__(self):
        n_cols = len(self.centres) + (1 if self.kernel.include_bias else 0)
        if self.posterior.m.shape != (n_cols,):
            raise ValueError(f"posterior has {self.posterior.m.shape[0]} weights, expected {n_cols}")

    def design(self, X) -> np.ndarray:
        X = as_rows(X)
        if X.shape[1] != self.centres.shape[1]:
            raise ValueError(f"input dimension {X.shape[1]} != training dimension {self.centres.shape[1]}")
        if self.standardizer is not None:
            X = self.standardizer.transform(X)
        return build_design_matrix(self.kernel, X, self.centres).values

    def predict_proba(self, X, method: str = "mackay") -> np.ndarray:
        if method not in PREDICT_METHODS:
            raise ValueError(f"method must be one of {PREDICT_METHODS}")
        phi = self.design(X)
        act = phi @ self.posterior.m
        if method == "mackay":
            s2 = np.einsum("ij,jk,ik->i", phi, self.posterior.S, phi)
            act = act * mackay_kappa(s2)
        return sigmoid(act)

    def predict(self, X, method: str = "mackay") -> np.ndarray:
        """Hard 0/1 labels; p == threshold goes to class 1."""
        return (self.predict_proba(X, method) >= self.threshold).astype(int)


def mackay_kappa(s2):
    """Probit-matched moderation factor (1 + pi s^2 / 8)^(-1/2)."""
    s2 = np.maximum(np.asarray(s2, dtype=float), 0.0)
    return 1.0 / np.sqrt(1.0 + math.pi * s2 / 8.0)


def _check_labels(t) -> np.ndarray:
    t = np.asarray(t, dtype=float).ravel()
    if not np.all((t == 0) | (t == 1)):
        raise ValueError("classification targets must be 0 or 1")
    return t


# -- factor updates ---------------------------------------------------------

def update_q_w_cls(phi, t, alpha_mean, xi):
    """Gaussian factor over the weights under the bounded likelihood."""
    P = _phi(phi)
    t = _check_labels(t)
    xi = np.asarray(xi, dtype=float)
    alpha_mean = np.asarray(alpha_mean, dtype=float)
    if P.shape[0] != t.shape[0] or xi.shape != t.shape or P.shape[1] != alpha_mean.shape[0]:
        raise ValueError(f"inconsistent shapes: phi {P.shape}, t {t.shape}, xi {xi.shape}, "
                         f"alpha {alpha_mean.shape}")
    if np.any(xi < 0):
        raise ValueError("xi must be non-negative")
    lam = lambda_xi(xi) if len(xi) else np.zeros(0)
    precision = np.diag(alpha_mean) + 2.0 * (P.T * lam) @ P
    S, _, _ = spd_inverse(precision)
    m = 0.5 * (S @ (P.T @ (2.0 * t - 1.0)))
    return m, S


def update_xi(phi, ww_mean):
    """xi_n = sqrt(phi_n^T <ww^T> phi_n), the non-negative root."""
    P = _phi(phi)
    q = np.sum((P @ np.asarray(ww_mean, dtype=float)) * P, axis=1)
    if np.any(q < -1e-12):
        raise NumericalError(f"negative quadratic form in xi update: min {q.min():.3g}")
    return np.sqrt(np.maximum(q, 0.0))


def jj_log_bound(t, y, xi):
    """ln of the Jaakkola-Jordan lower bound on the Bernoulli-logistic likelihood."""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    z = (2.0 * t - 1.0) * y
    out = log_sigmoid(xi) + 0.5 * (z - xi) - lambda_xi(xi) * (z * z - xi * xi)
    return float(out) if np.ndim(out) == 0 else out


def bernoulli_log_likelihood(t, y):
    """Exact ln sigma(y)^t (1 - sigma(y))^(1-t)."""
    t = np.asarray(t, dtype=float)
    return log_sigmoid((2.0 * t - 1.0) * np.asarray(y, dtype=float))


def moments_cls(posterior: ClassificationPosterior) -> Moments:
    m = posterior.m
    return Moments(
        w=m,
        ww=posterior.S + np.outer(m, m),
        alpha=posterior.a_tilde / posterior.b_tilde,
        ln_alpha=digamma(posterior.a_tilde) - np.log(posterior.b_tilde),
    )


# -- lower bound ------------------------------------------------------------

def lower_bound_cls_terms(phi, t, posterior: ClassificationPosterior,
                          hyperprior: HyperpriorConfig) -> dict:
    """Terms of the bound: ``likelihood`` is <ln F>, the rest as in regression."""
    P = _phi(phi)
    t = _check_labels(t)
    mom = moments_cls(posterior)
    xi = posterior.xi
    if len(t):
        quad = np.sum((P @ mom.ww) * P, axis=1)
        lin = (2.0 * t - 1.0) * (P @ mom.w)
        ln_f = float(np.sum(log_sigmoid(xi) + 0.5 * lin - 0.5 * xi - lambda_xi(xi) * (quad - xi * xi)))
    else:
        ln_f = 0.0
    terms = {"likelihood": ln_f}
    terms.update(_weight_terms(posterior.S, mom, hyperprior, posterior.a_tilde, posterior.b_tilde))
    return _check_terms(terms)


def lower_bound_cls(phi, t, posterior: ClassificationPosterior, hyperprior: HyperpriorConfig) -> float:
    return float(sum(lower_bound_cls_terms(phi, t, posterior, hyperprior).values()))


# -- fitting ----------------------------------------------------------------

def sweep_cls(P, t, post: ClassificationPosterior, hyperprior: HyperpriorConfig,
              monitor: Optional[Callable] = None) -> ClassificationPosterior:
    """One pass Q(w) -> xi -> Q(alpha)."""
    post = post.copy()
    post.m, post.S = update_q_w_cls(P, t, post.a_tilde / post.b_tilde, post.xi)
    if monitor is not None:
        monitor("w", post)
    post.xi = update_xi(P, post.S + np.outer(post.m, post.m))
    if monitor is not None:
        monitor("xi", post)
    post.a_tilde, post.b_tilde = update_q_alpha(hyperprior, np.diag(post.S) + post.m ** 2)
    if monitor is not None:
        monitor("alpha", post)
    return post


def fit_classification(X_rows, t, kernel: KernelSpec, hyperprior: Optional[HyperpriorConfig] = None,
                       config: Optional[FitConfig] = None, monitor: Optional[Callable] = None):
    """Fit a binary classifier with one basis function per training input.

    ``monitor(step, posterior)`` is called after each of the ``"w"``,
    ``"xi"`` and ``"alpha"`` updates.
    """
    hyperprior = hyperprior or HyperpriorConfig()
    config = config or FitConfig()
    X = as_rows(X_rows)
    t = _check_labels(t)
    if X.shape[0] != t.shape[0]:
        raise ValueError(f"{X.shape[0]} inputs but {t.shape[0]} targets")
    if not (np.any(t == 0) and np.any(t == 1)):
        raise ValueError("both classes must be present in the training targets")
    if not np.all(np.isfinite(X)):
        raise ValueError("training inputs contain non-finite values")

    standardizer = Standardizer.fit(X) if config.standardize else None
    Xs = standardizer.transform(X) if standardizer is not None else X
    P = build_design_matrix(kernel, Xs, Xs).values
    k = P.shape[1]

    a_t = hyperprior.a + 0.5
    post = ClassificationPosterior(
        m=np.zeros(k), S=np.eye(k) / config.alpha_init,
        a_tilde=np.full(k, a_t), b_tilde=np.full(k, a_t / config.alpha_init),
        xi=np.full(len(t), float(config.xi_init)),
    )
    trace, alpha_max = [], []
    converged = False
    n_iter = 0
    try:
        for n_iter in range(1, config.max_iter + 1):
            new = sweep_cls(P, t, post, hyperprior, monitor)
            post, old = new, post
            trace.append(lower_bound_cls(P, t, post, hyperprior))
            alpha_max.append(float(np.max(post.a_tilde / post.b_tilde)))
            if has_converged(trace, old, post, config):
                converged = True
                break
    except NumericalError as exc:
        raise FitError(f"classification fit failed at sweep {n_iter}: {exc}", trace) from exc

    model = ClassificationModel(
        kernel=kernel, centres=X.copy(), posterior=post, hyperprior=hyperprior,
        standardizer=standardizer,
        meta={"n_iterations": n_iter, "converged": converged,
              "final_elbo": trace[-1], "elbo_trace": list(trace), "config": config.to_dict()},
    )
    idx, _ = relevance_vectors(model, config.relevance_threshold)
    mask = np.zeros(len(X), dtype=bool)
    mask[idx - (1 if kernel.include_bias else 0)] = True
    report = FitReport(elbo_trace=trace, n_iterations=n_iter, converged=converged,
                       relevance_mask=mask, noise_std_estimate=None, alpha_mean_max=alpha_max)
    return model, report


def predict_proba(model: ClassificationModel, x, method: str = "mackay") -> float:
    """Class-1 probability at a single input vector."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (model.centres.shape[1],):
        raise ValueError(f"input has shape {x.shape}, expected ({model.centres.shape[1]},)")
    return float(model.predict_proba(x[None, :], method)[0])
