"""Scalar special functions and densities used by the variational updates.

Everything here accepts either Python scalars or numpy arrays; scalar
input gives a float back.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_HALF_LN_2PI = 0.5 * math.log(2.0 * math.pi)

# Arguments below this are shifted upward by the recurrence before the
# asymptotic series is applied.
_SHIFT_THRESHOLD = 10.0

# Stirling series coefficients B_2k / (2k (2k-1)), k = 1..8
_LNGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360360.0,
    1.0 / 156.0,
    -3617.0 / 122400.0,
)

# B_2k / (2k), k = 1..8
_DIGAMMA_COEFFS = (
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
)


class DomainError(ValueError):
    """Raised when a special function is evaluated outside its domain."""


@dataclass(frozen=True)
class HyperpriorConfig:
    """Gamma hyperprior parameters.

    ``a, b`` are shape and rate of the prior on each weight precision,
    ``c, d`` shape and rate of the prior on the noise precision.
    """

    a: float = 1e-6
    b: float = 1e-6
    c: float = 1e-6
    d: float = 1e-6

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValueError(f"hyperprior {name} must be finite and > 0, got {v}")

    @property
    def alpha_mean_bound(self) -> float:
        """Upper bound on any posterior mean weight precision."""
        return (self.a + 0.5) / self.b


def _check_positive(x, name):
    arr = np.asarray(x, dtype=float)
    if arr.size and not (arr.min() > 0 and np.isfinite(arr.max())):
        raise DomainError(f"{name} requires finite positive argument, got {x!r}")
    return arr


def _unwrap(x, out):
    return float(out) if np.ndim(x) == 0 else out


def _ln_gamma_scalar(z: float) -> float:
    # at most 10 factors, each below the threshold: no overflow
    prod = 1.0
    while z < _SHIFT_THRESHOLD:
        prod *= z
        z += 1.0
    inv = 1.0 / z
    inv2 = inv * inv
    series = 0.0
    for coeff in reversed(_LNGAMMA_COEFFS):
        series = series * inv2 + coeff
    return (z - 0.5) * math.log(z) - z + _HALF_LN_2PI + series * inv - math.log(prod)


def _digamma_scalar(z: float) -> float:
    shift = 0.0
    while z < _SHIFT_THRESHOLD:
        shift += 1.0 / z
        z += 1.0
    inv2 = 1.0 / (z * z)
    series = 0.0
    for coeff in reversed(_DIGAMMA_COEFFS):
        series = series * inv2 + coeff
    return math.log(z) - 0.5 / z - series * inv2 - shift


def _apply(fn, x, name):
    arr = _check_positive(x, name)
    if arr.ndim == 0:
        return fn(float(arr))
    if arr.size and (arr == arr.flat[0]).all():
        return np.full(arr.shape, fn(float(arr.flat[0])))
    # posterior shape vectors are usually constant; evaluate each value once
    uniq, inverse = np.unique(arr, return_inverse=True)
    vals = np.array([fn(float(u)) for u in uniq])
    return vals[inverse].reshape(arr.shape)


def ln_gamma(x):
    """Natural log of the Gamma function for x > 0.

    Shifts the argument above 10 with the recurrence, then applies the
    Stirling series through the B_16 term.
    """
    return _apply(_ln_gamma_scalar, x, "ln_gamma")


def digamma(x):
    """Digamma function psi(x) = d/dx ln Gamma(x) for x > 0."""
    return _apply(_digamma_scalar, x, "digamma")


def sigmoid(y):
    """Logistic sigmoid, stable for large |y|."""
    y_arr = np.asarray(y, dtype=float)
    e = np.exp(-np.abs(y_arr))
    out = np.where(y_arr >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _unwrap(y, out)


def log_sigmoid(y):
    """ln sigmoid(y) without overflow or underflow to -inf."""
    y_arr = np.asarray(y, dtype=float)
    out = -np.logaddexp(0.0, -y_arr)
    return _unwrap(y, out)


def lambda_xi(xi):
    """tanh(xi/2) / (4 xi), with its limit 1/8 at xi = 0."""
    x = np.abs(np.asarray(xi, dtype=float))
    small = x < 1e-4
    safe = np.where(small, 1.0, x)
    x2 = x * x
    out = np.where(
        small,
        0.125 - x2 / 96.0 + x2 * x2 / 960.0,
        np.tanh(0.5 * safe) / (4.0 * safe),
    )
    return _unwrap(xi, out)


def marginal_weight_log_density(w, a: float, b: float):
    """Log density of a weight after integrating out its Gamma(a, b) precision.

    The result is a Student-t with 2a degrees of freedom and scale sqrt(b/a).
    """
    if not (a > 0 and b > 0 and math.isfinite(a) and math.isfinite(b)):
        raise DomainError(f"a and b must be finite and positive, got a={a}, b={b}")
    w_arr = np.asarray(w, dtype=float)
    const = ln_gamma(a + 0.5) - ln_gamma(a) + a * math.log(b) - _HALF_LN_2PI
    out = const - (a + 0.5) * np.log(b + 0.5 * w_arr * w_arr)
    return _unwrap(w, out)


def laplace_density(w, lam: float = 1.0):
    """Normalized Laplace density (lam/2) exp(-lam |w|)."""
    if not lam > 0:
        raise DomainError(f"lam must be positive, got {lam}")
    w_arr = np.asarray(w, dtype=float)
    return _unwrap(w, 0.5 * lam * np.exp(-lam * np.abs(w_arr)))


def marginal_prior_curve(w_max: float = 5.0, n_points: int = 201, a: float = 1.0,
                         b: float = 1.0, lam: float = 1.0):
    """Grid of (w, hierarchical marginal density, Laplace density) rows."""
    w = np.linspace(-w_max, w_max, n_points)
    return np.column_stack([
        w,
        np.exp(marginal_weight_log_density(w, a, b)),
        laplace_density(w, lam),
    ])


def gamma_entropy(shape, rate):
    """Entropy of Gamma(shape, rate), elementwise."""
    shape = np.asarray(shape, dtype=float)
    rate = np.asarray(rate, dtype=float)
    return shape - np.log(rate) + ln_gamma(shape) + (1.0 - shape) * digamma(shape)
