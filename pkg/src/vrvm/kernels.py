"""Kernel functions and design-matrix construction."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("gaussian", "polynomial", "linear")
# "r2": exp(-|x-x'|^2 / r^2);  "2r2": exp(-|x-x'|^2 / (2 r^2))
GAUSSIAN_CONVENTIONS = ("r2", "2r2")


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "gaussian"
    width: float = 1.0
    degree: int = 3
    include_bias: bool = True
    convention: str = "r2"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "gaussian" and not self.width > 0:
            raise ValueError(f"gaussian kernel width must be > 0, got {self.width}")
        if self.kind == "polynomial" and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"polynomial degree must be an integer >= 1, got {self.degree}")
        if self.convention not in GAUSSIAN_CONVENTIONS:
            raise ValueError(f"unknown gaussian convention {self.convention!r}")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "width": self.width,
            "degree": int(self.degree),
            "include_bias": self.include_bias,
            "convention": self.convention,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(**d)


@dataclass(frozen=True)
class Standardizer:
    """Per-feature affine rescaling fitted on training inputs."""

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X) -> "Standardizer":
        X = as_rows(X)
        scale = X.std(axis=0)
        # constant columns are left unscaled
        scale = np.where(scale > 0, scale, 1.0)
        return cls(mean=X.mean(axis=0), scale=scale)

    def transform(self, X) -> np.ndarray:
        return (as_rows(X) - self.mean) / self.scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(mean=np.asarray(d["mean"], float), scale=np.asarray(d["scale"], float))


@dataclass
class DesignMatrix:
    values: np.ndarray
    centres: np.ndarray
    include_bias: bool = True

    @property
    def kernel_block(self) -> np.ndarray:
        return self.values[:, 1:] if self.include_bias else self.values

    @property
    def shape(self):
        return self.values.shape


def as_rows(X) -> np.ndarray:
    """Coerce input to a 2-D float array with one row per input vector."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2:
        raise ValueError(f"inputs must be a list of vectors, got array of shape {X.shape}")
    return X


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """Kernel evaluations K(x_i, y_j) for every row pair."""
    X = as_rows(X)
    Y = as_rows(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError(f"dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")
    if spec.kind == "gaussian":
        # direct differences keep K(x, x) == 1 exactly
        diff = X[:, None, :] - Y[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        denom = spec.width ** 2 if spec.convention == "r2" else 2.0 * spec.width ** 2
        return np.exp(-sq / denom)
    gram = X @ Y.T
    if spec.kind == "polynomial":
        return (1.0 + gram) ** int(spec.degree)
    return gram


def kernel_eval(spec: KernelSpec, x, x2) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    return float(kernel_matrix(spec, x[None, :], x2[None, :])[0, 0])


def build_design_matrix(spec: KernelSpec, X_rows, centres) -> DesignMatrix:
    X = as_rows(X_rows)
    C = as_rows(centres)
    if X.shape[0] == 0:
        raise ValueError("no input rows given")
    if C.shape[0] == 0:
        raise ValueError("at least one basis centre is required")
    K = kernel_matrix(spec, X, C)
    if spec.include_bias:
        K = np.hstack([np.ones((X.shape[0], 1)), K])
    if not np.all(np.isfinite(K)):
        raise ValueError("design matrix contains non-finite entries")
    return DesignMatrix(values=K, centres=C.copy(), include_bias=spec.include_bias)
