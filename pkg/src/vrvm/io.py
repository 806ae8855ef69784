"""Model file persistence.

Models are stored as JSON.  Python's float repr is the shortest decimal
that round-trips, so every float64 survives save/load bit-exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .classification import ClassificationModel, ClassificationPosterior
from .kernels import KernelSpec, Standardizer
from .regression import RegressionModel, RegressionPosterior
from .special import HyperpriorConfig

FORMAT_NAME = "vrvm-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    pass


def _arr(x) -> list:
    return np.asarray(x, dtype=float).tolist()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def model_to_dict(model) -> dict:
    post = model.posterior
    if isinstance(model, RegressionModel):
        payload = {"mu_w": _arr(post.mu_w), "sigma_w": _arr(post.sigma_w),
                   "a_tilde": _arr(post.a_tilde), "b_tilde": _arr(post.b_tilde),
                   "c_tilde": float(post.c_tilde), "d_tilde": float(post.d_tilde)}
    elif isinstance(model, ClassificationModel):
        payload = {"m": _arr(post.m), "S": _arr(post.S), "a_tilde": _arr(post.a_tilde),
                   "b_tilde": _arr(post.b_tilde), "xi": _arr(post.xi)}
    else:
        raise TypeError(f"not a model: {type(model).__name__}")
    hp = model.hyperprior
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "task": model.task,
        "kernel": model.kernel.to_dict(),
        "standardizer": model.standardizer.to_dict() if model.standardizer is not None else None,
        "hyperprior": {"a": hp.a, "b": hp.b, "c": hp.c, "d": hp.d},
        "centres": _arr(model.centres),
        "posterior": payload,
        "meta": _jsonable(model.meta),
    }


def model_from_dict(d: dict):
    if d.get("format") != FORMAT_NAME:
        raise ModelFormatError(f"not a model file (format={d.get('format')!r})")
    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model file version {d.get('version')!r}; "
                               f"this build reads version {FORMAT_VERSION}")
    kernel = KernelSpec.from_dict(d["kernel"])
    std = Standardizer.from_dict(d["standardizer"]) if d.get("standardizer") else None
    hp = HyperpriorConfig(**d["hyperprior"])
    centres = np.asarray(d["centres"], dtype=float)
    if centres.ndim == 1:
        centres = centres.reshape(-1, 1)
    p = d["posterior"]
    meta = d.get("meta", {})
    if d["task"] == "regression":
        post = RegressionPosterior(
            mu_w=np.asarray(p["mu_w"], float), sigma_w=np.asarray(p["sigma_w"], float),
            a_tilde=np.asarray(p["a_tilde"], float), b_tilde=np.asarray(p["b_tilde"], float),
            c_tilde=float(p["c_tilde"]), d_tilde=float(p["d_tilde"]),
        )
        return RegressionModel(kernel, centres, post, hp, std, meta)
    if d["task"] == "classification":
        post = ClassificationPosterior(
            m=np.asarray(p["m"], float), S=np.asarray(p["S"], float),
            a_tilde=np.asarray(p["a_tilde"], float), b_tilde=np.asarray(p["b_tilde"], float),
            xi=np.asarray(p["xi"], float),
        )
        return ClassificationModel(kernel, centres, post, hp, std, meta)
    raise ModelFormatError(f"unknown task {d['task']!r}")


def save_model(model, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path):
    try:
        d = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from None
    return model_from_dict(d)
