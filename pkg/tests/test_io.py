import json

import numpy as np
import pytest

from vrvm.classification import fit_classification
from vrvm.datasets import gen_sinc, gen_two_class
from vrvm.io import ModelFormatError, load_model, model_to_dict, save_model
from vrvm.kernels import KernelSpec
from vrvm.regression import FitConfig, fit_regression


@pytest.fixture(scope="module")
def models():
    s = gen_sinc(30, 0.1, seed=9)
    reg, _ = fit_regression(s.X, s.t, KernelSpec("gaussian", width=2.0, convention="2r2"),
                            config=FitConfig(standardize=True))
    c = gen_two_class(40, seed=9)
    cls, _ = fit_classification(c.X, c.t, KernelSpec("gaussian", width=0.5))
    return reg, cls


def _arrays(post):
    return {k: np.asarray(v) for k, v in vars(post).items()}


@pytest.mark.parametrize("which", [0, 1])
def test_round_trip_bit_exact(models, tmp_path, which):
    model = models[which]
    save_model(model, tmp_path / "m.json")
    back = load_model(tmp_path / "m.json")
    for name, arr in _arrays(model.posterior).items():
        assert np.array_equal(arr, _arrays(back.posterior)[name]), name
    assert np.array_equal(back.centres, model.centres)
    assert back.kernel == model.kernel
    assert back.hyperprior == model.hyperprior
    assert back.meta["elbo_trace"] == model.meta["elbo_trace"]
    X = np.random.default_rng(0).uniform(-2, 2, size=(25, model.centres.shape[1]))
    if which == 0:
        assert all(np.array_equal(a, b) for a, b in zip(back.predict(X), model.predict(X)))
        assert back.standardizer == model.standardizer
    else:
        assert np.array_equal(back.predict_proba(X), model.predict_proba(X))


def test_unknown_version_rejected(models, tmp_path):
    d = model_to_dict(models[0])
    d["version"] = 99
    (tmp_path / "m.json").write_text(json.dumps(d))
    with pytest.raises(ModelFormatError, match="version"):
        load_model(tmp_path / "m.json")


def test_not_a_model(tmp_path):
    (tmp_path / "x.json").write_text("{}")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "x.json")
    (tmp_path / "y.json").write_text("not json")
    with pytest.raises(ModelFormatError):
        load_model(tmp_path / "y.json")
