import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import classification_term_samples, random_classification_instance, z_scores
from vrvm._linalg import NumericalError
from vrvm.classification import (
    ClassificationModel,
    ClassificationPosterior,
    bernoulli_log_likelihood,
    fit_classification,
    jj_log_bound,
    lower_bound_cls,
    lower_bound_cls_terms,
    mackay_kappa,
    predict_proba,
    sweep_cls,
    update_q_alpha_cls,
    update_q_w_cls,
    update_xi,
)
from vrvm.datasets import gen_two_class
from vrvm.kernels import KernelSpec, build_design_matrix
from vrvm.regression import FitConfig, FitError, relevance_vectors
from vrvm.special import HyperpriorConfig, digamma

HP = HyperpriorConfig()


# -- updates ----------------------------------------------------------------

def test_update_q_w_cls_hand_example():
    m, S = update_q_w_cls(np.array([[1.0]]), [1.0], [1.0], [0.0])
    assert S[0, 0] == pytest.approx(0.8, abs=1e-15)
    assert m[0] == pytest.approx(0.4, abs=1e-15)


def test_update_q_w_cls_no_data():
    alpha = np.array([2.0, 0.5, 4.0])
    m, S = update_q_w_cls(np.zeros((0, 3)), np.zeros(0), alpha, np.zeros(0))
    assert np.allclose(S, np.diag(1 / alpha), rtol=1e-15)
    assert np.all(m == 0)


def test_update_q_w_cls_label_flip():
    rng = np.random.default_rng(0)
    P, t, _, _ = random_classification_instance(rng, 9, 6)
    alpha, xi = rng.uniform(0.1, 3, P.shape[1]), rng.uniform(0, 2, 9)
    m, S = update_q_w_cls(P, t, alpha, xi)
    m2, S2 = update_q_w_cls(P, 1 - t, alpha, xi)
    assert np.array_equal(m2, -m)
    assert np.array_equal(S2, S)


def test_update_q_w_cls_validation():
    with pytest.raises(ValueError):
        update_q_w_cls(np.ones((1, 1)), [0.5], [1.0], [0.0])
    with pytest.raises(ValueError):
        update_q_w_cls(np.ones((1, 1)), [1.0], [1.0], [-1.0])


def test_update_q_alpha_cls():
    a_t, b_t = update_q_alpha_cls(HP, [0.0, 1.0])
    assert np.all(a_t == 0.500001)
    assert b_t[0] == HP.b
    _, b_t = update_q_alpha_cls(HyperpriorConfig(b=1.0), [4.0])
    assert b_t[0] == 3.0


def test_update_xi():
    assert np.all(update_xi(np.ones((3, 2)), np.zeros((2, 2))) == 0)
    assert update_xi(np.array([[1.0]]), np.array([[4.0]]))[0] == 2.0
    rng = np.random.default_rng(1)
    P = rng.normal(size=(4, 3))
    m, S = rng.normal(size=3), np.eye(3) * 0.3
    assert np.array_equal(update_xi(P, S + np.outer(m, m)), update_xi(P, S + np.outer(-m, -m)))
    assert update_xi(np.array([[1.0]]), np.array([[-1e-13]]))[0] == 0.0
    with pytest.raises(NumericalError):
        update_xi(np.array([[1.0]]), np.array([[-1e-6]]))


# -- the logistic bound -----------------------------------------------------

def test_jj_bound_at_origin():
    assert jj_log_bound(1, 0.0, 0.0) == math.log(0.5)
    assert jj_log_bound(0, 0.0, 0.0) == math.log(0.5)


def test_jj_bound_random_triples():
    rng = np.random.default_rng(2024)
    n = 10**4
    t = rng.integers(0, 2, n)
    y = rng.normal(0, 5, n)
    xi = np.abs(rng.normal(0, 5, n))
    exact = bernoulli_log_likelihood(t, y)
    assert np.all(jj_log_bound(t, y, xi) <= exact + 1e-12)
    z = (2 * t - 1) * y
    assert np.max(np.abs(jj_log_bound(t, y, np.abs(z)) - exact)) <= 1e-12


@given(st.integers(0, 1), st.floats(-50, 50), st.floats(0, 50))
def test_jj_bound_property(t, y, xi):
    exact = bernoulli_log_likelihood(t, y)
    assert jj_log_bound(t, y, xi) <= exact + 1e-12
    assert abs(jj_log_bound(t, y, abs(y)) - exact) <= 1e-12


# -- lower bound ------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_lower_bound_terms_monte_carlo(seed):
    rng = np.random.default_rng(200 + seed)
    P, t, post, hp = random_classification_instance(rng)
    exact = lower_bound_cls_terms(P, t, post, hp)
    samples = classification_term_samples(P, t, post, hp, rng)
    assert set(exact) == set(samples)
    for name, z in z_scores(exact, samples).items():
        assert z <= 3, name


def test_empty_data_prior_factors():
    hp = HyperpriorConfig(a=3.0, b=2.0)
    k = 3
    post = ClassificationPosterior(np.zeros(k), np.eye(k) * hp.b / hp.a, np.full(k, hp.a),
                                   np.full(k, hp.b), np.zeros(0))
    terms = lower_bound_cls_terms(np.zeros((0, k)), np.zeros(0), post, hp)
    assert terms["likelihood"] == 0.0
    assert abs(terms["alpha_prior"] + terms["alpha_entropy"]) < 1e-12
    gap = 0.5 * k * (digamma(hp.a) - math.log(hp.a))
    assert abs(terms["w_prior"] + terms["w_entropy"] - gap) < 1e-12


def test_nonfinite_term_is_named():
    post = ClassificationPosterior(np.zeros(1), np.array([[np.inf]]), np.ones(1), np.ones(1), np.ones(2))
    with pytest.raises(NumericalError, match="term"):
        lower_bound_cls(np.ones((2, 1)), np.array([0.0, 1.0]), post, HP)


@pytest.mark.parametrize("seed", range(20))
def test_bound_never_decreases_per_update(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(6, 31))
    ds = gen_two_class(n - n % 2, seed=seed)
    P = build_design_matrix(KernelSpec("gaussian", width=rng.uniform(0.3, 2)), ds.X, ds.X).values
    k = P.shape[1]
    post = ClassificationPosterior(np.zeros(k), np.eye(k), np.full(k, HP.a + 0.5), np.full(k, HP.a + 0.5),
                                   np.ones(len(ds.t)))
    values = [lower_bound_cls(P, ds.t, post, HP)]
    for _ in range(40):
        post = sweep_cls(P, ds.t, post, HP, lambda step, q: values.append(lower_bound_cls(P, ds.t, q, HP)))
    L = np.array(values)
    assert np.all(np.diff(L) >= -1e-8 * (1 + np.abs(L[1:])))


# -- fitting ----------------------------------------------------------------

def test_separable_two_points():
    X, t = np.array([[-1.0], [1.0]]), np.array([0.0, 1.0])
    model, report = fit_classification(X, t, KernelSpec("gaussian", width=1.0))
    assert report.converged
    act = model.design(X) @ model.posterior.m
    assert act[0] < 0 < act[1]
    assert np.array_equal(model.predict(X), [0, 1])


@pytest.fixture(scope="module")
def two_class_fit():
    ds = gen_two_class(60, seed=3)
    return ds, fit_classification(ds.X, ds.t, KernelSpec("gaussian", width=0.5))


def test_fit_deterministic_and_monotone(two_class_fit):
    ds, (model, report) = two_class_fit
    _, again = fit_classification(ds.X, ds.t, KernelSpec("gaussian", width=0.5))
    assert again.elbo_trace == report.elbo_trace
    L = np.asarray(report.elbo_trace)
    assert np.all(np.diff(L) >= -1e-8 * (1 + np.abs(L[1:])))
    assert report.noise_std_estimate is None
    assert max(report.alpha_mean_max) <= HP.alpha_mean_bound
    assert np.all(model.posterior.xi >= 0)
    assert np.all(model.posterior.a_tilde == HP.a + 0.5)


def test_label_flip_symmetry():
    ds = gen_two_class(40, seed=5)
    kernel = KernelSpec("gaussian", width=0.7)
    cfg = FitConfig(tol=0.0, max_iter=80)
    m1, _ = fit_classification(ds.X, ds.t, kernel, config=cfg)
    m2, _ = fit_classification(ds.X, 1 - ds.t, kernel, config=cfg)
    p1, p2 = m1.posterior, m2.posterior
    assert np.max(np.abs(p2.m + p1.m)) < 1e-10
    for a, b in ((p1.S, p2.S), (p1.a_tilde, p2.a_tilde), (p1.b_tilde, p2.b_tilde), (p1.xi, p2.xi)):
        assert np.max(np.abs(a - b)) < 1e-10


def test_fixed_point_at_convergence():
    ds = gen_two_class(30, seed=8)
    cfg = FitConfig(tol=1e-12, param_tol=1e-8, max_iter=50000)
    model, report = fit_classification(ds.X, ds.t, KernelSpec("gaussian", width=0.7), config=cfg)
    assert report.converged
    P = model.design(ds.X)
    again = sweep_cls(P, ds.t, model.posterior, HP)
    assert again.max_abs_diff(model.posterior) < 1e-6


def test_fit_validation():
    k = KernelSpec()
    with pytest.raises(ValueError, match="both classes"):
        fit_classification([[0.0], [1.0]], [1.0, 1.0], k)
    with pytest.raises(ValueError):
        fit_classification([[0.0], [1.0]], [0.0, 2.0], k)


def test_fit_error_carries_partial_trace():
    ds = gen_two_class(20, seed=0)
    calls = []

    def explode(step, post):
        calls.append(step)
        if len(calls) == 10:
            raise NumericalError("injected")

    with pytest.raises(FitError) as info:
        fit_classification(ds.X, ds.t, KernelSpec(), monitor=explode)
    assert len(info.value.elbo_trace) == 3


# -- prediction -------------------------------------------------------------

def _model_with(m, S, kernel=KernelSpec("linear")):
    k = len(m)
    post = ClassificationPosterior(np.asarray(m, float), np.asarray(S, float), np.ones(k), np.ones(k), np.ones(1))
    return ClassificationModel(kernel, np.array([[1.0]]), post, HP)


def test_zero_activation_gives_half():
    model = _model_with([0.0, 0.0], np.eye(2))
    for method in ("mackay", "mean_plugin"):
        assert predict_proba(model, [3.0], method) == 0.5
    assert model.predict([[3.0]])[0] == 1  # tie goes to class 1


def test_mackay_equals_plugin_without_uncertainty():
    model = _model_with([0.3, -1.2], np.zeros((2, 2)))
    X = np.linspace(-3, 3, 13)[:, None]
    assert np.array_equal(model.predict_proba(X, "mackay"), model.predict_proba(X, "mean_plugin"))
    assert mackay_kappa(0.0) == 1.0


def test_mackay_moderates_toward_half(two_class_fit):
    _, (model, _) = two_class_fit
    X = np.random.default_rng(0).uniform(-1.5, 1.5, size=(500, 2))
    act = model.design(X) @ model.posterior.m
    pm, pp = model.predict_proba(X, "mackay"), model.predict_proba(X, "mean_plugin")
    assert np.all(pm[act > 0] <= pp[act > 0])
    assert np.all(pm[act < 0] >= pp[act < 0])
    assert np.array_equal(pp > 0.5, act > 0)
    assert np.array_equal(pm > 0.5, act > 0)


def test_predict_proba_validation(two_class_fit):
    _, (model, _) = two_class_fit
    with pytest.raises(ValueError):
        predict_proba(model, [0.0])
    with pytest.raises(ValueError):
        model.predict_proba([[0.0, 0.0]], method="probit")


def test_relevance_vectors_on_classifier(two_class_fit):
    _, (model, report) = two_class_fit
    idx, count = relevance_vectors(model)
    assert count == int(report.relevance_mask.sum())
    assert np.all(np.abs(model.posterior.m[idx]) > 1e-3)
