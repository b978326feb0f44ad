import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import least_squares
from sklearn.base import clone
from sklearn.utils.estimator_checks import check_get_params_invariance, check_no_attributes_set_in_init

from phaseflip.analysis import (
    MODELS,
    REFERENCE_GAMMA_PARAMS,
    CurveModelRegressor,
    GammaModelParams,
    GammaModelRegressor,
    bootstrap_stderr,
    fit_decay,
    fit_gamma_model,
    gamma_ideal,
    gamma_linear,
    gamma_model,
    improvement_window,
    linear_baseline,
    model_function,
)
from phaseflip.curves import DecayCurve
from phaseflip.errors import DegenerateFitError, DomainError, FitError

P11 = np.linspace(0, 1, 11)


@pytest.mark.parametrize("p, expected", [(0, 1), (0.5, 0.5), (1, 0), (0.3, 0.784)])
def test_gamma_ideal_values(p, expected):
    assert np.isclose(gamma_ideal(p), expected)


def test_gamma_linear_values():
    assert gamma_linear(0) == 1 and gamma_linear(1) == 0


@pytest.mark.parametrize("fn", [gamma_ideal, gamma_linear, lambda p: gamma_model(p, REFERENCE_GAMMA_PARAMS)])
@pytest.mark.parametrize("p", [-0.01, 1.01, np.nan])
def test_domain_errors(fn, p):
    with pytest.raises(DomainError):
        fn(p)


@given(st.floats(0, 0.5))
def test_ideal_beats_linear_below_half(p):
    diff = gamma_ideal(p) - gamma_linear(p)
    assert np.isclose(diff, p * (1 - p) * (1 - 2 * p), atol=1e-12)
    assert diff >= -1e-15


@given(st.floats(0, 1))
def test_gamma_ideal_point_symmetry(p):
    assert np.isclose(gamma_ideal(p) + gamma_ideal(1 - p), 1, atol=1e-12)


def test_gamma_model_reference_intercept():
    assert abs(gamma_model(0.0, REFERENCE_GAMMA_PARAMS) - 0.6524) < 5e-4
    assert np.isclose(gamma_model(0.0, REFERENCE_GAMMA_PARAMS), 0.394 + 0.95 * 0.272)


def test_zero_visibility_is_constant():
    assert np.allclose(gamma_model(P11, GammaModelParams(0.0, 0.37, 0.9)), 0.37)


def test_epsilon_zero_is_affine_ideal():
    # least-squares affine map from gamma_ideal onto the eps = 0 shape
    p = np.linspace(0, 1, 201)
    shape = gamma_model(p, GammaModelParams(1.0, 0.0, 0.0))
    design = np.column_stack([np.ones_like(p), gamma_ideal(p)])
    coef, *_ = np.linalg.lstsq(design, shape, rcond=None)
    resid = np.max(np.abs(design @ coef - shape))
    assert resid < 1e-6
    assert np.allclose(coef, [0.02, 0.93], atol=1e-12)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_epsilon_zero_antisymmetric_part_small(p, a, b):
    params = GammaModelParams(a, b, 0.0)
    mid = gamma_model(0.5, params)
    odd = 0.5 * ((gamma_model(p, params) - mid) + (gamma_model(1 - p, params) - mid))
    assert abs(odd) <= 0.02 * a + 1e-12


def test_endpoint_independent_of_epsilon():
    for eps in (0.0, 0.37, 1.0):
        assert np.isclose(gamma_model(1.0, GammaModelParams(0.272, 0.394, eps)), 0.394 + 0.02 * 0.272)


def test_improvement_window_crossing():
    p_star = improvement_window(REFERENCE_GAMMA_PARAMS)
    assert 0.25 <= p_star <= 0.29
    assert gamma_model(p_star - 0.01, REFERENCE_GAMMA_PARAMS) > linear_baseline(p_star - 0.01, REFERENCE_GAMMA_PARAMS)
    assert gamma_model(p_star + 0.01, REFERENCE_GAMMA_PARAMS) < linear_baseline(p_star + 0.01, REFERENCE_GAMMA_PARAMS)
    assert np.isclose(gamma_model(p_star, REFERENCE_GAMMA_PARAMS), linear_baseline(p_star, REFERENCE_GAMMA_PARAMS))


@pytest.mark.parametrize("name", sorted(MODELS))
def test_jacobian_matches_finite_differences(name):
    rng = np.random.default_rng(7)
    fun = model_function(name)
    x = np.linspace(0.05, 1, 9) if name == "gamma" else np.linspace(0.1, 3, 9)
    for _ in range(20):
        theta = rng.uniform(0.3, 1.5, size=3)
        _, jac = fun(x, theta)
        for k in range(3):
            h = 1e-6 * max(1, abs(theta[k]))
            up, dn = theta.copy(), theta.copy()
            up[k] += h
            dn[k] -= h
            fd = (fun(x, up)[0] - fun(x, dn)[0]) / (2 * h)
            assert np.allclose(jac[:, k], fd, rtol=1e-6, atol=1e-8)


def _binomial_curve(p, y, shots, rng):
    counts = rng.binomial(shots, y)
    return DecayCurve.from_counts(p, counts, shots)


def test_gamma_fit_noiseless_exact():
    y = gamma_model(P11, REFERENCE_GAMMA_PARAMS)
    res = fit_gamma_model(DecayCurve(P11, y, np.full(11, 0.01), np.full(11, 1e4)))
    assert res.converged and res.rss < 1e-12
    assert np.allclose(res.params, [0.272, 0.394, 0.37], atol=1e-8)


def test_gamma_fit_binomial_round_trip():
    rng = np.random.default_rng(2024)
    y = gamma_model(P11, REFERENCE_GAMMA_PARAMS)
    res = fit_gamma_model(_binomial_curve(P11, y, 10_000, rng))
    assert res.converged
    for name, truth in zip(res.names, [0.272, 0.394, 0.37]):
        assert abs(res[name] - truth) < 3 * res.error(name)


def test_gamma_fit_needs_six_points():
    c = DecayCurve(P11[:3], gamma_ideal(P11[:3]), np.full(3, 0.01), np.full(3, 100))
    with pytest.raises(FitError):
        fit_gamma_model(c)


def test_gamma_fit_needs_positive_errors():
    c = DecayCurve.exact(P11, gamma_ideal(P11))
    with pytest.raises(FitError):
        fit_gamma_model(c)
    assert fit_gamma_model(c, weighted=False).rss < 1e-20


@pytest.mark.parametrize("model, tau", [("gaussian", 0.28e-6), ("exponential", 2.72e-6)])
def test_decay_round_trip(model, tau):
    t = np.linspace(0, 2 * tau, 20)
    fun = model_function(model)
    y = fun(t, np.array([0.5, 0.5, tau]))[0]
    res = fit_decay(DecayCurve.exact(t, y), model)
    assert abs(res["tau"] / tau - 1) < 1e-6


def test_sinusoid_phase_difference():
    x = np.linspace(0, 2 * np.pi, 20, endpoint=False)
    off = fit_decay(DecayCurve.exact(x, 0.5 + 0.5 * np.cos(x + 0.2)), "sinusoid")
    on = fit_decay(DecayCurve.exact(x, 0.5 + 0.5 * np.cos(x + 0.2 - np.pi)), "sinusoid")
    diff = np.angle(np.exp(-1j * (on["phase"] - off["phase"])))
    assert abs(abs(diff) - np.pi) < 0.01


def test_decay_needs_five_points():
    with pytest.raises(FitError):
        fit_decay(DecayCurve.exact([0, 1, 2, 3], [1, 0.8, 0.6, 0.5]))


def test_degenerate_fit():
    # constant x makes tau unidentifiable
    c = DecayCurve(np.zeros(6), np.full(6, 0.7), np.full(6, 0.01), np.full(6, 100))
    with pytest.raises(DegenerateFitError):
        fit_decay(c, "exponential", p0=(0.5, 0.2, 1.0))


def test_nonconvergence_is_flagged():
    t = np.linspace(0, 1, 10)
    y = 0.5 + 0.5 * np.exp(-t / 0.3)
    est = CurveModelRegressor("exponential", p0=(0.0, 1.0, 5.0), max_iter=1).fit(t, y)
    assert not est.converged_


@given(st.integers(0, 10_000))
def test_solver_agrees_with_scipy(seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 3, 25)
    truth = np.array([rng.uniform(0.2, 0.6), rng.uniform(0.2, 0.5), rng.uniform(0.3, 1.5)])
    y = model_function("gaussian")(t, truth)[0] + rng.normal(0, 0.01, t.size)
    w = np.full(t.size, 1 / 0.01**2)
    ours = CurveModelRegressor("gaussian", p0=truth * 1.1).fit(t, y, sample_weight=w)

    def resid(theta):
        return np.sqrt(w) * (y - model_function("gaussian")(t, theta)[0])

    ref = least_squares(resid, truth * 1.1, method="lm", xtol=1e-14, ftol=1e-14)
    ref_theta = ref.x.copy()
    ref_theta[2] = abs(ref_theta[2])
    assert np.allclose(ours.params_, ref_theta, rtol=1e-6, atol=1e-9)
    jac = ref.jac
    cov = np.linalg.inv(jac.T @ jac) * (2 * ref.cost) / (t.size - 3)
    assert np.allclose(ours.stderr_, np.sqrt(np.diag(cov)), rtol=1e-3)


def test_sklearn_protocol():
    est = GammaModelRegressor()
    check_no_attributes_set_in_init("GammaModelRegressor", est)
    check_get_params_invariance("GammaModelRegressor", est)
    twin = clone(CurveModelRegressor("exponential", xtol=1e-10))
    assert twin.get_params()["model"] == "exponential" and twin.get_params()["xtol"] == 1e-10
    y = gamma_model(P11, REFERENCE_GAMMA_PARAMS)
    fitted = est.fit(P11.reshape(-1, 1), y)
    assert np.allclose(fitted.predict(P11), y, atol=1e-10)
    assert fitted.score(P11.reshape(-1, 1), y) > 1 - 1e-12


def test_estimator_rejects_multifeature():
    with pytest.raises(ValueError):
        CurveModelRegressor().fit(np.ones((6, 2)), np.ones(6))


def test_unfitted_predict():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        CurveModelRegressor().predict([0.1])


def test_bootstrap_matches_curvature():
    rng = np.random.default_rng(5)
    y = gamma_model(P11, REFERENCE_GAMMA_PARAMS)
    curve = _binomial_curve(P11, y, 10_000, rng)
    fit = fit_gamma_model(curve)
    boot = bootstrap_stderr(curve, "gamma", n_resamples=200, rng=rng)
    assert np.all(boot > 0)
    assert np.all(np.abs(np.log(boot / fit.stderr)) < np.log(2))


def test_fit_json_fields(tmp_path):
    res = fit_decay(DecayCurve.exact(np.linspace(0, 1, 8), 0.5 + 0.5 * np.exp(-np.linspace(0, 1, 8) / 0.4)), "exponential")
    data = json.loads(json.dumps(res.to_json()))
    assert set(data) == {"model", "params", "stderr", "rss", "converged", "n_points"}
    assert all(v >= 0 for v in data["stderr"].values())


def test_curve_csv_round_trip(tmp_path):
    c = DecayCurve.from_counts([0, 0.5, 1.0], [10, 40, 99], 100)
    path = c.write_csv(tmp_path / "c.csv")
    text = path.read_text()
    assert text.splitlines()[0] == "x,y,y_err,shots"
    assert text.splitlines()[2] == "0.5,0.4,0.04898979486,100"
    back = DecayCurve.read_csv(path)
    assert np.allclose(back.y, c.y) and np.allclose(back.y_err, c.y_err, rtol=1e-9)


@given(st.lists(st.integers(0, 500), min_size=1, max_size=8), st.integers(1, 500))
def test_curve_error_is_binomial(counts, shots):
    counts = [min(c, shots) for c in counts]
    c = DecayCurve.from_counts(np.arange(len(counts)), counts, shots)
    assert np.all((c.y >= 0) & (c.y <= 1))
    assert np.allclose(c.y_err, np.sqrt(c.y * (1 - c.y) / shots))
