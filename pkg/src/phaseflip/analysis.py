"""Curve models and weighted nonlinear least squares.

The fitters follow the scikit-learn estimator protocol (``fit`` /
``predict`` / ``get_params``) so they drop into pipelines and
``sklearn.base.clone``. :func:`fit_decay` and :func:`fit_gamma_model` wrap
them for :class:`~phaseflip.curves.DecayCurve` inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import as_column, check_curve_arrays
from .curves import DecayCurve, binomial_error
from .errors import DegenerateFitError, DomainError, FitError

# printed coefficients of the asymmetric success-probability model
GAMMA_CONST = 0.95
GAMMA_P = (-2.79, 1.86)  # p^2, p^3
GAMMA_EPS = (-1.73, 3.9, -2.17)  # eps*p, eps*p^2, eps*p^3


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(~np.isfinite(p)):
        raise DomainError("probability p must lie in [0, 1]")
    return p


def gamma_ideal(p):
    """Chance of at most one flip among three qubits flipped with probability p."""
    p = _check_p(p)
    return 1 - 3 * p**2 + 2 * p**3


def gamma_linear(p):
    p = _check_p(p)
    return 1 - p


@dataclass(frozen=True)
class GammaModelParams:
    a: float
    b: float
    epsilon: float = 0.0


REFERENCE_GAMMA_PARAMS = GammaModelParams(0.272, 0.394, 0.37)


def _gamma_shape(p, eps):
    c2, c3 = GAMMA_P
    e1, e2, e3 = GAMMA_EPS
    return GAMMA_CONST + e1 * eps * p + c2 * p**2 + e2 * eps * p**2 + c3 * p**3 + e3 * eps * p**3


def gamma_model(p, params: GammaModelParams):
    p = _check_p(p)
    return params.b + params.a * _gamma_shape(p, params.epsilon)


def linear_baseline(p, params: GammaModelParams):
    """Straight line through the model's end points (same visibility, no correction)."""
    p = _check_p(p)
    g0 = gamma_model(0.0, params)
    g1 = gamma_model(1.0, params)
    return g0 + (g1 - g0) * p


def improvement_window(params: GammaModelParams) -> float:
    """Largest p below which the model beats :func:`linear_baseline`.

    The difference is ``a p (c0 + c1 p + c2 p^2)`` after dividing out p; the
    first root in (0, 1) of the quadratic bounds the window.
    """
    e1, e2, e3 = GAMMA_EPS
    c2, c3 = GAMMA_P
    eps = params.epsilon
    slope = (GAMMA_CONST + c2 + c3 + (e1 + e2 + e3) * eps) - GAMMA_CONST
    quad = np.array([c3 + e3 * eps, c2 + e2 * eps, e1 * eps - slope])
    roots = np.roots(quad)
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-12 and 0 < r.real < 1)
    return float(real[0]) if real else 1.0


# --- model zoo: value and analytic Jacobian ----------------------------------


def _gaussian(x, theta):
    y_inf, amp, tau = theta
    e = np.exp(-((x / tau) ** 2))
    f = y_inf + amp * e
    jac = np.column_stack([np.ones_like(x), e, amp * e * 2 * x**2 / tau**3])
    return f, jac


def _exponential(x, theta):
    y_inf, amp, tau = theta
    e = np.exp(-x / tau)
    f = y_inf + amp * e
    jac = np.column_stack([np.ones_like(x), e, amp * e * x / tau**2])
    return f, jac


def _sinusoid(x, theta):
    y0, amp, phase = theta
    c, s = np.cos(x + phase), np.sin(x + phase)
    return y0 + amp * c, np.column_stack([np.ones_like(x), c, -amp * s])


def _gamma(x, theta):
    a, b, eps = theta
    e1, e2, e3 = GAMMA_EPS
    shape = _gamma_shape(x, eps)
    jac = np.column_stack([shape, np.ones_like(x), a * (e1 * x + e2 * x**2 + e3 * x**3)])
    return b + a * shape, jac


MODELS = {
    "gaussian": (_gaussian, ("y_inf", "amplitude", "tau")),
    "exponential": (_exponential, ("y_inf", "amplitude", "tau")),
    "sinusoid": (_sinusoid, ("offset", "amplitude", "phase")),
    "gamma": (_gamma, ("a", "b", "epsilon")),
}


def model_function(name: str):
    try:
        return MODELS[name][0]
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


# --- solver ---------------------------------------------------------------


@dataclass
class _Solution:
    theta: np.ndarray
    cov: np.ndarray
    rss: float
    converged: bool
    n_iter: int


def damped_gauss_newton(fun, x, y, weights, theta0, max_iter=200, xtol=1e-9) -> _Solution:
    """Levenberg-Marquardt on ``sum w (y - f)^2``.

    Stops when the step is below ``xtol`` relative to the parameters. The
    covariance is the inverse curvature ``(J^T W J)^-1`` scaled by the
    residual variance ``rss / (n - k)``.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    sw = np.sqrt(weights)

    def cost_at(t):
        f, jac = fun(x, t)
        r = sw * (y - f)
        return float(r @ r), r, jac * sw[:, None]

    cost, r, jw = cost_at(theta)
    lam = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = jw.T @ r
        a = jw.T @ jw
        if not np.all(np.isfinite(a)):
            break
        step = None
        while lam < 1e16:
            damped = a + lam * np.diag(np.maximum(np.diag(a), 1e-300))
            try:
                step = np.linalg.solve(damped, g)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            new_cost, new_r, new_jw = cost_at(theta + step)
            if np.isfinite(new_cost) and new_cost <= cost:
                break
            lam *= 10
            step = None
        if step is None:
            # no downhill step at any damping: already at the minimum
            converged = cost < np.inf
            break
        theta = theta + step
        small = np.linalg.norm(step) <= xtol * (np.linalg.norm(theta) + xtol)
        flat = cost - new_cost <= 1e-15 * max(cost, 1e-300) or new_cost < 1e-28
        cost, r, jw = new_cost, new_r, new_jw
        lam = max(lam / 10, 1e-12)
        if small or (flat and np.linalg.norm(step) <= 1e-6 * (np.linalg.norm(theta) + 1e-6)):
            converged = True
            break
    a = jw.T @ jw
    if np.linalg.cond(a) > 1e14:
        raise DegenerateFitError("curvature matrix is singular; parameters are not identifiable")
    n, k = len(y), len(theta)
    dof_var = cost / (n - k) if n > k else 0.0
    cov = np.linalg.inv(a) * dof_var
    return _Solution(theta, cov, cost, converged, it)


# --- estimators -----------------------------------------------------------


class CurveModelRegressor(RegressorMixin, BaseEstimator):
    """Weighted least-squares fit of one of the named curve models.

    Parameters
    ----------
    model : {"gaussian", "exponential", "sinusoid", "gamma"}
    p0 : initial parameters, or None for a data-driven guess
    max_iter, xtol : solver limits
    """

    def __init__(self, model="gaussian", p0=None, max_iter=200, xtol=1e-9):
        self.model = model
        self.p0 = p0
        self.max_iter = max_iter
        self.xtol = xtol

    def fit(self, X, y, sample_weight=None):
        x, y, w = check_curve_arrays(X, y, sample_weight)
        fun = model_function(self.model)
        theta0 = np.asarray(self.p0, float) if self.p0 is not None else initial_guess(self.model, x, y)
        sol = damped_gauss_newton(fun, x, y, w, theta0, self.max_iter, self.xtol)
        theta = sol.theta
        if self.model == "sinusoid":
            if theta[1] < 0:
                theta = np.array([theta[0], -theta[1], theta[2] + np.pi])
            theta[2] = np.pi - np.mod(np.pi - theta[2], 2 * np.pi)
        self.params_ = theta
        self.cov_ = sol.cov
        self.stderr_ = np.sqrt(np.clip(np.diag(sol.cov), 0, None))
        self.rss_ = sol.rss
        self.converged_ = sol.converged
        self.n_iter_ = sol.n_iter
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        return model_function(self.model)(as_column(X), self.params_)[0]

    @property
    def param_names(self) -> tuple[str, ...]:
        return MODELS[self.model][1]


class GammaModelRegressor(CurveModelRegressor):
    """Three-qubit success probability vs flip probability: fits (a, b, epsilon)."""

    def __init__(self, p0=(0.5, 0.25, 0.0), max_iter=200, xtol=1e-9):
        super().__init__(model="gamma", p0=p0, max_iter=max_iter, xtol=xtol)

    # sklearn's get_params inspects __init__; keep ``model`` readable anyway
    model = "gamma"

    def fit(self, X, y, sample_weight=None):
        _check_p(as_column(X))
        return super().fit(X, y, sample_weight)


def initial_guess(model: str, x, y) -> np.ndarray:
    if model == "gamma":
        return np.array([0.5, 0.25, 0.0])
    if model == "sinusoid":
        basis = np.column_stack([np.ones_like(x), np.cos(x), np.sin(x)])
        (y0, c, s), *_ = np.linalg.lstsq(basis, y, rcond=None)
        # y0 + A cos(x + phi) = y0 + A cos(phi) cos(x) - A sin(phi) sin(x)
        return np.array([y0, np.hypot(c, s), np.arctan2(-s, c)])
    order = np.argsort(x)
    xs, ys = x[order], y[order]
    y_inf = ys[-1]
    amp = ys[0] - y_inf
    if amp == 0:
        amp = 1e-3
    target = y_inf + amp / np.e
    below = np.nonzero((ys - target) * np.sign(amp) <= 0)[0]
    tau = xs[below[0]] if below.size and xs[below[0]] > 0 else (xs[-1] - xs[0]) / 2 or 1.0
    return np.array([y_inf, amp, tau])


# --- curve-level API -------------------------------------------------------


@dataclass
class FitResult:
    model: str
    names: tuple[str, ...]
    params: np.ndarray
    stderr: np.ndarray
    rss: float
    converged: bool
    n_points: int
    extras: dict = field(default_factory=dict)

    def __getitem__(self, name: str) -> float:
        return float(self.params[self.names.index(name)])

    def error(self, name: str) -> float:
        return float(self.stderr[self.names.index(name)])

    def to_json(self) -> dict:
        out = {
            "model": self.model,
            "params": {k: float(v) for k, v in zip(self.names, self.params)},
            "stderr": {k: float(v) for k, v in zip(self.names, self.stderr)},
            "rss": float(self.rss),
            "converged": bool(self.converged),
            "n_points": int(self.n_points),
        }
        out.update(self.extras)
        return out


def _weights(curve: DecayCurve, weighted: bool) -> np.ndarray | None:
    if not weighted or np.any(curve.y_err <= 0):
        return None
    return 1.0 / curve.y_err**2


def _result(est: CurveModelRegressor, n: int) -> FitResult:
    return FitResult(est.model, est.param_names, est.params_, est.stderr_, est.rss_, est.converged_, n)


def fit_decay(curve: DecayCurve, model: str = "gaussian", p0=None, weighted: bool = True) -> FitResult:
    """Fit a gaussian, exponential or sinusoid model to a curve (at least 5 points).

    Falls back to unweighted least squares when any point has zero error
    (exact probabilities).
    """
    if model not in ("gaussian", "exponential", "sinusoid"):
        raise ValueError(f"unknown decay model {model!r}")
    if len(curve) < 5:
        raise FitError(f"need at least 5 points, got {len(curve)}")
    est = CurveModelRegressor(model, p0=p0).fit(curve.x, curve.y, _weights(curve, weighted))
    return _result(est, len(curve))


def fit_gamma_model(curve: DecayCurve, initial=(0.5, 0.25, 0.0), weighted: bool = True) -> FitResult:
    if len(curve) < 6:
        raise FitError(f"need at least 6 points, got {len(curve)}")
    if weighted and np.any(curve.y_err <= 0):
        raise FitError("weighted gamma fit needs positive y_err everywhere")
    est = GammaModelRegressor(p0=tuple(initial)).fit(curve.x, curve.y, _weights(curve, weighted))
    return _result(est, len(curve))


def bootstrap_stderr(
    curve: DecayCurve,
    model: str,
    n_resamples: int = 1000,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Parametric binomial bootstrap of parameter standard errors.

    Each resample redraws every point as Binomial(shots, fitted y) / shots
    and refits; returns the standard deviation of the refitted parameters.
    """
    rng = rng or np.random.default_rng()
    fitter = fit_gamma_model if model == "gamma" else (lambda c: fit_decay(c, model))
    base = fitter(curve)
    est = model_function(model)(curve.x, base.params)[0]
    shots = curve.shots.astype(int)
    samples = []
    for _ in range(n_resamples):
        y = rng.binomial(shots, np.clip(est, 0, 1)) / shots
        err = np.maximum(binomial_error(y, shots), 1.0 / shots)
        try:
            samples.append(fitter(DecayCurve(curve.x, y, err, curve.shots)).params)
        except FitError:
            continue
    return np.std(np.array(samples), axis=0, ddof=1)
