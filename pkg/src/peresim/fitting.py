"""Nonlinear least squares for the thermalization and contrast models.

A small damped Gauss-Newton (Levenberg-Marquardt) minimizer with a central
difference Jacobian backs two fits: the exponential relaxation of the
housing temperature over cycles, and the cosine-of-exponential drift of a
normalized interference term during that relaxation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DegenerateDataError, DomainError, FitError

_MAX_ITERATIONS = 200
_JACOBIAN_STEP = 1e-6
_GRADIENT_TOL = 1e-10
_STEP_TOL = 1e-14


@dataclass(frozen=True)
class ThermalizationFit:
    """Exponential relaxation T(k) = t0 + delta_t * exp(-kappa_th * k)."""

    t0: float
    delta_t: float
    kappa_th: float
    residual_norm: float
    parameter_uncertainties: tuple[float, float, float]


@dataclass(frozen=True)
class ContrastFit:
    """Interference drift a(k) = c_alpha * cos(dphi0 + eta * delta_t * exp(-kappa_th * k))."""

    c_alpha: float
    dphi0: float
    eta: float
    kappa_th: float
    delta_t: float
    residual_norm: float
    parameter_uncertainties: tuple[float, float, float, float]


def _numeric_jacobian(model, x, params):
    n, m = x.size, params.size
    jac = np.empty((n, m))
    for k in range(m):
        step = _JACOBIAN_STEP * max(abs(params[k]), 1.0)
        plus = params.copy()
        minus = params.copy()
        plus[k] += step
        minus[k] -= step
        jac[:, k] = (model(x, plus) - model(x, minus)) / (2.0 * step)
    return jac


def nlls_minimize(
    model: Callable[[np.ndarray, np.ndarray], np.ndarray],
    data: Sequence[tuple[float, float]],
    init: Sequence[float],
) -> tuple[np.ndarray, np.ndarray, float]:
    """Levenberg-Marquardt least squares fit of `model(x, params)` to data.

    Returns (parameters, covariance, residual_norm). The covariance is the
    Gauss-Newton estimate scaled by the residual variance at the solution.
    Accepted steps never increase the residual, so the final residual norm
    is bounded by the one at the initialization point. Raises FitError
    (carrying the best parameters seen) if the iteration budget runs out
    before the gradient or step tolerance is met.
    """
    pts = np.asarray(data, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DomainError("data must be a sequence of (x, y) pairs")
    x, y = pts[:, 0], pts[:, 1]
    params = np.asarray(init, dtype=float).copy()
    if x.size < params.size:
        raise DomainError(
            f"need at least {params.size} points to fit {params.size} parameters, got {x.size}"
        )
    if not np.all(np.isfinite(pts)):
        raise DomainError("data must be finite")

    residual = y - model(x, params)
    cost = float(residual @ residual)
    lam = 1e-3
    converged = False
    for _ in range(_MAX_ITERATIONS):
        jac = _numeric_jacobian(model, x, params)
        gradient = jac.T @ residual
        scale = max(1.0, math.sqrt(cost))
        if np.max(np.abs(gradient)) < _GRADIENT_TOL * scale:
            converged = True
            break
        jtj = jac.T @ jac
        stepped = False
        for _ in range(50):
            damped = jtj + lam * np.diag(np.clip(np.diag(jtj), 1e-30, None))
            try:
                delta = np.linalg.solve(damped, gradient)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            trial = params + delta
            trial_residual = y - model(x, trial)
            trial_cost = float(trial_residual @ trial_residual)
            if trial_cost <= cost:
                rel_step = np.max(np.abs(delta) / np.maximum(np.abs(trial), 1.0))
                params, residual, cost = trial, trial_residual, trial_cost
                lam = max(lam / 3.0, 1e-14)
                stepped = True
                if rel_step < _STEP_TOL or trial_cost == 0.0:
                    converged = True
                break
            lam *= 10.0
        if converged:
            break
        if not stepped:
            converged = True  # damping exhausted: local minimum to working precision
            break
    if not converged:
        raise FitError(
            "no convergence within the iteration budget",
            params=params,
            residual_norm=math.sqrt(cost),
        )

    jac = _numeric_jacobian(model, x, params)
    dof = x.size - params.size
    variance = cost / dof if dof > 0 else 0.0
    try:
        covariance = variance * np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        covariance = np.full((params.size, params.size), np.nan)
    covariance = 0.5 * (covariance + covariance.T)
    return params, covariance, math.sqrt(cost)


def _is_flat(y: np.ndarray) -> bool:
    return float(np.std(y)) <= 1e-12 * max(1.0, float(np.max(np.abs(y))))


def _thermalization_model(k: np.ndarray, params: np.ndarray) -> np.ndarray:
    t0, delta_t, kappa = params
    return t0 + delta_t * np.exp(-kappa * k)


def fit_thermalization(temps: Sequence[float]) -> ThermalizationFit:
    """Fit the housing-temperature relaxation over cycle index.

    Initialization: t0 from the last datum, delta_t from the first-to-last
    drop, kappa from a log-linear fit of the offset from t0.
    """
    y = np.asarray(temps, dtype=float)
    if y.size < 4:
        raise DomainError(f"need at least 4 points, got {y.size}")
    k = np.arange(y.size, dtype=float)
    if _is_flat(y):
        return ThermalizationFit(
            t0=float(y.mean()), delta_t=0.0, kappa_th=0.0,
            residual_norm=0.0, parameter_uncertainties=(0.0, 0.0, 0.0),
        )
    t0_init = float(y[-1])
    dt_init = float(y[0] - y[-1])
    offset = (y - t0_init) * math.copysign(1.0, dt_init if dt_init != 0.0 else 1.0)
    usable = offset > 0.0
    if np.count_nonzero(usable) >= 2:
        slope = np.polyfit(k[usable], np.log(offset[usable]), 1)[0]
        kappa_init = float(min(max(-slope, 1e-4), 10.0))
    else:
        kappa_init = 0.05
    params, cov, rnorm = nlls_minimize(
        _thermalization_model,
        np.column_stack([k, y]),
        [t0_init, dt_init, kappa_init],
    )
    sigmas = tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(cov))
    return ThermalizationFit(
        t0=float(params[0]),
        delta_t=float(params[1]),
        kappa_th=float(params[2]),
        residual_norm=rnorm,
        parameter_uncertainties=sigmas,
    )


def _contrast_model(delta_t: float):
    def model(k: np.ndarray, params: np.ndarray) -> np.ndarray:
        c, phi0, eta, kappa = params
        return c * np.cos(phi0 + eta * delta_t * np.exp(-kappa * k))

    return model


def _canonical_contrast(params: np.ndarray) -> np.ndarray:
    """Map equivalent solutions onto c >= 0, eta >= 0, phi0 in [0, 2*pi)."""
    c, phi0, eta, kappa = params
    if c < 0.0:
        c, phi0 = -c, phi0 + math.pi
    if eta < 0.0:
        eta, phi0 = -eta, -phi0
    phi0 = phi0 % (2.0 * math.pi)
    return np.array([c, phi0, eta, kappa])


def fit_contrast(alphas: Sequence[float], delta_t: float) -> ContrastFit:
    """Fit the interference-term drift during thermalization, delta_t held fixed.

    The cosine-of-exponential model is multimodal, so the minimizer is
    seeded from a coarse grid over the phase offset, the sign and magnitude
    of the phase-per-temperature slope, and the relaxation rate. The fitted
    parameters are reported in canonical form (nonnegative contrast and
    slope).
    """
    y = np.asarray(alphas, dtype=float)
    if y.size < 5:
        raise DomainError(f"need at least 5 points, got {y.size}")
    if delta_t == 0.0 or not math.isfinite(delta_t):
        raise DomainError("delta_t must be finite and nonzero")
    if _is_flat(y):
        raise DegenerateDataError("constant interference series: parameters unidentifiable")
    k = np.arange(y.size, dtype=float)
    model = _contrast_model(delta_t)
    c_init = float(np.max(np.abs(y)))

    best = None
    for phi0 in np.linspace(0.0, 2.0 * math.pi, 16, endpoint=False):
        for eta in (0.05, 0.1, 0.2, 0.4, -0.05, -0.1, -0.2, -0.4):
            for kappa in (0.02, 0.05):
                trial = np.array([c_init, phi0, eta, kappa])
                r = y - model(k, trial)
                cost = float(r @ r)
                if best is None or cost < best[0]:
                    best = (cost, trial)
    params, cov, rnorm = nlls_minimize(model, np.column_stack([k, y]), best[1])
    canonical = _canonical_contrast(params)
    sigmas = tuple(float(math.sqrt(max(v, 0.0))) for v in np.diag(cov))
    return ContrastFit(
        c_alpha=float(canonical[0]),
        dphi0=float(canonical[1]),
        eta=float(canonical[2]),
        kappa_th=float(canonical[3]),
        delta_t=float(delta_t),
        residual_norm=rnorm,
        parameter_uncertainties=sigmas,
    )
