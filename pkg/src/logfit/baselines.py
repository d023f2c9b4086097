"""Gradient-descent comparators for the single-sigmoid recovery problem.

Target family: g(t, a, c) = c * f(a*t - b0) with f the logistic sigmoid and a
fixed offset b0 (2.944 in the bundled scenario, which puts g(0, 2/3, 2) at
0.1).  Two continuous-time flows on the two free parameters (a, c):

- pattern flow: instantaneous error e(t) = g(t, a, c) - g(t, a*, c*) at the
  current (periodically folded) time drives -rate * e * grad g;
- batch flow: -rate * grad J with J(a, c) the integrated squared error over
  the fixed horizon, evaluated by trapezoid quadrature.

Analytic partials (df = f*(1-f)):
    dg/dc = f(a*t - b0)
    dg/da = c * t * df(a*t - b0)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.special import expit

from .integrator import DivergenceError


@dataclass(frozen=True)
class ScalarSigmoidTarget:
    """Ground-truth single sigmoid g(t) = c_true * f(alpha_true*t - b_fixed)."""

    alpha_true: float = 2.0 / 3.0
    c_true: float = 2.0
    b_fixed: float = 2.944
    horizon: float = 9.0

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if not np.isfinite(self.b_fixed):
            raise ValueError("b_fixed must be finite")

    def g(self, t, a: float, c: float):
        return c * expit(a * np.asarray(t, dtype=float) - self.b_fixed)


def pattern_gradient_rhs(
    ahat: float, chat: float, t: float, target: ScalarSigmoidTarget, rate: float
) -> tuple[float, float]:
    """Instantaneous-error gradient flow at time t.

    da = -rate * e * dg/da,  dc = -rate * e * dg/dc, with
    e(t) = g(t, ahat, chat) - g(t, alpha_true, c_true).  dg/da carries a
    factor t, so da vanishes at t = 0 whatever the error.
    """
    f = float(expit(ahat * t - target.b_fixed))
    e = chat * f - float(target.g(t, target.alpha_true, target.c_true))
    dg_da = chat * t * f * (1.0 - f)
    dg_dc = f
    return -rate * e * dg_da, -rate * e * dg_dc


@njit(cache=True)
def _batch_grad(ahat, chat, g_star, b0, t_end, quad_n):
    """Trapezoid J and grad J on quad_n+1 uniform nodes; g_star holds the
    target values at the nodes."""
    h = t_end / quad_n
    J = 0.0
    gJa = 0.0
    gJc = 0.0
    for k in range(quad_n + 1):
        t = k * h
        w = 0.5 if (k == 0 or k == quad_n) else 1.0
        f = 1.0 / (1.0 + np.exp(-(ahat * t - b0)))
        r = chat * f - g_star[k]
        J += w * r * r
        gJa += w * 2.0 * r * chat * t * f * (1.0 - f)
        gJc += w * 2.0 * r * f
    return J * h, gJa * h, gJc * h


def _target_nodes(target: ScalarSigmoidTarget, quad_n: int) -> np.ndarray:
    t = np.linspace(0.0, target.horizon, quad_n + 1)
    return np.asarray(target.g(t, target.alpha_true, target.c_true), dtype=float)


def batch_cost(ahat: float, chat: float, target: ScalarSigmoidTarget, quad_n: int = 900) -> float:
    """J(a, c) = integral over [0, horizon] of (g(t,a,c) - g(t,a*,c*))^2 dt."""
    J, _, _ = _batch_grad(
        float(ahat), float(chat), _target_nodes(target, quad_n), target.b_fixed,
        target.horizon, quad_n,
    )
    return float(J)


def batch_gradient_rhs(
    ahat: float, chat: float, target: ScalarSigmoidTarget, rate: float, quad_n: int = 900
) -> tuple[float, float]:
    """Gradient flow -rate * grad J of the quadrature cost (quad_n >= 2)."""
    if quad_n < 2:
        raise ValueError(f"quad_n must be >= 2, got {quad_n}")
    _, gJa, gJc = _batch_grad(
        float(ahat), float(chat), _target_nodes(target, quad_n), target.b_fixed,
        target.horizon, quad_n,
    )
    return -rate * float(gJa), -rate * float(gJc)


@njit(cache=True)
def _flow_loop(a0, c0, a_star, c_star, b0, horizon, g_star, rate, dt, n_steps,
               stride, pattern, quad_n, out):
    """Euler steps of either flow; records every `stride` steps plus the final
    point.  Returns (rows written, divergence step or -1)."""
    a = a0
    c = c0
    irow = 0
    for k in range(n_steps):
        if k % stride == 0:
            out[irow, 0] = k * dt
            out[irow, 1] = a
            out[irow, 2] = c
            irow += 1
        if pattern:
            t = (k * dt) % horizon
            f = 1.0 / (1.0 + np.exp(-(a * t - b0)))
            fs = 1.0 / (1.0 + np.exp(-(a_star * t - b0)))
            e = c * f - c_star * fs
            da = -rate * e * c * t * f * (1.0 - f)
            dc = -rate * e * f
        else:
            _, gJa, gJc = _batch_grad(a, c, g_star, b0, horizon, quad_n)
            da = -rate * gJa
            dc = -rate * gJc
        a = a + dt * da
        c = c + dt * dc
        if not (np.isfinite(a) and np.isfinite(c)):
            return irow, k + 1
    out[irow, 0] = n_steps * dt
    out[irow, 1] = a
    out[irow, 2] = c
    return irow + 1, -1


@dataclass(frozen=True)
class BaselineRun:
    """Decimated (t, a, c) path of one flow plus the terminal quadrature cost."""

    t: np.ndarray
    ahat: np.ndarray
    chat: np.ndarray
    J_final: float
    diverged: bool


def run_baseline(
    flow: str,
    init: tuple[float, float],
    rate: float,
    t_end: float,
    dt: float | None = None,
    *,
    target: ScalarSigmoidTarget | None = None,
    quad_n: int = 900,
    record_stride: int = 100,
    raise_on_divergence: bool = True,
) -> BaselineRun:
    """Euler-integrate the chosen flow ('pattern' or 'batch') from init.

    The pattern flow folds the running clock into [0, horizon) periodically,
    replaying the target presentation.  Default steps: 1e-3 for the pattern
    flow; 1e-2 for the batch flow, whose right-hand side is a smooth
    quadrature with modest curvature, so the coarser step changes terminal
    points only marginally (and cuts the 900-node quadrature count tenfold).
    """
    if flow not in ("pattern", "batch"):
        raise ValueError(f"flow must be 'pattern' or 'batch', got {flow!r}")
    if target is None:
        target = ScalarSigmoidTarget()
    if dt is None:
        dt = 1e-3 if flow == "pattern" else 1e-2
    n_steps = int(round(t_end / dt))
    out = np.empty((n_steps // record_stride + 2, 3))
    nrows, div_step = _flow_loop(
        float(init[0]), float(init[1]),
        target.alpha_true, target.c_true, target.b_fixed, target.horizon,
        _target_nodes(target, quad_n),
        rate, dt, n_steps, record_stride, flow == "pattern", quad_n, out,
    )
    diverged = div_step >= 0
    if diverged and raise_on_divergence:
        raise DivergenceError(div_step * dt, detail=f"{flow} flow")
    rows = out[:nrows]
    J = batch_cost(float(rows[-1, 1]), float(rows[-1, 2]), target, quad_n)
    return BaselineRun(
        t=rows[:, 0].copy(), ahat=rows[:, 1].copy(), chat=rows[:, 2].copy(),
        J_final=J, diverged=diverged,
    )
